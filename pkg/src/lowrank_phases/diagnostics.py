"""Signal/noise decomposition, subspace angles, and phase-boundary detection.

The iterate U splits along the right singular vectors W of V_X^T U into a
rank-r_star signal part U W (whose span tracks the planted column space) and
a complement U W_perp whose columns are exactly orthogonal to span(X).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .util import fix_signs

RANK_DEFICIENCY_RTOL = 1e-13


@dataclass(frozen=True)
class SignalNoiseSplit:
    """One iterate's split U = (U W) W^T + (U W_perp) W_perp^T."""

    W: np.ndarray  # r x r_star, orthonormal columns
    W_perp: np.ndarray  # r x (r - r_star), orthonormal complement
    signal: np.ndarray  # n x r_star
    noise: np.ndarray  # n x (r - r_star)
    signal_sigma_min: float
    noise_spec: float
    angle_X_signal: float
    sigma_min_VXU: float
    rank_deficient: bool


def orthonormal_basis(A):
    """Orthonormal basis of the column space, one vector per column of A."""
    u, _, _ = np.linalg.svd(A, full_matrices=False)
    return fix_signs(u)


def principal_angle(V1, V2):
    """Largest principal-angle sine between two column spans.

    Computed as the spectral norm of (Id - V1 V1^T) V2; when both inputs
    have the same number of columns this equals the spectral norm of the
    projector difference.  Inputs must be orthonormal to 1e-8.
    """
    V1 = np.asarray(V1, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    for name, V in (("V1", V1), ("V2", V2)):
        gram = V.T @ V
        if np.linalg.norm(gram - np.eye(V.shape[1])) > 1e-8:
            raise ValueError(f"{name} is not orthonormal")
    resid = V2 - V1 @ (V1.T @ V2)
    if resid.size == 0:
        return 0.0
    return float(np.linalg.norm(resid, 2))


def top_subspace(U, k):
    """Dominant k-dimensional left singular subspace of U, deterministic signs."""
    U = np.asarray(U, dtype=float)
    if not 1 <= k <= min(U.shape):
        raise ValueError(f"k must be in [1, {min(U.shape)}], got {k}")
    u, _, _ = np.linalg.svd(U, full_matrices=False)
    return fix_signs(u[:, :k])


def signal_noise_decompose(truth, U):
    """Split U along the SVD of V_X^T U into signal and noise parts.

    Requires U to have at least r_star columns.  When V_X^T U is (nearly)
    rank deficient the split is still returned with `rank_deficient` set;
    W is then not unique.
    """
    U = np.asarray(U, dtype=float)
    n, r = U.shape
    r_star = truth.r_star
    if n != truth.n:
        raise ValueError(f"factor has {n} rows, expected {truth.n}")
    if r < r_star:
        raise ValueError(f"factor must have at least r_star={r_star} columns, got {r}")
    B = truth.V_X.T @ U  # r_star x r
    _, svals, Wt_full = np.linalg.svd(B, full_matrices=True)
    Wfull = Wt_full.T  # r x r
    W = np.ascontiguousarray(Wfull[:, :r_star])
    W_perp = np.ascontiguousarray(Wfull[:, r_star:])
    # scale against the factor itself so an all-noise B (columns orthogonal
    # to the planted span) is flagged even though its sigma ratios look fine
    scale = max(float(svals[0]) if svals.size else 0.0, float(np.linalg.norm(U)))
    rank_deficient = bool(scale == 0.0 or svals[-1] < RANK_DEFICIENCY_RTOL * scale)
    signal = U @ W
    noise = U @ W_perp
    sig_svals = np.linalg.svd(signal, compute_uv=False)
    signal_sigma_min = float(sig_svals[-1]) if sig_svals.size else 0.0
    noise_spec = float(np.linalg.norm(noise, 2)) if noise.size else 0.0
    v_signal = orthonormal_basis(signal)
    angle = principal_angle(truth.V_X, v_signal)
    return SignalNoiseSplit(
        W=W,
        W_perp=W_perp,
        signal=signal,
        noise=noise,
        signal_sigma_min=signal_sigma_min,
        noise_spec=noise_spec,
        angle_X_signal=angle,
        sigma_min_VXU=float(svals[-1]) if svals.size else 0.0,
        rank_deficient=rank_deficient,
    )


@dataclass(frozen=True)
class PhaseReport:
    """Detected boundaries of the three trajectory regimes.

    `t_spectral_end` is the first recorded iteration whose alignment angle
    to the dominant measured subspace drops to the threshold; `t1` the first
    subsequent iteration where sigma_min(V_X^T U) clears sigma_min(X)/sqrt(10)
    (the saddle-avoidance exit rule); `t_hat` the first subsequent iteration
    with relative test error at the final threshold.  Boundaries are searched
    in that order and reported as None when never attained.
    """

    t_spectral_end: Optional[int]
    t1: Optional[int]
    t_hat: Optional[int]
    angle_threshold: float
    final_threshold: float

    @property
    def phase_lengths(self):
        if None in (self.t_spectral_end, self.t1, self.t_hat):
            return None
        return (
            self.t_spectral_end,
            self.t1 - self.t_spectral_end,
            self.t_hat - self.t1,
        )

    def to_dict(self):
        lengths = self.phase_lengths
        return {
            "t_spectral_end": self.t_spectral_end,
            "t1": self.t1,
            "t_hat": self.t_hat,
            "phase_lengths": list(lengths) if lengths is not None else None,
            "angle_threshold": self.angle_threshold,
            "final_threshold": self.final_threshold,
        }


def _first_at_or_after(iterations, mask, start_t):
    for t, ok in zip(iterations, mask):
        if t >= start_t and ok:
            return int(t)
    return None


def detect_phases(traj, truth, angle_threshold=0.1, final_threshold=1e-3):
    """Scan a recorded trajectory for the three phase boundaries."""
    its = traj.iterations
    sigma_gate = truth.sigma_min / np.sqrt(10.0)
    t_spec = _first_at_or_after(its, traj.angle_L_Lt <= angle_threshold, its[0] if len(its) else 0)
    t1 = _first_at_or_after(its, traj.sigma_min_VXU >= sigma_gate, t_spec if t_spec is not None else 0)
    t_hat = _first_at_or_after(its, traj.test_error_rel <= final_threshold, t1 if t1 is not None else 0)
    return PhaseReport(
        t_spectral_end=t_spec,
        t1=t1,
        t_hat=t_hat,
        angle_threshold=angle_threshold,
        final_threshold=final_threshold,
    )
