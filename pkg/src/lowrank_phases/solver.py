"""Vanilla gradient descent from scaled random initialization, with recording.

One trajectory is strictly sequential; every recorded iteration carries the
full diagnostic row (loss, test error, singular values, subspace angles,
signal/noise statistics).  Nothing here mutates the problem instance, so
many trajectories can run concurrently against one instance.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics, sensing
from .kernels import apply_kernel
from .util import random_orthonormal

CSV_COLUMNS = (
    "t",
    "loss",
    "test_error",
    "test_error_rel",
    "sigma_rstar",
    "sigma_rstar_plus1",
    "spec_norm",
    "angle_L_Lt",
    "angle_X_Lt",
    "signal_sigma_min",
    "noise_spec",
    "angle_X_signal",
    "sigma_min_VXU",
)


@dataclass(frozen=True)
class SolverConfig:
    r: int
    alpha: float
    mu: float = 0.25
    init_kind: str = "gaussian_iid"  # or "orthonormal" (requires r == n)
    max_iters: int = 1000
    record_stride: int = 1
    stop_loss: Optional[float] = None
    stop_test_error: Optional[float] = None  # threshold on relative test error
    seed: int = 0

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.mu < 0:
            raise ValueError("mu must be >= 0")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.init_kind not in ("gaussian_iid", "orthonormal"):
            raise ValueError(f"unknown init_kind {self.init_kind!r}")


def init_factor(cfg, n):
    """Initial factor U0 = alpha * U.

    gaussian_iid: entries of U iid normal with standard deviation 1/sqrt(r).
    orthonormal: U orthogonal (requires r == n), so every singular value of
    U0 equals alpha.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.init_kind == "gaussian_iid":
        U = rng.standard_normal((n, cfg.r)) / math.sqrt(cfg.r)
    else:
        if cfg.r != n:
            raise ValueError(f"orthonormal init requires r == n, got r={cfg.r}, n={n}")
        U = random_orthonormal(n, n, rng)
    return cfg.alpha * U


def gd_step(inst, U, mu):
    """One update U - mu * grad(U); no momentum, no normalization."""
    U = np.asarray(U, dtype=float)
    P = U @ U.T
    pred = apply_kernel(inst.op.mats2d, np.ascontiguousarray(P.ravel()), inst.op.scale)
    S = sensing.apply_adjoint(inst.op, inst.y - pred)
    out = U + mu * (S @ U)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("gradient step produced non-finite entries")
    return out


@dataclass
class TrajectoryRecord:
    """Diagnostics for all recorded iterations of one run."""

    iterations: np.ndarray
    loss: np.ndarray
    test_error: np.ndarray
    test_error_rel: np.ndarray
    sigma_rstar: np.ndarray
    sigma_rstar_plus1: np.ndarray
    spec_norm: np.ndarray
    angle_L_Lt: np.ndarray
    angle_X_Lt: np.ndarray
    signal_sigma_min: np.ndarray
    noise_spec: np.ndarray
    angle_X_signal: np.ndarray
    sigma_min_VXU: np.ndarray
    stop_reason: str
    diverged: bool
    config: SolverConfig
    factors: Optional[list] = field(default=None, repr=False)

    def __len__(self):
        return len(self.iterations)

    def column(self, name):
        return getattr(self, name)

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for i in range(len(self)):
                cells = [str(int(self.iterations[i]))]
                for name in CSV_COLUMNS[1:]:
                    cells.append(format(float(getattr(self, name)[i]), ".16e"))
                fh.write(",".join(cells) + "\n")

    def summary(self):
        last = len(self) - 1
        return {
            "iterations": int(self.iterations[last]) if len(self) else 0,
            "rows": len(self),
            "final_loss": float(self.loss[last]),
            "final_test_error": float(self.test_error[last]),
            "final_test_error_rel": float(self.test_error_rel[last]),
            "stop_reason": self.stop_reason,
            "diverged": self.diverged,
        }


def _diagnostic_row(inst, U, lval, test_err, xxt_norm):
    truth = inst.truth
    r_star = truth.r_star
    r = U.shape[1]
    svals = np.linalg.svd(U, compute_uv=False)
    sigma_rstar = float(svals[r_star - 1]) if r >= r_star else 0.0
    sigma_rstar_p1 = float(svals[r_star]) if len(svals) > r_star else 0.0
    spec_norm = float(svals[0])
    k = min(r_star, r)
    V_Lt = diagnostics.top_subspace(U, k) if spec_norm > 0 else np.zeros((U.shape[0], k))
    if spec_norm > 0:
        angle_L = diagnostics.principal_angle(inst.V_L, V_Lt)
        angle_X = diagnostics.principal_angle(truth.V_X, V_Lt)
    else:
        angle_L = 1.0
        angle_X = 1.0
    if r >= r_star:
        split = diagnostics.signal_noise_decompose(truth, U)
        sig_min = split.signal_sigma_min
        noise_spec = split.noise_spec
        angle_sig = split.angle_X_signal
        sigma_min_vxu = split.sigma_min_VXU
    else:
        # narrow factors cannot carry a full-rank signal part
        sig_min = float(svals[-1])
        noise_spec = 0.0
        angle_sig = angle_X
        sigma_min_vxu = 0.0
    return (
        lval,
        test_err,
        test_err / xxt_norm,
        sigma_rstar,
        sigma_rstar_p1,
        spec_norm,
        angle_L,
        angle_X,
        sig_min,
        noise_spec,
        angle_sig,
        sigma_min_vxu,
    )


def run_gd(inst, cfg, U0=None, keep_factors=False):
    """Iterate gradient descent, recording diagnostics every record_stride
    iterations plus the final iterate.

    Stops at max_iters, when the training loss reaches stop_loss, or when
    the relative test error reaches stop_test_error.  Any non-finite iterate
    aborts the run with the last finite iterate kept and `diverged` set.
    """
    if U0 is None:
        U = init_factor(cfg, inst.n)
    else:
        U = np.array(U0, dtype=float, copy=True)
        if U.shape != (inst.n, cfg.r):
            raise ValueError(f"U0 shape {U.shape} does not match (n, r)=({inst.n}, {cfg.r})")
    xxt = inst.XXt
    xxt_norm = float(np.linalg.norm(xxt))
    mats2d = inst.op.mats2d
    scale = inst.op.scale
    y = inst.y

    rows = []
    its = []
    factors = [] if keep_factors else None
    stop_reason = "max_iters"
    diverged = False
    t = 0
    last_recorded_t = -1
    last_finite = None  # (t, U) of the newest finite iterate
    while True:
        finite = bool(np.all(np.isfinite(U)))
        if finite:
            # overflow here is the divergence signal itself, not an error
            with np.errstate(over="ignore", invalid="ignore"):
                P = U @ U.T
                pred = apply_kernel(mats2d, np.ascontiguousarray(P.ravel()), scale)
                resid = y - pred
                lval = 0.25 * float(resid @ resid)
            finite = bool(np.isfinite(lval))
        if not finite:
            diverged = True
            stop_reason = "diverged"
            break
        last_finite = (t, U)
        need_test_err = cfg.stop_test_error is not None or t % cfg.record_stride == 0
        test_err = float(np.linalg.norm(P - xxt)) if need_test_err else None
        if t % cfg.record_stride == 0:
            rows.append(_diagnostic_row(inst, U, lval, test_err, xxt_norm))
            its.append(t)
            last_recorded_t = t
            if keep_factors:
                factors.append(U.copy())
        if cfg.stop_loss is not None and lval <= cfg.stop_loss:
            stop_reason = "stop_loss"
            break
        if cfg.stop_test_error is not None and test_err / xxt_norm <= cfg.stop_test_error:
            stop_reason = "stop_test_error"
            break
        if t >= cfg.max_iters:
            stop_reason = "max_iters"
            break
        S = sensing.apply_adjoint(inst.op, resid)
        U = U + cfg.mu * (S @ U)
        t += 1
    if last_finite is not None and last_recorded_t != last_finite[0]:
        t_fin, U_fin = last_finite
        P = U_fin @ U_fin.T
        pred = apply_kernel(mats2d, np.ascontiguousarray(P.ravel()), scale)
        resid = y - pred
        lval = 0.25 * float(resid @ resid)
        test_err = float(np.linalg.norm(P - xxt))
        rows.append(_diagnostic_row(inst, U_fin, lval, test_err, xxt_norm))
        its.append(t_fin)
        if keep_factors:
            factors.append(U_fin.copy())

    cols = np.array(rows, dtype=float) if rows else np.zeros((0, len(CSV_COLUMNS) - 1))
    return TrajectoryRecord(
        iterations=np.array(its, dtype=int),
        loss=cols[:, 0],
        test_error=cols[:, 1],
        test_error_rel=cols[:, 2],
        sigma_rstar=cols[:, 3],
        sigma_rstar_plus1=cols[:, 4],
        spec_norm=cols[:, 5],
        angle_L_Lt=cols[:, 6],
        angle_X_Lt=cols[:, 7],
        signal_sigma_min=cols[:, 8],
        noise_spec=cols[:, 9],
        angle_X_signal=cols[:, 10],
        sigma_min_VXU=cols[:, 11],
        stop_reason=stop_reason,
        diverged=diverged,
        config=cfg,
        factors=factors,
    )
