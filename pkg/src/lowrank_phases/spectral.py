"""Power-method surrogate of the early iterations and its validity window.

The surrogate applies (Id + mu*M) repeatedly to the shared initialization,
with M = adjoint(forward(X X^T)).  Its distance to the true gradient-descent
iterate stays below an explicit cubic-in-alpha envelope until the empirical
breakdown time, defined as the first step where the gap exceeds the
surrogate's own norm.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import diagnostics, solver
from .util import eigh_descending

OVERFLOW_GUARD = 1e300

# The breakdown rule compares the GD-to-surrogate gap against the surrogate
# norm.  Once the surrogate outgrows the bounded GD iterate the two norms
# agree asymptotically but the strict inequality stays a hair below firing,
# so "exceeds" is implemented as "reaches within this relative tolerance".
# The saturation is steep (roughly one decade of tolerance per ten steps),
# so the detected step is insensitive to the exact value.
DEFAULT_BREAKDOWN_RTOL = 1e-4


def spectral_subspace(M_sym, k):
    """Top-k eigenvectors of a symmetric matrix, descending, deterministic signs."""
    M_sym = np.asarray(M_sym, dtype=float)
    n = M_sym.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    _, vecs = eigh_descending(M_sym)
    return np.ascontiguousarray(vecs[:, :k])


@dataclass
class SurrogateTrajectory:
    """Recorded surrogate iterates; `truncated_at` marks double overflow."""

    iterations: np.ndarray
    angle_L_Ltilde: np.ndarray
    sigma_rstar_Z: np.ndarray  # (1 + mu*lambda_rstar)^t
    sigma_rstar1_Z: np.ndarray  # (1 + mu*lambda_rstar+1)^t
    norms: np.ndarray  # spectral norm of the surrogate iterate
    factors: list
    truncated_at: Optional[int]


def surrogate_trajectory(inst, U0, mu, t_max):
    """Iterate the surrogate to t_max (inclusive), never forming matrix powers."""
    U0 = np.asarray(U0, dtype=float)
    if U0.shape[0] != inst.n:
        raise ValueError(f"U0 must have {inst.n} rows")
    if not np.all(np.isfinite(U0)):
        raise ValueError("U0 must be finite")
    r_star = inst.r_star
    k = min(r_star, U0.shape[1])
    lam_r = float(inst.M_eigs[r_star - 1])
    lam_r1 = float(inst.M_eigs[r_star]) if r_star < inst.n else 0.0
    M = inst.M

    Ut = U0.copy()
    its, angles, zr, zr1, norms, factors = [], [], [], [], [], []
    truncated_at = None
    for t in range(t_max + 1):
        nrm = float(np.linalg.norm(Ut, 2))
        if not np.isfinite(nrm) or nrm > OVERFLOW_GUARD:
            truncated_at = t
            break
        V_Lt = diagnostics.top_subspace(Ut, k) if nrm > 0 else np.zeros((inst.n, k))
        angle = diagnostics.principal_angle(inst.V_L, V_Lt) if nrm > 0 else 1.0
        its.append(t)
        angles.append(angle)
        zr.append((1.0 + mu * lam_r) ** t)
        zr1.append((1.0 + mu * lam_r1) ** t)
        norms.append(nrm)
        factors.append(Ut.copy())
        if t < t_max:
            Ut = Ut + mu * (M @ Ut)
    return SurrogateTrajectory(
        iterations=np.array(its, dtype=int),
        angle_L_Ltilde=np.array(angles),
        sigma_rstar_Z=np.array(zr),
        sigma_rstar1_Z=np.array(zr1),
        norms=np.array(norms),
        factors=factors,
        truncated_at=truncated_at,
    )


@dataclass
class SpectralComparison:
    """Gradient descent and surrogate run from one shared initialization."""

    iterations: np.ndarray
    theta_gd: np.ndarray
    theta_p: np.ndarray
    err_norm: np.ndarray  # spectral norm of (GD iterate - surrogate iterate)
    utilde_norm: np.ndarray
    U0: np.ndarray
    gd: solver.TrajectoryRecord
    surrogate: SurrogateTrajectory

    def t_star_empirical_at(self, breakdown_rtol=DEFAULT_BREAKDOWN_RTOL):
        """First i with err_norm[i-1] exceeding utilde_norm[i-1] (up to the
        numerical-equality guard); None if never within the horizon."""
        exceeded = np.nonzero(self.err_norm >= (1.0 - breakdown_rtol) * self.utilde_norm)[0]
        exceeded = exceeded[self.utilde_norm[exceeded] > 0]
        if len(exceeded) == 0:
            return None
        return int(self.iterations[exceeded[0]]) + 1

    @property
    def t_star_empirical(self):
        return self.t_star_empirical_at()

    def to_csv(self, path, err_bound=None):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,theta_gd,theta_p,err_norm,err_bound\n")
            for i, t in enumerate(self.iterations):
                bound = err_bound[i] if err_bound is not None else float("nan")
                cells = [str(int(t))] + [
                    format(float(v), ".16e")
                    for v in (self.theta_gd[i], self.theta_p[i], self.err_norm[i], bound)
                ]
                fh.write(",".join(cells) + "\n")


def compare_gd_power(inst, cfg, t_max):
    """Run GD and the surrogate from the same U0 and pair their angle series."""
    U0 = solver.init_factor(cfg, inst.n)
    gd_cfg = replace(
        cfg, max_iters=t_max, record_stride=1, stop_loss=None, stop_test_error=None
    )
    gd = solver.run_gd(inst, gd_cfg, U0=U0, keep_factors=True)
    sur = surrogate_trajectory(inst, U0, cfg.mu, t_max)
    k = min(len(gd.iterations), len(sur.iterations))
    err = np.array(
        [float(np.linalg.norm(gd.factors[i] - sur.factors[i], 2)) for i in range(k)]
    )
    return SpectralComparison(
        iterations=gd.iterations[:k],
        theta_gd=gd.angle_L_Lt[:k],
        theta_p=sur.angle_L_Ltilde[:k],
        err_norm=err,
        utilde_norm=sur.norms[:k],
        U0=U0,
        gd=gd,
        surrogate=sur,
    )


@dataclass
class SpectralPhaseBound:
    """Closed-form floor on the surrogate validity window plus the per-step
    error envelope, evaluated with a sampled isometry estimate."""

    t_star_lower: int
    t_star_empirical: Optional[int]
    E_bound: np.ndarray
    delta1_hat: float
    log_argument_nonpositive: bool

    def to_dict(self):
        return {
            "t_star_lower": self.t_star_lower,
            "t_star_empirical": self.t_star_empirical,
            "delta1_hat": self.delta1_hat,
            "log_argument_nonpositive": self.log_argument_nonpositive,
        }


def error_bound_series(inst, U0, alpha, mu, delta1_hat, t_grid):
    """Envelope (4/lam1) * alpha^3 * min(r, n) * (1 + delta1) *
    (1 + mu*lam1)^(3t) * ||U||^3, evaluated in log space."""
    lam1 = inst.lambda1
    r_eff = min(U0.shape[1], inst.n)
    u_norm = float(np.linalg.norm(U0, 2)) / alpha
    log_c = (
        math.log(4.0 / lam1)
        + 3.0 * math.log(alpha)
        + math.log(r_eff)
        + math.log1p(delta1_hat)
        + 3.0 * math.log(u_norm)
    )
    log_growth = 3.0 * math.log1p(mu * lam1)
    with np.errstate(over="ignore"):
        return np.exp(log_c + log_growth * np.asarray(t_grid, dtype=float))


def spectral_phase_bounds(inst, cfg, delta1_hat, comparison):
    """Evaluate the validity-window floor and the error envelope for a pair
    of trajectories sharing comparison.U0."""
    if delta1_hat < 0:
        raise ValueError("delta1_hat must be >= 0")
    alpha = cfg.alpha
    mu = cfg.mu
    U0 = comparison.U0
    lam1 = inst.lambda1
    r_eff = min(U0.shape[1], inst.n)
    u_norm = float(np.linalg.norm(U0, 2)) / alpha
    v1 = inst.M_vecs[:, 0]
    u0_v1 = float(np.linalg.norm(U0.T @ v1))
    argument = (
        lam1
        / (4.0 * alpha**2 * (1.0 + delta1_hat) * u_norm**3)
        * (u0_v1 / (alpha * r_eff))
    )
    nonpositive = argument <= 1.0
    if argument <= 0:
        t_lower = 0
    else:
        t_lower = max(0, math.floor(math.log(argument) / (2.0 * math.log1p(mu * lam1))))
    bound = error_bound_series(inst, U0, alpha, mu, delta1_hat, comparison.iterations)
    return SpectralPhaseBound(
        t_star_lower=int(t_lower),
        t_star_empirical=comparison.t_star_empirical,
        E_bound=bound,
        delta1_hat=float(delta1_hat),
        log_argument_nonpositive=bool(nonpositive),
    )
