"""Runtime monitors for the trajectory inequalities, gated by their
numerically-evaluated preconditions.

Each monitor checks one inequality along a recorded run.  A violation is
reported only when every stated precondition held at that step; otherwise
the step is counted not-applicable.  The unspecified small constants of the
underlying analysis collapse into one configurable gate constant `c_small`,
so with the default gates several monitors are conservative: they simply
report not-applicable on steps (or whole runs) outside their regime.
Monitors never feed back into the solver; they replay recorded factors.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import diagnostics, sensing

TRAJECTORY_MONITORS = (
    "sigma_growth",
    "noise_recursion",
    "angle_recursion",
    "norm_control",
    "local_contraction",
    "error_split",
    "svd_closeness",
)
ALL_MONITORS = TRAJECTORY_MONITORS + ("weyl_consequence", "perturbation")

_RTOL = 1e-10


class MonitorViolation(AssertionError):
    pass


@dataclass(frozen=True)
class MonitorConfig:
    enabled: tuple = ALL_MONITORS
    c_small: float = 0.01
    delta_hat: Optional[float] = None  # sampled isometry estimate, echoed in reports
    report_mode: str = "log_only"  # or "fail_on_violation"

    def __post_init__(self):
        if self.c_small <= 0:
            raise ValueError("c_small must be > 0")
        if self.report_mode not in ("log_only", "fail_on_violation"):
            raise ValueError(f"unknown report_mode {self.report_mode!r}")


@dataclass
class MonitorCheck:
    lemma: str
    t: Optional[int]
    precondition_satisfied: bool
    inequality_satisfied: Optional[bool]  # None when not applicable
    lhs: Optional[float]
    rhs: Optional[float]
    gates: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lemma": self.lemma,
            "t": self.t,
            "precondition_satisfied": self.precondition_satisfied,
            "inequality_satisfied": self.inequality_satisfied,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "gates": self.gates,
            "details": self.details,
        }


@dataclass
class MonitorReport:
    checks: list
    config: MonitorConfig

    def summary(self):
        out = {}
        for c in self.checks:
            s = out.setdefault(
                c.lemma, {"checked": 0, "holds": 0, "violated": 0, "not_applicable": 0}
            )
            if c.inequality_satisfied is None:
                s["not_applicable"] += 1
            else:
                s["checked"] += 1
                s["holds" if c.inequality_satisfied else "violated"] += 1
        return out

    @property
    def violations(self):
        return [c for c in self.checks if c.inequality_satisfied is False]

    def to_jsonl(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.checks:
                fh.write(json.dumps(c.to_dict()) + "\n")

    def summary_dict(self):
        return {
            "c_small": self.config.c_small,
            "delta_hat": self.config.delta_hat,
            "total_violations": len(self.violations),
            "per_lemma": self.summary(),
        }


def _leq(a, b):
    return a <= b + _RTOL * max(1.0, abs(a), abs(b))


def _geq(a, b):
    return a >= b - _RTOL * max(1.0, abs(a), abs(b))


def _gate(gates, name, value, bound, ok=None):
    ok = _leq(value, bound) if ok is None else bool(ok)
    gates[name] = [float(value), float(bound), ok]
    return ok


class StepContext:
    """Shared per-step quantities so monitors do not recompute deviations."""

    def __init__(self, inst, U_t, U_next=None):
        truth = inst.truth
        self.inst = inst
        self.U_t = U_t
        self.U_next = U_next
        self.norm_U = float(np.linalg.norm(U_t, 2))
        self.norm_X = truth.spec_norm
        self.sigmin_X = truth.sigma_min
        self.kappa = truth.kappa
        self.split_t = (
            diagnostics.signal_noise_decompose(truth, U_t) if U_t.shape[1] >= truth.r_star else None
        )
        self.split_next = (
            diagnostics.signal_noise_decompose(truth, U_next)
            if U_next is not None and U_next.shape[1] >= truth.r_star
            else None
        )
        err = inst.XXt - U_t @ U_t.T
        self.err_spec = float(np.linalg.norm(err, 2))
        self.err_fro = float(np.linalg.norm(err))
        dev_mat = err - sensing.apply_normal(inst.op, err)
        self.dev_spec = float(np.linalg.norm(dev_mat, 2))
        self.dev_fro = float(np.linalg.norm(dev_mat))
        self.vx_err_fro = float(np.linalg.norm(truth.V_X.T @ err))
        self._err = err

    def noise_gram_fro(self):
        noise = self.split_t.noise
        if noise.size == 0:
            return 0.0
        return float(np.linalg.norm(noise @ noise.T))

    def vx_err_next_fro(self):
        err = self.inst.XXt - self.U_next @ self.U_next.T
        return float(np.linalg.norm(self.inst.truth.V_X.T @ err))


def _na(lemma, t, gates, details=None):
    return MonitorCheck(
        lemma=lemma,
        t=t,
        precondition_satisfied=False,
        inequality_satisfied=None,
        lhs=None,
        rhs=None,
        gates=gates,
        details=details or {},
    )


def _checked(lemma, t, lhs, rhs, ok, gates, details=None):
    return MonitorCheck(
        lemma=lemma,
        t=t,
        precondition_satisfied=True,
        inequality_satisfied=bool(ok),
        lhs=float(lhs),
        rhs=float(rhs),
        gates=gates,
        details=details or {},
    )


def check_sigma_growth(ctx, mu, c_small, t=None):
    """Per-step growth floor for sigma_min(V_X^T U)."""
    g = {}
    pre = _gate(g, "norm", ctx.norm_U, 3.0 * ctx.norm_X)
    pre &= _gate(g, "angle", ctx.split_t.angle_X_signal, c_small / ctx.kappa)
    pre &= _gate(g, "deviation", ctx.dev_spec, c_small * ctx.sigmin_X**2)
    pre &= _gate(g, "full_rank", 1.0 if ctx.split_t.rank_deficient else 0.0, 0.0,
                 ok=not ctx.split_t.rank_deficient)
    if not pre:
        return _na("sigma_growth", t, g)
    s = ctx.split_t.sigma_min_VXU
    lhs = ctx.split_next.sigma_min_VXU
    rhs = s * (1.0 + 0.25 * mu * ctx.sigmin_X**2 - mu * s**2)
    return _checked("sigma_growth", t, lhs, rhs, _geq(lhs, rhs), g)


def check_noise_recursion(ctx, mu, c_small, t=None):
    """Per-step multiplicative bound on the noise-part spectral norm."""
    g = {}
    if ctx.split_t.W_perp.shape[1] == 0:
        return _na("noise_recursion", t, {"has_noise_columns": [0.0, 1.0, False]})
    pre = _gate(g, "norm", ctx.norm_U, 3.0 * ctx.norm_X)
    pre &= _gate(g, "angle", ctx.split_t.angle_X_signal, c_small / ctx.kappa)
    mu_cap = c_small * min(
        1.0 / ctx.norm_X**2, 1.0 / ctx.dev_spec if ctx.dev_spec > 0 else math.inf
    )
    pre &= _gate(g, "mu", mu, mu_cap)
    C = ctx.inst.truth.V_X.T @ ctx.U_next @ ctx.split_t.W
    svals = np.linalg.svd(C, compute_uv=False)
    full_rank = bool(svals[-1] > 1e-13 * max(svals[0], 1e-300))
    pre &= _gate(g, "next_full_rank", 0.0 if full_rank else 1.0, 0.0, ok=full_rank)
    if not pre:
        return _na("noise_recursion", t, g)
    noise = ctx.split_t.noise_spec
    lhs = ctx.split_next.noise_spec
    rhs = (
        1.0
        - 0.5 * mu * noise**2
        + 9.0 * mu * ctx.split_t.angle_X_signal * ctx.norm_X**2
        + 2.0 * mu * ctx.dev_spec
    ) * noise
    return _checked("noise_recursion", t, lhs, rhs, _leq(lhs, rhs), g)


def check_angle_recursion(ctx, mu, c_small, t=None):
    """Per-step contraction-plus-drift bound on the signal-to-planted angle."""
    g = {}
    s = ctx.split_t
    pre = _gate(g, "noise_vs_signal", s.noise_spec, 2.0 * s.signal_sigma_min)
    pre &= _gate(g, "norm", ctx.norm_U, 3.0 * ctx.norm_X)
    pre &= _gate(g, "deviation", ctx.dev_spec, c_small * ctx.sigmin_X**2)
    pre &= _gate(g, "angle", s.angle_X_signal, c_small)
    pre &= _gate(g, "mu", mu, c_small / (ctx.kappa**2 * ctx.norm_X**2))
    pre &= _gate(g, "noise", s.noise_spec, c_small * ctx.norm_X / ctx.kappa**2)
    if not pre:
        return _na("angle_recursion", t, g)
    lhs = ctx.split_next.angle_X_signal
    rhs = (
        (1.0 - 0.25 * mu * ctx.sigmin_X**2) * s.angle_X_signal
        + 100.0 * mu * ctx.dev_spec
        + 500.0 * mu**2 * ctx.err_spec**2
    )
    return _checked("angle_recursion", t, lhs, rhs, _leq(lhs, rhs), g)


def check_norm_control(ctx, mu, t=None):
    """Step-to-step preservation of the factor-norm ceiling 3 ||X||."""
    g = {}
    pre = _gate(g, "norm", ctx.norm_U, 3.0 * ctx.norm_X)
    pre &= _gate(g, "mu", mu, 1.0 / (27.0 * ctx.norm_X**2))
    pre &= _gate(g, "deviation", ctx.dev_spec, ctx.norm_X**2)
    if not pre:
        return _na("norm_control", t, g)
    lhs = float(np.linalg.norm(ctx.U_next, 2))
    rhs = 3.0 * ctx.norm_X
    return _checked("norm_control", t, lhs, rhs, _leq(lhs, rhs), g)


def check_local_contraction(ctx, mu, c_small, t=None):
    """Per-step linear-rate contraction of the planted-space error."""
    g = {}
    s = ctx.split_t
    pre = _gate(g, "signal_floor", -s.signal_sigma_min, -ctx.sigmin_X / math.sqrt(10.0),
                ok=_geq(s.signal_sigma_min, ctx.sigmin_X / math.sqrt(10.0)))
    pre &= _gate(g, "norm", ctx.norm_U, 3.0 * ctx.norm_X)
    pre &= _gate(g, "angle", s.angle_X_signal, c_small / ctx.kappa**2)
    dev_cap = c_small / ctx.kappa**2 * ctx.err_fro
    pre &= _gate(g, "deviation", max(ctx.dev_fro, ctx.dev_spec), dev_cap)
    if not pre:
        return _na("local_contraction", t, g)
    lhs = ctx.vx_err_next_fro()
    rhs = (
        (1.0 - mu / 200.0 * ctx.sigmin_X**2) * ctx.vx_err_fro
        + mu * ctx.sigmin_X**2 / 100.0 * ctx.noise_gram_fro()
    )
    return _checked("local_contraction", t, lhs, rhs, _leq(lhs, rhs), g)


def check_error_split(ctx, c_small, t=None):
    """Full error controlled by planted-space error plus the noise gram."""
    g = {}
    s = ctx.split_t
    pre = _gate(g, "angle", s.angle_X_signal, c_small / ctx.kappa**2)
    pre &= _gate(g, "signal_floor", -s.signal_sigma_min, -ctx.sigmin_X / math.sqrt(10.0),
                 ok=_geq(s.signal_sigma_min, ctx.sigmin_X / math.sqrt(10.0)))
    if not pre:
        return _na("error_split", t, g)
    lhs = ctx.err_fro
    rhs = 4.0 * ctx.vx_err_fro + ctx.noise_gram_fro()
    return _checked("error_split", t, lhs, rhs, _leq(lhs, rhs), g)


def check_svd_closeness(ctx, t=None):
    """SVD-based and split-based statistics agree once the dominant subspace
    is aligned with the planted one (angle at most 1/8)."""
    g = {}
    U = ctx.U_t
    truth = ctx.inst.truth
    r_star = truth.r_star
    svals = np.linalg.svd(U, compute_uv=False)
    k = min(r_star, U.shape[1])
    V_Lt = diagnostics.top_subspace(U, k)
    angle_X_Lt = diagnostics.principal_angle(truth.V_X, V_Lt)
    pre = _gate(g, "angle_X_Lt", angle_X_Lt, 0.125)
    if not pre:
        return _na("svd_closeness", t, g)
    s = ctx.split_t
    sigma_r = float(svals[r_star - 1])
    sigma_r1 = float(svals[r_star]) if len(svals) > r_star else 0.0
    parts = {
        "signal_sigma_floor": [s.signal_sigma_min, 0.5 * sigma_r,
                               _geq(s.signal_sigma_min, 0.5 * sigma_r)],
        "angle_transfer": [s.angle_X_signal, 7.0 * angle_X_Lt,
                           _leq(s.angle_X_signal, 7.0 * angle_X_Lt)],
        "noise_cap": [s.noise_spec, 2.0 * sigma_r1, _leq(s.noise_spec, 2.0 * sigma_r1)],
    }
    ok = all(v[2] for v in parts.values())
    # surface the tightest sub-inequality as the check's lhs/rhs
    def margin(name):
        lhs, rhs, _ = parts[name]
        return lhs - rhs if name == "signal_sigma_floor" else rhs - lhs

    tightest = min(parts, key=margin)
    return _checked("svd_closeness", t, parts[tightest][0], parts[tightest][1], ok, g,
                    details={k_: [float(a), float(b), bool(c)] for k_, (a, b, c) in parts.items()})


def check_weyl_consequence(inst, delta_hat=None):
    """Eigenvalue and subspace consequences of the measured deviation of M
    from the planted matrix, with the deviation measured directly."""
    truth = inst.truth
    lam_xxt = truth.sigmas**2
    lam1_x = float(lam_xxt[0])
    lamr_x = float(lam_xxt[-1])
    E = inst.M - inst.XXt
    delta = float(np.linalg.norm(E, 2)) / lamr_x
    lam1_m = float(inst.M_eigs[0])
    lamr_m = float(inst.M_eigs[truth.r_star - 1])
    lamr1_m = float(inst.M_eigs[truth.r_star]) if truth.r_star < inst.n else 0.0
    parts = {
        "lambda1_band": [lam1_m, (1 + delta) * lam1_x,
                         _geq(lam1_m, (1 - delta) * lam1_x) and _leq(lam1_m, (1 + delta) * lam1_x)],
        "tail_cap": [lamr1_m, delta * lamr_x, _leq(lamr1_m, delta * lamr_x)],
        "head_floor": [lamr_m, (1 - delta) * lamr_x, _geq(lamr_m, (1 - delta) * lamr_x)],
    }
    gates = {"delta_half": [delta, 0.5, delta < 0.5]}
    if delta < 0.5:
        angle = diagnostics.principal_angle(truth.V_X, inst.V_L)
        parts["angle"] = [angle, 2.0 * delta, _leq(angle, 2.0 * delta)]
    ok = all(v[2] for v in parts.values())
    details = {k: [float(a), float(b), bool(c)] for k, (a, b, c) in parts.items()}
    details["delta_measured"] = delta
    if delta_hat is not None:
        details["delta_hat"] = float(delta_hat)
    return MonitorCheck(
        lemma="weyl_consequence",
        t=None,
        precondition_satisfied=True,
        inequality_satisfied=bool(ok),
        lhs=float(parts["tail_cap"][0]),
        rhs=float(parts["tail_cap"][1]),
        gates=gates,
        details=details,
    )


def check_perturbation(inst, comparison, alpha, mu, t):
    """Three singular-value/angle inequalities for the surrogate-plus-error
    form of the iterate, gated by the spectral-gap condition."""
    truth = inst.truth
    r_star = truth.r_star
    i = int(np.nonzero(comparison.iterations == t)[0][0])
    U_t = comparison.gd.factors[i]
    E_norm = float(comparison.err_norm[i])
    lam_r = float(inst.M_eigs[r_star - 1])
    lam_r1 = float(inst.M_eigs[r_star]) if r_star < inst.n else 0.0
    z_r = (1.0 + mu * lam_r) ** t
    z_r1 = (1.0 + mu * lam_r1) ** t
    U_unscaled_norm = float(np.linalg.norm(comparison.U0, 2)) / alpha
    sig_VL_U = float(np.linalg.svd(inst.V_L.T @ comparison.U0, compute_uv=False)[-1]) / alpha
    g = {}
    gap_lhs = z_r1 * U_unscaled_norm + E_norm / alpha
    gap_rhs = z_r * sig_VL_U
    pre = _gate(g, "gap", gap_lhs, gap_rhs, ok=gap_lhs < gap_rhs)
    if not pre:
        return _na("perturbation", t, g)
    svals = np.linalg.svd(U_t, compute_uv=False)
    sigma_r = float(svals[r_star - 1]) if len(svals) >= r_star else 0.0
    sigma_r1 = float(svals[r_star]) if len(svals) > r_star else 0.0
    angle = float(comparison.theta_gd[i])
    denom = alpha * z_r * sig_VL_U - alpha * z_r1 * U_unscaled_norm - E_norm
    parts = {
        "sigma_r_floor": [sigma_r, alpha * z_r * sig_VL_U - E_norm,
                          _geq(sigma_r, alpha * z_r * sig_VL_U - E_norm)],
        "sigma_r1_cap": [sigma_r1, alpha * z_r1 * U_unscaled_norm + E_norm,
                         _leq(sigma_r1, alpha * z_r1 * U_unscaled_norm + E_norm)],
        "angle_cap": [angle, (alpha * z_r1 * U_unscaled_norm + E_norm) / denom,
                      _leq(angle, (alpha * z_r1 * U_unscaled_norm + E_norm) / denom)],
    }
    ok = all(v[2] for v in parts.values())
    return _checked(
        "perturbation", t, parts["angle_cap"][0], parts["angle_cap"][1], ok, g,
        details={k: [float(a), float(b), bool(c)] for k, (a, b, c) in parts.items()},
    )


def run_monitors(inst, traj, mcfg=MonitorConfig()):
    """Replay a recorded trajectory through all enabled trajectory monitors.

    Requires the trajectory to carry factors.  Pair-based monitors only run
    on consecutively recorded iterations (record_stride 1).
    """
    if traj.factors is None:
        raise ValueError("trajectory was recorded without factors; rerun with keep_factors=True")
    checks = []
    mu = traj.config.mu
    c = mcfg.c_small
    r_ok = traj.config.r >= inst.r_star
    n_rows = len(traj.iterations)
    for i in range(n_rows):
        t = int(traj.iterations[i])
        has_next = i + 1 < n_rows and int(traj.iterations[i + 1]) == t + 1
        if not r_ok:
            continue
        ctx = StepContext(inst, traj.factors[i], traj.factors[i + 1] if has_next else None)
        if "error_split" in mcfg.enabled:
            checks.append(check_error_split(ctx, c, t=t))
        if "svd_closeness" in mcfg.enabled:
            checks.append(check_svd_closeness(ctx, t=t))
        if has_next:
            if "sigma_growth" in mcfg.enabled:
                checks.append(check_sigma_growth(ctx, mu, c, t=t))
            if "noise_recursion" in mcfg.enabled:
                checks.append(check_noise_recursion(ctx, mu, c, t=t))
            if "angle_recursion" in mcfg.enabled:
                checks.append(check_angle_recursion(ctx, mu, c, t=t))
            if "norm_control" in mcfg.enabled:
                checks.append(check_norm_control(ctx, mu, t=t))
            if "local_contraction" in mcfg.enabled:
                checks.append(check_local_contraction(ctx, mu, c, t=t))
    if "weyl_consequence" in mcfg.enabled:
        checks.append(check_weyl_consequence(inst, delta_hat=mcfg.delta_hat))
    report = MonitorReport(checks=checks, config=mcfg)
    if mcfg.report_mode == "fail_on_violation" and report.violations:
        first = report.violations[0]
        raise MonitorViolation(f"monitor {first.lemma} violated at t={first.t}")
    return report


def run_perturbation_monitor(inst, comparison, alpha, mcfg=MonitorConfig()):
    """Evaluate the surrogate-error inequalities along a paired comparison."""
    mu = comparison.gd.config.mu
    checks = [
        check_perturbation(inst, comparison, alpha, mu, int(t)) for t in comparison.iterations
    ]
    report = MonitorReport(checks=checks, config=mcfg)
    if mcfg.report_mode == "fail_on_violation" and report.violations:
        first = report.violations[0]
        raise MonitorViolation(f"monitor {first.lemma} violated at t={first.t}")
    return report
