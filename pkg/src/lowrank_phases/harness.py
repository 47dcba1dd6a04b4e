"""Experiment configuration, presets, run orchestration, and file outputs.

Every run writes into its own directory (named by a hash of the resolved
configuration): trajectory.csv, summary.json, and optional monitor files.
Sweeps fan runs out over a process pool and assemble an index.json after
all runs complete; results are identical for any worker count because each
run is fully determined by its own seeds.
"""

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, model, monitors, sensing, solver, spectral

SCHEMA_TAG = "lowrank-phases/v1"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 60
    r_star: int = 3
    r: object = 6  # int, or list of ints for sweep-r
    m: int = None  # defaults to 10 * n * r_star
    mu: float = 0.25
    alpha: object = 1e-6  # float, or list of floats for sweep-alpha
    alpha_large: float = 0.5  # lazy-vs-rich only
    init_kind: str = "gaussian_iid"
    truth_kind: str = "orthonormal"
    kappa: float = 1.0
    instance_seed: int = 2024
    init_seed: int = 7
    repetitions: int = 1
    max_iters: int = 2000
    record_stride: int = 1
    stop_loss: float = None
    stop_test_error: float = None
    angle_threshold: float = 0.1
    final_threshold: float = 1e-3
    test_error_sq_threshold: float = 1e-4  # sweep-r milestone, on squared error
    t_max: int = 150  # compare-spectral horizon
    budget: int = 2500  # lazy-vs-rich fixed iteration count
    rip_rank: int = 2
    rip_trials: int = 200
    rip_seed: int = 99
    delta1_safety: float = 2.0
    monitors_enabled: bool = False
    c_small: float = 0.01
    report_mode: str = "log_only"
    convention: str = "symmetrized"

    def __post_init__(self):
        if self.m is not None and self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        for name in ("n", "r_star", "max_iters", "record_stride"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for v in self.alpha_list():
            if v <= 0:
                raise ConfigError("alpha values must be > 0")
        for v in self.r_list():
            if v < 1:
                raise ConfigError("r values must be >= 1")

    @property
    def m_resolved(self):
        return self.m if self.m is not None else 10 * self.n * self.r_star

    def alpha_list(self):
        a = self.alpha
        return [float(x) for x in (a if isinstance(a, (list, tuple)) else [a])]

    def r_list(self):
        r = self.r
        return [int(x) for x in (r if isinstance(r, (list, tuple)) else [r])]

    def scalar_alpha(self):
        vals = self.alpha_list()
        if len(vals) != 1:
            raise ConfigError("this command needs a single alpha value")
        return vals[0]

    def scalar_r(self):
        vals = self.r_list()
        if len(vals) != 1:
            raise ConfigError("this command needs a single r value")
        return vals[0]

    def to_dict(self):
        out = {}
        for k, v in self.__dict__.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def rep_seed(base, k):
    """Deterministic per-repetition child seed."""
    return int(np.random.SeedSequence((int(base), int(k))).generate_state(1, np.uint64)[0])


def config_hash(data):
    blob = json.dumps(data, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_instance(cfg, rep=0):
    op_seed = rep_seed(cfg.instance_seed, rep)
    truth_seed = rep_seed(cfg.instance_seed, rep + 10_000)
    op = sensing.gen_gaussian_operator(cfg.n, cfg.m_resolved, op_seed, convention=cfg.convention)
    truth = model.make_ground_truth(
        cfg.n, cfg.r_star, kind=cfg.truth_kind, seed=truth_seed, kappa=cfg.kappa
    )
    return model.make_instance(truth, op)


def solver_config(cfg, r=None, alpha=None, rep=0, **overrides):
    base = dict(
        r=int(r if r is not None else cfg.scalar_r()),
        alpha=float(alpha if alpha is not None else cfg.scalar_alpha()),
        mu=cfg.mu,
        init_kind=cfg.init_kind,
        max_iters=cfg.max_iters,
        record_stride=cfg.record_stride,
        stop_loss=cfg.stop_loss,
        stop_test_error=cfg.stop_test_error,
        seed=rep_seed(cfg.init_seed, rep),
    )
    base.update(overrides)
    return solver.SolverConfig(**base)


def monitor_config(cfg):
    return monitors.MonitorConfig(
        enabled=monitors.ALL_MONITORS, c_small=cfg.c_small, report_mode=cfg.report_mode
    )


@dataclass
class RunSummary:
    data: dict = field(default_factory=dict)

    def write(self, path):
        _write_json(path, self.data)


def execute_run(inst, cfg, scfg, out_dir, rep=0, extra=None):
    """Run one trajectory, write trajectory.csv + summary.json (+ monitors)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    traj = solver.run_gd(inst, scfg, keep_factors=cfg.monitors_enabled)
    wall = time.perf_counter() - t0
    traj.to_csv(out_dir / "trajectory.csv")
    phases = diagnostics.detect_phases(
        traj, inst.truth, angle_threshold=cfg.angle_threshold, final_threshold=cfg.final_threshold
    )
    summary = {
        "schema": SCHEMA_TAG,
        "config": cfg.to_dict(),
        "solver": {
            "r": scfg.r,
            "alpha": scfg.alpha,
            "mu": scfg.mu,
            "init_kind": scfg.init_kind,
            "seed": scfg.seed,
            "max_iters": scfg.max_iters,
            "record_stride": scfg.record_stride,
            "stop_loss": scfg.stop_loss,
            "stop_test_error": scfg.stop_test_error,
        },
        "instance": inst.meta(),
        "repetition": rep,
        "wall_time_s": wall,
        "phases": phases.to_dict(),
        **traj.summary(),
    }
    if extra:
        summary.update(extra)
    if cfg.monitors_enabled:
        mrep = monitors.run_monitors(inst, traj, monitor_config(cfg))
        mrep.to_jsonl(out_dir / "monitors.jsonl")
        _write_json(out_dir / "monitors_summary.json", mrep.summary_dict())
        summary["monitor_violations"] = len(mrep.violations)
    RunSummary(summary).write(out_dir / "summary.json")
    return traj, summary


def cli_run(cfg, out_dir):
    """Single trajectory with the config's r and alpha."""
    inst = build_instance(cfg, rep=0)
    scfg = solver_config(cfg, rep=0)
    run_dir = Path(out_dir) / f"run-{config_hash(cfg.to_dict())}"
    traj, summary = execute_run(inst, cfg, scfg, run_dir, rep=0)
    return run_dir, summary


# ---------------------------------------------------------------------------
# sweeps


def _alpha_run(args):
    cfg_dict, alpha, rep, out_root = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    inst = build_instance(cfg, rep=rep)
    scfg = solver_config(cfg, alpha=alpha, rep=rep)
    run_dir = Path(out_root) / f"alpha-{alpha:.3e}-rep{rep}"
    _, summary = execute_run(inst, cfg, scfg, run_dir, rep=rep, extra={"alpha": alpha})
    return {
        "alpha": alpha,
        "rep": rep,
        "dir": run_dir.name,
        "final_test_error_rel": summary["final_test_error_rel"],
        "final_loss": summary["final_loss"],
        "iterations": summary["iterations"],
        "stop_reason": summary["stop_reason"],
    }


def fit_loglog_slope(xs, ys):
    """Least-squares slope of log(y) against log(x); None for < 2 points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        return None
    lx = np.log(xs)
    ly = np.log(ys)
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx))


def _pool_map(fn, jobs_args, jobs):
    if jobs <= 1:
        return [fn(a) for a in jobs_args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, jobs_args))


def cli_sweep_alpha(cfg, out_dir, jobs=1):
    """One run per (alpha, repetition); stops on train loss; writes an index
    with per-alpha seed-averaged final errors and the log-log slope fit."""
    alphas = cfg.alpha_list()
    out_root = Path(out_dir) / f"sweep-alpha-{config_hash(cfg.to_dict())}"
    out_root.mkdir(parents=True, exist_ok=True)
    args = [(cfg.to_dict(), a, k, str(out_root)) for a in alphas for k in range(cfg.repetitions)]
    rows = _pool_map(_alpha_run, args, jobs)
    rows.sort(key=lambda r: (r["alpha"], r["rep"]))
    per_alpha = []
    for a in alphas:
        errs = [r["final_test_error_rel"] for r in rows if r["alpha"] == a]
        per_alpha.append(
            {
                "alpha": a,
                "mean_final_test_error_rel": float(np.mean(errs)),
                "min": float(np.min(errs)),
                "max": float(np.max(errs)),
            }
        )
    per_alpha.sort(key=lambda r: r["alpha"])
    slope = fit_loglog_slope(
        [r["alpha"] for r in per_alpha],
        [r["mean_final_test_error_rel"] for r in per_alpha],
    )
    index = {
        "schema": SCHEMA_TAG,
        "kind": "sweep-alpha",
        "config": cfg.to_dict(),
        "runs": rows,
        "table": per_alpha,
        "loglog_slope": slope,
    }
    _write_json(out_root / "index.json", index)
    return out_root, index


def _milestones(traj, inst, cfg):
    """First iterations reaching subspace alignment and the squared-error cut."""
    align = None
    mask = traj.angle_L_Lt <= cfg.angle_threshold
    hit = np.nonzero(mask)[0]
    if len(hit):
        align = int(traj.iterations[hit[0]])
    err_cut = math.sqrt(cfg.test_error_sq_threshold)
    hit = np.nonzero(traj.test_error <= err_cut)[0]
    reach = int(traj.iterations[hit[0]]) if len(hit) else None
    return align, reach


def _r_run(args):
    cfg_dict, r, rep, out_root = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    inst = build_instance(cfg, rep=rep)
    stop_rel = math.sqrt(cfg.test_error_sq_threshold) / float(
        np.linalg.norm(inst.XXt)
    )
    scfg = solver_config(cfg, r=r, rep=rep, stop_test_error=min(stop_rel, cfg.final_threshold))
    run_dir = Path(out_root) / f"r-{r}-rep{rep}"
    traj, summary = execute_run(inst, cfg, scfg, run_dir, rep=rep, extra={"r": r})
    align, reach = _milestones(traj, inst, cfg)
    return {
        "r": r,
        "rep": rep,
        "dir": run_dir.name,
        "iters_to_alignment": align,
        "iters_to_test_error": reach,
        "final_test_error_rel": summary["final_test_error_rel"],
        "stop_reason": summary["stop_reason"],
    }


def cli_sweep_r(cfg, out_dir, jobs=1):
    """Iterations-to-alignment and iterations-to-error-threshold across r."""
    rs = cfg.r_list()
    out_root = Path(out_dir) / f"sweep-r-{config_hash(cfg.to_dict())}"
    out_root.mkdir(parents=True, exist_ok=True)
    args = [(cfg.to_dict(), r, k, str(out_root)) for r in rs for k in range(cfg.repetitions)]
    rows = _pool_map(_r_run, args, jobs)
    rows.sort(key=lambda r: (r["r"], r["rep"]))
    table = []
    for r in rs:
        sub = [x for x in rows if x["r"] == r]
        aligns = [x["iters_to_alignment"] for x in sub if x["iters_to_alignment"] is not None]
        reaches = [x["iters_to_test_error"] for x in sub if x["iters_to_test_error"] is not None]
        table.append(
            {
                "r": r,
                "mean_iters_to_alignment": float(np.mean(aligns)) if aligns else None,
                "min_iters_to_alignment": int(np.min(aligns)) if aligns else None,
                "max_iters_to_alignment": int(np.max(aligns)) if aligns else None,
                "mean_iters_to_test_error": float(np.mean(reaches)) if reaches else None,
                "detected": len(aligns),
                "runs": len(sub),
            }
        )
    index = {
        "schema": SCHEMA_TAG,
        "kind": "sweep-r",
        "config": cfg.to_dict(),
        "runs": rows,
        "table": table,
    }
    _write_json(out_root / "index.json", index)
    return out_root, index


def cli_compare_spectral(cfg, out_dir):
    """Paired GD / power-method trajectories from a shared initialization."""
    inst = build_instance(cfg, rep=0)
    scfg = solver_config(cfg, rep=0)
    out_root = Path(out_dir) / f"compare-spectral-{config_hash(cfg.to_dict())}"
    out_root.mkdir(parents=True, exist_ok=True)
    comp = spectral.compare_gd_power(inst, scfg, cfg.t_max)
    rip = sensing.estimate_rip(inst.op, cfg.rip_rank, cfg.rip_trials, cfg.rip_seed)
    delta1_hat = cfg.delta1_safety * rip.delta_lower
    bounds = spectral.spectral_phase_bounds(inst, scfg, delta1_hat, comp)
    comp.to_csv(out_root / "theta.csv", err_bound=bounds.E_bound)
    payload = {
        "schema": SCHEMA_TAG,
        "kind": "compare-spectral",
        "config": cfg.to_dict(),
        "instance": inst.meta(),
        "rip": {"rank": rip.rank, "trials": rip.trials, "delta_lower": rip.delta_lower, "seed": rip.seed},
        **bounds.to_dict(),
    }
    _write_json(out_root / "spectral_bounds.json", payload)
    return out_root, payload


def cli_lazy_vs_rich(cfg, out_dir):
    """Two fixed-budget runs, small and large initialization scale."""
    inst = build_instance(cfg, rep=0)
    out_root = Path(out_dir) / f"lazy-vs-rich-{config_hash(cfg.to_dict())}"
    out_root.mkdir(parents=True, exist_ok=True)
    results = {}
    for label, alpha in (("rich", cfg.scalar_alpha()), ("lazy", cfg.alpha_large)):
        scfg = solver_config(
            cfg, alpha=alpha, rep=0, max_iters=cfg.budget, stop_loss=None, stop_test_error=None
        )
        traj, summary = execute_run(inst, cfg, scfg, out_root / label, rep=0, extra={"role": label})
        results[label] = {
            "alpha": alpha,
            "dir": label,
            "initial_loss": float(traj.loss[0]),
            "final_loss": float(traj.loss[-1]),
            "initial_test_error_rel": float(traj.test_error_rel[0]),
            "final_test_error_rel": float(traj.test_error_rel[-1]),
            "loss_decades": float(np.log10(traj.loss[0] / traj.loss[-1]))
            if traj.loss[-1] > 0
            else float("inf"),
            "test_error_rel_change": float(
                abs(traj.test_error_rel[-1] - traj.test_error_rel[0]) / traj.test_error_rel[0]
            ),
        }
    index = {
        "schema": SCHEMA_TAG,
        "kind": "lazy-vs-rich",
        "config": cfg.to_dict(),
        "budget": cfg.budget,
        "runs": results,
    }
    _write_json(out_root / "index.json", index)
    return out_root, index


def cli_rip_estimate(cfg, out_dir):
    """Operator audit: sampled isometry constant at the configured rank."""
    op = sensing.gen_gaussian_operator(
        cfg.n, cfg.m_resolved, rep_seed(cfg.instance_seed, 0), convention=cfg.convention
    )
    est = sensing.estimate_rip(op, cfg.rip_rank, cfg.rip_trials, cfg.rip_seed)
    out_root = Path(out_dir) / f"rip-{config_hash(cfg.to_dict())}"
    out_root.mkdir(parents=True, exist_ok=True)
    payload = {
        "schema": SCHEMA_TAG,
        "kind": "rip-estimate",
        "config": cfg.to_dict(),
        "rank": est.rank,
        "trials": est.trials,
        "delta_lower": est.delta_lower,
        "seed": est.seed,
    }
    _write_json(out_root / "rip_estimate.json", payload)
    return out_root, payload


# ---------------------------------------------------------------------------
# presets
#
# Desk-scale presets run in seconds to minutes; full-scale presets carry the
# original experiments' parameters and are runnable but slow.  The lazy and
# alpha-sweep desk presets keep the original measurement-to-dimension ratio
# (m about half the symmetric dimension) instead of the default m = 10*n*r_star,
# which at n=60 nearly determines the full matrix space and erases the
# overparameterized phenomena they demonstrate.

PRESETS = {
    "desk": dict(n=60, r_star=3, r=6, alpha=1e-6, max_iters=2000, final_threshold=1e-3,
                 stop_test_error=1e-4, monitors_enabled=True),
    "fig1-desk": dict(n=60, r_star=3, r=6, alpha=1e-6, t_max=150),
    "fig1-full": dict(n=200, r_star=1, r=1, m=2000, alpha=3.5714285714285714e-07, t_max=600),
    "fig2-desk": dict(n=60, r_star=3, r=6, alpha=1e-6, max_iters=2000, final_threshold=1e-3,
                      stop_test_error=1e-4, monitors_enabled=True),
    "fig2-full": dict(n=200, r_star=5, r=60, alpha=1 / (70 * 200**2), max_iters=4000,
                       stop_test_error=1e-4),
    "fig4-desk": dict(n=60, r_star=3, r=[3, 6, 12], alpha=1 / (70 * 60**2), repetitions=5,
                      max_iters=3000),
    "fig4-full": dict(n=200, r_star=5, r=[5, 10, 30, 60, 180, 250], alpha=1 / (70 * 200**2),
                       repetitions=1, max_iters=6000),
    "fig5-desk": dict(n=60, r_star=3, m=900, r=30, alpha=[1e-3, 1e-4, 1e-5, 1e-6],
                      repetitions=5, stop_loss=0.5e-9, max_iters=6000, record_stride=10),
    "fig5-full": dict(n=200, r_star=5, r=180, alpha=[1e-3, 1e-4, 1e-5, 1e-6],
                       repetitions=1, stop_loss=0.5e-9, max_iters=400000, record_stride=100),
    "fig6-desk": dict(n=60, r_star=3, m=900, r=54, alpha=1e-3, alpha_large=0.5, budget=2500,
                      record_stride=5),
    "fig6-full": dict(n=200, r_star=5, r=180, alpha=1e-3, alpha_large=0.5, budget=400000,
                       record_stride=1000),
    "fig7-desk": dict(n=60, r_star=3, r=[3, 4, 5, 6, 8, 10, 12], alpha=1e-3, repetitions=10,
                      max_iters=4000),
    "fig7-full": dict(n=200, r_star=5, r=[5, 8, 10, 15, 20, 25, 30], alpha=1e-3,
                       repetitions=10, max_iters=40000),
    "rip-audit": dict(n=20, r_star=2, m=4000, rip_rank=2, rip_trials=200),
}


def load_config(preset=None, config_path=None):
    data = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choices: {sorted(PRESETS)}")
        data.update(PRESETS[preset])
    if config_path is not None:
        with open(config_path, "r", encoding="utf-8") as fh:
            data.update(json.load(fh))
    if not data:
        raise ConfigError("provide --preset and/or --config")
    return ExperimentConfig.from_dict(data)
