"""Overparameterized low-rank matrix recovery via factorized gradient descent:
sensing operators, trajectory diagnostics, power-method surrogate comparison,
phase detection, and inequality monitors."""

from .diagnostics import (
    PhaseReport,
    SignalNoiseSplit,
    detect_phases,
    principal_angle,
    signal_noise_decompose,
    top_subspace,
)
from .kernels import get_backend, set_backend
from .model import (
    GroundTruth,
    ProblemInstance,
    gradient,
    loss,
    make_ground_truth,
    make_instance,
)
from .monitors import MonitorConfig, MonitorReport, run_monitors, run_perturbation_monitor
from .sensing import (
    RipEstimate,
    SensingOperator,
    apply_adjoint,
    apply_operator,
    estimate_rip,
    gen_gaussian_operator,
    spectral_deviation,
)
from .solver import SolverConfig, TrajectoryRecord, gd_step, init_factor, run_gd
from .spectral import (
    SpectralComparison,
    SpectralPhaseBound,
    SurrogateTrajectory,
    compare_gd_power,
    spectral_phase_bounds,
    spectral_subspace,
    surrogate_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "GroundTruth",
    "MonitorConfig",
    "MonitorReport",
    "PhaseReport",
    "ProblemInstance",
    "RipEstimate",
    "SensingOperator",
    "SignalNoiseSplit",
    "SolverConfig",
    "SpectralComparison",
    "SpectralPhaseBound",
    "SurrogateTrajectory",
    "TrajectoryRecord",
    "apply_adjoint",
    "apply_operator",
    "compare_gd_power",
    "detect_phases",
    "estimate_rip",
    "gd_step",
    "gen_gaussian_operator",
    "get_backend",
    "gradient",
    "init_factor",
    "loss",
    "make_ground_truth",
    "make_instance",
    "principal_angle",
    "run_gd",
    "run_monitors",
    "run_perturbation_monitor",
    "set_backend",
    "signal_noise_decompose",
    "spectral_deviation",
    "spectral_phase_bounds",
    "spectral_subspace",
    "surrogate_trajectory",
    "top_subspace",
]
