"""Figure renderers, one per preset figure id.

Output is a vector image (SVG by default) produced deterministically: fixed
hash salt, no embedded dates, no RNG anywhere in the pipeline.
"""

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import io

FIGURE_IDS = ("fig1", "fig2", "fig4", "fig5", "fig6", "fig7")


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    inputs: tuple
    output: str
    scales: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data, output_override=None):
        figure = data.get("figure")
        if figure not in FIGURE_IDS:
            raise io.SchemaError(f"unknown figure id {figure!r}; choices: {FIGURE_IDS}")
        inputs = tuple(data.get("inputs", ()))
        if not inputs:
            raise io.SchemaError("figure spec needs at least one input directory")
        output = output_override or data.get("output")
        if not output:
            raise io.SchemaError("figure spec needs an output path (or --out)")
        return cls(figure=figure, inputs=inputs, output=str(output), scales=data.get("scales", {}))


def _deterministic_style():
    matplotlib.rcParams["svg.hashsalt"] = "lowrank-phases"
    matplotlib.rcParams["figure.dpi"] = 100


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = {"Date": None} if path.suffix == ".svg" else {}
    fig.savefig(path, metadata=metadata)
    plt.close(fig)
    return path


def _yscale(ax, spec, default="log"):
    ax.set_yscale(spec.scales.get("y", default))
    ax.set_xscale(spec.scales.get("x", "linear"))


def render_fig1(spec):
    """Overlaid subspace-angle curves for gradient descent and power method."""
    theta = io.read_theta(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(theta["t"], theta["theta_gd"], label="gradient descent", color="m")
    ax.plot(theta["t"], theta["theta_p"], label="power method", color="b", linestyle="--")
    _yscale(ax, spec)
    ax.set_xlabel("iteration")
    ax.set_ylabel("angle to measured top subspace")
    ax.legend()
    fig.tight_layout()
    return fig


def render_fig2(spec):
    """Three-phase panel: angle, signal singular value, relative test error."""
    run_dir = spec.inputs[0]
    traj = io.read_trajectory(run_dir)
    summary = io.read_summary(run_dir)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(traj["t"], traj["angle_L_Lt"], label="subspace angle")
    ax.plot(traj["t"], traj["sigma_rstar"], label="r*-th singular value")
    ax.plot(traj["t"], traj["test_error_rel"], label="relative test error")
    _yscale(ax, spec)
    phases = summary.get("phases", {})
    for key, style in (("t_spectral_end", ":"), ("t1", "--"), ("t_hat", "-.")):
        if phases.get(key) is not None:
            ax.axvline(phases[key], color="gray", linestyle=style, linewidth=1, label=key)
    ax.set_xlabel("iteration")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_fig4(spec):
    """Alignment-angle curves for several factor widths."""
    index = io.read_index(spec.inputs[0])
    root = Path(spec.inputs[0])
    fig, ax = plt.subplots(figsize=(6, 4))
    seen = set()
    for run in index["runs"]:
        r = run["r"]
        if r in seen:
            continue
        seen.add(r)
        traj = io.read_trajectory(root / run["dir"])
        ax.plot(traj["t"], traj["angle_L_Lt"], label=f"r = {r}")
    _yscale(ax, spec)
    ax.set_xlabel("iteration")
    ax.set_ylabel("angle to measured top subspace")
    ax.legend()
    fig.tight_layout()
    return fig


def slope_annotation(slope):
    # full precision so the annotation is exactly the harness-computed value
    return f"fitted slope = {slope!r}"


def render_fig5(spec):
    """Final error against initialization scale, log-log, with the slope fit."""
    index = io.read_index(spec.inputs[0])
    table = index["table"]
    alphas = [row["alpha"] for row in table]
    errs = [row["mean_final_test_error_rel"] for row in table]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(alphas, errs, "o-")
    ax.set_xscale(spec.scales.get("x", "log"))
    ax.set_yscale(spec.scales.get("y", "log"))
    slope = index.get("loglog_slope")
    if slope is not None:
        ax.annotate(
            slope_annotation(slope),
            xy=(0.05, 0.92),
            xycoords="axes fraction",
            fontsize=9,
        )
    ax.set_xlabel("initialization scale")
    ax.set_ylabel("final relative test error (seed mean)")
    fig.tight_layout()
    return fig


def render_fig6(spec):
    """Train loss and test error during training, small vs large scale."""
    root = Path(spec.inputs[0])
    index = io.read_index(root)
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, role in zip(axes, ("rich", "lazy")):
        run = index["runs"][role]
        traj = io.read_trajectory(root / run["dir"])
        ax.plot(traj["t"], traj["loss"], label="train loss")
        ax.plot(traj["t"], traj["test_error_rel"], label="relative test error")
        _yscale(ax, spec)
        ax.set_title(f"{role} (alpha = {run['alpha']:g})")
        ax.set_xlabel("iteration")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def render_fig7(spec):
    """Iterations to reach the test-error threshold against factor width."""
    index = io.read_index(spec.inputs[0])
    table = index["table"]
    rs = [row["r"] for row in table]
    means = [row["mean_iters_to_test_error"] for row in table]
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r for r, m in zip(rs, means) if m is not None]
    ys = [m for m in means if m is not None]
    ax.bar([str(x) for x in xs], ys, color="tab:blue")
    ax.set_xlabel("factor width r")
    ax.set_ylabel("mean iterations to error threshold")
    ax.set_yscale(spec.scales.get("y", "linear"))
    fig.tight_layout()
    return fig


RENDERERS = {
    "fig1": render_fig1,
    "fig2": render_fig2,
    "fig4": render_fig4,
    "fig5": render_fig5,
    "fig6": render_fig6,
    "fig7": render_fig7,
}


def render(spec):
    """Render one figure spec to its output path; returns the path."""
    _deterministic_style()
    fig = RENDERERS[spec.figure](spec)
    return _save(fig, spec.output)
