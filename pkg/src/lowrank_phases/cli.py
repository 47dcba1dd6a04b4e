"""Command-line entry point.

Subcommands: run, sweep-alpha, sweep-r, compare-spectral, lazy-vs-rich,
rip-estimate.  Exit codes: 0 success, 2 configuration error, 3 divergence.
"""

import argparse
import json
import sys

from . import harness
from .kernels import warmup

COMMANDS = {
    "run": lambda cfg, out, jobs: harness.cli_run(cfg, out),
    "sweep-alpha": harness.cli_sweep_alpha,
    "sweep-r": harness.cli_sweep_r,
    "compare-spectral": lambda cfg, out, jobs: harness.cli_compare_spectral(cfg, out),
    "lazy-vs-rich": lambda cfg, out, jobs: harness.cli_lazy_vs_rich(cfg, out),
    "rip-estimate": lambda cfg, out, jobs: harness.cli_rip_estimate(cfg, out),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lowrank-phases",
        description="Low-rank matrix recovery experiments: gradient descent "
        "trajectories, phase detection, and power-method comparison.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="sweep worker processes")
        p.add_argument("--preset", default=None, help=f"one of {sorted(harness.PRESETS)}")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = harness.load_config(preset=args.preset, config_path=args.config)
    except (harness.ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    warmup()
    try:
        out_dir, payload = COMMANDS[args.command](cfg, args.out, args.jobs)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    diverged = payload.get("diverged", False)
    if args.command == "lazy-vs-rich":
        diverged = any(r.get("diverged") for r in payload.get("runs", {}).values() if isinstance(r, dict))
    print(json.dumps({"out": str(out_dir), "diverged": diverged}))
    if diverged:
        print("run diverged (non-finite iterate)", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
