import json
import subprocess

import pytest

PRIMARY_CLI = "lowrank-phases"


def run_primary(command, config, out_dir):
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(json.dumps(config))
    proc = subprocess.run(
        [PRIMARY_CLI, command, "--config", str(cfg_path), "--out", str(out_dir)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    payload = json.loads(proc.stdout.splitlines()[-1])
    return out_dir / payload["out"] if not payload["out"].startswith("/") else payload["out"]


TINY = dict(
    n=16,
    r_star=2,
    m=320,
    r=4,
    alpha=1e-4,
    max_iters=300,
    stop_test_error=1e-3,
    instance_seed=71,
    init_seed=72,
)


@pytest.fixture(scope="session")
def generated(tmp_path_factory):
    """Small outputs for every figure id, produced through the primary CLI."""
    root = tmp_path_factory.mktemp("primary-out")
    outs = {}
    outs["run"] = run_primary("run", TINY, root)
    outs["compare"] = run_primary(
        "compare-spectral", {**TINY, "t_max": 40, "rip_trials": 20}, root
    )
    outs["sweep_r"] = run_primary(
        "sweep-r", {**TINY, "r": [2, 4], "repetitions": 2, "stop_test_error": None}, root
    )
    outs["sweep_alpha"] = run_primary(
        "sweep-alpha",
        {**TINY, "alpha": [1e-3, 1e-4], "repetitions": 2, "stop_loss": 0.5e-9,
         "stop_test_error": None, "max_iters": 600},
        root,
    )
    outs["lazy"] = run_primary(
        "lazy-vs-rich", {**TINY, "alpha": 1e-3, "alpha_large": 0.4, "budget": 50,
                         "stop_test_error": None}, root
    )
    return outs
