#!/usr/bin/env python3
"""Benchmark the measurement kernels: numba backend vs pure-numpy fallback.

Times the forward map, the adjoint, and one full gradient step at a few
problem sizes.  The numba path uses a fixed left-to-right summation order
(bit-reproducible, independent of BLAS threading); the numpy path delegates
to BLAS GEMV and is often faster.  Pick per run with LOWRANK_PHASES_BACKEND.

Usage: python benchmarks/bench_kernels.py [--repeats 30]
"""

import argparse
import time

import numpy as np

from lowrank_phases import SolverConfig, init_factor, kernels, make_ground_truth, make_instance
from lowrank_phases import gd_step, sensing

SIZES = [
    (30, 900),  # n, m
    (60, 1800),
    (100, 3000),
]


def best_of(fn, repeats):
    fn()  # warm (and JIT-compile on the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=30)
    args = parser.parse_args()

    backends = ["numpy"] + (["numba"] if kernels.HAVE_NUMBA else [])
    print(f"backends: {backends}  (default: {kernels.get_backend()})")
    header = f"{'n':>4} {'m':>6} {'op':>10}" + "".join(f" {b:>12}" for b in backends)
    print(header)
    print("-" * len(header))

    rng = np.random.default_rng(0)
    for n, m in SIZES:
        op = sensing.gen_gaussian_operator(n, m, seed=1)
        truth = make_ground_truth(n, 3, seed=2)
        inst = make_instance(truth, op)
        Z = rng.standard_normal((n, n))
        Z = (Z + Z.T) / 2
        y = rng.standard_normal(m)
        U = init_factor(SolverConfig(r=6, alpha=1e-3, seed=3), n)
        rows = {
            "forward": lambda: sensing.apply_operator(op, Z),
            "adjoint": lambda: sensing.apply_adjoint(op, y),
            "gd_step": lambda: gd_step(inst, U, 0.25),
        }
        for name, fn in rows.items():
            cells = []
            for backend in backends:
                kernels.set_backend(backend)
                cells.append(f"{best_of(fn, args.repeats):9.3f} ms")
            print(f"{n:>4} {m:>6} {name:>10}" + "".join(f" {c:>12}" for c in cells))
    kernels.set_backend(kernels._backend_from_env())


if __name__ == "__main__":
    main()
