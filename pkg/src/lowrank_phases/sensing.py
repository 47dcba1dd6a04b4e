"""Gaussian sensing ensembles: forward map, adjoint, and isometry estimates.

The forward map sends a symmetric Z to the m-vector with entries
(1/sqrt(m)) * <A_i, Z>; the adjoint sends y to (1/sqrt(m)) * sum_i y_i A_i.
Measurement matrices are symmetric by construction.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .kernels import adjoint_kernel, apply_kernel

SYMMETRY_RTOL = 1e-10


@dataclass(frozen=True)
class SensingOperator:
    """Immutable bundle of m dense symmetric n x n measurement matrices.

    Memory cost is m * n^2 doubles; matrices are stored dense and shared
    read-only.  `convention` records how the Gaussian entries were scaled.
    """

    n: int
    m: int
    matrices: np.ndarray  # shape (m, n, n), each slice exactly symmetric
    seed: int
    convention: str = "symmetrized"

    @property
    def mats2d(self):
        return self.matrices.reshape(self.m, self.n * self.n)

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.m)


@dataclass(frozen=True)
class RipEstimate:
    """Sampled lower bound on the restricted-isometry constant.

    `delta_lower` is the largest observed |  ||A(Z)||^2 - 1 | over random
    unit-Frobenius samples of rank at most `rank`; the true constant is a
    supremum, so this is a lower bound only.  `worst_case_sample_seed`
    regenerates the maximizing sample via `numpy.random.default_rng`.
    """

    rank: int
    trials: int
    delta_lower: float
    worst_case_sample_seed: tuple
    seed: int

    def to_json(self):
        return json.dumps(
            {
                "rank": self.rank,
                "trials": self.trials,
                "delta_lower": self.delta_lower,
                "seed": self.seed,
            }
        )


def gen_gaussian_operator(n, m, seed, convention="symmetrized"):
    """Draw a deterministic Gaussian measurement ensemble.

    convention "symmetrized": A_i = (G + G^T)/2 with G iid standard normal,
    which gives Var <A_i, Z> = ||Z||_F^2 for symmetric Z, so the composed
    map adjoint(forward(.)) is an isometry in expectation.  convention
    "footnote" draws a symmetric matrix with off-diagonal standard deviation
    1 and diagonal standard deviation 1/sqrt(2); it is provided for
    comparison and is not isotropic in the above sense.
    """
    if n < 1 or m < 1:
        raise ValueError(f"n and m must be >= 1, got n={n}, m={m}")
    if convention not in ("symmetrized", "footnote"):
        raise ValueError(f"unknown convention {convention!r}")
    rng = np.random.default_rng(seed)
    if convention == "symmetrized":
        g = rng.standard_normal((m, n, n))
        mats = 0.5 * (g + np.transpose(g, (0, 2, 1)))
    else:
        mats = np.empty((m, n, n))
        iu = np.triu_indices(n, k=1)
        for i in range(m):
            a = np.zeros((n, n))
            off = rng.standard_normal(len(iu[0]))
            a[iu] = off
            a = a + a.T
            a[np.diag_indices(n)] = rng.standard_normal(n) / math.sqrt(2.0)
            mats[i] = a
    mats = np.ascontiguousarray(mats)
    mats.setflags(write=False)
    return SensingOperator(n=n, m=m, matrices=mats, seed=seed, convention=convention)


def _check_symmetric(op, Z):
    Z = np.asarray(Z, dtype=float)
    if Z.shape != (op.n, op.n):
        raise ValueError(f"expected {op.n}x{op.n} matrix, got shape {Z.shape}")
    znorm = np.linalg.norm(Z)
    asym = np.linalg.norm(Z - Z.T)
    if asym > SYMMETRY_RTOL * max(1.0, znorm):
        raise ValueError(f"matrix is not symmetric (relative asymmetry {asym / max(1.0, znorm):.3e})")
    if asym > 0.0:
        Z = 0.5 * (Z + Z.T)
    return Z


def apply_operator(op, Z):
    """Forward map: out[i] = (1/sqrt(m)) * Tr(A_i Z) for symmetric Z."""
    Z = _check_symmetric(op, Z)
    return apply_kernel(op.mats2d, np.ascontiguousarray(Z.ravel()), op.scale)


def apply_adjoint(op, y):
    """Adjoint map: (1/sqrt(m)) * sum_i y_i A_i, a symmetric n x n matrix."""
    y = np.asarray(y, dtype=float)
    if y.shape != (op.m,):
        raise ValueError(f"expected length-{op.m} vector, got shape {y.shape}")
    out = adjoint_kernel(op.mats2d, np.ascontiguousarray(y), op.scale)
    return out.reshape(op.n, op.n)


def apply_normal(op, Z):
    """Composition adjoint(forward(Z)) without symmetry validation."""
    zflat = np.ascontiguousarray(np.asarray(Z, dtype=float).ravel())
    y = apply_kernel(op.mats2d, zflat, op.scale)
    return adjoint_kernel(op.mats2d, y, op.scale).reshape(op.n, op.n)


def spectral_deviation(op, Z):
    """Spectral norm of Z - adjoint(forward(Z)), for monitor use."""
    Z = _check_symmetric(op, Z)
    resid = Z - apply_normal(op, Z)
    return float(np.linalg.norm(resid, 2))


def _trial_seed(seed, k):
    return (int(seed), int(k))


def draw_rip_sample(n, rank, trial_seed):
    """Unit-Frobenius symmetric sample of rank at most `rank`.

    Built as G G^T - H H^T with G of ceil(rank/2) and H of floor(rank/2)
    Gaussian columns, so the sign-indefinite sample never exceeds the
    requested rank.
    """
    rng = np.random.default_rng(trial_seed)
    kg = (rank + 1) // 2
    kh = rank // 2
    g = rng.standard_normal((n, kg))
    Z = g @ g.T
    if kh > 0:
        h = rng.standard_normal((n, kh))
        Z -= h @ h.T
    return Z / np.linalg.norm(Z)


def estimate_rip(op, rank, trials, seed):
    """Monte-Carlo lower bound on the rank-`rank` isometry constant."""
    if not 1 <= rank <= op.n:
        raise ValueError(f"rank must be in [1, {op.n}], got {rank}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    worst = -1.0
    worst_seed = _trial_seed(seed, 0)
    for k in range(trials):
        ts = _trial_seed(seed, k)
        Z = draw_rip_sample(op.n, rank, ts)
        val = apply_kernel(op.mats2d, np.ascontiguousarray(Z.ravel()), op.scale)
        dev = abs(float(val @ val) - 1.0)
        if dev > worst:
            worst = dev
            worst_seed = ts
    return RipEstimate(
        rank=rank, trials=trials, delta_lower=worst, worst_case_sample_seed=worst_seed, seed=seed
    )
