"""Hot measurement kernels with a numba backend and a pure-numpy fallback.

The two operations that dominate every experiment are the forward map
(m inner products against dense n x n matrices) and its adjoint (a weighted
sum of the same matrices).  The numba kernels accumulate in a fixed
left-to-right order, so results are bit-reproducible and independent of any
BLAS threading configuration.  The numpy path delegates to BLAS GEMV, which
is usually faster but whose reduction order is an implementation detail.

Backend selection: environment variable LOWRANK_PHASES_BACKEND, value
"numba" (default when numba is importable) or "numpy".  `set_backend` can
override at runtime; `benchmarks/bench_kernels.py` compares both.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _backend_from_env():
    requested = os.environ.get("LOWRANK_PHASES_BACKEND", "numba").lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {requested!r}, expected 'numba' or 'numpy'")
    if requested == "numba" and not HAVE_NUMBA:
        return "numpy"
    return requested


_BACKEND = _backend_from_env()


def get_backend():
    return _BACKEND


def set_backend(name):
    """Switch kernel backend at runtime ('numba' or 'numpy')."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not importable")
    _BACKEND = name


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def _apply_numba(mats2d, zflat, scale):
        m, nn = mats2d.shape
        out = np.empty(m)
        for i in range(m):
            row = mats2d[i]
            acc = 0.0
            for j in range(nn):
                acc += row[j] * zflat[j]
            out[i] = acc * scale
        return out

    @numba.njit(cache=True)
    def _adjoint_numba(mats2d, y, scale):
        m, nn = mats2d.shape
        out = np.zeros(nn)
        for i in range(m):
            yi = y[i]
            row = mats2d[i]
            for j in range(nn):
                out[j] += yi * row[j]
        for j in range(nn):
            out[j] *= scale
        return out


def _apply_numpy(mats2d, zflat, scale):
    return (mats2d @ zflat) * scale


def _adjoint_numpy(mats2d, y, scale):
    return (y @ mats2d) * scale


def apply_kernel(mats2d, zflat, scale):
    """Per-measurement inner products: out[i] = scale * <mats[i], Z>."""
    if _BACKEND == "numba":
        return _apply_numba(mats2d, zflat, scale)
    return _apply_numpy(mats2d, zflat, scale)


def adjoint_kernel(mats2d, y, scale):
    """Weighted matrix sum, flattened: out = scale * sum_i y[i] * mats[i]."""
    if _BACKEND == "numba":
        return _adjoint_numba(mats2d, y, scale)
    return _adjoint_numpy(mats2d, y, scale)


def warmup():
    """Trigger JIT compilation on tiny inputs (no-op for the numpy backend)."""
    if _BACKEND != "numba":
        return
    mats2d = np.zeros((1, 4))
    _apply_numba(mats2d, np.zeros(4), 1.0)
    _adjoint_numba(mats2d, np.zeros(1), 1.0)
