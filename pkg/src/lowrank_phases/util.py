"""Small shared linear-algebra helpers."""

import numpy as np


def fix_signs(V, tol=1e-12):
    """Flip column signs so each column's first non-negligible entry is positive.

    An entry counts as nonzero when its magnitude exceeds `tol` times the
    column's max-abs entry.  Makes eigenvector/singular-vector bases
    deterministic up to the underlying LAPACK output.
    """
    V = np.array(V, copy=True)
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.max(np.abs(col))
        if big == 0.0:
            continue
        idx = np.argmax(np.abs(col) > tol * big)
        if col[idx] < 0:
            V[:, j] = -col
    return V


def random_orthonormal(n, k, rng):
    """n x k matrix with orthonormal columns from a sign-fixed QR of a Gaussian."""
    g = rng.standard_normal((n, k))
    q, r = np.linalg.qr(g)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d


def eigh_descending(M, tol=1e-12):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending,
    eigenvector signs fixed deterministically."""
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals, kind="stable")[::-1]
    return vals[order], fix_signs(vecs[:, order], tol=tol)
