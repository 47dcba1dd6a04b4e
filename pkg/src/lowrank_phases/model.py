"""Planted low-rank instances: ground truth, measurements, objective, gradient.

The objective is f(U) = (1/4) * || forward(U U^T - X X^T) ||^2 and its
gradient is -adjoint(y - forward(U U^T)) @ U, so the origin and every U with
U U^T = X X^T are critical points.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import sensing
from .kernels import apply_kernel
from .util import eigh_descending, random_orthonormal


@dataclass(frozen=True)
class GroundTruth:
    """Planted factor X with its column basis and spectrum cached."""

    X: np.ndarray  # n x r_star
    V_X: np.ndarray  # orthonormal n x r_star basis of span(X)
    sigmas: np.ndarray  # descending singular values
    kappa: float
    seed: int
    kind: str

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def r_star(self):
        return self.X.shape[1]

    @property
    def spec_norm(self):
        return float(self.sigmas[0])

    @property
    def sigma_min(self):
        return float(self.sigmas[-1])

    @property
    def XXt(self):
        return self.X @ self.X.T

    def meta(self):
        return {
            "n": self.n,
            "r_star": self.r_star,
            "kind": self.kind,
            "seed": self.seed,
            "kappa": self.kappa,
            "sigmas": [float(s) for s in self.sigmas],
        }


def make_ground_truth(n, r_star, kind="orthonormal", seed=0, kappa=1.0):
    """Draw the planted factor.

    kind "orthonormal": X has orthonormal columns, all singular values 1.
    kind "conditioned": prescribed geometric spectrum from 1 down to 1/kappa
    with random orthonormal outer factors.
    """
    if not 1 <= r_star <= n:
        raise ValueError(f"need 1 <= r_star <= n, got r_star={r_star}, n={n}")
    rng = np.random.default_rng(seed)
    if kind == "orthonormal":
        X = random_orthonormal(n, r_star, rng)
        sigmas = np.ones(r_star)
        V_X = X.copy()
        kap = 1.0
    elif kind == "conditioned":
        if kappa < 1.0:
            raise ValueError(f"kappa must be >= 1, got {kappa}")
        if r_star == 1 and kappa != 1.0:
            raise ValueError("r_star=1 admits only kappa=1")
        if r_star == 1:
            sigmas = np.ones(1)
        else:
            sigmas = kappa ** (-np.arange(r_star) / (r_star - 1))
        left = random_orthonormal(n, r_star, rng)
        right = random_orthonormal(r_star, r_star, rng)
        X = left @ np.diag(sigmas) @ right.T
        V_X = left
        kap = float(sigmas[0] / sigmas[-1])
    else:
        raise ValueError(f"unknown ground-truth kind {kind!r}")
    X.setflags(write=False)
    V_X.setflags(write=False)
    return GroundTruth(X=X, V_X=V_X, sigmas=sigmas, kappa=kap, seed=seed, kind=kind)


@dataclass(frozen=True)
class ProblemInstance:
    """Measurements of one planted matrix plus cached spectral data.

    M is adjoint(forward(X X^T)); its top r_star eigenvectors V_L span the
    subspace that power iterations on (Id + mu M) converge to.
    """

    truth: GroundTruth
    op: sensing.SensingOperator
    y: np.ndarray  # length m
    M: np.ndarray  # n x n symmetric
    M_eigs: np.ndarray  # descending eigenvalues of M
    M_vecs: np.ndarray  # eigenvectors, deterministic signs
    V_L: np.ndarray  # first r_star eigenvectors
    XXt: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.truth.n

    @property
    def r_star(self):
        return self.truth.r_star

    @property
    def lambda1(self):
        return float(self.M_eigs[0])

    def meta(self):
        rs = self.r_star
        lam_next = float(self.M_eigs[rs]) if rs < self.n else 0.0
        return {
            **self.truth.meta(),
            "m": self.op.m,
            "op_seed": self.op.seed,
            "convention": self.op.convention,
            "lambda_1": self.lambda1,
            "lambda_rstar": float(self.M_eigs[rs - 1]),
            "lambda_rstar_plus1": lam_next,
        }


def make_instance(truth, op):
    """Measure the planted matrix and cache the eigendecomposition of M."""
    if op.n != truth.n:
        raise ValueError(f"operator dimension {op.n} != ground truth dimension {truth.n}")
    XXt = truth.XXt
    y = sensing.apply_operator(op, XXt)
    M = sensing.apply_adjoint(op, y)
    M = 0.5 * (M + M.T)
    vals, vecs = eigh_descending(M)
    V_L = np.ascontiguousarray(vecs[:, : truth.r_star])
    for arr in (y, M, vals, vecs, V_L, XXt):
        arr.setflags(write=False)
    return ProblemInstance(
        truth=truth, op=op, y=y, M=M, M_eigs=vals, M_vecs=vecs, V_L=V_L, XXt=XXt
    )


def _check_factor(inst, U):
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != inst.n:
        raise ValueError(f"factor must be {inst.n} x r, got shape {U.shape}")
    return U


def residual(inst, U):
    """Measurement residual y - forward(U U^T)."""
    U = _check_factor(inst, U)
    P = U @ U.T
    pred = apply_kernel(inst.op.mats2d, np.ascontiguousarray(P.ravel()), inst.op.scale)
    return inst.y - pred


def loss(inst, U):
    """Training objective (1/4) || y - forward(U U^T) ||^2."""
    r = residual(inst, U)
    return 0.25 * float(r @ r)


def gradient(inst, U):
    """Gradient -adjoint(y - forward(U U^T)) @ U."""
    U = _check_factor(inst, U)
    r = residual(inst, U)
    S = sensing.apply_adjoint(inst.op, r)
    return -(S @ U)
