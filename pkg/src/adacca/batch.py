"""Exact batch CCA solver used as ground truth for the streaming engine.

Solves the fixed-rank trace maximization

    max tr(U^T Cxy V N)   s.t.  U^T Cx U = I_p,  V^T Cy V = I_p

with a strictly decreasing diagonal weighting N that pins down column
order and removes the orthogonal-mixing ambiguity of the plain trace.
The solve whitens both views with triangular factors and reads the
answer off an SVD, which is equivalent to the symmetric-definite
generalized eigenproblem formulation but numerically stabler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

COND_LIMIT = 1e12


class IllConditionedError(ValueError):
    """Covariance factor condition estimate beyond the usable range."""


@dataclass(frozen=True)
class BrockettWeights:
    """Strictly decreasing positive diagonal weights, stored as a vector."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float).ravel()
        if w.size == 0:
            raise ValueError("weights must be nonempty")
        if np.any(w <= 0) or np.any(np.diff(w) >= 0):
            raise ValueError("weights must be strictly decreasing and positive")
        object.__setattr__(self, "w", w)

    @property
    def p(self) -> int:
        return self.w.size

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.w)


def default_weights(p: int) -> BrockettWeights:
    """N = diag(p, p-1, ..., 1) / p, unit-scale by construction."""
    return BrockettWeights(np.arange(p, 0, -1) / p)


@dataclass(frozen=True)
class BatchSolution:
    """Optimal bases with the compressed cross-covariance L = U^T Cxy V.

    L is diagonal with the canonical values sigma on its diagonal,
    nonnegative and nonincreasing.
    """

    U: np.ndarray
    V: np.ndarray
    L: np.ndarray
    sigma: np.ndarray


def _chol_factor(C: np.ndarray, name: str) -> np.ndarray:
    """Upper-triangular R with C = R^T R, guarded by a condition check."""
    try:
        R = scipy.linalg.cholesky(C, lower=False)
    except scipy.linalg.LinAlgError as exc:
        raise IllConditionedError(f"{name} is not positive-definite") from exc
    d = np.abs(np.diag(R))
    if d.max() > COND_LIMIT * d.min():
        raise IllConditionedError(
            f"{name} too ill-conditioned: factor diagonal ratio {d.max() / d.min():.3e}"
        )
    return R


def solve_batch(Cx: np.ndarray, Cy: np.ndarray, Cxy: np.ndarray, p: int) -> BatchSolution:
    """Solve the rank-p problem exactly via whitening + SVD.

    Factor Cx = Rx^T Rx and Cy = Ry^T Ry, compute the SVD of
    Rx^{-T} Cxy Ry^{-1}, and map the top p singular triplets back through
    the whitening.  Signs are fixed so each canonical value is
    nonnegative and the largest-magnitude entry of each U column is
    positive, making the output deterministic.
    """
    Cx = np.asarray(Cx, dtype=float)
    Cy = np.asarray(Cy, dtype=float)
    Cxy = np.asarray(Cxy, dtype=float)
    n, m = Cxy.shape
    if Cx.shape != (n, n) or Cy.shape != (m, m):
        raise ValueError("covariance shapes inconsistent with Cxy")
    if not 1 <= p <= min(n, m):
        raise ValueError(f"rank p={p} must be in [1, {min(n, m)}]")
    Rx = _chol_factor(Cx, "Cx")
    Ry = _chol_factor(Cy, "Cy")
    # M = Rx^{-T} Cxy Ry^{-1}
    M = scipy.linalg.solve_triangular(Rx, Cxy, trans="T", lower=False)
    M = scipy.linalg.solve_triangular(Ry, M.T, trans="T", lower=False).T
    P, s, Qt = np.linalg.svd(M)
    U = scipy.linalg.solve_triangular(Rx, P[:, :p], lower=False)
    V = scipy.linalg.solve_triangular(Ry, Qt[:p].T, lower=False)
    flip = np.sign(U[np.argmax(np.abs(U), axis=0), np.arange(p)])
    flip[flip == 0] = 1.0
    U = U * flip
    V = V * flip
    L = U.T @ Cxy @ V
    return BatchSolution(U=U, V=V, L=L, sigma=s[:p].copy())


def brockett_cost(U: np.ndarray, V: np.ndarray, Cxy: np.ndarray, N: BrockettWeights) -> float:
    """tr(U^T Cxy V N)."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    Cxy = np.asarray(Cxy, dtype=float)
    if U.shape[0] != Cxy.shape[0] or V.shape[0] != Cxy.shape[1]:
        raise ValueError("U/V rows inconsistent with Cxy")
    if U.shape[1] != V.shape[1] or U.shape[1] != N.p:
        raise ValueError("column counts of U, V and N disagree")
    # tr(U^T Cxy V N) = sum_k N_k (U^T Cxy V)_kk
    return float(np.diagonal(U.T @ Cxy @ V) @ N.w)
