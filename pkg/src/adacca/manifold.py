"""Geometry primitives for generalized Stiefel manifolds and orthogonal groups.

A generalized Stiefel manifold collects the d x p matrices X that are
orthonormal under an SPD metric G, i.e. X^T G X = I_p.  The square case
d = p is the generalized orthogonal group.  This module provides the
feasibility/tangency checks, the polar and oblique-QR retractions, and a
G-orthonormalizing factory used for feasible starting points.

Everything here is a pure function over immutable values; no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL_FEAS = 1e-8
TOL_TAN = 1e-8
TOL_SYM = 1e-12


class NotSPDError(ValueError):
    """Matrix expected to be symmetric positive-definite is not."""


class RankDeficientError(ValueError):
    """Matrix expected to have full column rank does not."""


@dataclass(frozen=True)
class MetricMatrix:
    """SPD metric G defining the inner product <a, b>_G = a^T G b.

    Symmetry and positive-definiteness are validated at construction
    (the latter by Cholesky factorization success); the factor is kept.
    """

    G: np.ndarray
    tol_sym: float = TOL_SYM
    chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ValueError(f"metric must be square, got shape {G.shape}")
        asym = np.linalg.norm(G - G.T)
        if asym > self.tol_sym * max(1.0, np.linalg.norm(G)):
            raise NotSPDError(f"metric not symmetric: asymmetry {asym:.3e}")
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise NotSPDError("metric not positive-definite") from exc
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "chol", L)

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ self.G @ b)


@dataclass(frozen=True)
class GStiefelPoint:
    """A d x p matrix X with X^T G X = I_p under the attached metric."""

    X: np.ndarray
    metric: MetricMatrix
    tol_feas: float = TOL_FEAS

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim != 2:
            raise ValueError("point must be a matrix")
        d, p = X.shape
        if p > d:
            raise ValueError(f"need p <= d, got shape {X.shape}")
        if d != self.metric.dim:
            raise ValueError(
                f"point rows {d} do not match metric dimension {self.metric.dim}"
            )
        err = feasibility_error(X, self.metric)
        if err > self.tol_feas:
            raise ValueError(f"point infeasible: ||X^T G X - I|| = {err:.3e}")
        object.__setattr__(self, "X", X)

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape


@dataclass(frozen=True)
class TangentVector:
    """Tangent direction Z at a base point: X^T G Z + Z^T G X = 0."""

    Z: np.ndarray
    base: GStiefelPoint
    tol_tan: float = TOL_TAN

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.shape != self.base.shape:
            raise ValueError(
                f"tangent shape {Z.shape} does not match base {self.base.shape}"
            )
        err = tangency_error(Z, self.base)
        if err > self.tol_tan * max(1.0, np.linalg.norm(Z)):
            raise ValueError(f"not tangent: residual {err:.3e}")
        object.__setattr__(self, "Z", Z)

    def skew_part(self) -> np.ndarray:
        """Recover Omega = X^T G Z; skew-symmetric in the square case."""
        X, G = self.base.X, self.base.metric.G
        return X.T @ G @ self.Z


def feasibility_error(X: np.ndarray, G: MetricMatrix) -> float:
    """Frobenius norm of X^T G X - I_p."""
    X = np.asarray(X, dtype=float)
    if X.shape[0] != G.dim:
        raise ValueError(f"X has {X.shape[0]} rows, metric dimension is {G.dim}")
    p = X.shape[1]
    return float(np.linalg.norm(X.T @ G.G @ X - np.eye(p)))


def tangency_error(Z: np.ndarray, base: GStiefelPoint) -> float:
    """Frobenius norm of X^T G Z + Z^T G X (zero on the tangent space)."""
    X, G = base.X, base.metric.G
    M = X.T @ G @ Z
    return float(np.linalg.norm(M + M.T))


def spd_inv_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root R of an SPD matrix: R M R = I.

    Computed by symmetric eigendecomposition.
    """
    M = np.asarray(M, dtype=float)
    if np.linalg.norm(M - M.T) > TOL_SYM * max(1.0, np.linalg.norm(M)):
        raise NotSPDError("input not symmetric")
    w, V = np.linalg.eigh(M)
    if w[0] <= 0:
        raise NotSPDError(f"input not positive-definite (min eigenvalue {w[0]:.3e})")
    return (V / np.sqrt(w)) @ V.T


def spd_inv_sqrt_rank_one(scale: float, z: np.ndarray) -> np.ndarray:
    """Closed-form (scale*I + z z^T)^(-1/2) for scale > 0.

    O(p^2) fast path for the rank-one-perturbed identity; falls back to
    scale^(-1/2) * I when z vanishes.
    """
    if scale <= 0:
        raise NotSPDError("scale must be positive")
    p = z.shape[0]
    s = float(z @ z)
    root = 1.0 / np.sqrt(scale)
    if s <= np.finfo(float).tiny:
        return root * np.eye(p)
    rho = 1.0 - np.sqrt(scale / (scale + s))
    return root * (np.eye(p) - rho * np.outer(z, z) / s)


def _gs_columns(A: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Column-wise Gram-Schmidt under G with one re-orthogonalization pass.

    Returns Q with Q^T G Q = I and triangular factor having positive
    diagonal (no sign flips are introduced).  Raises on rank deficiency.
    """
    A = np.array(A, dtype=float)
    d, p = A.shape
    Q = np.empty((d, p))
    GQ = np.empty((d, p))  # cache of G @ q_i columns
    for j in range(p):
        v = A[:, j]
        ref = np.sqrt(max(v @ G @ v, 0.0))
        for _ in range(2):  # second pass re-orthogonalizes
            if j:
                v = v - Q[:, :j] @ (GQ[:, :j].T @ v)
        Gv = G @ v
        nrm = v @ Gv
        if nrm <= 0 or np.sqrt(nrm) <= 1e-12 * max(ref, 1e-300):
            raise RankDeficientError(f"column {j} dependent on earlier columns")
        nrm = np.sqrt(nrm)
        Q[:, j] = v / nrm
        GQ[:, j] = Gv / nrm
    return Q


def gram_schmidt_g(A: np.ndarray, G: MetricMatrix) -> GStiefelPoint:
    """G-orthonormalize the columns of A, preserving their span."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] != G.dim:
        raise ValueError(f"A has {A.shape[0]} rows, metric dimension is {G.dim}")
    return GStiefelPoint(_gs_columns(A, G.G), G)


def polar_retract(X: GStiefelPoint, xi: TangentVector, zeta: float) -> GStiefelPoint:
    """Polar retraction (X + zeta*xi)(I + zeta^2 xi^T G xi)^(-1/2)."""
    if xi.base is not X and not np.array_equal(xi.base.X, X.X):
        raise ValueError("tangent vector is not based at X")
    if not np.isfinite(zeta):
        raise ValueError("step must be finite")
    G = X.metric.G
    Y = X.X + zeta * xi.Z
    S = np.eye(X.X.shape[1]) + zeta**2 * (xi.Z.T @ G @ xi.Z)
    return GStiefelPoint(Y @ spd_inv_sqrt(S), X.metric)


def oblique_qr_retract(X: GStiefelPoint, xi: TangentVector, zeta: float) -> GStiefelPoint:
    """QR-type retraction: G-orthonormal factor of X + zeta*xi.

    The Gram-Schmidt process runs under the G inner product with a
    positive-diagonal sign convention, so zeta = 0 reproduces X. Intended
    for the square (orthogonal group) case but valid for any p <= d.
    """
    if not np.isfinite(zeta):
        raise ValueError("step must be finite")
    Y = X.X + zeta * xi.Z
    return GStiefelPoint(_gs_columns(Y, X.metric.G), X.metric)
