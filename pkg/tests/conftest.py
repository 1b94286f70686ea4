"""Shared randomized-instance helpers for the test suite."""

import numpy as np
import pytest

from adacca.manifold import GStiefelPoint, MetricMatrix, TangentVector


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, cond_spread=1.0):
    """Random SPD matrix with eigenvalues spread around 1."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = np.exp(cond_spread * rng.standard_normal(d))
    return (Q * w) @ Q.T


def random_feasible(rng, metric: MetricMatrix, p) -> GStiefelPoint:
    """Random point with X^T G X = I, built by whitening a Gaussian draw."""
    d = metric.dim
    A = rng.standard_normal((d, p))
    M = A.T @ metric.G @ A
    w, V = np.linalg.eigh(M)
    return GStiefelPoint((A @ (V / np.sqrt(w))) @ V.T, metric)


def random_tangent(rng, base: GStiefelPoint) -> TangentVector:
    """Random tangent at base: remove the symmetric part of X^T G Z."""
    X, G = base.X, base.metric.G
    Z = rng.standard_normal(X.shape)
    S = X.T @ G @ Z
    return TangentVector(Z - X @ ((S + S.T) / 2), base)
