"""Geometry primitives: feasibility, tangency, retractions, orthonormalization."""

import numpy as np
import pytest

from adacca.manifold import (
    GStiefelPoint,
    MetricMatrix,
    NotSPDError,
    RankDeficientError,
    TangentVector,
    feasibility_error,
    gram_schmidt_g,
    oblique_qr_retract,
    polar_retract,
    spd_inv_sqrt,
    spd_inv_sqrt_rank_one,
    tangency_error,
)

from conftest import random_feasible, random_spd, random_tangent


class TestMetricMatrix:
    def test_rejects_asymmetric(self, rng):
        G = rng.standard_normal((4, 4))
        with pytest.raises(NotSPDError):
            MetricMatrix(G)

    def test_rejects_indefinite(self):
        with pytest.raises(NotSPDError):
            MetricMatrix(np.diag([1.0, -1.0]))

    def test_accepts_spd(self, rng):
        G = MetricMatrix(random_spd(rng, 5))
        assert G.dim == 5


class TestFeasibilityError:
    def test_identity_case(self):
        G = MetricMatrix(np.eye(4))
        X = np.eye(4)[:, :2]
        assert feasibility_error(X, G) == 0.0

    def test_scaled_column(self):
        # p = 1, X = 2*e1: |4 - 1| = 3
        G = MetricMatrix(np.eye(3))
        X = 2.0 * np.eye(3)[:, :1]
        assert feasibility_error(X, G) == pytest.approx(3.0)

    def test_orthonormalized_input_is_feasible(self, rng):
        G = MetricMatrix(random_spd(rng, 7))
        pt = gram_schmidt_g(rng.standard_normal((7, 3)), G)
        # verify by direct multiplication, not through the class
        err = np.linalg.norm(pt.X.T @ G.G @ pt.X - np.eye(3))
        assert err <= 1e-12

    def test_dimension_mismatch(self, rng):
        G = MetricMatrix(np.eye(3))
        with pytest.raises(ValueError):
            feasibility_error(rng.standard_normal((4, 2)), G)


class TestPolarRetract:
    def test_zero_step_returns_base(self, rng):
        G = MetricMatrix(random_spd(rng, 6))
        X = random_feasible(rng, G, 2)
        xi = random_tangent(rng, X)
        R = polar_retract(X, xi, 0.0)
        np.testing.assert_allclose(R.X, X.X, atol=1e-14)

    def test_unit_circle_case(self):
        # d=2, p=1, G=I: (1,0) + (0,1) normalized
        G = MetricMatrix(np.eye(2))
        X = GStiefelPoint(np.array([[1.0], [0.0]]), G)
        xi = TangentVector(np.array([[0.0], [1.0]]), X)
        R = polar_retract(X, xi, 1.0)
        np.testing.assert_allclose(R.X, np.array([[1.0], [1.0]]) / np.sqrt(2), atol=1e-14)

    @pytest.mark.parametrize("zeta", [0.1, 1.0, -0.7])
    def test_result_feasible(self, rng, zeta):
        G = MetricMatrix(random_spd(rng, 8))
        X = random_feasible(rng, G, 3)
        xi = random_tangent(rng, X)
        R = polar_retract(X, xi, zeta)
        assert feasibility_error(R.X, G) <= 1e-12

    def test_local_rigidity(self, rng):
        # R_X(zeta xi) = X + zeta xi + O(zeta^2)
        G = MetricMatrix(random_spd(rng, 6))
        X = random_feasible(rng, G, 2)
        xi = random_tangent(rng, X)
        ratios = []
        for zeta in (1e-2, 1e-3, 1e-4):
            R = polar_retract(X, xi, zeta)
            ratios.append(np.linalg.norm(R.X - X.X - zeta * xi.Z) / zeta**2)
        bound = ratios[0] * 2 + 1.0
        assert all(r <= bound for r in ratios)


class TestObliqueQrRetract:
    def test_zero_step_returns_base(self, rng):
        G = MetricMatrix(random_spd(rng, 4))
        X = random_feasible(rng, G, 4)
        xi = random_tangent(rng, X)
        R = oblique_qr_retract(X, xi, 0.0)
        np.testing.assert_allclose(R.X, X.X, atol=1e-12)

    def test_scaling_removed(self):
        # G = I: orthonormalizing diag(2, 3) gives the identity
        from adacca.manifold import _gs_columns
        np.testing.assert_allclose(_gs_columns(np.diag([2.0, 3.0]), np.eye(2)),
                                   np.eye(2), atol=1e-14)

    def test_square_case_feasible(self, rng):
        G = MetricMatrix(random_spd(rng, 4))
        X = random_feasible(rng, G, 4)
        xi = random_tangent(rng, X)
        R = oblique_qr_retract(X, xi, 0.05)
        assert feasibility_error(R.X, G) <= 1e-12

    def test_rank_deficient_input_raises(self, rng):
        # degenerate columns must be reported, not absorbed
        from adacca.manifold import _gs_columns
        col = rng.standard_normal(4)
        with pytest.raises(RankDeficientError):
            _gs_columns(np.column_stack([col, col]), np.eye(4))


class TestGramSchmidtG:
    def test_already_orthonormal_fixed_point(self, rng):
        G = MetricMatrix(random_spd(rng, 6))
        X = random_feasible(rng, G, 3)
        again = gram_schmidt_g(X.X, G)
        np.testing.assert_allclose(again.X, X.X, atol=1e-12)

    def test_textbook_case(self):
        G = MetricMatrix(np.eye(3))
        A = np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]])
        Q = gram_schmidt_g(A, G).X
        np.testing.assert_allclose(Q, np.eye(3)[:, :2], atol=1e-14)

    def test_span_preserved(self, rng):
        import scipy.linalg
        G = MetricMatrix(random_spd(rng, 8))
        A = rng.standard_normal((8, 3))
        Q = gram_schmidt_g(A, G).X
        angles = scipy.linalg.subspace_angles(A, Q)
        assert np.max(angles) <= 1e-10

    def test_idempotent(self, rng):
        G = MetricMatrix(random_spd(rng, 5))
        Q1 = gram_schmidt_g(rng.standard_normal((5, 4)), G).X
        Q2 = gram_schmidt_g(Q1, G).X
        np.testing.assert_allclose(Q1, Q2, atol=1e-12)

    def test_rank_deficiency(self, rng):
        G = MetricMatrix(np.eye(4))
        A = rng.standard_normal((4, 2))
        A = np.column_stack([A[:, 0], A[:, 0]])
        with pytest.raises(RankDeficientError):
            gram_schmidt_g(A, G)


class TestSpdInvSqrt:
    def test_identity(self):
        np.testing.assert_allclose(spd_inv_sqrt(np.eye(3)), np.eye(3), atol=1e-14)

    def test_diagonal(self):
        R = spd_inv_sqrt(np.diag([4.0, 9.0]))
        np.testing.assert_allclose(R, np.diag([0.5, 1.0 / 3.0]), atol=1e-14)

    def test_postcondition_random(self, rng):
        M = random_spd(rng, 5)
        R = spd_inv_sqrt(M)
        np.testing.assert_allclose(R, R.T, atol=1e-12)
        assert np.linalg.norm(R @ M @ R - np.eye(5)) <= 1e-10

    def test_rejects_non_spd(self):
        with pytest.raises(NotSPDError):
            spd_inv_sqrt(np.diag([1.0, 0.0]))

    def test_rank_one_fast_path_matches(self, rng):
        z = rng.standard_normal(6)
        beta = 0.97
        R = spd_inv_sqrt_rank_one(beta, z)
        M = beta * np.eye(6) + np.outer(z, z)
        np.testing.assert_allclose(R, spd_inv_sqrt(M), atol=1e-12)

    def test_rank_one_zero_vector(self):
        R = spd_inv_sqrt_rank_one(4.0, np.zeros(3))
        np.testing.assert_allclose(R, 0.5 * np.eye(3), atol=1e-15)


class TestTangency:
    def test_scaling_preserves_tangency(self, rng):
        G = MetricMatrix(random_spd(rng, 6))
        X = random_feasible(rng, G, 2)
        xi = random_tangent(rng, X)
        for c in (-3.0, 0.0, 17.5):
            assert tangency_error(c * xi.Z, X) <= 1e-10 * max(1.0, c)

    def test_square_case_skew_recovery(self, rng):
        G = MetricMatrix(random_spd(rng, 4))
        X = random_feasible(rng, G, 4)
        xi = random_tangent(rng, X)
        Omega = xi.skew_part()
        np.testing.assert_allclose(Omega, -Omega.T, atol=1e-10)

    def test_non_tangent_rejected(self, rng):
        G = MetricMatrix(random_spd(rng, 5))
        X = random_feasible(rng, G, 2)
        with pytest.raises(ValueError):
            TangentVector(X.X.copy(), X)  # X itself is never tangent at X
