import numpy as np
import pytest

from vifplan.errors import DegenerateResponse, NotPositiveDefinite
from vifplan.linalg import cholesky, least_squares, pivoted_rank, solve_spd


class TestCholesky:
    def test_identity(self):
        assert np.allclose(cholesky(np.eye(3)), np.eye(3))

    def test_hand_factorization(self):
        # [[4,2],[2,3]] factors as [[2,0],[1,sqrt(2)]]
        lower = cholesky(np.array([[4.0, 2.0], [2.0, 3.0]]))
        assert np.allclose(lower, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-14)
        assert np.allclose(lower @ lower.T, [[4.0, 2.0], [2.0, 3.0]], rtol=1e-12)

    def test_indefinite_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            cholesky(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_roundtrip_random_spd(self):
        rng = np.random.default_rng(7)
        for n in range(1, 21):
            a = rng.standard_normal((n + 3, n))
            spd = a.T @ a + 1e-3 * np.eye(n)
            lower = cholesky(spd)
            scale = np.abs(spd).max()
            assert np.abs(lower @ lower.T - spd).max() <= 1e-10 * scale
            assert np.allclose(lower, np.tril(lower))


class TestSolveSpd:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.0])
        assert np.allclose(solve_spd(np.eye(3), b), b)

    def test_diagonal(self):
        x = solve_spd(np.array([[2.0, 0.0], [0.0, 4.0]]), [2.0, 8.0])
        assert np.allclose(x, [1.0, 2.0])

    def test_residual_random_spd(self):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((8, 5))
        spd = a.T @ a + 0.1 * np.eye(5)
        b = rng.standard_normal(5)
        x = solve_spd(spd, b)
        assert np.linalg.norm(spd @ x - b) <= 1e-10 * np.linalg.norm(b)

    def test_not_pd_propagates(self):
        with pytest.raises(NotPositiveDefinite):
            solve_spd(np.zeros((2, 2)), [1.0, 1.0])


class TestLeastSquares:
    def test_exact_fit(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((10, 3))
        beta = np.array([1.0, -2.0, 0.5])
        y = x @ beta
        fit = least_squares(x, y)
        assert fit.residual_ss <= 1e-12
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.rank == 3
        assert fit.residual_dof == 7

    def test_proportional_single_column(self):
        fit = least_squares(np.array([[1.0], [2.0], [3.0]]), [2.0, 4.0, 6.0])
        assert fit.coefficients[0] == pytest.approx(2.0, abs=1e-12)
        assert fit.residual_ss == pytest.approx(0.0, abs=1e-12)

    def test_duplicate_columns_match_single_column_fit(self):
        rng = np.random.default_rng(5)
        col = rng.standard_normal(12)
        y = 3.0 * col + rng.standard_normal(12)
        dup = least_squares(np.column_stack([col, col]), y)
        single = least_squares(col[:, None], y)
        assert dup.rank == 1
        assert np.allclose(dup.fitted, single.fitted, atol=1e-12)
        assert dup.r_squared == pytest.approx(single.r_squared, abs=1e-12)

    def test_centered_r_squared(self):
        # y on a constant column with center_y gives r_squared 0
        y = np.array([1.0, 2.0, 3.0, 4.0])
        fit = least_squares(np.ones((4, 1)), y, center_y=True)
        assert fit.r_squared == pytest.approx(0.0, abs=1e-12)
        assert fit.total_ss == pytest.approx(5.0)

    def test_degenerate_response(self):
        with pytest.raises(DegenerateResponse):
            least_squares(np.ones((4, 1)), [2.0, 2.0, 2.0, 2.0], center_y=True)
        with pytest.raises(DegenerateResponse):
            least_squares(np.ones((4, 1)), [0.0, 0.0, 0.0, 0.0])

    def test_residuals_orthogonal_to_columns(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            n = int(rng.integers(5, 40))
            p = int(rng.integers(1, min(n - 1, 6) + 1))
            x = rng.standard_normal((n, p))
            y = rng.standard_normal(n)
            fit = least_squares(x, y)
            resid = y - fit.fitted
            scale = np.linalg.norm(y) * np.abs(x).max()
            assert np.abs(x.T @ resid).max() <= 1e-10 * max(scale, 1.0)

    def test_invariant_under_column_recombination(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            n, p = 15, 4
            x = rng.standard_normal((n, p))
            y = rng.standard_normal(n)
            t = rng.standard_normal((p, p))
            while abs(np.linalg.det(t)) < 1e-3:
                t = rng.standard_normal((p, p))
            a = least_squares(x, y, center_y=True)
            b = least_squares(x @ t, y, center_y=True)
            assert np.allclose(a.fitted, b.fitted, atol=1e-9)
            assert a.r_squared == pytest.approx(b.r_squared, abs=1e-10)


class TestPivotedRank:
    def test_full_and_deficient(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((9, 3))
        assert pivoted_rank(x) == 3
        assert pivoted_rank(np.column_stack([x, x[:, 0]])) == 3
        assert pivoted_rank(np.zeros((4, 2))) == 0
