import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shear_oracle.numeric import (
    Rng,
    derive_seed,
    matmul,
    solve_weighted_least_squares,
    xavier_uniform,
)


class TestMatmul:
    def test_identity(self):
        out = matmul(np.eye(2), np.array([[3.0], [4.0]]))
        assert np.array_equal(out, np.array([[3.0], [4.0]]))

    def test_zero(self):
        out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((2, 1)))
        assert np.array_equal(out, np.zeros((2, 1)))

    def test_hand_multiplication(self):
        # [[1,2],[3,4]] @ [[5],[6]]: rows dotted by hand.
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        b = np.array([[5.0], [6.0]])
        expected = np.array([[1 * 5 + 2 * 6], [3 * 5 + 4 * 6]], dtype=float)
        assert np.array_equal(matmul(a, b), expected)

    def test_dimension_mismatch_reports_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.ones((2, 3)), np.ones((2, 2)))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_associativity(self, seed):
        rng = np.random.Generator(np.random.Philox(key=seed))
        a, b, c = (rng.uniform(-1, 1, (4, 4)) for _ in range(3))
        left = matmul(matmul(a, b), c)
        right = matmul(a, matmul(b, c))
        assert np.max(np.abs(left - right)) < 1e-10

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_result_finite(self, seed):
        rng = np.random.Generator(np.random.Philox(key=seed))
        a = rng.uniform(-10, 10, (3, 5))
        b = rng.uniform(-10, 10, (5, 2))
        assert np.all(np.isfinite(matmul(a, b)))


class TestWeightedLeastSquares:
    def test_exact_fit_line_through_origin(self):
        res = solve_weighted_least_squares(
            np.array([[1.0], [2.0]]), np.array([2.0, 4.0]), np.array([1.0, 1.0])
        )
        assert res.beta == pytest.approx([2.0])
        assert not res.used_fallback_ridge

    def test_unweighted_mean(self):
        # Intercept-only regression: beta is the mean of y.
        res = solve_weighted_least_squares(
            np.array([[1.0], [1.0]]), np.array([1.0, 3.0]), np.array([1.0, 1.0])
        )
        assert res.beta == pytest.approx([(1.0 + 3.0) / 2])

    def test_weighted_mean(self):
        # Analytic weighted mean (3*1 + 1*3) / (3 + 1).
        res = solve_weighted_least_squares(
            np.array([[1.0], [1.0]]), np.array([1.0, 3.0]), np.array([3.0, 1.0])
        )
        assert res.beta == pytest.approx([(3 * 1 + 1 * 3) / 4])

    def test_rank_deficient_uses_fallback_and_flags(self):
        # Two identical columns: singular normal equations at ridge 0.
        x = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        res = solve_weighted_least_squares(x, np.array([1.0, 2.0, 3.0]), np.ones(3))
        assert res.used_fallback_ridge
        assert np.all(np.isfinite(res.beta))
        # Fitted values still reproduce y for this consistent system.
        assert x @ res.beta == pytest.approx([1.0, 2.0, 3.0], abs=1e-6)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_matches_normal_equations_oracle(self, seed):
        # Independent oracle: unweighted normal equations via numpy lstsq.
        rng = np.random.Generator(np.random.Philox(key=seed))
        x = rng.uniform(-1, 1, (20, 5))
        y = rng.uniform(-1, 1, 20)
        oracle = np.linalg.lstsq(x, y, rcond=None)[0]
        res = solve_weighted_least_squares(x, y, np.ones(20))
        assert np.max(np.abs(res.beta - oracle)) < 1e-8

    def test_ridge_shrinks_solution(self):
        x = np.array([[1.0], [1.0]])
        y = np.array([2.0, 2.0])
        plain = solve_weighted_least_squares(x, y, np.ones(2), ridge=0.0)
        shrunk = solve_weighted_least_squares(x, y, np.ones(2), ridge=1.0)
        # beta = sum(w x y) / (sum(w x^2) + ridge) = 4 / 3
        assert shrunk.beta == pytest.approx([4.0 / 3.0])
        assert abs(shrunk.beta[0]) < abs(plain.beta[0])

    def test_rejects_bad_weights(self):
        x = np.array([[1.0]])
        with pytest.raises(ValueError, match="finite and nonnegative"):
            solve_weighted_least_squares(x, np.array([1.0]), np.array([-1.0]))
        with pytest.raises(ValueError, match="at least one weight"):
            solve_weighted_least_squares(x, np.array([1.0]), np.array([0.0]))
        with pytest.raises(ValueError, match="inconsistent lengths"):
            solve_weighted_least_squares(x, np.array([1.0, 2.0]), np.array([1.0]))


class TestXavierUniform:
    def test_bound_formula(self):
        limit = np.sqrt(6.0 / (17 + 64))
        w = xavier_uniform(17, 64, Rng(0))
        assert w.shape == (64, 17)
        assert np.all(np.abs(w) <= limit)

    def test_determinism(self):
        assert np.array_equal(xavier_uniform(8, 4, Rng(123)), xavier_uniform(8, 4, Rng(123)))

    def test_large_sample_mean(self):
        # Uniform on [-L, L] has variance L^2/3, so the mean of N draws has
        # standard error L/sqrt(3N). 3-sigma band at N = 10^6.
        n = 1000
        w = xavier_uniform(n, n, Rng(7))
        limit = np.sqrt(6.0 / (n + n))
        se = limit / np.sqrt(3 * n * n)
        assert abs(w.mean()) < 3 * se

    @given(st.integers(0, 2**32 - 1), st.integers(1, 40), st.integers(1, 40))
    @settings(max_examples=30, deadline=None)
    def test_never_exceeds_limit(self, seed, fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = xavier_uniform(fan_in, fan_out, Rng(seed))
        assert np.all(np.abs(w) <= limit)

    def test_rejects_zero_fans(self):
        with pytest.raises(ValueError):
            xavier_uniform(0, 3, Rng(0))


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(99).uniform(0, 1, 100)
        b = Rng(99).uniform(0, 1, 100)
        assert np.array_equal(a, b)

    def test_derive_is_deterministic_and_distinct(self):
        child1 = Rng(5).derive(0).uniform(0, 1, 10)
        child1_again = Rng(5).derive(0).uniform(0, 1, 10)
        child2 = Rng(5).derive(1).uniform(0, 1, 10)
        assert np.array_equal(child1, child1_again)
        assert not np.array_equal(child1, child2)

    def test_derive_seed_chains(self):
        assert derive_seed(1, 2, 3) == derive_seed(derive_seed(1, 2), 3)
        assert derive_seed(1, 2) != derive_seed(2, 1)
