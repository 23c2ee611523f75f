import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bartpp.diagnostics import aae, autocorrelation, gelman_rubin, hdi, rmse, summarize


class TestScores:
    def test_example(self):
        assert aae([1, 2, 3], [1, 3, 5]) == pytest.approx(1.0)
        assert rmse([1, 2, 3], [1, 3, 5]) == pytest.approx(math.sqrt(5 / 3))

    def test_perfect(self):
        assert aae([4, 5], [4, 5]) == 0.0
        assert rmse([4, 5], [4, 5]) == 0.0

    def test_rmse_at_least_aae(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.normal(size=(2, 30))
            assert rmse(a, b) >= aae(a, b) - 1e-15

    @pytest.mark.parametrize("fn", [aae, rmse])
    def test_errors(self, fn):
        with pytest.raises(ValueError):
            fn([1, 2], [1])
        with pytest.raises(ValueError):
            fn([], [])


class TestHdi:
    def test_integers(self):
        assert hdi(np.arange(1, 101)) == (1.0, 95.0)

    def test_shuffled_input(self):
        x = np.random.default_rng(0).permutation(np.arange(1, 101))
        assert hdi(x) == (1.0, 95.0)

    def test_uniform_length(self):
        x = np.random.default_rng(1).random(20000)
        lo, hi = hdi(x, 0.9)
        assert hi - lo == pytest.approx(0.9, abs=0.01)

    def test_skewed_shorter_than_central(self):
        x = np.random.default_rng(2).exponential(size=20000)
        lo, hi = hdi(x)
        c_lo, c_hi = np.quantile(x, [0.025, 0.975])
        assert hi - lo < c_hi - c_lo
        assert lo < c_lo

    def test_columns(self):
        x = np.column_stack([np.arange(1, 101), np.arange(1, 101) * 2.0])
        lo, hi = hdi(x)
        assert_allclose(lo, [1, 2])
        assert_allclose(hi, [95, 190])

    def test_coverage(self):
        rng = np.random.default_rng(3)
        for n in (20, 37, 101, 1000):
            x = rng.gamma(2.0, size=n)
            lo, hi = hdi(x)
            assert lo <= hi
            assert np.sum((x >= lo) & (x <= hi)) >= 0.95 * n - 1

    def test_too_few(self):
        with pytest.raises(ValueError):
            hdi(np.arange(10))


class TestRhat:
    def test_identical_distributions_near_one(self):
        rng = np.random.default_rng(3)
        assert gelman_rubin(rng.normal(size=(4, 2000))) == pytest.approx(1.0, abs=0.01)

    def test_shifted_chains_large(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 500)) + np.array([[0], [5], [10]])
        assert gelman_rubin(x) > 3

    def test_hand_computed(self):
        x = np.array([[1.0, 2.0, 3.0], [2.0, 3.0, 4.0]])
        # W = 1, B = 3 * 0.5 = 1.5, V = 2/3 + 0.5
        assert gelman_rubin(x) == pytest.approx(math.sqrt((2 / 3 + 0.5) / 1.0))

    def test_constant_chains(self):
        assert gelman_rubin(np.ones((3, 10))) == 1.0
        assert gelman_rubin(np.array([[1.0] * 5, [2.0] * 5])) == math.inf

    def test_vectorised(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(3, 400, 4))
        r = gelman_rubin(x)
        assert r.shape == (4,)
        assert_allclose(r, [gelman_rubin(x[:, :, j]) for j in range(4)])

    def test_single_chain_rejected(self):
        with pytest.raises(ValueError):
            gelman_rubin(np.zeros((1, 10)))


class TestAutocorrelation:
    def test_ar1(self):
        rng = np.random.default_rng(6)
        phi, n = 0.7, 50000
        x = np.zeros(n)
        e = rng.normal(size=n)
        for t in range(1, n):
            x[t] = phi * x[t - 1] + e[t]
        acf = autocorrelation(x, 3)
        assert_allclose(acf, [1, 0.7, 0.49, 0.343], atol=0.02)

    def test_constant(self):
        assert_allclose(autocorrelation(np.ones(10), 2), [1, 0, 0])


class TestSummarize:
    def test_shapes_and_scores(self):
        rng = np.random.default_rng(7)
        chains = [rng.normal(10, 1, size=(200, 5)) for _ in range(3)]
        s = summarize(chains, truth=np.full(5, 10.0))
        assert len(s) == 5
        assert np.all(s.hdi_low <= s.mean) and np.all(s.mean <= s.hdi_high)
        assert s.scores["mean"]["aae"] < 0.2
        assert np.all(s.rhat < 1.1)

    def test_pooled_mean(self):
        a = np.ones((30, 2))
        b = 3 * np.ones((30, 2))
        s = summarize([a, b])
        assert_allclose(s.mean, [2, 2])
        assert np.all(s.rhat == math.inf)

    def test_permutation_of_draws_invariant(self):
        rng = np.random.default_rng(8)
        chains = [rng.gamma(3, size=(100, 4)) for _ in range(2)]
        s1 = summarize(chains)
        s2 = summarize([c[rng.permutation(100)] for c in chains])
        assert_allclose(s1.mean, s2.mean)
        assert_allclose(s1.median, s2.median)
        assert_allclose(s1.hdi_low, s2.hdi_low)

    def test_scaling_equivariant(self):
        rng = np.random.default_rng(9)
        chains = [rng.gamma(3, size=(100, 4)) for _ in range(2)]
        s1, s2 = summarize(chains), summarize([5 * c for c in chains])
        assert_allclose(5 * s1.mean, s2.mean)
        assert_allclose(5 * s1.hdi_high, s2.hdi_high)
        assert_allclose(s1.rhat, s2.rhat)

    def test_single_chain_split(self):
        x = np.concatenate([np.zeros(50), np.ones(50)]).reshape(-1, 1) + np.random.default_rng(0).normal(0, 0.01, (100, 1))
        assert summarize([x]).rhat[0] > 2

    def test_few_draws_use_range(self):
        s = summarize([np.arange(5.0).reshape(-1, 1)])
        assert (s.hdi_low[0], s.hdi_high[0]) == (0.0, 4.0)

    def test_misaligned(self):
        with pytest.raises(ValueError):
            summarize([np.ones((10, 2)), np.ones((10, 3))])
