import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from bdeepnoise.distributions import (AdjacentTruncatedNormalMixture, RngStream,
                                      TruncatedNormalSpec, logsumexp, normal_cdf,
                                      normal_logcdf_diff, normal_logpdf, sample_categorical,
                                      sample_inverse_gamma, sample_mixture, sample_mixture_arrays,
                                      sample_normal, sample_standard_truncated,
                                      sample_truncated_normal, truncated_normal_moments)


def tn_mean_by_quadrature(a, b):
    """Mean of N(0,1) truncated to [a, b] by direct integration."""
    z = integrate.quad(lambda t: math.exp(-0.5 * t * t), a, b, epsabs=0, epsrel=1e-13)[0]
    m = integrate.quad(lambda t: t * math.exp(-0.5 * t * t), a, b, epsabs=0, epsrel=1e-13)[0]
    return m / z


class TestRngStream:
    def test_same_key_same_draws(self):
        a = RngStream(5, 3).generator.random(10)
        b = RngStream(5, 3).generator.random(10)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(5, 3).generator.random(1000)
        b = RngStream(5, 4).generator.random(1000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1

    def test_child_does_not_touch_parent(self):
        parent = RngStream(1)
        first = parent.child(2).generator.random(3)
        parent.generator.random(100)
        np.testing.assert_array_equal(parent.child(2).generator.random(3), first)
        assert not np.array_equal(parent.child(3).generator.random(3), first)


class TestDensities:
    def test_normal_logpdf_at_zero(self):
        assert normal_logpdf(0.0, 0.0, 1.0) == pytest.approx(-0.9189385, abs=1e-7)

    def test_normal_cdf_at_zero(self):
        assert normal_cdf(0.0) == 0.5

    def test_logcdf_diff_deep_left_tail(self):
        # log(Phi(-8) - Phi(-9)) from the asymptotic tail series of Phi
        def log_tail(x):
            x = abs(x)
            series = 1 - 1 / x**2 + 3 / x**4 - 15 / x**6 + 105 / x**8 - 945 / x**10
            return -0.5 * x * x - math.log(x) - 0.5 * math.log(2 * math.pi) + math.log(series)
        oracle = log_tail(-8) + math.log1p(-math.exp(log_tail(-9) - log_tail(-8)))
        assert oracle == pytest.approx(-35.0136, abs=1e-3)
        assert normal_logcdf_diff(-8.0, -9.0) == pytest.approx(oracle, abs=1e-6)

    def test_logcdf_diff_is_symmetric(self):
        assert normal_logcdf_diff(9.0, 8.0) == pytest.approx(normal_logcdf_diff(-8.0, -9.0), rel=1e-12)

    def test_logcdf_diff_extreme(self):
        val = normal_logcdf_diff(-40.0, -41.0)
        assert np.isfinite(val)
        assert val == pytest.approx(-0.5 * 40**2 - math.log(40) - 0.5 * math.log(2 * math.pi), abs=1e-2)

    def test_logcdf_diff_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            normal_logcdf_diff(1.0, 1.0)

    def test_logsumexp_matches_scipy(self, rng):
        x = rng.normal(size=(4, 7)) * 300
        np.testing.assert_allclose(logsumexp(x, axis=1), special.logsumexp(x, axis=1), rtol=1e-13)
        assert logsumexp(np.array([-np.inf, -np.inf])) == -np.inf

    @pytest.mark.parametrize("a,b", [(0.0, np.inf), (-1.0, 2.0), (3.0, 3.5), (10.0, np.inf)])
    def test_truncated_moments(self, a, b):
        mean, var = truncated_normal_moments(TruncatedNormalSpec(0.0, 1.0, a, b))
        ref = stats.truncnorm(a, b)
        assert mean == pytest.approx(ref.mean(), rel=1e-9)
        assert var == pytest.approx(ref.var(), rel=1e-6)


class TestSampleNormal:
    def test_moments(self):
        gen = RngStream(0).generator
        x = sample_normal(3.0, 4.0, gen, size=10**6)
        assert x.mean() == pytest.approx(3.0, abs=0.01)
        assert x.var() == pytest.approx(4.0, abs=0.05)

    def test_tiny_variance(self):
        assert sample_normal(1.5, 1e-12, RngStream(0)) == pytest.approx(1.5, abs=1e-5)

    def test_rejects_nonpositive_variance(self):
        with pytest.raises(ValueError):
            sample_normal(0.0, 0.0, RngStream(0))


class TestTruncatedNormal:
    def test_untruncated_mean(self):
        x = sample_truncated_normal(TruncatedNormalSpec(0.0, 1.0), RngStream(1), size=10**5)
        assert abs(x.mean()) < 0.02

    def test_half_line_mean(self):
        oracle = tn_mean_by_quadrature(0.0, 12.0)
        assert oracle == pytest.approx(0.7979, abs=1e-4)
        x = sample_truncated_normal(TruncatedNormalSpec(0.0, 1.0, 0.0, math.inf), RngStream(2), size=10**6)
        assert x.min() >= 0.0
        assert x.mean() == pytest.approx(oracle, abs=0.01)

    def test_far_tail_mean(self):
        # E[Z | Z > 10] = phi(10) / Q(10), Q via the complementary error function
        oracle = math.exp(-50) / math.sqrt(2 * math.pi) / (0.5 * special.erfc(10 / math.sqrt(2)))
        assert oracle == pytest.approx(10.0981, abs=1e-4)
        x = sample_truncated_normal(TruncatedNormalSpec(0.0, 1.0, 10.0, math.inf), RngStream(3), size=10**6)
        assert x.min() >= 10.0
        assert x.mean() == pytest.approx(oracle, abs=0.01)

    @pytest.mark.parametrize("a,b", [(-1.0, 0.5), (2.0, 2.1), (-30.0, -29.0), (6.0, 6.001), (-np.inf, -7.0)])
    def test_goodness_of_fit(self, a, b):
        z = sample_standard_truncated(np.full(10**5, a), np.full(10**5, b), RngStream(4))
        assert np.all((z >= a) & (z <= b))
        if b - a < 1e-2:
            return
        assert stats.kstest(z, stats.truncnorm(a, b).cdf).pvalue > 1e-3

    @given(loc=st.floats(-50, 50), scale=st.floats(1e-3, 10), lo=st.floats(-60, 60),
           width=st.floats(1e-6, 50))
    @settings(max_examples=200, deadline=None)
    def test_draws_stay_in_interval(self, loc, scale, lo, width):
        hi = lo + width
        x = sample_truncated_normal((loc, scale, lo, hi), RngStream(7), size=50)
        assert np.all(np.isfinite(x))
        assert np.all((x >= lo) & (x <= hi))

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            TruncatedNormalSpec(0.0, 1.0, 1.0, 0.0)

    def test_reproducible(self):
        spec = TruncatedNormalSpec(0.3, 2.0, 1.0, 4.0)
        a = sample_truncated_normal(spec, RngStream(9, 1), size=100)
        b = sample_truncated_normal(spec, RngStream(9, 1), size=100)
        np.testing.assert_array_equal(a, b)


class TestInverseGamma:
    def test_mean(self):
        x = sample_inverse_gamma(3.0, 4.0, RngStream(0), size=10**6)
        assert x.mean() == pytest.approx(2.0, abs=0.02)

    def test_vague_prior_draws(self):
        a = b = 1e-3
        x = sample_inverse_gamma(a, b, RngStream(1), size=2 * 10**5)
        assert np.all(x > 0) and np.all(np.isfinite(x))
        # for tiny shape the Gamma(a) CDF is x^a / Gamma(a + 1) near zero
        log_median = math.log(b) - (math.log(0.5) + special.gammaln(a + 1)) / a
        assert np.median(np.log(x)) == pytest.approx(log_median, abs=10.0)

    def test_median_matches_gamma_quantile(self):
        # median of IG(a, b) is b over the median of Gamma(a, 1)
        a, b = 0.5, 1.0
        oracle = b / special.gammaincinv(a, 0.5)
        x = sample_inverse_gamma(a, b, RngStream(2), size=2 * 10**5)
        assert np.median(x) == pytest.approx(oracle, rel=0.02)

    def test_reciprocal_gamma_law(self):
        x = sample_inverse_gamma(2.5, 1.7, RngStream(3), size=10**5)
        assert stats.kstest(1.0 / x, stats.gamma(2.5, scale=1 / 1.7).cdf).pvalue > 1e-3

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (1.0, -1.0)])
    def test_rejects_bad_parameters(self, a, b):
        with pytest.raises(ValueError):
            sample_inverse_gamma(a, b, RngStream(0))


class TestCategorical:
    def test_degenerate(self):
        idx = sample_categorical(np.tile([0.0, -np.inf], (1000, 1)), RngStream(0))
        assert np.all(idx == 0)
        idx = sample_categorical(np.tile([-np.inf, 0.0], (1000, 1)), RngStream(0))
        assert np.all(idx == 1)

    def test_equal_weights(self):
        idx = sample_categorical(np.zeros((10**5, 2)), RngStream(1))
        assert idx.mean() == pytest.approx(0.5, abs=0.01)

    def test_shift_invariance(self):
        idx = sample_categorical(np.tile([-1000.0, -999.0], (10**5, 1)), RngStream(2))
        assert idx.mean() == pytest.approx(math.e / (math.e + 1), abs=0.01)
        again = sample_categorical(np.tile([0.0, 1.0], (10**5, 1)), RngStream(2))
        np.testing.assert_array_equal(idx, again)

    def test_all_negative_infinity(self):
        with pytest.raises(ValueError):
            sample_categorical([-np.inf, -np.inf], RngStream(0))


class TestMixture:
    def test_single_component(self):
        spec = TruncatedNormalSpec(0.0, 1.0, -math.inf, math.inf)
        mix = AdjacentTruncatedNormalMixture((spec,), (0.0,))
        x = sample_mixture(mix, RngStream(0), size=10**5)
        assert stats.kstest(x, "norm").pvalue > 1e-3

    def test_complementary_halves_reassemble_normal(self):
        left = TruncatedNormalSpec(0.0, 1.0, -math.inf, 0.0)
        right = TruncatedNormalSpec(0.0, 1.0, 0.0, math.inf)
        mix = AdjacentTruncatedNormalMixture((left, right), (0.0, 0.0))
        x = sample_mixture(mix, RngStream(1), size=10**5)
        assert stats.kstest(x, "norm").pvalue > 0.01

    def test_mass_in_one_component(self):
        comps = (TruncatedNormalSpec(0.0, 1.0, -math.inf, -1.0),
                 TruncatedNormalSpec(0.0, 1.0, -1.0, 1.0),
                 TruncatedNormalSpec(0.0, 1.0, 1.0, math.inf))
        mix = AdjacentTruncatedNormalMixture(comps, (-np.inf, 0.0, -np.inf))
        x = sample_mixture(mix, RngStream(2), size=10**4)
        assert np.all((x >= -1.0) & (x <= 1.0))

    def test_weights_normalized(self):
        comps = (TruncatedNormalSpec(0.0, 1.0, -math.inf, 0.0), TruncatedNormalSpec(0.0, 1.0, 0.0, math.inf))
        mix = AdjacentTruncatedNormalMixture(comps, (-1000.0, -1001.0))
        assert mix.weights.sum() == pytest.approx(1.0)

    def test_intervals_must_be_adjacent(self):
        comps = (TruncatedNormalSpec(0.0, 1.0, -math.inf, 0.0), TruncatedNormalSpec(0.0, 1.0, 1.0, math.inf))
        with pytest.raises(ValueError, match="adjacent"):
            AdjacentTruncatedNormalMixture(comps, (0.0, 0.0))

    def test_array_sampler_matches_object_sampler_in_law(self):
        bounds = np.array([-np.inf, -1.0, 1.0, np.inf])
        lw = np.log(np.array([0.2, 0.5, 0.3]))[:, None] * np.ones((3, 10**5))
        loc = np.array([0.0, 0.5, 2.0])[:, None] * np.ones((3, 10**5))
        scale = np.ones((3, 10**5))
        x = sample_mixture_arrays(lw, loc, scale, bounds, RngStream(3))
        comps = tuple(TruncatedNormalSpec(l, 1.0, bounds[j], bounds[j + 1]) for j, l in enumerate([0.0, 0.5, 2.0]))
        mix = AdjacentTruncatedNormalMixture(comps, tuple(lw[:, 0]))
        y = sample_mixture(mix, RngStream(4), size=10**5)
        assert stats.ks_2samp(x, y).pvalue > 1e-3
        assert x.mean() == pytest.approx(mix.mean(), abs=0.02)
