import math

import numpy as np
import pytest
from scipy import stats

from bdeepnoise.activation import builtin
from bdeepnoise.distributions import RngStream
from bdeepnoise.model import (LayerParams, ModelParams, NetworkShape, PriorConfig,
                              forward_deterministic, forward_stochastic)
from bdeepnoise.oracle import (Grid1D, GewekeReport, geweke_compare, grid_conditional_v,
                               predictive_density_numeric, sample_prior_params, trapezoid_integral)


def scalar_model(act, betas, gammas, tau2, sigma2):
    L = len(betas) - 1
    layers = [LayerParams(weights=np.array([[b]]), biases=np.array([g]), preact_var=np.array([tau2]),
                          postact_var=np.array([sigma2]) if l < L else None,
                          weight_var=np.ones((1, 1)), bias_var=np.ones(1))
              for l, (b, g) in enumerate(zip(betas, gammas))]
    return ModelParams(NetworkShape(1, 1, (1,) * L, act), layers)


class TestGridConditional:
    @pytest.mark.parametrize("m,tau2,sigma2,u", [(0.0, 1.0, 1.0, 0.5), (1.5, 0.3, 2.0, -1.0),
                                                  (-2.0, 4.0, 0.05, 3.0)])
    def test_identity_is_conjugate(self, m, tau2, sigma2, u):
        g = grid_conditional_v(builtin("identity"), m, tau2, sigma2, u)
        prec = 1 / tau2 + 1 / sigma2
        assert g.masses.sum() == pytest.approx(1.0, abs=1e-6)
        assert g.means[0] == pytest.approx((m / tau2 + u / sigma2) / prec, abs=1e-6)
        assert g.variances[0] == pytest.approx(1 / prec, abs=1e-6)

    def test_total_mass(self, activation, rng):
        for _ in range(5):
            m, u = rng.normal(0, 2), rng.normal(0, 1.5)
            g = grid_conditional_v(activation, m, rng.uniform(0.05, 4), rng.uniform(0.05, 4), u)
            assert g.masses.sum() == pytest.approx(1.0, abs=1e-6)
            assert trapezoid_integral(g.nodes, g.density) == pytest.approx(1.0, abs=1e-12)

    def test_refinement_is_stable(self, activation):
        coarse = grid_conditional_v(activation, 0.3, 0.8, 0.4, 0.7, Grid1D(-12, 12, 100_000))
        fine = grid_conditional_v(activation, 0.3, 0.8, 0.4, 0.7, Grid1D(-12, 12, 200_000))
        assert np.max(np.abs(coarse.masses - fine.masses)) < 1e-5

    def test_far_tail_stays_finite(self):
        g = grid_conditional_v(builtin("hard_tanh"), 0.0, 1.0, 0.01, 30.0)
        assert np.all(np.isfinite(g.density))
        assert g.masses.sum() == pytest.approx(1.0, abs=1e-6)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            Grid1D(1.0, -1.0)


class TestPredictiveQuadrature:
    def test_no_hidden_layer_is_exact(self):
        params = scalar_model(builtin("relu"), [2.0], [0.5], 0.3, 0.0)
        y = np.linspace(-3, 5, 17)
        dens = predictive_density_numeric(params, 0.7, y)
        assert np.allclose(dens, stats.norm.pdf(y, 0.5 + 2.0 * 0.7, math.sqrt(0.3)), rtol=1e-12)

    def test_rejects_wide_layers(self):
        shape = NetworkShape(1, 1, (2,))
        params = sample_prior_params(shape, PriorConfig.uniform(3, 2), np.random.default_rng(0))
        with pytest.raises(ValueError, match="width"):
            predictive_density_numeric(params, 0.0, np.zeros(3))

    def test_tiny_variances_give_point_mass(self):
        params = scalar_model(builtin("hard_tanh"), [1.2, -0.8, 1.5], [0.1, 0.3, -0.2], 1e-6, 1e-6)
        centre = float(forward_deterministic(params, np.array([0.4]))[0])
        y = np.linspace(centre - 0.05, centre + 0.05, 20001)
        dens = predictive_density_numeric(params, 0.4, y)
        assert trapezoid_integral(y, dens) == pytest.approx(1.0, abs=1e-3)
        assert trapezoid_integral(y, y * dens) == pytest.approx(centre, abs=1e-3)

    def test_resolution_doubling(self):
        params = scalar_model(builtin("relu"), [1.0, 1.5, -0.7], [0.2, -0.1, 0.4], 0.5, 0.3)
        y = np.linspace(-4, 4, 401)
        a = predictive_density_numeric(params, 0.5, y, points=4096)
        b = predictive_density_numeric(params, 0.5, y, points=8192)
        assert np.max(np.abs(a - b)) < 1e-4

    def test_matches_simulation(self):
        params = scalar_model(builtin("leaky_relu"), [1.0, 1.5, -0.7], [0.2, -0.1, 0.4], 0.5, 0.3)
        draws, _ = forward_stochastic(params, np.full((100_000, 1), 0.5), RngStream(11))
        y = np.linspace(draws.min() - 1, draws.max() + 1, 20001)
        cdf = np.concatenate([[0], np.cumsum(0.5 * np.diff(y) * (lambda d: d[1:] + d[:-1])(
            predictive_density_numeric(params, 0.5, y)))])
        ks = stats.kstest(draws[:, 0], lambda t: np.interp(t, y, cdf)).statistic
        assert ks < 0.01


class TestGeweke:
    shape = NetworkShape(1, 1, (2,), builtin("relu"))
    prior = PriorConfig.uniform(6, 5)

    def test_correct_sampler_passes(self):
        report = geweke_compare(self.shape, self.prior, 2000, RngStream(5))
        assert report.passed, report.failing()
        assert all(np.isfinite(v) for v in report.z.values())

    def test_injected_fault_is_caught(self):
        report = geweke_compare(self.shape, self.prior, 2000, RngStream(5), fault="tau-rate-half")
        assert not report.passed
        assert any("preact_var" in k for k in report.failing())

    def test_zero_rounds(self):
        report = geweke_compare(self.shape, self.prior, 0, RngStream(5))
        assert report.z == {} and report.passed

    def test_report_dict(self):
        rep = GewekeReport(10, {"a": 1.0, "b": -5.0})
        d = rep.to_dict()
        assert d["max_abs_z"] == 5.0 and d["passed"] is False
        assert rep.failing() == {"b": -5.0}
