import numpy as np
import pytest

from bdeepnoise.activation import builtin
from bdeepnoise.distributions import RngStream
from bdeepnoise.model import (VARIANCE_FLOOR, LayerParams, ModelParams, NetworkShape,
                              PosteriorChain, PredictiveEnsemble, PriorConfig, forward_deterministic,
                              forward_stochastic, influence, init_params, layer_norms, predict,
                              spectral_norm_sq, variance_bound_general, variance_bound_simple)
from bdeepnoise.oracle import sample_prior_params


def build(shape, weights, biases, tau2, sigma2):
    L = shape.n_hidden
    layers = []
    for l in range(L + 1):
        k_out, k_in = shape.layer_dims(l)
        layers.append(LayerParams(
            weights=np.asarray(weights[l], float).reshape(k_out, k_in),
            biases=np.asarray(biases[l], float).reshape(k_out),
            preact_var=np.full(k_out, tau2),
            postact_var=np.full(k_out, sigma2) if l < L else None,
            weight_var=np.ones((k_out, k_in)),
            bias_var=np.ones(k_out),
        ))
    return ModelParams(shape, layers)


def with_variances(params, value):
    out = params.copy()
    for lp in out.layers:
        lp.preact_var = np.full_like(lp.preact_var, value)
        if lp.postact_var is not None:
            lp.postact_var = np.full_like(lp.postact_var, value)
    return out


def chain_of(*draws):
    return PosteriorChain(draws[0].shape, PriorConfig(), list(draws))


class TestShapes:
    def test_widths(self):
        shape = NetworkShape(3, 2, (5, 4))
        assert shape.widths == (3, 5, 4, 2)
        assert shape.layer_dims(0) == (5, 3)
        assert shape.layer_dims(2) == (2, 4)

    def test_rejects_zero_width(self):
        with pytest.raises(ValueError):
            NetworkShape(1, 1, (3, 0))

    def test_params_validate_shapes(self):
        shape = NetworkShape(1, 1, (2,))
        p = init_params(shape, 0)
        p.layers[0].weights = np.zeros((3, 1))
        with pytest.raises(ValueError, match="shapes"):
            ModelParams(shape, p.layers)

    def test_prior_must_be_positive(self):
        with pytest.raises(ValueError):
            PriorConfig(a_weight=0.0)

    def test_shape_round_trip(self):
        shape = NetworkShape(2, 1, (3, 3), builtin("leaky_relu(0.1)"))
        assert NetworkShape.from_dict(shape.to_dict()) == shape


class TestForward:
    def test_zero_weights_give_output_bias(self):
        shape = NetworkShape(3, 1, (4,), builtin("relu"))
        p = build(shape, [np.zeros((4, 3)), np.zeros((1, 4))], [np.zeros(4), [2.0]], 1.0, 1.0)
        for x in ([0.0, 0.0, 0.0], [5.0, -2.0, 1.0]):
            np.testing.assert_allclose(forward_deterministic(p, np.array(x)), [2.0])

    def test_relu_kills_negative_input(self):
        shape = NetworkShape(1, 1, (1,), builtin("relu"))
        p = build(shape, [[[1.0]], [[3.0]]], [[0.0], [0.5]], 1.0, 1.0)
        np.testing.assert_allclose(forward_deterministic(p, np.array([-3.0])), [0.5])

    def test_stochastic_at_floor_matches_deterministic(self, rng):
        shape = NetworkShape(3, 2, (6, 5), builtin("hard_tanh"))
        p = with_variances(sample_prior_params(shape, PriorConfig.uniform(3, 2), rng), VARIANCE_FLOOR)
        X = rng.normal(size=(50, 3))
        y, trace = forward_stochastic(p, X, RngStream(1))
        assert np.mean(np.abs(y - forward_deterministic(p, X))) < 10 * np.sqrt(VARIANCE_FLOOR)
        assert len(trace.u) == len(trace.v) == 3
        np.testing.assert_array_equal(trace.u[0], X)

    def test_zero_weights_output_law(self):
        shape = NetworkShape(1, 1, (3,), builtin("relu"))
        p = build(shape, [np.ones((3, 1)), np.zeros((1, 3))], [np.zeros(3), [1.5]], 0.25, 1.0)
        y, _ = forward_stochastic(p, np.zeros((10**5, 1)), RngStream(2))
        assert y.mean() == pytest.approx(1.5, abs=0.01)
        assert y.var() == pytest.approx(0.25, abs=0.01)

    def test_shape_mismatch(self):
        p = init_params(NetworkShape(2, 1, (3,)), 0)
        with pytest.raises(ValueError):
            forward_deterministic(p, np.zeros(3))


class TestPredict:
    def test_single_draw_single_realization(self):
        p = init_params(NetworkShape(1, 1, (3,)), 0)
        ens = predict(chain_of(p), np.zeros((4, 1)), 1, RngStream(0))
        assert ens.draws.shape == (4, 1, 1)
        assert ens.n_components == 1

    def test_floor_variances_average_deterministic_outputs(self, rng):
        shape = NetworkShape(2, 1, (4,), builtin("relu"))
        draws = [with_variances(sample_prior_params(shape, PriorConfig.uniform(3, 2), rng), VARIANCE_FLOOR)
                 for _ in range(5)]
        X = rng.normal(size=(7, 2))
        ens = predict(chain_of(*draws), X, 3, RngStream(1))
        expected = np.mean([forward_deterministic(d, X) for d in draws], axis=0)
        np.testing.assert_allclose(ens.mean(), expected, atol=1e-4)

    def test_reproducible(self):
        p = init_params(NetworkShape(1, 1, (3,)), 0)
        a = predict(chain_of(p, p), np.ones((3, 1)), 4, RngStream(5))
        b = predict(chain_of(p, p), np.ones((3, 1)), 4, RngStream(5))
        np.testing.assert_array_equal(a.draws, b.draws)
        np.testing.assert_array_equal(a.comp_mean, b.comp_mean)

    def test_components_generate_draws(self):
        p = init_params(NetworkShape(1, 2, (3,)), 0)
        ens = predict(chain_of(p), np.ones((200, 1)), 50, RngStream(6))
        z = (ens.draws - ens.comp_mean) / np.sqrt(ens.comp_var)
        assert abs(z.mean()) < 0.02 and z.std() == pytest.approx(1.0, abs=0.02)

    def test_empty_chain(self):
        chain = PosteriorChain(NetworkShape(1, 1, (2,)), PriorConfig(), [])
        with pytest.raises(ValueError, match="empty"):
            predict(chain, np.zeros((1, 1)), 1, 0)

    def test_affine_maps_everything(self):
        ens = PredictiveEnsemble(np.ones((2, 3, 1)), np.zeros((2, 3, 1)), np.ones((2, 3, 1)))
        out = ens.affine([10.0], [2.0])
        np.testing.assert_allclose(out.draws, 12.0)
        np.testing.assert_allclose(out.comp_mean, 10.0)
        np.testing.assert_allclose(out.comp_var, 4.0)


class TestBounds:
    def test_spectral_norm(self, rng):
        for _ in range(20):
            A = rng.normal(size=tuple(rng.integers(1, 8, 2)))
            assert spectral_norm_sq(A) == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=1e-6)
        assert spectral_norm_sq(np.zeros((3, 2))) == 0.0

    def test_frobenius_dominates_spectral(self, rng):
        p = sample_prior_params(NetworkShape(3, 2, (4, 4)), PriorConfig.uniform(3, 2), rng)
        assert all(f >= s - 1e-12 for f, s in zip(layer_norms(p, "frobenius"), layer_norms(p)))

    def test_zero_noise(self, rng):
        p = with_variances(sample_prior_params(NetworkShape(2, 1, (3,)), PriorConfig.uniform(3, 2), rng), 0.0)
        assert variance_bound_general(p) == 0.0
        assert variance_bound_simple(p) == 0.0

    def test_linear_gaussian_case(self):
        shape = NetworkShape(2, 3, ())
        p = build(shape, [np.ones((3, 2))], [np.zeros(3)], 0.7, 0.0)
        assert variance_bound_general(p) == pytest.approx(2.1)

    def test_corollary_formula(self):
        shape = NetworkShape(2, 2, (2,), builtin("relu"))
        p = build(shape, [np.eye(2), np.eye(2)], [np.zeros(2)] * 2, 0.1, 0.1)
        assert variance_bound_simple(p) == pytest.approx(1.6)

    def test_simple_bound_needs_supported_activation(self):
        p = init_params(NetworkShape(1, 1, (2,), builtin("identity")), 0)
        with pytest.raises(ValueError):
            variance_bound_simple(p)

    def test_simple_bound_needs_hidden_layer(self):
        p = init_params(NetworkShape(1, 1, (), builtin("relu")), 0)
        with pytest.raises(ValueError, match="hidden layer"):
            variance_bound_simple(p)

    def test_monte_carlo_below_bounds(self, rng):
        shape = NetworkShape(2, 1, (4, 3), builtin("hard_tanh"))
        for _ in range(5):
            p = sample_prior_params(shape, PriorConfig.uniform(3, 2), rng)
            x = rng.normal(size=2)
            y, _ = forward_stochastic(p, np.tile(x, (10**5, 1)), rng)
            gap = np.sum((y - forward_deterministic(p, x)) ** 2, axis=1)
            slack = 3 * gap.std() / np.sqrt(gap.size)
            assert gap.mean() - slack <= variance_bound_general(p) <= variance_bound_simple(p)


class TestInfluence:
    def _linear(self, w):
        shape = NetworkShape(len(w), 1, (1,), builtin("identity"))
        return build(shape, [[w], [[1.0]]], [[0.0], [0.0]], 0.05, 0.05)

    def test_ignored_feature(self, rng):
        chain = chain_of(self._linear([1.0, 0.0]))
        X = rng.normal(size=(30, 2))
        assert influence(chain, X, 1, R=20) == pytest.approx(0.0, abs=1e-8)

    def test_linear_slope(self, rng):
        chain = chain_of(self._linear([2.0, 0.5]))
        assert influence(chain, rng.normal(size=(30, 2)), 0, R=20) == pytest.approx(2.0, abs=0.05)

    def test_symmetric_features(self, rng):
        chain = chain_of(self._linear([1.0, 1.0]))
        X = rng.normal(size=(30, 2))
        assert influence(chain, X, 0, R=20) == pytest.approx(influence(chain, X, 1, R=20), abs=0.05)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            influence(chain_of(self._linear([1.0])), np.zeros((1, 1)), 3)
