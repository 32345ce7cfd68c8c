"""Closed-form Gibbs sampler for deep noise networks.

One sweep visits, for each layer ``l = 0..L`` in turn: the pre-activation
noise ``v_l``, the next post-activation noise ``u_{l+1}``, the weights and
biases of layer ``l``, and the variance parameters of layer ``l``.  Every
block is drawn from its exact full conditional.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg, special

from .activation import PiecewiseLinearActivation
from .distributions import (AdjacentTruncatedNormalMixture, RngStream, TruncatedNormalSpec,
                            _logcdf_diff, as_generator, logsumexp, normal_logpdf,
                            sample_inverse_gamma, sample_mixture_arrays)
from .model import (VARIANCE_FLOOR, LatentState, ModelParams, NetworkShape, PosteriorChain,
                    PriorConfig, forward_deterministic, init_params)

log = logging.getLogger(__name__)

FAULTS = ("tau-rate-half",)

# block codes used to derive per-block random streams
_V, _U, _WB, _VAR = 1, 2, 3, 4


@dataclass(frozen=True)
class GibbsConfig:
    sweeps: int = 1000
    burn_in: int = 500
    thin: int = 1
    init: str = "pretrain"
    pretrain_steps: int = 2000
    pretrain_lr: float = 1e-3
    variance_floor: float = VARIANCE_FLOOR
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 1 or self.burn_in < 0:
            raise ValueError(f"need sweeps >= 1 and burn_in >= 0, got {self.sweeps}, {self.burn_in}")
        if self.thin < 1:
            raise ValueError("thinning interval must be >= 1")
        if self.init not in ("random", "pretrain"):
            raise ValueError(f"init must be 'random' or 'pretrain', got {self.init!r}")
        if self.pretrain_steps < 0 or not self.pretrain_lr > 0:
            raise ValueError("invalid pretraining settings")
        if not self.variance_floor > 0:
            raise ValueError("variance floor must be positive")

    @property
    def n_retained(self) -> int:
        """Draws kept by a fresh run (burn-in counts from sweep 1)."""
        return max(0, self.sweeps - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        return asdict(self)


# -- pre-activation noise ----------------------------------------------------

def v_conditional_arrays(act: PiecewiseLinearActivation, prior_mean, u_next, tau2, sigma2):
    """Segment weights and component parameters of the ``v`` full conditional.

    All inputs broadcast together to a shape ``S``; returns ``(log_weights,
    loc, scale)`` each of shape ``(J,) + S`` (segment axis first).  Segment
    weights are the truncation masses times the telescoped ratio of the
    piecewise scale factors, accumulated in log space.
    """
    m, u, t2, s2 = np.broadcast_arrays(*(np.asarray(a, float)
                                         for a in (prior_mean, u_next, tau2, sigma2)))
    c = act.bounds()
    J = act.n_segments
    inv_t2, inv_s2 = 1.0 / t2, 1.0 / s2
    prior_term = m * inv_t2
    log_w = np.empty((J,) + m.shape)
    lam = np.empty_like(log_w)
    omega2 = np.empty_like(log_w)
    for j, (b, bp) in enumerate(zip(act.slopes, act.intercepts)):
        if b == 0.0:
            omega2[j] = t2
            lam[j] = m
        else:
            omega2[j] = 1.0 / (inv_t2 + b * b * inv_s2)
            lam[j] = omega2[j] * (prior_term + b * (u - bp) * inv_s2)
    omega = np.sqrt(omega2)
    for j in range(J):
        if J == 1:
            log_w[j] = 0.0
        elif j == 0:
            log_w[j] = special.log_ndtr((c[1] - lam[0]) / omega[0])
        elif j == J - 1:
            log_w[j] = special.log_ndtr((lam[j] - c[j]) / omega[j])
        else:
            log_w[j] = _logcdf_diff((c[j + 1] - lam[j]) / omega[j], (c[j] - lam[j]) / omega[j])
    acc = 0.0
    for j in range(1, J):
        # ratio of consecutive segment scale factors, from continuity of the
        # unnormalized conditional density across knot c[j]
        knot = c[j]
        r_right = u - (knot * act.slopes[j] + act.intercepts[j])
        r_left = u - (knot * act.slopes[j - 1] + act.intercepts[j - 1])
        z_left = (knot - lam[j - 1]) ** 2 / omega2[j - 1]
        z_right = (knot - lam[j]) ** 2 / omega2[j]
        acc = acc + 0.5 * ((r_left * r_left - r_right * r_right) * inv_s2
                           + np.log(omega2[j] / omega2[j - 1]) + z_right - z_left)
        log_w[j] += acc
    log_w -= logsumexp(log_w, axis=0, keepdims=True)
    return log_w, lam, omega


def mixture_conditional_v(act, u_row, u_next_k, beta_row, gamma_k, tau2_k, sigma2_k):
    """Full conditional of one pre-activation entry ``v_{l,k}`` as a mixture object."""
    if not (tau2_k > 0 and sigma2_k > 0):
        raise ValueError("noise variances must be positive")
    m = float(np.dot(beta_row, u_row) + gamma_k)
    log_w, lam, omega = v_conditional_arrays(act, m, u_next_k, tau2_k, sigma2_k)
    c = act.bounds()
    comps = tuple(TruncatedNormalSpec(float(lam[j]), float(omega[j]), float(c[j]), float(c[j + 1]))
                  for j in range(act.n_segments))
    return AdjacentTruncatedNormalMixture(comps, tuple(log_w))


def sample_v_layer(state: LatentState, params: ModelParams, l: int, rng) -> np.ndarray:
    """Redraw ``v_l`` for every sample and unit (hidden layers only)."""
    if not 0 <= l < params.n_hidden:
        raise ValueError(f"v_{l} is not a latent layer (v_L holds the targets)")
    lp = params.layers[l]
    act = params.activation
    prior_mean = state.u[l] @ lp.weights.T + lp.biases
    log_w, lam, omega = v_conditional_arrays(act, prior_mean, state.u[l + 1],
                                             lp.preact_var, lp.postact_var)
    state.v[l] = sample_mixture_arrays(log_w, lam, omega, act.bounds(), rng)
    return state.v[l]


# -- post-activation noise ---------------------------------------------------

def _cholesky(A: np.ndarray, jitter: float = 1e-8, tries: int = 6) -> np.ndarray:
    """Lower Cholesky factor of one matrix or a stack, retrying with diagonal jitter."""
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(A.shape[-1])
    scale = np.mean(np.diagonal(A, axis1=-2, axis2=-1), axis=-1)[..., None, None]
    for i in range(tries):
        eps = jitter * 10**i
        try:
            L = np.linalg.cholesky(A + eps * scale * eye)
            log.warning("Cholesky needed relative jitter %.1e", eps)
            return L
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("matrix not positive definite even with jitter")


def u_conditional(state: LatentState, params: ModelParams, l: int):
    """Mean rows and shared precision Cholesky factor of the ``u_l`` conditional."""
    lp, prev = params.layers[l], params.layers[l - 1]
    h = params.activation
    inv_tau2 = 1.0 / lp.preact_var
    inv_sigma2 = 1.0 / prev.postact_var
    prec = (lp.weights.T * inv_tau2) @ lp.weights + np.diag(inv_sigma2)
    chol = _cholesky(prec)
    rhs = ((state.v[l] - lp.biases) * inv_tau2) @ lp.weights + h(state.v[l - 1]) * inv_sigma2
    mean = linalg.cho_solve((chol, True), rhs.T).T
    return mean, chol


def sample_u_layer(state: LatentState, params: ModelParams, l: int, rng) -> np.ndarray:
    """Redraw ``u_l`` (``1 <= l <= L``) for every sample."""
    if not 1 <= l <= params.n_hidden:
        raise ValueError(f"u_{l} is not a latent layer")
    mean, chol = u_conditional(state, params, l)
    z = as_generator(rng).standard_normal(mean.shape)
    noise = linalg.solve_triangular(chol, z.T, lower=True, trans="T").T
    state.u[l] = mean + noise
    return state.u[l]


# -- weights and biases ------------------------------------------------------

def weights_conditional(state: LatentState, params: ModelParams, l: int):
    """Per-unit posterior means ``(K, D)`` and precision factors ``(K, D, D)``.

    Each output unit is a conjugate Bayesian linear regression of ``v_{l,k}``
    on ``(u_l, 1)`` with independent normal priors.
    """
    lp = params.layers[l]
    U = state.u[l]
    Ubar = np.hstack([U, np.ones((U.shape[0], 1))])
    gram = Ubar.T @ Ubar
    inv_tau2 = 1.0 / lp.preact_var
    prior_prec = 1.0 / np.hstack([lp.weight_var, lp.bias_var[:, None]])
    D = Ubar.shape[1]
    prec = gram[None] * inv_tau2[:, None, None]
    prec[:, np.arange(D), np.arange(D)] += prior_prec
    chol = _cholesky(prec)
    rhs = (Ubar.T @ state.v[l]).T * inv_tau2[:, None]
    y = np.linalg.solve(chol, rhs[..., None])
    mean = np.linalg.solve(np.swapaxes(chol, -1, -2), y)[..., 0]
    return mean, chol


def sample_weights_layer(state: LatentState, params: ModelParams, l: int, rng):
    mean, chol = weights_conditional(state, params, l)
    z = as_generator(rng).standard_normal(mean.shape)
    draw = mean + np.linalg.solve(np.swapaxes(chol, -1, -2), z[..., None])[..., 0]
    lp = params.layers[l]
    lp.weights = draw[:, :-1].copy()
    lp.biases = draw[:, -1].copy()
    return lp.weights, lp.biases


# -- variances ---------------------------------------------------------------

def variance_posteriors(state: LatentState, params: ModelParams, prior: PriorConfig, l: int,
                        fault: str | None = None) -> dict:
    """Inverse-gamma ``(shape, rate)`` of every variance block in layer ``l``.

    Each noise variance is paired with the residual it governs: ``tau2`` with
    the linear-layer residual and the ``preact`` hyperparameters, ``sigma2``
    with the activation residual and the ``postact`` hyperparameters.
    """
    lp = params.layers[l]
    N = state.n
    resid = state.v[l] - state.u[l] @ lp.weights.T - lp.biases
    tau_rate = prior.b_preact + 0.5 * np.sum(resid**2, axis=0)
    if fault == "tau-rate-half":
        tau_rate = 0.5 * tau_rate
    elif fault is not None:
        raise ValueError(f"unknown fault {fault!r}")
    out = {
        "preact_var": (np.full(tau_rate.shape, prior.a_preact + 0.5 * N), tau_rate),
        "weight_var": (np.full(lp.weights.shape, prior.a_weight + 0.5),
                       prior.b_weight + 0.5 * lp.weights**2),
        "bias_var": (np.full(lp.biases.shape, prior.a_bias + 0.5),
                     prior.b_bias + 0.5 * lp.biases**2),
    }
    if l < params.n_hidden:
        act_resid = state.u[l + 1] - params.activation(state.v[l])
        out["postact_var"] = (np.full(lp.postact_var.shape, prior.a_postact + 0.5 * N),
                              prior.b_postact + 0.5 * np.sum(act_resid**2, axis=0))
    return out


def sample_variances(state: LatentState, params: ModelParams, prior: PriorConfig, rng,
                     layers=None, floor: float = VARIANCE_FLOOR, fault: str | None = None):
    gen = as_generator(rng)
    layers = range(params.n_hidden + 1) if layers is None else layers
    for l in layers:
        lp = params.layers[l]
        for name, (shape, rate) in variance_posteriors(state, params, prior, l, fault).items():
            setattr(lp, name, np.maximum(sample_inverse_gamma(shape, rate, gen), floor))
    return params


# -- joint density -----------------------------------------------------------

def _ig_logpdf(x, a, b):
    return a * np.log(b) - special.gammaln(a) - (a + 1) * np.log(x) - b / x


def log_joint(state: LatentState, params: ModelParams, prior: PriorConfig) -> float:
    """Log density of latents, targets and all parameters given the inputs."""
    h = params.activation
    L = params.n_hidden
    total = 0.0
    for l, lp in enumerate(params.layers):
        mean = state.u[l] @ lp.weights.T + lp.biases
        total += np.sum(normal_logpdf(state.v[l], mean, lp.preact_var))
        if l < L:
            total += np.sum(normal_logpdf(state.u[l + 1], h(state.v[l]), lp.postact_var))
            total += np.sum(_ig_logpdf(lp.postact_var, prior.a_postact, prior.b_postact))
        total += np.sum(normal_logpdf(lp.weights, 0.0, lp.weight_var))
        total += np.sum(normal_logpdf(lp.biases, 0.0, lp.bias_var))
        total += np.sum(_ig_logpdf(lp.preact_var, prior.a_preact, prior.b_preact))
        total += np.sum(_ig_logpdf(lp.weight_var, prior.a_weight, prior.b_weight))
        total += np.sum(_ig_logpdf(lp.bias_var, prior.a_bias, prior.b_bias))
    return float(total)


# -- sweeps ------------------------------------------------------------------

def gibbs_sweep(state: LatentState, params: ModelParams, prior: PriorConfig, rng,
                floor: float = VARIANCE_FLOOR, fault: str | None = None,
                timings: dict | None = None):
    """One full pass over all blocks, updating ``state`` and ``params`` in place.

    ``rng`` should be an :class:`RngStream` dedicated to this sweep; each
    block draws from its own child stream.
    """
    base = rng if isinstance(rng, RngStream) else RngStream(int(as_generator(rng).integers(2**63)))
    L = params.n_hidden
    clock = timings if timings is not None else {}
    for key in ("v", "u", "weights", "variances"):
        clock.setdefault(key, 0.0)
    for l in range(L + 1):
        if l < L:
            t0 = time.perf_counter()
            sample_v_layer(state, params, l, base.child(l, _V))
            t1 = time.perf_counter()
            sample_u_layer(state, params, l + 1, base.child(l, _U))
            t2 = time.perf_counter()
            clock["v"] += t1 - t0
            clock["u"] += t2 - t1
        t2 = time.perf_counter()
        sample_weights_layer(state, params, l, base.child(l, _WB))
        t3 = time.perf_counter()
        sample_variances(state, params, prior, base.child(l, _VAR), layers=[l],
                         floor=floor, fault=fault)
        clock["weights"] += t3 - t2
        clock["variances"] += time.perf_counter() - t3
    return state, params


def init_state(X, Y, params: ModelParams) -> LatentState:
    """Latents from the noise-free forward pass, with the endpoints pinned."""
    X = np.asarray(X, float)
    h = params.activation
    us, vs = [X.copy()], []
    u = X
    for l, lp in enumerate(params.layers):
        v = u @ lp.weights.T + lp.biases
        vs.append(v)
        if l < params.n_hidden:
            u = h(v)
            us.append(u)
    vs[-1] = np.asarray(Y, float).copy()
    return LatentState(us, vs)


def _check_data(X, Y, shape: NetworkShape):
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or X.shape[1] != shape.input_dim:
        raise ValueError(f"X must be N x {shape.input_dim}, got {X.shape}")
    if Y.shape != (X.shape[0], shape.output_dim):
        raise ValueError(f"Y must be N x {shape.output_dim}, got {Y.shape}")
    if X.shape[0] < 1:
        raise ValueError("need at least one training sample")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("training data contains NaN or infinite values")
    return X, Y


@dataclass
class SamplerState:
    """Everything needed to continue a chain exactly where it stopped."""

    state: LatentState
    params: ModelParams
    sweeps_done: int = 0


def initialize(X, Y, shape: NetworkShape, config: GibbsConfig, rng) -> SamplerState:
    base = rng if isinstance(rng, RngStream) else RngStream(config.seed)
    X, Y = _check_data(X, Y, shape)
    if config.init == "pretrain":
        params = pretrain(X, Y, shape, config.pretrain_steps, config.pretrain_lr, base.child(0))
    else:
        params = init_params(shape, base.child(0).generator)
    return SamplerState(init_state(X, Y, params), params, 0)


def fit(X, Y, shape: NetworkShape, prior: PriorConfig, config: GibbsConfig, rng=None,
        resume: SamplerState | None = None, fault: str | None = None,
        progress=None) -> tuple[PosteriorChain, SamplerState]:
    """Run the sampler and return the retained chain plus the final sampler state.

    ``config.sweeps`` more sweeps are run.  With ``resume`` the chain
    continues from a saved state; sweep ``s`` always draws from stream
    ``(seed, s)`` and burn-in and thinning count global sweeps, so a resumed
    run reproduces the corresponding stretch of an uninterrupted one bit for
    bit.
    """
    base = rng if isinstance(rng, RngStream) else RngStream(config.seed)
    X, Y = _check_data(X, Y, shape)
    if resume is None:
        ss = initialize(X, Y, shape, config, base)
    else:
        ss = SamplerState(resume.state.copy(), resume.params.copy(), resume.sweeps_done)
        if ss.state.n != X.shape[0]:
            raise ValueError("resume state was built for a different training set")
    chain = PosteriorChain(shape, prior, [], config=config.to_dict())
    start = ss.sweeps_done
    for s in range(start + 1, start + config.sweeps + 1):
        clock: dict = {}
        gibbs_sweep(ss.state, ss.params, prior, base.child(1, s), floor=config.variance_floor,
                    fault=fault, timings=clock)
        lj = log_joint(ss.state, ss.params, prior)
        if not np.isfinite(lj) or not ss.params.is_finite() or not ss.state.is_finite():
            raise FloatingPointError(f"non-finite state after sweep {s}")
        chain.log_joint.append(lj)
        chain.timings.append(clock)
        if s > config.burn_in and (s - config.burn_in) % config.thin == 0:
            chain.draws.append(ss.params.copy())
        if progress is not None:
            progress(s, lj)
    ss.sweeps_done = start + config.sweeps
    chain.sweeps_done = ss.sweeps_done
    return chain, ss


# -- gradient pre-training ---------------------------------------------------

def pretrain(X, Y, shape: NetworkShape, steps: int, lr: float, rng,
             batch_size: int = 256) -> ModelParams:
    """Fit weights and biases by minibatch Adam on the squared error of the noise-free net.

    Noise variances start at 0.01 and hypervariances at 1.  ``steps = 0``
    returns the random initialization unchanged.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    X, Y = _check_data(X, Y, shape)
    base = rng if isinstance(rng, RngStream) else RngStream(int(as_generator(rng).integers(2**63)))
    params = init_params(shape, base.child(0).generator)
    if steps == 0:
        return params
    gen = base.child(1).generator
    act = shape.activation
    slopes = np.asarray(act.slopes)
    L = shape.n_hidden
    theta = [[lp.weights, lp.biases] for lp in params.layers]
    m1 = [[np.zeros_like(p) for p in pair] for pair in theta]
    m2 = [[np.zeros_like(p) for p in pair] for pair in theta]
    b1, b2, eps = 0.9, 0.999, 1e-8
    N = X.shape[0]
    bs = min(batch_size, N)
    for t in range(1, steps + 1):
        idx = gen.choice(N, size=bs, replace=False) if bs < N else np.arange(N)
        u = X[idx]
        us, vs = [u], []
        for l, (W, b) in enumerate(theta):
            v = u @ W.T + b
            vs.append(v)
            if l < L:
                u = act(v)
                us.append(u)
        grad_v = 2.0 * (vs[-1] - Y[idx]) / bs
        for l in range(L, -1, -1):
            W = theta[l][0]
            grads = (grad_v.T @ us[l], grad_v.sum(axis=0))
            if l > 0:
                grad_v = (grad_v @ W) * slopes[act.segment(vs[l - 1])]
            for i, g in enumerate(grads):
                m1[l][i] = b1 * m1[l][i] + (1 - b1) * g
                m2[l][i] = b2 * m2[l][i] + (1 - b2) * g * g
                mhat = m1[l][i] / (1 - b1**t)
                vhat = m2[l][i] / (1 - b2**t)
                theta[l][i] -= lr * mhat / (np.sqrt(vhat) + eps)
    for lp, (W, b) in zip(params.layers, theta):
        lp.weights, lp.biases = W, b
    return params


def training_mse(params: ModelParams, X, Y) -> float:
    return float(np.mean((forward_deterministic(params, X) - np.asarray(Y).reshape(len(X), -1)) ** 2))
