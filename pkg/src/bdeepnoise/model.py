"""Network structure, parameters and forward simulation.

Layer indexing: layers ``l = 0..L`` are linear maps, ``L`` = number of
hidden layers.  Layer ``l`` maps ``u_l`` (width ``K_{l-1}``, with
``u_0 = x``) to the pre-activation ``v_l`` (width ``K_l``, with ``v_L = y``)::

    v_l     ~ N(beta_l u_l + gamma_l, diag(tau2_l))
    u_{l+1} ~ N(h(v_l), diag(sigma2_l))          for l < L
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np
from .activation import (PiecewiseLinearActivation, builtin, in_simple_bound_family,
                         lipschitz)
from .distributions import RngStream, as_generator

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class NetworkShape:
    input_dim: int
    output_dim: int
    hidden: tuple[int, ...]
    activation: PiecewiseLinearActivation = field(default_factory=lambda: builtin("hard_tanh"))

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(k) for k in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(k < 1 for k in self.hidden):
            raise ValueError("all layer widths must be positive")

    @property
    def n_hidden(self) -> int:
        return len(self.hidden)

    @property
    def widths(self) -> tuple[int, ...]:
        """``(K_{-1}, K_0, ..., K_L)`` = input, hidden widths, output."""
        return (self.input_dim, *self.hidden, self.output_dim)

    def layer_dims(self, l: int) -> tuple[int, int]:
        """(output width, input width) of linear layer ``l``."""
        w = self.widths
        return w[l + 1], w[l]

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim, "output_dim": self.output_dim,
                "hidden": list(self.hidden), "activation": self.activation.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkShape":
        return cls(int(d["input_dim"]), int(d["output_dim"]), tuple(d["hidden"]),
                   PiecewiseLinearActivation.from_dict(d["activation"]))


@dataclass(frozen=True)
class PriorConfig:
    a_weight: float = 1e-3
    b_weight: float = 1e-3
    a_bias: float = 1e-3
    b_bias: float = 1e-3
    a_preact: float = 1e-3
    b_preact: float = 1e-3
    a_postact: float = 1e-3
    b_postact: float = 1e-3

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if not val > 0:
                raise ValueError(f"prior hyperparameter {name} must be positive, got {val}")

    @classmethod
    def uniform(cls, a: float, b: float) -> "PriorConfig":
        return cls(a, b, a, b, a, b, a, b)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class LayerParams:
    """Parameters of linear layer ``l``.

    ``postact_var`` is ``None`` for the output layer.  ``weight_var`` and
    ``bias_var`` are the prior hypervariances of the weights and biases.
    """

    weights: np.ndarray
    biases: np.ndarray
    preact_var: np.ndarray
    postact_var: np.ndarray | None
    weight_var: np.ndarray
    bias_var: np.ndarray

    def copy(self) -> "LayerParams":
        return copy.deepcopy(self)


@dataclass
class ModelParams:
    shape: NetworkShape
    layers: list[LayerParams]

    def __post_init__(self):
        L = self.shape.n_hidden
        if len(self.layers) != L + 1:
            raise ValueError(f"expected {L + 1} layers, got {len(self.layers)}")
        for l, lp in enumerate(self.layers):
            k_out, k_in = self.shape.layer_dims(l)
            if lp.weights.shape != (k_out, k_in) or lp.biases.shape != (k_out,):
                raise ValueError(f"layer {l}: weight/bias shapes do not match {k_out}x{k_in}")
            if (lp.postact_var is None) != (l == L):
                raise ValueError(f"layer {l}: post-activation variance only on hidden layers")

    @property
    def n_hidden(self) -> int:
        return self.shape.n_hidden

    @property
    def activation(self) -> PiecewiseLinearActivation:
        return self.shape.activation

    def copy(self) -> "ModelParams":
        return ModelParams(self.shape, [lp.copy() for lp in self.layers])

    def all_arrays(self):
        for lp in self.layers:
            yield from (lp.weights, lp.biases, lp.preact_var, lp.weight_var, lp.bias_var)
            if lp.postact_var is not None:
                yield lp.postact_var

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.all_arrays())


def init_params(shape: NetworkShape, rng, noise_var: float = 0.01,
                hyper_var: float = 1.0) -> ModelParams:
    """Random initialization: scaled Gaussian weights, zero biases."""
    gen = as_generator(rng)
    layers = []
    L = shape.n_hidden
    for l in range(L + 1):
        k_out, k_in = shape.layer_dims(l)
        layers.append(LayerParams(
            weights=gen.standard_normal((k_out, k_in)) / np.sqrt(k_in),
            biases=np.zeros(k_out),
            preact_var=np.full(k_out, noise_var),
            postact_var=np.full(k_out, noise_var) if l < L else None,
            weight_var=np.full((k_out, k_in), hyper_var),
            bias_var=np.full(k_out, hyper_var),
        ))
    return ModelParams(shape, layers)


@dataclass
class LatentState:
    """Per-sample latent noise for all training rows.

    ``u[l]`` has shape ``(N, K_{l-1})`` for ``l = 0..L`` with ``u[0] = X``;
    ``v[l]`` has shape ``(N, K_l)`` for ``l = 0..L`` with ``v[L] = Y``.
    """

    u: list[np.ndarray]
    v: list[np.ndarray]

    @property
    def n(self) -> int:
        return self.u[0].shape[0]

    def copy(self) -> "LatentState":
        return LatentState([a.copy() for a in self.u], [a.copy() for a in self.v])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in (*self.u, *self.v))


@dataclass
class PosteriorChain:
    """Retained posterior draws plus per-sweep telemetry."""

    shape: NetworkShape
    prior: PriorConfig
    draws: list[ModelParams]
    log_joint: list[float] = field(default_factory=list)
    timings: list[dict] = field(default_factory=list)
    sweeps_done: int = 0
    config: dict = field(default_factory=dict)
    standardization: object | None = None

    def __len__(self) -> int:
        return len(self.draws)


@dataclass
class PredictiveEnsemble:
    """Predictive draws for a batch of test points.

    ``draws``, ``comp_mean`` and ``comp_var`` all have shape
    ``(n_points, M*R, Q)``; component ``i`` is the exact final-layer
    Gaussian from which ``draws[:, i]`` was sampled.
    """

    draws: np.ndarray
    comp_mean: np.ndarray
    comp_var: np.ndarray

    @property
    def n_points(self) -> int:
        return self.draws.shape[0]

    @property
    def n_components(self) -> int:
        return self.draws.shape[1]

    def mean(self) -> np.ndarray:
        return self.draws.mean(axis=1)

    def sd(self) -> np.ndarray:
        return self.draws.std(axis=1)

    def quantiles(self, probs) -> np.ndarray:
        """Shape ``(len(probs), n_points, Q)``; linear interpolation of order statistics."""
        return np.quantile(self.draws, probs, axis=1)

    def affine(self, loc, scale) -> "PredictiveEnsemble":
        """Map every draw and component through ``y -> loc + scale * y``."""
        loc, scale = np.asarray(loc, float), np.asarray(scale, float)
        return PredictiveEnsemble(loc + scale * self.draws, loc + scale * self.comp_mean,
                                  scale**2 * self.comp_var)


# -- forward passes ----------------------------------------------------------

def _as_batch(params: ModelParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.ndim != 2 or X.shape[1] != params.shape.input_dim:
        raise ValueError(f"expected inputs of width {params.shape.input_dim}, got shape {x.shape}")
    return X, single


def forward_deterministic(params: ModelParams, x) -> np.ndarray:
    """Noise-free forward pass g(x, weights)."""
    X, single = _as_batch(params, x)
    h = params.activation
    u = X
    L = params.n_hidden
    for l, lp in enumerate(params.layers):
        v = u @ lp.weights.T + lp.biases
        u = h(v) if l < L else v
    return u[0] if single else u


def forward_stochastic(params: ModelParams, x, rng) -> tuple[np.ndarray, LatentState]:
    """One generative draw of the outputs; the trace holds every ``u`` and ``v``."""
    X, single = _as_batch(params, x)
    gen = as_generator(rng)
    h = params.activation
    L = params.n_hidden
    us, vs = [X], []
    u = X
    for l, lp in enumerate(params.layers):
        mean = u @ lp.weights.T + lp.biases
        v = mean + np.sqrt(lp.preact_var) * gen.standard_normal(mean.shape)
        vs.append(v)
        if l < L:
            u = h(v) + np.sqrt(lp.postact_var) * gen.standard_normal(v.shape)
            us.append(u)
    y = vs[-1]
    return (y[0] if single else y), LatentState(us, vs)


def _final_components(params: ModelParams, X: np.ndarray, gen) -> tuple[np.ndarray, np.ndarray]:
    """Simulate to ``u_L`` and return the output-layer Gaussian (mean, var)."""
    h = params.activation
    u = X
    for lp in params.layers[:-1]:
        mean = u @ lp.weights.T + lp.biases
        v = mean + np.sqrt(lp.preact_var) * gen.standard_normal(mean.shape)
        u = h(v) + np.sqrt(lp.postact_var) * gen.standard_normal(v.shape)
    last = params.layers[-1]
    mean = u @ last.weights.T + last.biases
    return mean, np.broadcast_to(last.preact_var, mean.shape)


def predict(chain, X_test, R: int, rng) -> PredictiveEnsemble:
    """Posterior predictive ensemble: ``R`` forward draws per retained parameter draw.

    Each retained draw ``m`` uses its own child stream of ``rng`` so results
    do not depend on evaluation order.
    """
    draws = chain.draws if isinstance(chain, PosteriorChain) else list(chain)
    if not draws:
        raise ValueError("cannot predict from an empty chain")
    if R < 1:
        raise ValueError("R must be a positive integer")
    X = np.asarray(X_test, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if draws[0].shape.input_dim == 1 else X[None, :]
    n = X.shape[0]
    Q = draws[0].shape.output_dim
    base = rng if isinstance(rng, RngStream) else RngStream(int(as_generator(rng).integers(2**63)))
    Xr = np.repeat(X, R, axis=0)
    means = np.empty((n, len(draws) * R, Q))
    varis = np.empty_like(means)
    ys = np.empty_like(means)
    for m, params in enumerate(draws):
        gen = base.child(m).generator
        mu, var = _final_components(params, Xr, gen)
        y = mu + np.sqrt(var) * gen.standard_normal(mu.shape)
        sl = slice(m * R, (m + 1) * R)
        means[:, sl] = mu.reshape(n, R, Q)
        varis[:, sl] = var.reshape(n, R, Q)
        ys[:, sl] = y.reshape(n, R, Q)
    return PredictiveEnsemble(ys, means, varis)


# -- variance bounds ---------------------------------------------------------

def spectral_norm_sq(A: np.ndarray, n_iter: int = 50, tol: float = 1e-10) -> float:
    """Squared spectral norm by power iteration on ``A^T A``."""
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    x = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    # a constant start vector can be orthogonal to the top singular vector
    x = x + 1e-3 * np.sin(np.arange(1, A.shape[1] + 1))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(n_iter):
        y = A.T @ (A @ x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - lam) <= tol * max(new, 1.0):
            lam = new
            break
        lam = new
    return lam


def layer_norms(params: ModelParams, kind: str = "spectral") -> list[float]:
    if kind == "spectral":
        return [spectral_norm_sq(lp.weights) for lp in params.layers]
    if kind == "frobenius":
        return [float(np.sum(lp.weights**2)) for lp in params.layers]
    raise ValueError(f"unknown norm {kind!r}")


def variance_bound_general(params: ModelParams, x=None, norm: str = "spectral") -> float:
    """Upper bound on ``Var(y|x) + |E(y|x) - g(x)|^2`` (summed over outputs).

    The bound does not depend on ``x``; the argument is accepted for symmetry
    with the quantity it bounds.
    """
    d2 = layer_norms(params, norm)
    c2 = lipschitz(params.activation) ** 2
    L = params.n_hidden
    total = 0.0
    for l, lp in enumerate(params.layers):
        prev_sigma = 0.0 if l == 0 else float(np.sum(params.layers[l - 1].postact_var))
        term = d2[l] * prev_sigma + float(np.sum(lp.preact_var))
        term *= float(np.prod(d2[l + 1:])) * c2 ** (L - l)
        total += term
    return total


def variance_bound_simple(params: ModelParams) -> float:
    """Global-constant form of the bound for the standard activation family."""
    if not in_simple_bound_family(params.activation):
        raise ValueError(f"activation {params.activation.name!r} not covered by the simple bound")
    L = params.n_hidden
    if L == 0:
        raise ValueError("the simple bound needs at least one hidden layer")
    K = max(params.shape.widths)
    d2 = max(layer_norms(params))
    sigma2 = max(float(np.max(lp.postact_var)) for lp in params.layers[:-1]) if L else 0.0
    tau2 = max(float(np.max(lp.preact_var)) for lp in params.layers)
    return K * L * (d2**L + 1.0) * (d2 + 1.0) * (sigma2 + tau2)


# -- feature influence -------------------------------------------------------

def influence(chain, X_test, j: int, step: float = 1e-2, R: int = 10, rng=0) -> float:
    """Mean absolute central-difference slope of the predictive mean in feature ``j``.

    Both perturbed ensembles reuse the same random stream, so the Monte Carlo
    noise largely cancels in the difference.
    """
    X = np.asarray(X_test, dtype=float)
    P = X.shape[1]
    if not 0 <= j < P:
        raise ValueError(f"feature index {j} out of range for {P} features")
    if not step > 0:
        raise ValueError("step must be positive")
    base = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    hi, lo = X.copy(), X.copy()
    hi[:, j] += step
    lo[:, j] -= step
    mean_hi = predict(chain, hi, R, base).mean()
    mean_lo = predict(chain, lo, R, base).mean()
    return float(np.mean(np.abs(mean_hi - mean_lo) / (2 * step)))

