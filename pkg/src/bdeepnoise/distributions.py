"""Samplers and log-densities used by the Gibbs updates.

Everything is vectorized over numpy arrays; scalar calls work too.  Mixture
weights are handled in log space throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

LOG_2PI = math.log(2.0 * math.pi)

# standardized distance beyond which truncated draws switch to rejection
TAIL_SWITCH = 5.0

_FLOAT_MAX = np.finfo(float).max


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(seed, stream_id)``.

    Backed by the Philox counter-based generator, keyed directly with the
    two 64-bit words, so distinct stream ids give independent sequences and
    children can be derived without touching the parent's state.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id & 0xFFFFFFFFFFFFFFFF],
                       dtype=np.uint64)
        object.__setattr__(self, "generator", np.random.Generator(np.random.Philox(key=key)))

    def child(self, *path: int) -> "RngStream":
        """Derive an independent stream for a sub-task identified by ``path``."""
        words = [self.stream_id & 0xFFFFFFFFFFFFFFFF, *(int(p) for p in path)]
        sid = np.random.SeedSequence(words).generate_state(1, np.uint64)[0]
        return RngStream(self.seed, int(sid))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class TruncatedNormalSpec:
    loc: float
    scale: float
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if not self.lower < self.upper:
            raise ValueError(f"invalid truncation interval [{self.lower}, {self.upper}]")


@dataclass(frozen=True)
class AdjacentTruncatedNormalMixture:
    """Mixture of normals truncated to consecutive intervals of the real line."""

    components: tuple[TruncatedNormalSpec, ...]
    log_weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.components) != len(self.log_weights) or not self.components:
            raise ValueError("need one log weight per component")
        for left, right in zip(self.components, self.components[1:]):
            if left.upper != right.lower:
                raise ValueError("component intervals must be adjacent")
        lw = np.asarray(self.log_weights, dtype=float)
        total = logsumexp(lw)
        if not np.isfinite(total):
            raise ValueError("mixture has no finite weight")
        object.__setattr__(self, "log_weights", tuple(lw - total))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        for lw, c in zip(self.log_weights, self.components):
            inside = (x >= c.lower) & (x < c.upper)
            if not np.any(inside) or lw == -np.inf:
                continue
            z_lo, z_hi = (c.lower - c.loc) / c.scale, (c.upper - c.loc) / c.scale
            out[inside] = (lw + normal_logpdf(x[inside], c.loc, c.scale**2)
                           - normal_logcdf_diff(z_hi, z_lo))
        return out

    def mean(self) -> float:
        return float(sum(w * truncated_normal_moments(c)[0]
                         for w, c in zip(self.weights, self.components)))


# -- densities ---------------------------------------------------------------

def normal_logpdf(x, mean=0.0, var=1.0):
    x, mean, var = np.asarray(x, float), np.asarray(mean, float), np.asarray(var, float)
    return -0.5 * (LOG_2PI + np.log(var) + (x - mean) ** 2 / var)


def normal_cdf(x):
    return special.ndtr(x)


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > -math.log(2.0), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))


def normal_logcdf_diff(hi, lo):
    """``log(Phi(hi) - Phi(lo))`` without cancellation in either tail."""
    hi, lo = np.broadcast_arrays(np.asarray(hi, float), np.asarray(lo, float))
    if np.any(hi <= lo):
        raise ValueError("normal_logcdf_diff requires hi > lo")
    out = _logcdf_diff(hi, lo)
    return out if out.ndim else float(out)


def _logcdf_diff(hi, lo):
    # reflect intervals in the upper tail so both ends sit where Phi is accurate
    flip = lo > 0
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    lb = special.log_ndtr(b)
    return lb + _log1mexp(special.log_ndtr(a) - lb)


def logsumexp(x, axis=-1, keepdims=False):
    """Plain log-sum-exp along one axis; rows of all ``-inf`` give ``-inf``."""
    x = np.asarray(x, dtype=float)
    mx = np.max(x, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - mx), axis=axis, keepdims=True)) + mx
    return out if keepdims else np.squeeze(out, axis=axis)


def truncated_normal_moments(spec: TruncatedNormalSpec) -> tuple[float, float]:
    """Mean and variance of a truncated normal."""
    a = (spec.lower - spec.loc) / spec.scale
    b = (spec.upper - spec.loc) / spec.scale
    logz = normal_logcdf_diff(b, a)
    pa = 0.0 if np.isinf(a) else math.exp(-0.5 * a * a - 0.5 * LOG_2PI - logz)
    pb = 0.0 if np.isinf(b) else math.exp(-0.5 * b * b - 0.5 * LOG_2PI - logz)
    aa = 0.0 if np.isinf(a) else a * pa
    bb = 0.0 if np.isinf(b) else b * pb
    mean = spec.loc + spec.scale * (pa - pb)
    var = spec.scale**2 * (1.0 + aa - bb - (pa - pb) ** 2)
    return mean, max(var, 0.0)


# -- samplers ----------------------------------------------------------------

def sample_normal(mean, var, rng, size=None):
    var = np.asarray(var, dtype=float)
    if np.any(~(var > 0)):
        raise ValueError("normal variance must be positive")
    gen = as_generator(rng)
    if size is None:
        size = np.broadcast_shapes(np.shape(mean), var.shape)
    out = np.asarray(mean, float) + np.sqrt(var) * gen.standard_normal(size)
    return out if out.ndim else float(out)


def _std_tail(a, b, gen):
    """Draws from N(0,1) truncated to [a, b] with 0 < a (vectorized rejection).

    Exponential proposal for wide intervals, uniform proposal when the
    interval is narrow enough that the density is nearly flat on it.
    """
    out = np.empty_like(a)
    pending = np.arange(a.size)
    while pending.size:
        aa, bb = a[pending], b[pending]
        uniform = (bb * bb - aa * aa) < 2.0
        rate = 0.5 * (aa + np.sqrt(aa * aa + 4.0))
        e = gen.standard_exponential(pending.size)
        u = gen.random(pending.size)
        v = gen.random(pending.size)
        z_exp = aa + e / rate
        z_uni = aa + v * (bb - aa)
        z = np.where(uniform, z_uni, z_exp)
        log_acc = np.where(uniform, -0.5 * (z * z - aa * aa), -0.5 * (z - rate) ** 2)
        ok = (z <= bb) & (np.log(u) <= log_acc)
        out[pending[ok]] = z[ok]
        pending = pending[~ok]
    return out


def sample_standard_truncated(a, b, rng):
    """Vectorized draws from N(0,1) truncated to [a, b] (elementwise)."""
    gen = as_generator(rng)
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    a, b = a.ravel().copy(), b.ravel().copy()
    if np.any(~(a < b)):
        raise ValueError("truncation interval must satisfy lower < upper")
    # mirror to the lower half so the CDF is evaluated where it is accurate
    flip = a > 0
    lo = np.where(flip, -b, a)
    hi = np.where(flip, -a, b)
    out = np.empty_like(lo)
    tail = hi < -TAIL_SWITCH
    if np.any(tail):
        out[tail] = -_std_tail(-hi[tail], -lo[tail], gen)
    body = ~tail
    if np.any(body):
        p_lo = special.ndtr(lo[body])
        p_hi = special.ndtr(hi[body])
        u = gen.random(p_lo.size)
        out[body] = special.ndtri(p_lo + u * (p_hi - p_lo))
    out = np.where(flip, -out, out)
    return np.clip(out, a, b)


def sample_truncated_normal(spec, rng, size=None):
    """Draw from a truncated normal.

    ``spec`` is either a :class:`TruncatedNormalSpec` or a tuple
    ``(loc, scale, lower, upper)`` of broadcastable arrays.
    """
    if isinstance(spec, TruncatedNormalSpec):
        loc, scale, lower, upper = spec.loc, spec.scale, spec.lower, spec.upper
    else:
        loc, scale, lower, upper = (np.asarray(s, float) for s in spec)
        if np.any(~(scale > 0)):
            raise ValueError("truncated normal scale must be positive")
    shape = np.broadcast_shapes(np.shape(loc), np.shape(scale), np.shape(lower),
                                np.shape(upper), () if size is None else size)
    loc, scale, lower, upper = (np.broadcast_to(s, shape) for s in (loc, scale, lower, upper))
    with np.errstate(invalid="ignore"):
        z = sample_standard_truncated((lower - loc) / scale, (upper - loc) / scale, rng)
    out = np.clip(loc + scale * z.reshape(shape), lower, upper)
    return out if out.ndim else float(out)


def sample_inverse_gamma(shape, rate, rng, size=None):
    """Draw from IG(shape, rate), density proportional to x^(-shape-1) exp(-rate/x).

    Very small shapes put real mass beyond the double range; such draws are
    clipped to the largest finite float.
    """
    shape, rate = np.asarray(shape, float), np.asarray(rate, float)
    if np.any(~(shape > 0)) or np.any(~(rate > 0)):
        raise ValueError("inverse-gamma shape and rate must be positive")
    gen = as_generator(rng)
    if size is None:
        size = np.broadcast_shapes(shape.shape, rate.shape)
    with np.errstate(divide="ignore", over="ignore"):
        out = np.minimum(rate / gen.standard_gamma(shape, size=size), _FLOAT_MAX)
    return out if out.ndim else float(out)


def sample_categorical(log_weights, rng):
    """Sample indices with probabilities ``softmax(log_weights)`` along the last axis."""
    lw = np.asarray(log_weights, dtype=float)
    norm = logsumexp(lw, axis=-1, keepdims=True)
    if np.any(~np.isfinite(norm)):
        raise ValueError("categorical needs at least one finite log weight")
    return _categorical_from_probs(np.exp(lw - norm), as_generator(rng))


def _categorical_from_probs(p, gen):
    cum = np.cumsum(p, axis=-1)
    cum /= cum[..., -1:]
    u = gen.random(p.shape[:-1])
    idx = np.sum(cum < u[..., None], axis=-1)
    idx = np.minimum(idx, p.shape[-1] - 1)
    return int(idx) if idx.ndim == 0 else idx


def sample_mixture_arrays(log_weights, loc, scale, bounds, rng):
    """Vectorized draw from adjacent truncated normal mixtures.

    ``log_weights`` (normalized), ``loc`` and ``scale`` have shape
    ``(J,) + S``; ``bounds`` holds the ``J + 1`` shared interval endpoints.
    """
    gen = as_generator(rng)
    J = log_weights.shape[0]
    u = 1.0 - gen.random(log_weights.shape[1:])
    cum = np.zeros(u.shape)
    j = np.zeros(u.shape, dtype=np.intp)
    for i in range(J - 1):
        cum += np.exp(log_weights[i])
        j += cum < u
    pick = lambda arr: np.take_along_axis(arr, j[None], axis=0)[0]
    # rounding in the running sum can land on a zero-weight trailing segment
    while np.any(bad := pick(log_weights) == -np.inf):
        j = np.where(bad, j - 1, j)
    loc_j = pick(loc)
    scale_j = pick(scale)
    bounds = np.asarray(bounds)
    return sample_truncated_normal((loc_j, scale_j, bounds[j], bounds[j + 1]), gen)


def sample_mixture(mix: AdjacentTruncatedNormalMixture, rng, size: int | None = None):
    """Pick a component by its weight, then draw from that truncated normal."""
    gen = as_generator(rng)
    n = 1 if size is None else int(size)
    j = np.asarray(sample_categorical(np.tile(mix.log_weights, (n, 1)), gen))
    comps = mix.components
    loc = np.array([c.loc for c in comps])[j]
    scale = np.array([c.scale for c in comps])[j]
    lower = np.array([c.lower for c in comps])[j]
    upper = np.array([c.upper for c in comps])[j]
    out = sample_truncated_normal((loc, scale, lower, upper), gen)
    return float(out[0]) if size is None else out
