"""Brute-force validators for the samplers and the predictive recursion.

Nothing here reuses the sampling code it checks: densities are evaluated
from scratch on grids and the Geweke simulator draws its priors directly
from numpy.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activation import PiecewiseLinearActivation
from .distributions import RngStream
from .model import LayerParams, LatentState, ModelParams, NetworkShape, PriorConfig

QUAD_POINTS = 4096
QUAD_SCALES = 10.0


@dataclass(frozen=True)
class Grid1D:
    lower: float = -12.0
    upper: float = 12.0
    points: int = 100_000

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("grid lower bound must be below the upper bound")
        if self.points < 10:
            raise ValueError("grid needs at least 10 points")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.points)


def _log_phi(x, mean, var):
    return -0.5 * (math.log(2 * math.pi) + np.log(var) + (x - mean) ** 2 / var)


def _trapezoid_cells(x, f):
    return 0.5 * (f[1:] + f[:-1]) * np.diff(x)


@dataclass
class GridConditional:
    """A density tabulated on a grid plus its per-segment summaries."""

    nodes: np.ndarray
    density: np.ndarray
    masses: np.ndarray
    means: np.ndarray
    variances: np.ndarray


def default_grid_for(act: PiecewiseLinearActivation, m: float, tau2: float,
                     points: int = 100_000) -> Grid1D:
    """Grid covering 12 prior scales around ``m`` and every knot."""
    half = 12.0 * math.sqrt(tau2)
    knots = np.asarray(act.knots, float)
    lo = min(m - half, knots.min() - 1.0) if knots.size else m - half
    hi = max(m + half, knots.max() + 1.0) if knots.size else m + half
    return Grid1D(lo, hi, points)


def grid_conditional_v(act: PiecewiseLinearActivation, m: float, tau2: float, sigma2: float,
                       u_next: float, grid: Grid1D | None = None) -> GridConditional:
    """Tabulate ``phi(v; m, tau2) * phi(u_next; h(v), sigma2)`` and normalize.

    The knots are added to the grid so segment masses are exact sums of
    trapezoid cells.  Work is in log space, so far-tail inputs stay finite.
    """
    grid = default_grid_for(act, m, tau2) if grid is None else grid
    knots = np.asarray(act.knots, float)
    inside = knots[(knots > grid.lower) & (knots < grid.upper)]
    v = np.union1d(grid.nodes(), inside)
    slopes = np.asarray(act.slopes, float)
    icepts = np.asarray(act.intercepts, float)
    seg = np.searchsorted(knots, v, side="right")
    hv = slopes[seg] * v + icepts[seg]
    logf = _log_phi(v, m, tau2) + _log_phi(u_next, hv, sigma2)
    f = np.exp(logf - logf.max())
    f /= np.sum(_trapezoid_cells(v, f))

    cells = _trapezoid_cells(v, f)
    first = _trapezoid_cells(v, f * v)
    second = _trapezoid_cells(v, f * v * v)
    # a cell belongs to the segment containing its midpoint
    cell_seg = np.searchsorted(knots, 0.5 * (v[1:] + v[:-1]), side="right")
    J = len(slopes)
    masses = np.bincount(cell_seg, cells, minlength=J)
    s1 = np.bincount(cell_seg, first, minlength=J)
    s2 = np.bincount(cell_seg, second, minlength=J)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(masses > 0, s1 / masses, np.nan)
        variances = np.where(masses > 0, s2 / masses - means**2, np.nan)
    return GridConditional(v, f, masses, means, variances)


# -- predictive quadrature ---------------------------------------------------

def _layer_grid(mean: float, var: float, points: int) -> np.ndarray:
    sd = math.sqrt(max(var, 1e-300))
    return np.linspace(mean - QUAD_SCALES * sd, mean + QUAD_SCALES * sd, points)


def predictive_density_numeric(params: ModelParams, x, y_grid, points: int = QUAD_POINTS) -> np.ndarray:
    """Density of ``y | x`` for a model whose every width is one, on ``y_grid``.

    Iterates ``f(v_l) = int phi(v_l; gamma_l + beta_l h(v_{l-1}),
    tau2_l + beta_l^2 sigma2_{l-1}) f(v_{l-1}) dv_{l-1}`` by the trapezoid
    rule on a grid re-centred at each layer.
    """
    if any(k != 1 for k in params.shape.widths):
        raise ValueError("numeric predictive density needs every layer width to be 1")
    act = params.activation
    slopes = np.asarray(act.slopes, float)
    icepts = np.asarray(act.intercepts, float)
    knots = np.asarray(act.knots, float)

    def h(t):
        seg = np.searchsorted(knots, t, side="right")
        return slopes[seg] * t + icepts[seg]

    x = float(np.asarray(x, float).reshape(-1)[0])
    y_grid = np.asarray(y_grid, float)
    lp0 = params.layers[0]
    mean0 = float(lp0.biases[0] + lp0.weights[0, 0] * x)
    var0 = float(lp0.preact_var[0])
    if params.n_hidden == 0:
        return np.exp(_log_phi(y_grid, mean0, var0))

    nodes = _layer_grid(mean0, var0, points)
    dens = np.exp(_log_phi(nodes, mean0, var0))
    for l in range(1, params.n_hidden + 1):
        lp, prev = params.layers[l], params.layers[l - 1]
        beta, gamma = float(lp.weights[0, 0]), float(lp.biases[0])
        kvar = float(lp.preact_var[0] + beta**2 * prev.postact_var[0])
        w = _trapezoid_weights(nodes) * dens
        w /= w.sum()
        loc = gamma + beta * h(nodes)
        out_nodes = y_grid if l == params.n_hidden else None
        if out_nodes is None:
            mu = float(np.sum(w * loc))
            var = kvar + float(np.sum(w * (loc - mu) ** 2))
            out_nodes = _layer_grid(mu, var, points)
        # convolution in blocks to bound memory
        new = np.empty(out_nodes.shape)
        for start in range(0, out_nodes.size, 512):
            block = out_nodes[start:start + 512]
            new[start:start + 512] = np.exp(_log_phi(block[:, None], loc[None, :], kvar)) @ w
        nodes, dens = out_nodes, new
    return dens


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    d = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def trapezoid_integral(x, f) -> float:
    return float(np.sum(_trapezoid_cells(np.asarray(x, float), np.asarray(f, float))))


# -- Geweke joint-distribution test -------------------------------------------

def _ig(gen, a, b, size):
    return b / gen.standard_gamma(a, size)


def sample_prior_params(shape: NetworkShape, prior: PriorConfig, gen) -> ModelParams:
    """One draw of every parameter from the hierarchical prior."""
    layers = []
    L = shape.n_hidden
    for l in range(L + 1):
        k_out, k_in = shape.layer_dims(l)
        wv = _ig(gen, prior.a_weight, prior.b_weight, (k_out, k_in))
        bv = _ig(gen, prior.a_bias, prior.b_bias, k_out)
        layers.append(LayerParams(
            weights=np.sqrt(wv) * gen.standard_normal((k_out, k_in)),
            biases=np.sqrt(bv) * gen.standard_normal(k_out),
            preact_var=_ig(gen, prior.a_preact, prior.b_preact, k_out),
            postact_var=_ig(gen, prior.a_postact, prior.b_postact, k_out) if l < L else None,
            weight_var=wv,
            bias_var=bv,
        ))
    return ModelParams(shape, layers)


def _simulate(params: ModelParams, X: np.ndarray, gen) -> LatentState:
    h = params.activation
    us, vs = [X], []
    u = X
    for l, lp in enumerate(params.layers):
        v = u @ lp.weights.T + lp.biases + np.sqrt(lp.preact_var) * gen.standard_normal((X.shape[0], lp.biases.size))
        vs.append(v)
        if l < params.n_hidden:
            u = h(v) + np.sqrt(lp.postact_var) * gen.standard_normal(v.shape)
            us.append(u)
    return LatentState(us, vs)


_BLOCKS = ("weights", "biases", "preact_var", "postact_var", "weight_var", "bias_var")


def _statistics(params: ModelParams) -> dict[str, float]:
    out = {}
    for l, lp in enumerate(params.layers):
        for name in _BLOCKS:
            arr = getattr(lp, name)
            if arr is None:
                continue
            for idx, val in np.ndenumerate(arr):
                key = f"L{l}.{name}[{','.join(map(str, idx))}]"
                out[key + ".mean"] = float(val)
                out[key + ".sq"] = float(val) ** 2
    return out


@dataclass
class GewekeReport:
    rounds: int
    z: dict[str, float] = field(default_factory=dict)
    threshold: float = 4.0

    @property
    def max_abs_z(self) -> float:
        return max((abs(v) for v in self.z.values()), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_abs_z < self.threshold

    def failing(self) -> dict[str, float]:
        return {k: v for k, v in self.z.items() if abs(v) >= self.threshold}

    def to_dict(self) -> dict:
        return {"rounds": self.rounds, "threshold": self.threshold, "max_abs_z": self.max_abs_z,
                "passed": self.passed, "z": self.z}


def _batch_se(x: np.ndarray, n_batches: int = 50) -> float:
    n = x.size // n_batches * n_batches
    if n < n_batches * 2:
        return float(np.std(x, ddof=1) / math.sqrt(x.size))
    means = x[:n].reshape(n_batches, -1).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


def geweke_compare(shape: NetworkShape, prior: PriorConfig, rounds: int, rng, n: int = 3,
                   fault: str | None = None, threshold: float = 4.0) -> GewekeReport:
    """Compare prior-generative draws with an alternating data/parameter chain.

    The marginal-conditional simulator draws parameters from the prior.  The
    successive-conditional one alternates fresh data given parameters with a
    full Gibbs sweep given the data.  Both target the parameter prior, so
    every moment difference should look like noise.
    """
    from .gibbs import gibbs_sweep

    report = GewekeReport(rounds=rounds, threshold=threshold)
    if rounds <= 0:
        return report
    base = rng if isinstance(rng, RngStream) else RngStream(int(rng))
    X = base.child(0).generator.uniform(-1.0, 1.0, (n, shape.input_dim))

    mc_gen = base.child(1).generator
    mc = [_statistics(sample_prior_params(shape, prior, mc_gen)) for _ in range(rounds)]

    sc_gen = base.child(2).generator
    params = sample_prior_params(shape, prior, sc_gen)
    sc = []
    for r in range(rounds):
        state = _simulate(params, X, sc_gen)
        gibbs_sweep(state, params, prior, base.child(3, r), fault=fault)
        sc.append(_statistics(params))

    for key in mc[0]:
        a = np.array([d[key] for d in mc])
        b = np.array([d[key] for d in sc])
        se = math.sqrt(np.var(a, ddof=1) / a.size + _batch_se(b) ** 2)
        report.z[key] = float((a.mean() - b.mean()) / se) if se > 0 else 0.0
    return report


def write_report(report: dict, path) -> None:
    with Path(path).open("w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
