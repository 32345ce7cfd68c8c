"""Accuracy, density and interval-efficiency metrics for predictive ensembles."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import logsumexp
from .model import PredictiveEnsemble

# probability grid for quantile comparisons: midpoints 0.005, 0.015, ..., 0.995
P_GRID = (np.arange(100) + 0.5) / 100.0
X_GRID = np.linspace(-1.0, 1.0, 101)
WEPI_RESOLUTION = 1e-4


@dataclass
class EvalReport:
    rmse: float
    nll: float
    wepi_95: float
    coverage: list[tuple[float, float]] = field(default_factory=list)
    quantile_l1: float | None = None
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v
        return {"rmse": self.rmse, "nll": self.nll, "wepi_95": clean(self.wepi_95),
                "coverage": [list(c) for c in self.coverage],
                "quantile_l1": self.quantile_l1, **{f"meta_{k}": v for k, v in self.meta.items()}}

    def write_json(self, path) -> None:
        with Path(path).open("w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    CSV_FIELDS = ("dataset", "split", "method", "rmse", "nll", "wepi_95", "quantile_l1")

    def csv_row(self) -> dict:
        d = self.to_dict()
        return {"dataset": self.meta.get("dataset", ""), "split": self.meta.get("split", ""),
                "method": self.meta.get("method", "b-deepnoise"), "rmse": d["rmse"],
                "nll": d["nll"], "wepi_95": d["wepi_95"],
                "quantile_l1": "" if d["quantile_l1"] is None else d["quantile_l1"]}

    def append_csv(self, path) -> None:
        path = Path(path)
        new = not path.exists()
        with path.open("a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.CSV_FIELDS)
            if new:
                w.writeheader()
            w.writerow(self.csv_row())


def _targets(ens: PredictiveEnsemble, y_true) -> np.ndarray:
    y = np.asarray(y_true, dtype=float)
    if y.ndim == 1:
        y = y[:, None] if ens.draws.shape[2] == 1 else y[None, :]
    if y.shape != (ens.n_points, ens.draws.shape[2]):
        raise ValueError(f"targets of shape {y.shape} do not match ensemble "
                         f"({ens.n_points} points x {ens.draws.shape[2]} outputs)")
    return y


def rmse(ens: PredictiveEnsemble, y_true) -> float:
    if ens.n_components == 0:
        raise ValueError("empty ensemble")
    y = _targets(ens, y_true)
    return float(np.sqrt(np.mean((ens.mean() - y) ** 2)))


def log_predictive_density(ens: PredictiveEnsemble, y_true) -> np.ndarray:
    """Per-point log of the mixture of stored final-layer Gaussians at ``y_true``."""
    y = _targets(ens, y_true)[:, None, :]
    lp = -0.5 * (np.log(2 * np.pi * ens.comp_var) + (y - ens.comp_mean) ** 2 / ens.comp_var)
    return logsumexp(lp.sum(axis=-1), axis=1) - math.log(ens.n_components)


def nll(ens: PredictiveEnsemble, y_true) -> float:
    """Mean negative log predictive density, in the units of ``ens`` and ``y_true``."""
    return float(-np.mean(log_predictive_density(ens, y_true)))


def _coverage_at(draws, y, level):
    lo, hi = np.quantile(draws, [(1 - level) / 2, (1 + level) / 2], axis=1)
    inside = (y >= lo) & (y <= hi)
    return inside, hi - lo


def coverage_curve(ens: PredictiveEnsemble, y_true, levels=None) -> list[tuple[float, float]]:
    """Fraction of targets inside the equal-tailed ensemble interval at each level."""
    levels = np.round(np.linspace(0.05, 0.95, 19), 2) if levels is None else levels
    y = _targets(ens, y_true)
    return [(float(lv), float(np.mean(_coverage_at(ens.draws, y, lv)[0]))) for lv in levels]


def wepi(ens: PredictiveEnsemble, y_true, target: float = 0.95) -> float:
    """Mean width of the narrowest equal-tailed intervals covering ``target`` of the data.

    Bisects the nominal level to ``WEPI_RESOLUTION``; ``inf`` when even the
    full draw range misses too many targets.
    """
    y = _targets(ens, y_true)
    draws = ens.draws

    def covers(level):
        inside, width = _coverage_at(draws, y, level)
        return np.mean(inside) >= target, float(np.mean(width))

    ok, width = covers(1.0)
    if not ok:
        return math.inf
    lo, hi = 0.0, 1.0
    ok0, width0 = covers(0.0)
    if ok0:
        return width0
    while hi - lo > WEPI_RESOLUTION:
        mid = 0.5 * (lo + hi)
        ok, w = covers(mid)
        if ok:
            hi, width = mid, w
        else:
            lo = mid
    return width


def empirical_quantiles(draws, probs=P_GRID) -> np.ndarray:
    """Quantiles by linear interpolation between order statistics (last axis)."""
    return np.quantile(np.asarray(draws, float), probs, axis=-1)


def quantile_l1(draws_at_grid, true_quantile, x_grid=X_GRID, probs=P_GRID) -> float:
    """Average over inputs and probability levels of ``|Q_hat(p|x) - Q(p|x)|``.

    ``draws_at_grid`` is ``(len(x_grid), n_draws)``; ``true_quantile(x, p)``
    must broadcast.
    """
    draws = np.asarray(draws_at_grid, float)
    if draws.ndim == 3:
        draws = draws[..., 0]
    est = empirical_quantiles(draws, probs)
    truth = true_quantile(np.asarray(x_grid)[None, :], np.asarray(probs)[:, None])
    return float(np.mean(np.abs(est - truth)))


def quantile_distance(a, b, probs=P_GRID) -> float:
    """Quantile-L1 distance between two samples at a single input."""
    return float(np.mean(np.abs(empirical_quantiles(a, probs) - empirical_quantiles(b, probs))))


def evaluate(ens: PredictiveEnsemble, y_true, levels=None) -> EvalReport:
    return EvalReport(rmse=rmse(ens, y_true), nll=nll(ens, y_true), wepi_95=wepi(ens, y_true),
                      coverage=coverage_curve(ens, y_true, levels))
