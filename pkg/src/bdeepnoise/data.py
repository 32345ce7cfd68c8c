"""Synthetic benchmark generators, CSV ingestion, standardization and splits."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import special

from .distributions import RngStream

log = logging.getLogger(__name__)

SYNTHETIC_KINDS = ("heteroscedastic", "skewed", "multimodal")

# conditional median: linear spline through these points
SPLINE_KNOTS = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
SPLINE_VALUES = np.array([0.0, 1.0, -1.0, 1.0, 0.0])

MULTIMODAL_SCALE = 0.1


@dataclass(frozen=True)
class Standardization:
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: np.ndarray
    y_scale: np.ndarray

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardization":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("x_mean", "x_scale", "y_mean", "y_scale")))

    def transform_x(self, X):
        return (np.asarray(X, float) - self.x_mean) / self.x_scale

    def transform_y(self, Y):
        return (np.asarray(Y, float) - self.y_mean) / self.y_scale


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    columns: list[str] = field(default_factory=list)
    target_columns: list[str] = field(default_factory=list)
    quantile_fn: Callable | None = None
    standardization: Standardization | None = None
    kind: str | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        Y = np.asarray(self.Y, dtype=float)
        self.Y = Y[:, None] if Y.ndim == 1 else Y
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y must have the same number of rows")
        if self.X.shape[0] < 1:
            raise ValueError("dataset has no rows")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise ValueError("dataset contains NaN or infinite values")
        if not self.columns:
            self.columns = [f"x{i}" for i in range(self.X.shape[1])]
        if not self.target_columns:
            self.target_columns = ["y"] if self.Y.shape[1] == 1 else [f"y{i}" for i in range(self.Y.shape[1])]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def subset(self, rows) -> "Dataset":
        return replace(self, X=self.X[rows], Y=self.Y[rows])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.9
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train fraction must lie in (0, 1)")


# -- synthetic regimes -------------------------------------------------------

def spline_median(x):
    return np.interp(x, SPLINE_KNOTS, SPLINE_VALUES)


def _hetero_scale(x):
    return 0.1 + 0.9 * np.asarray(x, float) ** 2


def _skew_scale(x):
    return 0.2 + 0.8 * (1.0 + np.asarray(x, float)) / 2.0


def _mode_offset(x):
    return 0.5 + 0.5 * np.asarray(x, float)


def _bimodal_quantile(offset, p, tol=1e-12):
    """Quantile of 0.5 N(-offset, s^2) + 0.5 N(offset, s^2), by bisection."""
    s = MULTIMODAL_SCALE
    offset, p = np.broadcast_arrays(np.asarray(offset, float), np.asarray(p, float))
    lo = -offset - 12 * s
    hi = offset + 12 * s
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        cdf = 0.5 * special.ndtr((mid + offset) / s) + 0.5 * special.ndtr((mid - offset) / s)
        below = cdf < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < tol:
            break
    return 0.5 * (lo + hi)


def synthetic_quantile(kind: str, x, p):
    """Exact conditional quantile ``Q(p | x)`` of a synthetic regime (broadcasting)."""
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    med = spline_median(x)
    if kind == "heteroscedastic":
        return med + _hetero_scale(x) * special.ndtri(p)
    if kind == "skewed":
        s = _skew_scale(x)
        right = med + s * (-np.log1p(-p) - math.log(2.0))
        left = med + s * (np.log(p) + math.log(2.0))
        return np.where(x >= 0, right, left)
    if kind == "multimodal":
        uni = med + MULTIMODAL_SCALE * special.ndtri(p)
        bi = med + _bimodal_quantile(_mode_offset(x), p)
        return np.where(x > 0, bi, uni)
    raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")


def sample_synthetic_y(kind: str, x, rng) -> np.ndarray:
    """Draw outcomes at given inputs."""
    gen = rng.generator if isinstance(rng, RngStream) else np.random.default_rng(rng)
    x = np.asarray(x, dtype=float)
    med = spline_median(x)
    if kind == "heteroscedastic":
        return med + _hetero_scale(x) * gen.standard_normal(x.shape)
    if kind == "skewed":
        # exponential noise shifted to median zero; right-skewed for x >= 0
        e = gen.standard_exponential(x.shape) - math.log(2.0)
        return med + np.where(x >= 0, 1.0, -1.0) * _skew_scale(x) * e
    if kind == "multimodal":
        sign = np.where(gen.random(x.shape) < 0.5, -1.0, 1.0)
        offset = np.where(x > 0, sign * _mode_offset(x), 0.0)
        return med + offset + MULTIMODAL_SCALE * gen.standard_normal(x.shape)
    raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")


def gen_synthetic(kind: str, n: int, seed: int) -> Dataset:
    """Inputs uniform on [-1, 1], outcomes from the chosen noise regime."""
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {SYNTHETIC_KINDS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    base = RngStream(seed, SYNTHETIC_KINDS.index(kind))
    x = base.child(0).generator.uniform(-1.0, 1.0, n)
    y = sample_synthetic_y(kind, x, base.child(1))
    return Dataset(x[:, None], y[:, None], ["x"], ["y"],
                   quantile_fn=lambda xx, p: synthetic_quantile(kind, xx, p), kind=kind)


# -- CSV ---------------------------------------------------------------------

@dataclass
class LoadReport:
    rows_read: int = 0
    rows_used: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)


def _resolve_columns(header: list[str], spec, ncols: int) -> list[int]:
    out = []
    for item in spec:
        if isinstance(item, int) or (isinstance(item, str) and item.lstrip("-").isdigit()):
            idx = int(item)
            idx = idx + ncols if idx < 0 else idx
            if not 0 <= idx < ncols:
                raise ValueError(f"target column index {item} out of range")
            out.append(idx)
        elif item in header:
            out.append(header.index(item))
        else:
            raise ValueError(f"unknown target column {item!r}")
    return out


def load_csv(path, target_columns=(-1,), header: bool = True,
             report: LoadReport | None = None) -> Dataset:
    """Read a numeric CSV, splitting columns into features and targets.

    Rows with a missing or non-numeric cell are dropped and listed in
    ``report`` (and the log); they are never imputed.
    """
    path = Path(path)
    report = report if report is not None else LoadReport()
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if header:
        if not rows:
            raise ValueError(f"{path} is empty")
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    else:
        ncols = len(rows[0]) if rows else 0
        names = [f"c{i}" for i in range(ncols)]
    ncols = len(names)
    targets = _resolve_columns(names, target_columns, ncols)
    features = [i for i in range(ncols) if i not in targets]
    good = []
    first_line = 2 if header else 1
    for i, row in enumerate(rows):
        report.rows_read += 1
        line = first_line + i
        if len(row) != ncols:
            report.rejected.append((line, f"expected {ncols} cells, got {len(row)}"))
            continue
        try:
            vals = [float(cell) for cell in row]
        except ValueError:
            report.rejected.append((line, "non-numeric or missing cell"))
            continue
        if not all(math.isfinite(v) for v in vals):
            report.rejected.append((line, "non-finite value"))
            continue
        good.append(vals)
    for line, why in report.rejected:
        log.warning("%s line %d rejected: %s", path, line, why)
    if not good:
        raise ValueError(f"{path}: no usable rows")
    report.rows_used = len(good)
    arr = np.asarray(good, dtype=float)
    return Dataset(arr[:, features], arr[:, targets], [names[i] for i in features],
                   [names[i] for i in targets])


def save_csv(ds: Dataset, path) -> None:
    """Write features then targets with a header row, floats in round-trip precision."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.columns, *ds.target_columns])
        for xr, yr in zip(ds.X, ds.Y):
            w.writerow([repr(float(v)) for v in (*xr, *yr)])


def write_manifest(path, **fields) -> None:
    with Path(path).open("w") as fh:
        json.dump(fields, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with Path(path).open() as fh:
        return json.load(fh)


# -- standardization and splitting -------------------------------------------

def fit_standardization(ds: Dataset) -> Standardization:
    def stats(A):
        mean = A.mean(axis=0)
        scale = A.std(axis=0)
        return mean, np.where(scale > 0, scale, 1.0)

    xm, xs = stats(ds.X)
    ym, ys = stats(ds.Y)
    # constant columns are left untouched
    xm = np.where(ds.X.std(axis=0) > 0, xm, 0.0)
    ym = np.where(ds.Y.std(axis=0) > 0, ym, 0.0)
    return Standardization(xm, xs, ym, ys)


def standardize(ds: Dataset, record: Standardization | None = None) -> Dataset:
    """Z-score features and targets; statistics come from ``record`` if given."""
    record = fit_standardization(ds) if record is None else record
    return replace(ds, X=record.transform_x(ds.X), Y=record.transform_y(ds.Y),
                   standardization=record)


def destandardize_predictions(record: Standardization, values):
    """Map standardized outcome values back to natural units."""
    return np.asarray(values, float) * record.y_scale + record.y_mean


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded random train/test partition of the rows."""
    n_train = int(round(spec.train_fraction * ds.n))
    if n_train < 1 or n_train >= ds.n:
        raise ValueError(f"split of {ds.n} rows at {spec.train_fraction} leaves an empty side")
    perm = RngStream(spec.seed, spec.replicate).generator.permutation(ds.n)
    return ds.subset(np.sort(perm[:n_train])), ds.subset(np.sort(perm[n_train:]))
