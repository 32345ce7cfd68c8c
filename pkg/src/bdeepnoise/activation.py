"""Piecewise-linear activation functions.

An activation is stored as ``J`` linear segments ``h(t) = b[j] * t + b'[j]``
on half-open intervals ``[c[j-1], c[j])`` with ``c[0] = -inf`` and
``c[J] = +inf``.  The same segment data drives the deterministic forward
pass and the pre-activation Gibbs update.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BUILTIN_NAMES = ("relu", "leaky_relu", "hard_tanh", "hard_sigmoid", "identity")


@dataclass(frozen=True)
class PiecewiseLinearActivation:
    slopes: tuple[float, ...]
    intercepts: tuple[float, ...]
    knots: tuple[float, ...]
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "slopes", tuple(float(b) for b in self.slopes))
        object.__setattr__(self, "intercepts", tuple(float(b) for b in self.intercepts))
        object.__setattr__(self, "knots", tuple(float(c) for c in self.knots))
        J = len(self.slopes)
        if J < 1:
            raise ValueError("activation needs at least one segment")
        if len(self.intercepts) != J or len(self.knots) != J - 1:
            raise ValueError(
                f"inconsistent segment data: {J} slopes, {len(self.intercepts)} "
                f"intercepts, {len(self.knots)} knots"
            )
        if not all(np.isfinite(self.slopes)) or not all(np.isfinite(self.intercepts)):
            raise ValueError("slopes and intercepts must be finite")
        knots = np.asarray(self.knots)
        if knots.size and (not np.all(np.isfinite(knots)) or np.any(np.diff(knots) <= 0)):
            raise ValueError("knots must be finite and strictly increasing")

    @property
    def n_segments(self) -> int:
        return len(self.slopes)

    @property
    def lipschitz(self) -> float:
        return lipschitz(self)

    def bounds(self) -> np.ndarray:
        """Segment endpoints ``c[0..J]`` including the infinite ends."""
        return np.concatenate([[-np.inf], self.knots, [np.inf]])

    def segment(self, t) -> np.ndarray:
        """Index of the segment containing ``t``; ties at a knot go right."""
        return np.searchsorted(np.asarray(self.knots), t, side="right")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        j = self.segment(t)
        return np.asarray(self.slopes)[j] * t + np.asarray(self.intercepts)[j]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "slopes": list(self.slopes),
            "intercepts": list(self.intercepts),
            "knots": list(self.knots),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseLinearActivation":
        if d.get("slopes") is None:
            return builtin(d["name"])
        return cls(d["slopes"], d["intercepts"], d["knots"], d.get("name"))


def evaluate(act: PiecewiseLinearActivation, t):
    """Evaluate ``act`` at ``t`` (scalar or array)."""
    out = act(t)
    return float(out) if np.ndim(out) == 0 else out


def lipschitz(act: PiecewiseLinearActivation) -> float:
    return float(max(abs(b) for b in act.slopes))


def builtin(name: str, slope: float | None = None) -> PiecewiseLinearActivation:
    """Canonical segment decomposition of a named activation.

    ``leaky_relu`` takes its negative-side slope either as ``slope`` or in the
    name itself, e.g. ``"leaky_relu(0.01)"``.  Hard sigmoid is
    ``clamp((t + 1) / 2, 0, 1)``.
    """
    key = name.strip().lower().replace("-", "_")
    if key.startswith("leaky_relu(") and key.endswith(")"):
        slope = float(key[len("leaky_relu("):-1])
        key = "leaky_relu"
    if key == "relu":
        return PiecewiseLinearActivation((0.0, 1.0), (0.0, 0.0), (0.0,), "relu")
    if key == "leaky_relu":
        slope = 0.01 if slope is None else float(slope)
        if not 0.0 < slope < 1.0:
            raise ValueError(f"leaky ReLU slope must lie in (0, 1), got {slope}")
        return PiecewiseLinearActivation(
            (slope, 1.0), (0.0, 0.0), (0.0,), f"leaky_relu({slope!r})"
        )
    if key == "hard_tanh":
        return PiecewiseLinearActivation(
            (0.0, 1.0, 0.0), (-1.0, 0.0, 1.0), (-1.0, 1.0), "hard_tanh"
        )
    if key == "hard_sigmoid":
        return PiecewiseLinearActivation(
            (0.0, 0.5, 0.0), (0.0, 0.5, 1.0), (-1.0, 1.0), "hard_sigmoid"
        )
    if key == "identity":
        return PiecewiseLinearActivation((1.0,), (0.0,), (), "identity")
    raise ValueError(f"unknown activation {name!r}; expected one of {BUILTIN_NAMES}")


# activations covered by the simplified variance bound
BOUNDED_LIPSCHITZ_FAMILY = ("relu", "leaky_relu", "hard_tanh", "hard_sigmoid")


def in_simple_bound_family(act: PiecewiseLinearActivation) -> bool:
    if act.name is None:
        return False
    base = act.name.split("(")[0]
    return base in BOUNDED_LIPSCHITZ_FAMILY
