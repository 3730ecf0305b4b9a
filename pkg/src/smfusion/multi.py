"""Multi-algorithm fusion: parallel pipelines under different size weights."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .distributed import fuse_distributed
from .ellipsoid import Ellipsoid, SizeObjective
from .errors import DimensionMismatch, EmptyIntersection, InvalidParameter


@dataclass(frozen=True)
class WeightBank:
    """Probability vectors over state axes, one per pipeline."""

    weights: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if len(self.weights) == 0:
            raise InvalidParameter("weight bank must not be empty")
        rows = tuple(tuple(float(x) for x in w) for w in self.weights)
        if len({len(w) for w in rows}) != 1:
            raise DimensionMismatch("all weight vectors must have the same length")
        for w in rows:
            SizeObjective.weighted(w)
        object.__setattr__(self, "weights", rows)

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return len(self.weights[0])

    def objectives(self) -> list[SizeObjective]:
        return [SizeObjective.weighted(w) for w in self.weights]

    @classmethod
    def emphasis(cls, n: int, major: Fraction = Fraction(19, 25)) -> WeightBank:
        """One vector per axis: ``major`` on that axis, the rest split evenly."""
        if n < 2:
            raise InvalidParameter("emphasis bank needs at least two axes")
        minor = (1 - major) / (n - 1)
        rows = []
        for j in range(n):
            rows.append(tuple(float(major if i == j else minor) for i in range(n)))
        return cls(tuple(rows))

    @classmethod
    def uniform(cls, n: int) -> WeightBank:
        return cls(((1.0 / n,) * n,))


@dataclass(frozen=True)
class AxisIntervalSet:
    """Per-axis projection intervals of several ellipsoids and their intersection.

    ``lower``/``upper`` have shape (members, n); ``lo``/``hi`` are the
    intersected bounds per axis.
    """

    lower: np.ndarray
    upper: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.hi + self.lo)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        slack = tol * (1.0 + np.abs(x))
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))


def intersect_axis_bounds(ellipsoids: Sequence[Ellipsoid]) -> AxisIntervalSet:
    """Intersect ``[c_i - sqrt(P_ii), c_i + sqrt(P_ii)]`` across ellipsoids.

    Raises:
        EmptyIntersection: some axis has no common point.
    """
    if len(ellipsoids) == 0:
        raise InvalidParameter("need at least one ellipsoid")
    n = ellipsoids[0].dim
    if any(e.dim != n for e in ellipsoids):
        raise DimensionMismatch("ellipsoids must share a dimension")
    centers = np.array([e.center for e in ellipsoids])
    radii = np.array([e.axis_bounds() for e in ellipsoids])
    lower = centers - radii
    upper = centers + radii
    lo = lower.max(axis=0)
    hi = upper.min(axis=0)
    if np.any(lo > hi):
        axes = np.flatnonzero(lo > hi).tolist()
        raise EmptyIntersection(f"projection intervals do not overlap on axes {axes}")
    return AxisIntervalSet(lower, upper, lo, hi)


def run_parallel(
    step: Callable[..., Any],
    bank: WeightBank,
    states: Sequence[Any],
    *shared: Any,
) -> list[Any]:
    """Advance one pipeline per weight vector.

    Args:
        step: ``step(objective, state, *shared) -> new_state``.
        bank: weight vectors; pipeline ``j`` uses ``bank.objectives()[j]``.
        states: each pipeline's own recursion state.
        *shared: inputs common to all pipelines (e.g. the measurements).
    """
    if len(states) != len(bank):
        raise DimensionMismatch(f"{len(bank)} weight vectors but {len(states)} pipeline states")
    return [step(obj, state, *shared) for obj, state in zip(bank.objectives(), states)]


def outer_ellipsoid(ellipsoids: Sequence[Ellipsoid], obj: SizeObjective) -> Ellipsoid:
    """Single ellipsoid covering the intersection of all members.

    The first member plays the prediction role and the rest are fused into it.
    """
    if len(ellipsoids) == 0:
        raise InvalidParameter("need at least one ellipsoid")
    if len(ellipsoids) == 1:
        return ellipsoids[0]
    return fuse_distributed(ellipsoids[0], list(ellipsoids[1:]), obj).ellipsoid
