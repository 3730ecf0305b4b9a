"""Ellipsoids and the small linear-algebra kit the filters are built on.

An ellipsoid is stored as ``(center, shape)`` and describes the set

    { x : (x - center)^T shape^{-1} (x - center) <= 1 }.

Equivalently ``x = center + E u`` with ``||u|| <= 1`` where ``E`` is the
lower Cholesky factor of ``shape``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidParameter,
    NotPositiveDefinite,
    NotSymmetric,
)

SYMMETRY_RTOL = 1e-10


def symmetrize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _check_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")


def is_symmetric(m: np.ndarray, rtol: float = SYMMETRY_RTOL) -> bool:
    scale = max(float(np.max(np.abs(m))), 1e-300) if m.size else 1.0
    return bool(np.max(np.abs(m - m.T), initial=0.0) <= rtol * scale)


def regularization_epsilon(shape: np.ndarray) -> float:
    """Ridge used for degenerate shape matrices: 1e-12 * max(1, trace)."""
    return 1e-12 * max(1.0, float(np.trace(shape)))


def cholesky_factor(shape: np.ndarray) -> np.ndarray:
    """Lower-triangular ``E`` with ``E @ E.T == shape``.

    Raises:
        NotPositiveDefinite: if a pivot is not strictly positive.
    """
    a = np.asarray(shape, dtype=float)
    _check_square(a, "shape")
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite("shape contains non-finite entries")
    try:
        return np.linalg.cholesky(symmetrize(a))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def regularized_cholesky(shape: np.ndarray) -> np.ndarray:
    """Cholesky factor of ``shape + eps I`` (see ``regularization_epsilon``)."""
    a = symmetrize(shape)
    return cholesky_factor(a + regularization_epsilon(a) * np.eye(a.shape[0]))


def min_eigenvalue(m: np.ndarray) -> float:
    a = np.asarray(m, dtype=float)
    _check_square(a)
    if not is_symmetric(a):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    return float(np.linalg.eigvalsh(symmetrize(a))[0])


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix through its Cholesky factorization."""
    a = symmetrize(m)
    try:
        c = cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return symmetrize(cho_solve(c, np.eye(a.shape[0])))


def structural_inverse(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of a PSD matrix on the complement of its exactly-zero rows.

    Rows and columns that are identically zero (variables no constraint
    touches) are removed, the rest is inverted as SPD, and zeros are put
    back. Returns the inverse and the boolean mask of removed indices.

    Raises:
        NotPositiveDefinite: the remaining block is not positive definite.
    """
    a = symmetrize(m)
    dropped = ~np.any(a != 0.0, axis=1)
    if not dropped.any():
        return spd_inverse(a), dropped
    keep = ~dropped
    if not keep.any():
        raise NotPositiveDefinite("matrix is identically zero")
    out = np.zeros_like(a)
    out[np.ix_(keep, keep)] = spd_inverse(a[np.ix_(keep, keep)])
    return out, dropped


@dataclass(frozen=True)
class SizeObjective:
    """Size measure f(P) = sum_i w_i P_ii.

    ``kind="trace"`` uses unit weights (plain trace); ``kind="weighted-diag"``
    requires strictly positive weights summing to one.
    """

    kind: str = "trace"
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind == "trace":
            if self.weights is not None:
                raise InvalidParameter("trace objective takes no weights")
        elif self.kind == "weighted-diag":
            if self.weights is None or len(self.weights) == 0:
                raise InvalidParameter("weighted-diag objective needs weights")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0) or not np.isfinite(w).all():
                raise InvalidParameter("weights must be strictly positive")
            if abs(float(w.sum()) - 1.0) > 1e-12:
                raise InvalidParameter(f"weights must sum to 1, got {w.sum()!r}")
            object.__setattr__(self, "weights", tuple(float(x) for x in w))
        else:
            raise InvalidParameter(f"unknown objective kind {self.kind!r}")

    @classmethod
    def trace(cls) -> SizeObjective:
        return cls("trace")

    @classmethod
    def weighted(cls, weights: Sequence[float]) -> SizeObjective:
        return cls("weighted-diag", tuple(weights))

    @classmethod
    def uniform(cls, n: int) -> SizeObjective:
        return cls.weighted([1.0 / n] * n)

    def diag_weights(self, n: int) -> np.ndarray:
        if self.kind == "trace":
            return np.ones(n)
        w = np.asarray(self.weights)
        if w.shape[0] != n:
            raise DimensionMismatch(f"objective has {w.shape[0]} weights, matrix is {n}x{n}")
        return w

    def __call__(self, shape: np.ndarray) -> float:
        return objective_value(self, shape)


def objective_value(obj: SizeObjective, shape: np.ndarray) -> float:
    p = np.asarray(shape, dtype=float)
    _check_square(p, "shape")
    return float(obj.diag_weights(p.shape[0]) @ np.diag(p))


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Bounding ellipsoid with center ``center`` and SPD shape matrix ``shape``.

    The shape is symmetrized on construction and validated by a Cholesky
    factorization, which is cached as :attr:`factor`.
    """

    center: np.ndarray
    shape: np.ndarray

    def __post_init__(self) -> None:
        c = np.array(self.center, dtype=float).reshape(-1)
        p = np.array(self.shape, dtype=float)
        if p.ndim == 0:
            p = p.reshape(1, 1)
        _check_square(p, "shape")
        if p.shape[0] != c.shape[0]:
            raise DimensionMismatch(
                f"center has length {c.shape[0]}, shape is {p.shape[0]}x{p.shape[0]}"
            )
        if not is_symmetric(p):
            raise NotSymmetric("shape matrix is not symmetric")
        p = symmetrize(p)
        factor = cholesky_factor(p)
        c.setflags(write=False)
        p.setflags(write=False)
        factor.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "shape", p)
        object.__setattr__(self, "_factor", factor)

    @classmethod
    def regularized(cls, center: np.ndarray, shape: np.ndarray) -> Ellipsoid:
        """Build an ellipsoid from a possibly singular shape by adding a tiny ridge."""
        p = symmetrize(np.atleast_2d(np.asarray(shape, dtype=float)))
        return cls(center, p + regularization_epsilon(p) * np.eye(p.shape[0]))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def factor(self) -> np.ndarray:
        return self._factor  # type: ignore[attr-defined]

    @cached_property
    def inverse(self) -> np.ndarray:
        e_inv = solve_triangular(self.factor, np.eye(self.dim), lower=True)
        return symmetrize(e_inv.T @ e_inv)

    def quadratic_form(self, x: np.ndarray) -> np.ndarray | float:
        """(x - c)^T P^{-1} (x - c); accepts a single point or an (N, n) array."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"point has dimension {x.shape[-1]}, ellipsoid {self.dim}")
        d = x - self.center
        z = solve_triangular(self.factor, np.atleast_2d(d).T, lower=True)
        q = np.sum(z * z, axis=0)
        return float(q[0]) if x.ndim == 1 else q

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        return contains(self, x, tol)

    def axis_bounds(self) -> np.ndarray:
        """Half-lengths of the projections onto every coordinate axis."""
        return np.sqrt(np.diag(self.shape))

    def boundary_points(self, u: np.ndarray) -> np.ndarray:
        """Map unit vectors ``u`` (rows) to boundary points ``center + E u``."""
        return self.center + np.asarray(u) @ self.factor.T

    def __repr__(self) -> str:
        return f"Ellipsoid(center={self.center.tolist()}, shape={self.shape.tolist()})"


def contains(e: Ellipsoid, x: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(e.quadratic_form(np.asarray(x, dtype=float).reshape(-1)) <= 1.0 + tol)


def axis_error_bound(e: Ellipsoid, axis: int) -> float:
    if not 0 <= axis < e.dim:
        raise IndexOutOfRange(f"axis {axis} outside [0, {e.dim})")
    return float(np.sqrt(e.shape[axis, axis]))
