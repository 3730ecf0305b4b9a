"""Bounding ellipsoids for first-order Taylor remainders by unit-ball sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationFailure, InvalidSampleCount
from .model import wrap_angle

DEFAULT_SAMPLES = 500
DEFAULT_INFLATE = 1.05


@dataclass(frozen=True, eq=False)
class RemainderBound:
    """Ellipsoid ``{e + B u : |u| <= 1}`` covering the sampled remainders.

    ``degenerate`` is set when every half-width hit the floor, i.e. the map is
    linear over the sampled region.
    """

    e: np.ndarray
    P: np.ndarray
    B: np.ndarray
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.e.shape[0]

    @property
    def B_inv(self) -> np.ndarray:
        return np.diag(1.0 / np.diag(self.B))


def sample_unit_ball(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform points in the unit ball: Gaussian direction times U^(1/dim)."""
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radius = rng.random((count, 1)) ** (1.0 / dim)
    return g / norms * radius


def ball_probe_points(rng: np.random.Generator, samples: int, dim: int) -> np.ndarray:
    """Random ball samples plus the 2*dim axis vectors and the origin."""
    axes = np.vstack([np.eye(dim), -np.eye(dim), np.zeros((1, dim))])
    return np.vstack([sample_unit_ball(rng, samples, dim), axes])


def remainders(
    fn,
    x_hat: np.ndarray,
    E: np.ndarray,
    jac: np.ndarray,
    u: np.ndarray,
    angular: np.ndarray | None = None,
) -> np.ndarray:
    """r(u) = fn(x + E u) - fn(x) - J E u for each row of ``u``."""
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    du = u @ np.asarray(E, dtype=float).T
    base = np.asarray(fn(x_hat), dtype=float).reshape(-1)
    vals = np.asarray(fn(x_hat + du), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(base))):
        raise EvaluationFailure("map returned non-finite values on the sampled ball")
    diff = vals - base
    if angular is not None and np.any(angular):
        diff = np.where(angular, wrap_angle(diff), diff)
    return diff - du @ np.asarray(jac, dtype=float).T


def bound_remainder(
    fn,
    x_hat: np.ndarray,
    E: np.ndarray,
    jac: np.ndarray,
    samples: int = DEFAULT_SAMPLES,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    inflate: float = DEFAULT_INFLATE,
    angular: np.ndarray | None = None,
) -> RemainderBound:
    """Axis-aligned box ellipsoid around the sampled remainders.

    Args:
        fn: the nonlinear map (vectorised over rows).
        x_hat: expansion point.
        E: factor of the current state ellipsoid.
        jac: Jacobian of ``fn`` at ``x_hat``.
        samples: number of random ball samples, at least 100.
        seed: RNG seed, seed sequence or generator.
        inflate: half-width inflation factor.
        angular: mask of output components whose differences are wrapped.

    Returns:
        RemainderBound with ``e`` the box center and
        ``P = dim * diag(half_widths**2)`` so that the whole box, corners
        included, lies inside the ellipsoid.
    """
    if samples < 100:
        raise InvalidSampleCount(f"samples must be >= 100, got {samples}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    E = np.atleast_2d(np.asarray(E, dtype=float))
    u = ball_probe_points(rng, samples, E.shape[1])
    r = remainders(fn, x_hat, E, jac, u, angular)
    lo = r.min(axis=0)
    hi = r.max(axis=0)
    e = 0.5 * (lo + hi)
    hw = inflate * 0.5 * (hi - lo)
    floor = 1e-12 * (1.0 + float(np.linalg.norm(e)))
    # rounding noise of the linear part, not curvature
    linear_scale = float(np.max(np.abs(u @ (np.asarray(jac, dtype=float) @ E).T), initial=0.0))
    degenerate = bool(np.all(hw <= max(floor, 1e-10 * (1.0 + linear_scale))))
    hw = np.maximum(hw, floor)
    dim = e.shape[0]
    b = np.sqrt(dim) * np.diag(hw)
    return RemainderBound(e=e, P=b @ b.T, B=b, degenerate=degenerate)
