"""Nonlinear multisensor system description and the tracking scenario model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ellipsoid import cholesky_factor, is_symmetric
from .errors import DimensionMismatch, EvaluationFailure, InvalidParameter, NotSymmetric

VectorMap = Callable[[np.ndarray], np.ndarray]
JacobianMap = Callable[[np.ndarray], np.ndarray]


def wrap_angle(a: np.ndarray | float) -> np.ndarray | float:
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)


def numeric_jacobian(fn: VectorMap, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with step 1e-6 * (1 + |x_j|) per column.

    Raises:
        EvaluationFailure: the map returns non-finite values at a probe point.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    f0 = np.asarray(fn(x), dtype=float).reshape(-1)
    if not np.all(np.isfinite(f0)):
        raise EvaluationFailure("map is not finite at the expansion point")
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = 1e-6 * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.asarray(fn(xp), dtype=float).reshape(-1)
        fm = np.asarray(fn(xm), dtype=float).reshape(-1)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise EvaluationFailure(f"map is not finite at probe points of column {j}")
        jac[:, j] = (fp - fm) / (2.0 * h)
    return jac


def _check_noise_shape(m: np.ndarray, dim: int, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.shape != (dim, dim):
        raise DimensionMismatch(f"{name} must be {dim}x{dim}, got {m.shape}")
    if not is_symmetric(m):
        raise NotSymmetric(f"{name} is not symmetric")
    cholesky_factor(m)
    return 0.5 * (m + m.T)


@dataclass(frozen=True, eq=False)
class SystemModel:
    """x_{k+1} = f(x_k) + w_k,  y_k^i = h_i(x_k) + v_k^i.

    Maps accept a single state ``(n,)`` or a batch ``(N, n)`` and return the
    matching shape. Missing Jacobians fall back to :func:`numeric_jacobian`.

    Args:
        f: state map.
        h: per-sensor measurement maps.
        Q: process-noise shape matrix.
        R: per-sensor measurement-noise shape matrices.
        jac_f: optional analytic Jacobian of ``f``.
        jac_h: optional analytic Jacobians of the ``h_i``.
        angular: boolean mask over measurement components that are angles;
            their differences are wrapped to (-pi, pi].
    """

    f: VectorMap
    h: tuple[VectorMap, ...]
    Q: np.ndarray
    R: tuple[np.ndarray, ...]
    jac_f: JacobianMap | None = None
    jac_h: tuple[JacobianMap | None, ...] | None = None
    angular: np.ndarray | None = None
    n: int = field(init=False)
    m: int = field(init=False)

    def __post_init__(self) -> None:
        q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        n = q.shape[0]
        h = tuple(self.h)
        if len(h) == 0:
            raise InvalidParameter("at least one sensor is required")
        if len(self.R) != len(h):
            raise DimensionMismatch(f"{len(h)} measurement maps but {len(self.R)} noise shapes")
        m = np.atleast_2d(np.asarray(self.R[0])).shape[0]
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "Q", _check_noise_shape(q, n, "Q"))
        object.__setattr__(
            self, "R", tuple(_check_noise_shape(r, m, f"R[{i}]") for i, r in enumerate(self.R))
        )
        jh = self.jac_h if self.jac_h is not None else (None,) * len(h)
        if len(jh) != len(h):
            raise DimensionMismatch("jac_h must have one entry per sensor")
        object.__setattr__(self, "jac_h", tuple(jh))
        mask = np.zeros(m, bool) if self.angular is None else np.asarray(self.angular, bool)
        if mask.shape != (m,):
            raise DimensionMismatch(f"angular mask must have length {m}")
        object.__setattr__(self, "angular", mask)

    @property
    def L(self) -> int:
        return len(self.h)

    def jacobian_f(self, x: np.ndarray) -> np.ndarray:
        if self.jac_f is not None:
            return np.asarray(self.jac_f(x), dtype=float)
        return numeric_jacobian(self.f, x)

    def jacobian_h(self, i: int, x: np.ndarray) -> np.ndarray:
        jac = self.jac_h[i]
        if jac is not None:
            return np.asarray(jac(x), dtype=float)
        return numeric_jacobian(self.h[i], x)

    def measurement_residual(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``a - b`` with angular components wrapped."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if np.any(self.angular):
            d = np.where(self.angular, wrap_angle(d), d)
        return d

    def subset(self, sensors: Sequence[int]) -> SystemModel:
        """Model restricted to the listed sensors, in that order."""
        idx = list(sensors)
        if not idx or any(not 0 <= i < self.L for i in idx):
            raise InvalidParameter(f"invalid sensor subset {idx}")
        return SystemModel(
            f=self.f,
            h=tuple(self.h[i] for i in idx),
            Q=self.Q,
            R=tuple(self.R[i] for i in idx),
            jac_f=self.jac_f,
            jac_h=tuple(self.jac_h[i] for i in idx),
            angular=self.angular,
        )


def transition_matrix(T: float, cv_standard: bool = False) -> np.ndarray:
    """State transition for (px, py, vx, vy).

    The default keeps a unit (3, 4) entry coupling the two velocity components;
    ``cv_standard=True`` gives the usual decoupled constant-velocity matrix.
    """
    a = np.array(
        [
            [1.0, 0.0, T, 0.0],
            [0.0, 1.0, 0.0, T],
            [0.0, 0.0, 1.0, 1.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    if cv_standard:
        a[2, 3] = 0.0
    return a


def process_noise_shape(T: float, sigma2: float) -> np.ndarray:
    t3, t2 = T**3 / 3.0, T**2 / 2.0
    return sigma2 * np.array(
        [
            [t3, 0.0, t2, 0.0],
            [0.0, t3, 0.0, t2],
            [t2, 0.0, T, 0.0],
            [0.0, t2, 0.0, T],
        ]
    )


def _range_bearing(sensor: np.ndarray) -> tuple[VectorMap, JacobianMap]:
    sx, sy = float(sensor[0]), float(sensor[1])

    def h(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dx = x[..., 0] - sx
        dy = x[..., 1] - sy
        return np.stack([np.hypot(dx, dy), np.arctan2(dy, dx)], axis=-1)

    def jac(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        dx = x[0] - sx
        dy = x[1] - sy
        r2 = dx * dx + dy * dy
        r = np.sqrt(r2)
        return np.array([[dx / r, dy / r, 0.0, 0.0], [-dy / r2, dx / r2, 0.0, 0.0]])

    return h, jac


def tracking_model(
    T: float,
    sigma2: float,
    sensors: Sequence[Sequence[float]],
    cv_standard: bool = False,
    R: np.ndarray | None = None,
) -> SystemModel:
    """Linear motion with range/bearing sensors at fixed planar positions.

    Args:
        T: sampling period.
        sigma2: acceleration noise intensity.
        sensors: sensor positions, one 2-vector each.
        cv_standard: drop the velocity coupling entry of the transition matrix.
        R: measurement-noise shape shared by all sensors; default diag(0.01, 25).
    """
    if not (T > 0 and np.isfinite(T)):
        raise InvalidParameter(f"T must be positive, got {T}")
    if not (sigma2 > 0 and np.isfinite(sigma2)):
        raise InvalidParameter(f"sigma2 must be positive, got {sigma2}")
    pos = [np.asarray(s, dtype=float).reshape(-1) for s in sensors]
    if not pos or any(p.shape != (2,) for p in pos):
        raise InvalidParameter("sensors must be a nonempty list of 2-vectors")
    a = transition_matrix(T, cv_standard)
    r = np.diag([0.01, 25.0]) if R is None else np.asarray(R, dtype=float)

    def f(x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) @ a.T

    def jac_f(x: np.ndarray) -> np.ndarray:
        return a.copy()

    maps = [_range_bearing(p) for p in pos]
    return SystemModel(
        f=f,
        h=tuple(m[0] for m in maps),
        Q=process_noise_shape(T, sigma2),
        R=tuple(r.copy() for _ in pos),
        jac_f=jac_f,
        jac_h=tuple(m[1] for m in maps),
        angular=np.array([False, True]),
    )
