"""Independent reference computations shared by the test modules."""

import numpy as np

from smfusion.ellipsoid import Ellipsoid
from smfusion.remainder import RemainderBound


def zero_remainder(n: int) -> RemainderBound:
    return RemainderBound(np.zeros(n), np.zeros((n, n)), np.zeros((n, n)), degenerate=True)


def schweppe_update(pred: Ellipsoid, H: np.ndarray, R: np.ndarray, y: np.ndarray, rho: float) -> Ellipsoid:
    """Classical ellipsoid-strip update with mixing weight ``rho`` in (0, 1).

    Combines ``(1 - rho) (x - c)^T P^{-1} (x - c) + rho (y - Hx)^T R^{-1} (y - Hx) <= 1``
    and completes the square.
    """
    p_inv = np.linalg.inv(pred.shape)
    r_inv = np.linalg.inv(R)
    X = (1.0 - rho) * p_inv + rho * H.T @ r_inv @ H
    rhs = (1.0 - rho) * p_inv @ pred.center + rho * H.T @ r_inv @ y
    center = np.linalg.solve(X, rhs)
    k = (1.0 - rho) * pred.center @ p_inv @ pred.center + rho * y @ r_inv @ y - center @ X @ center
    return Ellipsoid(center, (1.0 - k) * np.linalg.inv(X))


def scalar_linear_prediction_shape(p: float, q: float) -> float:
    return (np.sqrt(p) + np.sqrt(q)) ** 2
