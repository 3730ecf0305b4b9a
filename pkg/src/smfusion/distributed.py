"""Distributed fusion: combine a prediction with local sensor ellipsoids."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .centralized import UpdateResult
from .ellipsoid import Ellipsoid, SizeObjective, spd_inverse, symmetrize
from .errors import DimensionMismatch, InfeasibleStart, InfeasibleUpdate, InvalidParameter, NotPositiveDefinite
from .tau import TauAssignment, TauProblem, default_start, solve


def _check(pred: Ellipsoid, locals_: Sequence[Ellipsoid]) -> None:
    if len(locals_) == 0:
        raise InvalidParameter("at least one local ellipsoid is required")
    for j, e in enumerate(locals_):
        if e.dim != pred.dim:
            raise DimensionMismatch(f"local {j} has dimension {e.dim}, prediction {pred.dim}")


def build_upsilon(
    pred: Ellipsoid, locals_: Sequence[Ellipsoid], t: TauAssignment
) -> tuple[float, np.ndarray, np.ndarray]:
    """``(Y11, Y12, Y22)`` for multipliers ``(tau_u, tau_y_1..tau_y_L)``.

    With ``d_i = c_pred - c_i`` and ``E`` the prediction factor:
    ``Y11 = 1 - tau_u - sum tau_i + sum tau_i d_i^T P_i^{-1} d_i``,
    ``Y12 = sum tau_i d_i^T P_i^{-1} E``,
    ``Y22 = tau_u I + sum tau_i E^T P_i^{-1} E``.
    """
    _check(pred, locals_)
    if t.dim != 1 + len(locals_):
        raise DimensionMismatch(f"expected {1 + len(locals_)} multipliers, got {t.dim}")
    v = t.as_array()
    e_mat = pred.factor
    n = pred.dim
    y11 = 1.0 - v.sum()
    y12 = np.zeros(n)
    y22 = v[0] * np.eye(n)
    for tau_i, loc in zip(v[1:], locals_):
        p_inv = loc.inverse
        diff = pred.center - loc.center
        y11 += tau_i * diff @ p_inv @ diff
        y12 = y12 + tau_i * diff @ p_inv @ e_mat
        y22 = y22 + tau_i * e_mat.T @ p_inv @ e_mat
    return float(y11), y12, symmetrize(y22)


def upsilon_matrix(pred: Ellipsoid, locals_: Sequence[Ellipsoid], t: TauAssignment) -> np.ndarray:
    y11, y12, y22 = build_upsilon(pred, locals_, t)
    return symmetrize(np.block([[np.array([[y11]]), y12[None, :]], [y12[:, None], y22]]))


class _FastFusionRay:
    """Boundary scale, objective and gradient in coordinates whitened by ``E``."""

    def __init__(self, pred: Ellipsoid, locals_: Sequence[Ellipsoid], obj: SizeObjective):
        e_mat = pred.factor
        self.G = np.array([symmetrize(e_mat.T @ loc.inverse @ e_mat) for loc in locals_])
        self.g = np.array([e_mat.T @ loc.inverse @ (loc.center - pred.center) for loc in locals_])
        self.kappa = np.array(
            [(pred.center - loc.center) @ loc.inverse @ (pred.center - loc.center) for loc in locals_]
        )
        self.Et_w = e_mat.T * np.sqrt(obj.diag_weights(pred.dim))
        self.eye = np.eye(pred.dim)

    def _core(self, d: np.ndarray):
        # M = tau_u I + sum tau_i G_i is positive definite whenever tau_u > 0
        m_inv = np.linalg.inv(d[0] * self.eye + np.tensordot(d[1:], self.G, axes=1))
        wt = d[1:] @ self.g
        s = m_inv @ wt
        q = -d.sum() + d[1:] @ self.kappa - wt @ s
        if not np.isfinite(q):
            return None
        if q >= 0.0:
            # feasible at every scale: the constraint sets do not intersect
            return False
        y = m_inv @ self.Et_w
        size = float(np.sum(self.Et_w * y))
        return s, y, q, size

    def __call__(self, d: np.ndarray) -> tuple[float, float]:
        core = self._core(d)
        if core is None or core is False:
            return (np.nan if core is None else np.inf), np.inf
        return -1.0 / core[2], -core[2] * core[3]

    def with_grad(self, d: np.ndarray) -> tuple[float, float, np.ndarray]:
        core = self._core(d)
        if core is None or core is False:
            return (np.nan if core is None else np.inf), np.inf, np.zeros_like(d)
        s, y, q, size = core
        dq = np.empty(d.shape[0])
        dsize = np.empty(d.shape[0])
        dq[0] = -1.0 + s @ s
        dsize[0] = -float(np.sum(y * y))
        dq[1:] = -1.0 + self.kappa - 2.0 * (self.g @ s) + np.einsum("i,lij,j->l", s, self.G, s)
        dsize[1:] = -np.einsum("ia,lij,ja->l", y, self.G, y)
        return -1.0 / q, -q * size, -dq * size - q * dsize


def fusion_problem(
    pred: Ellipsoid, locals_: Sequence[Ellipsoid], obj: SizeObjective, fast: bool = True
) -> TauProblem:
    """Multiplier program ``min size(E Y22^{-1} E^T)`` s.t. ``[[Y11, Y12], [Y12^T, Y22]] >= 0``."""
    _check(pred, locals_)
    e_mat = pred.factor

    def feasibility(t: TauAssignment) -> np.ndarray:
        return upsilon_matrix(pred, locals_, t)

    def objective(t: TauAssignment) -> float:
        _, _, y22 = build_upsilon(pred, locals_, t)
        try:
            return obj(e_mat @ spd_inverse(y22) @ e_mat.T)
        except (NotPositiveDefinite, np.linalg.LinAlgError):
            return np.inf

    ray = _FastFusionRay(pred, locals_, obj) if fast else None
    return TauProblem(
        objective,
        feasibility,
        1 + len(locals_),
        ray=ray,
        ray_grad=None if ray is None else ray.with_grad,
        lifted=e_mat,
        size=obj,
    )


def fused_ellipsoid(pred: Ellipsoid, locals_: Sequence[Ellipsoid], t: TauAssignment) -> Ellipsoid:
    """Inverse shape ``tau_u P^{-1} + sum tau_i P_i^{-1}``; the center uses that shape."""
    _check(pred, locals_)
    v = t.as_array()
    info = v[0] * pred.inverse
    for tau_i, loc in zip(v[1:], locals_):
        info = info + tau_i * loc.inverse
    shape = spd_inverse(info)
    center = pred.center.copy()
    for tau_i, loc in zip(v[1:], locals_):
        center = center + tau_i * shape @ loc.inverse @ (loc.center - pred.center)
    return Ellipsoid(center, shape)


def _canonical_order(locals_: Sequence[Ellipsoid]) -> list[int]:
    keys = [tuple(e.center) + tuple(e.shape.ravel()) for e in locals_]
    return sorted(range(len(locals_)), key=lambda j: keys[j])


def fuse_distributed(
    pred: Ellipsoid,
    locals_: Sequence[Ellipsoid],
    obj: SizeObjective,
    warm: TauAssignment | None = None,
    budget: int | None = None,
) -> UpdateResult:
    """Optimal fusion of the prediction with local estimates.

    Locals are processed in a canonical order so the result does not depend
    on the order they are passed in; the returned multipliers follow the
    caller's order.

    Raises:
        InfeasibleUpdate: the program has no usable solution (e.g. the
            ellipsoids do not intersect).
    """
    _check(pred, locals_)
    order = _canonical_order(locals_)
    ordered = [locals_[j] for j in order]
    problem = fusion_problem(pred, ordered, obj)
    warm_sorted = None
    if warm is not None and warm.dim == 1 + len(locals_):
        wv = warm.as_array()
        ws = np.concatenate(([wv[0]], wv[1:][order]))
        if np.all(ws > 0):
            warm_sorted = TauAssignment.from_array(ws)
    try:
        start = default_start(problem)
        result = solve(problem, start, budget=budget, warm=warm_sorted)
    except InfeasibleStart as exc:
        raise InfeasibleUpdate(str(exc)) from None
    if result.unbounded:
        raise InfeasibleUpdate("the constraint sets have no common point")
    if not np.isfinite(result.value):
        raise InfeasibleUpdate("no multipliers with a finite objective")
    try:
        fused = fused_ellipsoid(pred, ordered, result.tau)
    except NotPositiveDefinite as exc:
        raise InfeasibleUpdate(f"fused shape is not positive definite: {exc}") from None
    sorted_tau = result.tau.as_array()
    tau = np.empty_like(sorted_tau)
    tau[0] = sorted_tau[0]
    tau[1:][order] = sorted_tau[1:]
    return UpdateResult(fused, TauAssignment.from_array(tau), result.evaluations, result.exhausted)


def distributed_containment_matrix(
    pred: Ellipsoid, locals_: Sequence[Ellipsoid], candidate: Ellipsoid, t: TauAssignment
) -> np.ndarray:
    """``[[P, c_pred - c, E], [., Y11, Y12], [E^T, Y12^T, Y22]]``; PSD certifies coverage."""
    if candidate.dim != pred.dim:
        raise DimensionMismatch("candidate dimension does not match the prediction")
    y = upsilon_matrix(pred, locals_, t)
    z = pred.center - candidate.center
    top = np.hstack([candidate.shape, z[:, None], pred.factor])
    bottom = np.hstack([np.vstack([z[None, :], pred.factor.T]), y])
    return symmetrize(np.vstack([top, bottom]))
