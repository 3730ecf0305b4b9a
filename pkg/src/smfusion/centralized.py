"""Centralized measurement update: all raw measurements fused at one node."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.linalg import block_diag, solve_triangular

from .ellipsoid import Ellipsoid, SizeObjective, spd_inverse, structural_inverse, symmetrize
from .errors import (
    DimensionMismatch,
    InfeasibleStart,
    InfeasibleUpdate,
    NotPositiveDefinite,
    SingularFactor,
)
from .model import SystemModel
from .remainder import RemainderBound
from .tau import TauAssignment, TauProblem, default_start, solve


@dataclass(frozen=True, eq=False)
class CentralizedBlocks:
    """Decoupled update blocks for one fusion step.

    Row layout of ``psi22``: ``[u (n); v_1..v_L (m each); d_i (m each, nonlinear
    sensors only)]``; column layout: ``[x (n); z_i (m each, nonlinear sensors)]``.
    Linear sensors (degenerate remainder) carry no remainder rows or columns and
    their ``tau_h`` is pinned to zero.
    """

    psi21: np.ndarray
    psi22: np.ndarray
    selector: np.ndarray
    pred_center: np.ndarray
    R_inv: tuple[np.ndarray, ...]
    nonlinear: tuple[bool, ...]
    n: int
    m: int

    @property
    def L(self) -> int:
        return len(self.nonlinear)

    @property
    def tau_dim(self) -> int:
        """Number of free multipliers: tau_u, every tau_v, tau_h of nonlinear sensors."""
        return 1 + self.L + sum(self.nonlinear)

    def expand(self, free: Sequence[float]) -> TauAssignment:
        """Full ``(tau_u, tau_v..., tau_h...)`` from the free multipliers."""
        free = np.asarray(free, dtype=float)
        tau_h = np.zeros(self.L)
        tau_h[list(np.flatnonzero(self.nonlinear))] = free[1 + self.L :]
        return TauAssignment(free[0], tuple(free[1 : 1 + self.L]) + tuple(tau_h))

    def free(self, t: TauAssignment) -> np.ndarray:
        v = t.as_array()
        if v.shape[0] != 1 + 2 * self.L:
            raise DimensionMismatch(f"expected {1 + 2 * self.L} multipliers, got {v.shape[0]}")
        tau_h = v[1 + self.L :]
        return np.concatenate([v[: 1 + self.L], tau_h[list(np.flatnonzero(self.nonlinear))]])

    def _split(self, t: TauAssignment) -> tuple[float, np.ndarray, np.ndarray]:
        v = t.as_array()
        if v.shape[0] != 1 + 2 * self.L:
            raise DimensionMismatch(f"expected {1 + 2 * self.L} multipliers, got {v.shape[0]}")
        return v[0], v[1 : 1 + self.L], v[1 + self.L :]

    def xi11(self, t: TauAssignment) -> float:
        tu, tv, th = self._split(t)
        return 1.0 - tu - tv.sum() - th.sum()

    def xi22(self, t: TauAssignment) -> np.ndarray:
        tu, tv, th = self._split(t)
        blocks = [tu * np.eye(self.n)]
        blocks += [tv[i] * self.R_inv[i] for i in range(self.L)]
        blocks += [th[i] * np.eye(self.m) for i in range(self.L) if self.nonlinear[i]]
        return block_diag(*blocks)

    def information_matrix(self, t: TauAssignment) -> np.ndarray:
        """``Psi22^T Xi22 Psi22``."""
        return symmetrize(self.psi22.T @ self.xi22(t) @ self.psi22)

    def feasibility_matrix(self, t: TauAssignment) -> np.ndarray:
        """``[[Xi11 + Psi21^T Xi22 Psi21, Psi21^T Xi22 Psi22], [., Psi22^T Xi22 Psi22]]``."""
        xi22 = self.xi22(t)
        a = self.xi11(t) + self.psi21 @ xi22 @ self.psi21
        b = self.psi21 @ xi22 @ self.psi22
        g = self.psi22.T @ xi22 @ self.psi22
        return symmetrize(np.block([[np.array([[a]]), b[None, :]], [b[:, None], g]]))

    def _information_inverse(self, t: TauAssignment) -> np.ndarray:
        # a sensor with tau_v = tau_h = 0 leaves its z columns unconstrained; they drop out
        g_inv, dropped = structural_inverse(self.information_matrix(t))
        if np.any(self.selector[:, dropped] != 0.0):
            raise NotPositiveDefinite("state columns of the information matrix vanish")
        return g_inv

    def decoupled_shape(self, t: TauAssignment) -> np.ndarray:
        g_inv = self._information_inverse(t)
        return symmetrize(self.selector @ g_inv @ self.selector.T)

    def decoupled_center(self, t: TauAssignment) -> np.ndarray:
        rhs = self.psi22.T @ self.xi22(t) @ self.psi21
        return self.pred_center + self.selector @ self._information_inverse(t) @ rhs


def _inverse_factor(E: np.ndarray) -> np.ndarray:
    try:
        inv = solve_triangular(E, np.eye(E.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularFactor(str(exc)) from None
    if not np.all(np.isfinite(inv)):
        raise SingularFactor("factor is not invertible")
    return inv


@dataclass(frozen=True)
class _SensorTerms:
    J: np.ndarray
    nu: np.ndarray
    rem: RemainderBound
    linear: bool


def _sensor_terms(
    pred: Ellipsoid, model: SystemModel, measurements: Sequence[np.ndarray], rems: Sequence[RemainderBound]
) -> list[_SensorTerms]:
    if len(measurements) != model.L or len(rems) != model.L:
        raise DimensionMismatch(
            f"model has {model.L} sensors, got {len(measurements)} measurements and {len(rems)} bounds"
        )
    out = []
    for i in range(model.L):
        y = np.asarray(measurements[i], dtype=float).reshape(-1)
        if y.shape[0] != model.m or rems[i].dim != model.m:
            raise DimensionMismatch(f"sensor {i}: measurement or remainder has wrong length")
        hx = np.asarray(model.h[i](pred.center), dtype=float).reshape(-1)
        nu = model.measurement_residual(y, hx)
        out.append(_SensorTerms(model.jacobian_h(i, pred.center), nu, rems[i], rems[i].degenerate))
    return out


def build_blocks(
    pred: Ellipsoid,
    model: SystemModel,
    measurements: Sequence[np.ndarray],
    rems: Sequence[RemainderBound],
) -> CentralizedBlocks:
    """Assemble ``Psi21``, ``Psi22`` and the selector for the update.

    The innovation entries of ``Psi21`` are ``h_i(x_pred) - y_i`` with angular
    components wrapped; remainder entries are ``B_i^{-1} e_i``.
    """
    terms = _sensor_terms(pred, model, measurements, rems)
    return _blocks_from_terms(pred, model, terms)


def _blocks_from_terms(pred: Ellipsoid, model: SystemModel, terms: list[_SensorTerms]) -> CentralizedBlocks:
    n, m, L = pred.dim, model.m, model.L
    nl = [not s.linear for s in terms]
    n_nl = sum(nl)
    rows = n + m * L + m * n_nl
    cols = n + m * n_nl
    psi22 = np.zeros((rows, cols))
    psi21 = np.zeros(rows)
    psi22[:n, :n] = _inverse_factor(pred.factor)
    col = n
    d_row = n + m * L
    for i, s in enumerate(terms):
        r0 = n + m * i
        psi22[r0 : r0 + m, :n] = -s.J
        if s.linear:
            # remainder collapses to its center
            psi21[r0 : r0 + m] = -s.nu + s.rem.e
            continue
        b_inv = np.linalg.inv(s.rem.B)
        psi22[r0 : r0 + m, col : col + m] = np.eye(m)
        psi22[d_row : d_row + m, col : col + m] = -b_inv
        psi21[r0 : r0 + m] = -s.nu
        psi21[d_row : d_row + m] = b_inv @ s.rem.e
        col += m
        d_row += m
    selector = np.hstack([np.eye(n), np.zeros((n, cols - n))])
    return CentralizedBlocks(
        psi21=psi21,
        psi22=psi22,
        selector=selector,
        pred_center=pred.center.copy(),
        R_inv=tuple(spd_inverse(r) for r in model.R),
        nonlinear=tuple(nl),
        n=n,
        m=m,
    )


class _FastUpdateRay:
    """Boundary scale and objective along a multiplier direction.

    Works in coordinates whitened by the prediction factor ``E`` and, per
    sensor, by the simultaneous diagonalisation of ``R_i`` and ``P_h_i``, so
    each evaluation costs one n x n inversion.
    """

    def __init__(self, pred: Ellipsoid, model: SystemModel, terms: list[_SensorTerms], obj: SizeObjective):
        n, m, L = pred.dim, model.m, model.L
        e_mat = pred.factor
        rows, rho, lam, owner_v, owner_h = [], [], [], [], []
        h_slot = 0
        self.L = L
        for i, s in enumerate(terms):
            c = np.linalg.cholesky(model.R[i])
            c_inv = solve_triangular(c, np.eye(m), lower=True)
            if s.linear:
                t_mat = c_inv.T
                eig = np.zeros(m)
            else:
                eig, u = np.linalg.eigh(symmetrize(c_inv @ s.rem.P @ c_inv.T))
                t_mat = c_inv.T @ u
            rows.append(t_mat.T @ s.J @ e_mat)
            rho.append(t_mat.T @ (s.nu - s.rem.e))
            lam.append(np.maximum(eig, 0.0))
            owner_v += [1 + i] * m
            owner_h += [(1 + L + h_slot) if not s.linear else -1] * m
            if not s.linear:
                h_slot += 1
        self.A = np.vstack(rows)
        self.rho = np.concatenate(rho)
        self.lam = np.concatenate(lam)
        self.owner_v = np.array(owner_v)
        self.owner_h = np.array(owner_h)
        self.has_h = self.owner_h >= 0
        self.owner_h_safe = np.where(self.has_h, self.owner_h, 0)
        # size(E M^{-1} E^T) = sum(Et_w * (M^{-1} Et_w))
        self.Et_w = e_mat.T * np.sqrt(obj.diag_weights(n))
        self.eye = np.eye(n)

    def weights(self, d: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-row information weights and their partials in tau_v and tau_h."""
        dv = d[self.owner_v]
        dh = np.where(self.has_h, d[self.owner_h_safe], 1.0)
        den = dh + self.lam * dv
        x = np.where(self.has_h, dv * dh / den, dv)
        dx_dv = np.where(self.has_h, (dh / den) ** 2, 1.0)
        dx_dh = np.where(self.has_h, self.lam * (dv / den) ** 2, 0.0)
        return x, dx_dv, dx_dh

    def _core(self, d: np.ndarray):
        # M = tau_u I + A^T diag(x) A is positive definite whenever tau_u > 0
        x, dx_dv, dx_dh = self.weights(d)
        ax = self.A.T * x
        m_inv = np.linalg.inv(d[0] * self.eye + ax @ self.A)
        wt = ax @ self.rho
        s = m_inv @ wt
        q = -d.sum() + x @ (self.rho * self.rho) - wt @ s
        if not np.isfinite(q):
            return None
        if q >= 0.0:
            # feasible at every scale: the constraint sets do not intersect
            return False
        y = m_inv @ self.Et_w
        size = float(np.sum(self.Et_w * y))
        return x, dx_dv, dx_dh, s, y, q, size

    def __call__(self, d: np.ndarray) -> tuple[float, float]:
        core = self._core(d)
        if core is None or core is False:
            return (np.nan if core is None else np.inf), np.inf
        q, size = core[5], core[6]
        return -1.0 / q, -q * size

    def with_grad(self, d: np.ndarray) -> tuple[float, float, np.ndarray]:
        core = self._core(d)
        if core is None or core is False:
            return (np.nan if core is None else np.inf), np.inf, np.zeros_like(d)
        x, dx_dv, dx_dh, s, y, q, size = core
        ya = self.A @ y
        dq_dx = (self.rho - self.A @ s) ** 2
        dsize_dx = -np.einsum("ij,ij->i", ya, ya)
        size_ = d.shape[0]
        dq = np.bincount(self.owner_v, dq_dx * dx_dv, size_)
        dsize = np.bincount(self.owner_v, dsize_dx * dx_dv, size_)
        dq += np.bincount(self.owner_h_safe, dq_dx * dx_dh, size_)
        dsize += np.bincount(self.owner_h_safe, dsize_dx * dx_dh, size_)
        dq -= 1.0
        dq[0] += s @ s
        dsize[0] = -float(np.sum(y * y))
        grad = -dq * size - q * dsize
        return -1.0 / q, -q * size, grad


def update_problem(
    blocks: CentralizedBlocks, obj: SizeObjective, ray=None
) -> TauProblem:
    """Multiplier program of the update over the free multipliers."""

    def feasibility(t: TauAssignment) -> np.ndarray:
        return blocks.feasibility_matrix(blocks.expand(t.as_array()))

    def objective(t: TauAssignment) -> float:
        try:
            return obj(blocks.decoupled_shape(blocks.expand(t.as_array())))
        except (NotPositiveDefinite, np.linalg.LinAlgError):
            return np.inf

    return TauProblem(
        objective,
        feasibility,
        blocks.tau_dim,
        ray=ray,
        ray_grad=None if ray is None else ray.with_grad,
        lifted=blocks.selector,
        size=obj,
    )


@dataclass(frozen=True, eq=False)
class UpdateResult:
    ellipsoid: Ellipsoid
    tau: TauAssignment
    evaluations: int = 0
    exhausted: bool = False

    def __iter__(self) -> Iterator:
        return iter((self.ellipsoid, self.tau))


def information_update(
    pred: Ellipsoid,
    model: SystemModel,
    measurements: Sequence[np.ndarray],
    rems: Sequence[RemainderBound],
    t: TauAssignment,
) -> Ellipsoid:
    """Shape and center of the fused ellipsoid for given multipliers.

    The inverse shape is ``tau_u P^{-1} + sum_i J_i^T (R_i/tau_v_i + P_h_i/tau_h_i)^{-1} J_i``
    and the center is evaluated through the gains ``K_i``, the correction
    ``C`` and the factors ``M1``, ``M2``. Linear sensors use ``R_i/tau_v_i`` alone.
    """
    terms = _sensor_terms(pred, model, measurements, rems)
    return _information_update(pred, model, terms, t)


def _information_update(
    pred: Ellipsoid, model: SystemModel, terms: list[_SensorTerms], t: TauAssignment
) -> Ellipsoid:
    L, n = model.L, pred.dim
    v = t.as_array()
    tu, tv, th = v[0], v[1 : 1 + L], v[1 + L :]
    p_pred_inv = pred.inverse
    r_inv = [spd_inverse(r) for r in model.R]

    # a nonlinear sensor with tau_v = 0 or tau_h = 0 adds no information
    off = [not s.linear and (tv[i] == 0.0 or th[i] == 0.0) for i, s in enumerate(terms)]
    info = tu * p_pred_inv
    m1_inv = tu * p_pred_inv
    for i, s in enumerate(terms):
        if s.linear:
            x_i = tv[i] * r_inv[i]
        elif off[i]:
            x_i = np.zeros((model.m, model.m))
        else:
            x_i = spd_inverse(model.R[i] / tv[i] + s.rem.P / th[i])
        info = info + s.J.T @ x_i @ s.J
        m1_inv = m1_inv + tv[i] * s.J.T @ r_inv[i] @ s.J
    p_new = spd_inverse(info)
    m1 = spd_inverse(m1_inv)

    # G_i = (tau_v R^-1 + tau_h P_h^-1)^-1 for nonlinear sensors; tau_v = 0 zeroes every term
    g = {}
    for i, s in enumerate(terms):
        if not s.linear and tv[i] > 0.0:
            g[i] = spd_inverse(tv[i] * r_inv[i] + th[i] * spd_inverse(s.rem.P))
    m2 = np.eye(n)
    for i, s in enumerate(terms):
        if i in g:
            m2 = m2 + tv[i] * s.J.T @ r_inv[i] @ g[i] @ (tv[i] * r_inv[i]) @ s.J @ p_new
    m1m2 = m1 @ m2

    correction = np.zeros(n)
    center = pred.center.copy()
    for i, s in enumerate(terms):
        if s.linear:
            correction += p_new @ (tv[i] * s.J.T @ r_inv[i] @ s.rem.e)
            center = center + tv[i] * p_new @ s.J.T @ r_inv[i] @ s.nu
        elif i in g:
            inner = tv[i] * s.J.T @ r_inv[i] @ g[i] @ (th[i] * spd_inverse(s.rem.P)) @ s.rem.e
            correction += m1m2 @ inner
            gain = p_new @ s.J.T @ r_inv[i] - m1m2 @ s.J.T @ r_inv[i] @ g[i] @ (tv[i] * r_inv[i])
            center = center + tv[i] * gain @ s.nu
    center = center - correction
    return Ellipsoid(center, p_new)


def fuse_update(
    pred: Ellipsoid,
    model: SystemModel,
    measurements: Sequence[np.ndarray],
    rems: Sequence[RemainderBound],
    obj: SizeObjective,
    warm: TauAssignment | None = None,
    budget: int | None = None,
) -> UpdateResult:
    """Optimal centralized update ellipsoid.

    Args:
        pred: prediction ellipsoid.
        model: system description; one measurement and one remainder bound per sensor.
        measurements: received measurements ``y_i``.
        rems: remainder bounds of each ``h_i`` at ``pred``.
        obj: size objective.
        warm: optional multipliers from an earlier step used as an extra seed.
        budget: solver evaluation budget.

    Returns:
        UpdateResult, unpackable as ``(ellipsoid, tau)``.

    Raises:
        InfeasibleUpdate: no usable multipliers exist.
    """
    terms = _sensor_terms(pred, model, measurements, rems)
    blocks = _blocks_from_terms(pred, model, terms)
    ray = _FastUpdateRay(pred, model, terms, obj)
    problem = update_problem(blocks, obj, ray=ray)
    warm_free = None
    if warm is not None and warm.dim == 1 + 2 * model.L:
        wf = blocks.free(warm)
        if np.all(wf > 0):
            warm_free = TauAssignment.from_array(wf)
    try:
        start = default_start(problem)
        result = solve(problem, start, budget=budget, warm=warm_free)
    except InfeasibleStart as exc:
        raise InfeasibleUpdate(str(exc)) from None
    if result.unbounded:
        raise InfeasibleUpdate("the constraint sets have no common point")
    if not np.isfinite(result.value):
        raise InfeasibleUpdate("no multipliers with a finite objective")
    tau = blocks.expand(result.tau.as_array())
    try:
        fused = _information_update(pred, model, terms, tau)
    except NotPositiveDefinite as exc:
        raise InfeasibleUpdate(f"fused shape is not positive definite: {exc}") from None
    return UpdateResult(fused, tau, result.evaluations, result.exhausted)


def update_containment_matrix(
    blocks: CentralizedBlocks, candidate: Ellipsoid, t: TauAssignment
) -> np.ndarray:
    """``[[P, c - c_pred, B], [., W11, W12], [B^T, W21, W22]]`` with ``W`` the feasibility matrix."""
    if candidate.dim != blocks.n:
        raise DimensionMismatch("candidate dimension does not match the blocks")
    w = blocks.feasibility_matrix(t)
    z = candidate.center - blocks.pred_center
    top = np.hstack([candidate.shape, z[:, None], blocks.selector])
    lower_left = np.vstack([z[None, :], blocks.selector.T])
    bottom = np.hstack([lower_left, w])
    return symmetrize(np.vstack([top, bottom]))
