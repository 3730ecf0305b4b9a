"""Time update: closed-form optimal prediction ellipsoid."""

from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag

from .ellipsoid import Ellipsoid, SizeObjective, spd_inverse, symmetrize
from .errors import DegenerateInput, DimensionMismatch
from .model import SystemModel
from .remainder import RemainderBound
from .tau import TauAssignment, TauProblem

DROP_RTOL = 1e-12


def closed_form_weights(sizes: np.ndarray) -> np.ndarray:
    """Multipliers minimising sum_j a_j / tau_j subject to sum_j tau_j <= 1.

    ``tau_j = sqrt(a_j) / sum_k sqrt(a_k)``; entries with
    ``a_j <= 1e-12 * max(a)`` get ``tau_j = 0`` and leave the sum.
    """
    a = np.asarray(sizes, dtype=float)
    top = float(np.max(a)) if a.size else 0.0
    if not top > 0.0:
        raise DegenerateInput("all prediction terms vanish")
    keep = a > DROP_RTOL * top
    roots = np.where(keep, np.sqrt(np.where(keep, a, 0.0)), 0.0)
    return roots / roots.sum()


def _terms(current: Ellipsoid, model: SystemModel, rem_f: RemainderBound):
    jac = model.jacobian_f(current.center)
    je = jac @ current.factor
    return jac, je, [symmetrize(je @ je.T), model.Q, rem_f.P]


def predict(
    current: Ellipsoid,
    model: SystemModel,
    rem_f: RemainderBound,
    obj: SizeObjective,
) -> tuple[Ellipsoid, TauAssignment]:
    """Optimal prediction ellipsoid for trace or weighted-diagonal size.

    Args:
        current: state ellipsoid at time k.
        model: system description.
        rem_f: remainder bound of ``f`` at ``current``.
        obj: size objective.

    Returns:
        The prediction ellipsoid and its multipliers ``(tau_u, (tau_w, tau_f))``.
    """
    if rem_f.dim != current.dim:
        raise DimensionMismatch("remainder bound and state have different dimensions")
    _, _, mats = _terms(current, model, rem_f)
    sizes = np.array([obj(m) for m in mats])
    tau = closed_form_weights(sizes)
    shape = sum(m / t for m, t in zip(mats, tau) if t > 0.0)
    center = np.asarray(model.f(current.center), dtype=float) + rem_f.e
    return Ellipsoid(center, symmetrize(shape)), TauAssignment(tau[0], (tau[1], tau[2]))


def prediction_problem_from_factors(
    blocks: list[np.ndarray], inverse_weights: list[np.ndarray], obj: SizeObjective
) -> TauProblem:
    """Decoupled prediction program for ``sum_j B_j W_j^{-1} B_j^T / tau_j``.

    The constraint matrix is ``diag(1 - sum tau, tau_1 W_1, ..., tau_k W_k)``
    and the lifted matrix is ``[B_1, ..., B_k]``.

    Args:
        blocks: the factors ``B_j`` (n x d_j).
        inverse_weights: ``W_j`` (d_j x d_j), e.g. the identity or ``Q^{-1}``.
        obj: size objective.
    """
    lifted = np.hstack(blocks)
    n = lifted.shape[0]
    dims = [w.shape[0] for w in inverse_weights]

    def feasibility(t: TauAssignment) -> np.ndarray:
        v = t.as_array()
        return block_diag(np.array([[1.0 - v.sum()]]), *[vj * w for vj, w in zip(v, inverse_weights)])

    def objective(t: TauAssignment) -> float:
        v = t.as_array()
        if np.any(v <= 0.0):
            return np.inf
        shape = np.zeros((n, n))
        for vj, b, w in zip(v, blocks, inverse_weights):
            shape += b @ spd_inverse(w) @ b.T / vj
        return obj(shape)

    return TauProblem(objective, feasibility, len(dims), lifted=lifted, size=obj)


def prediction_problem(
    current: Ellipsoid, model: SystemModel, rem_f: RemainderBound, obj: SizeObjective
) -> TauProblem:
    """The three-multiplier prediction program (for verification against the closed form)."""
    _, je, _ = _terms(current, model, rem_f)
    n = current.dim
    return prediction_problem_from_factors(
        [je, np.eye(n), rem_f.B],
        [np.eye(n), spd_inverse(model.Q), np.eye(rem_f.dim)],
        obj,
    )


def prediction_containment_matrix(
    current: Ellipsoid,
    model: SystemModel,
    rem_f: RemainderBound,
    candidate: Ellipsoid,
    t: TauAssignment,
) -> np.ndarray:
    """Block matrix [[P, Phi], [Phi^T, Xi]] certifying ``candidate`` covers the prediction set.

    ``Phi = [f(x) + e_f - c, J E, I, B_f]`` and
    ``Xi = diag(1 - tau_u - tau_w - tau_f, tau_u I, tau_w Q^{-1}, tau_f I)``.
    """
    if candidate.dim != current.dim or t.dim != 3:
        raise DimensionMismatch("candidate and multipliers must match the prediction program")
    n = current.dim
    _, je, _ = _terms(current, model, rem_f)
    tu, tw, tf = t.as_array()
    offset = np.asarray(model.f(current.center), dtype=float) + rem_f.e - candidate.center
    phi = np.hstack([offset[:, None], je, np.eye(n), rem_f.B])
    xi = block_diag(
        np.array([[1.0 - tu - tw - tf]]),
        tu * np.eye(n),
        tw * spd_inverse(model.Q),
        tf * np.eye(rem_f.dim),
    )
    top = np.hstack([candidate.shape, phi])
    bottom = np.hstack([phi.T, xi])
    return symmetrize(np.vstack([top, bottom]))
