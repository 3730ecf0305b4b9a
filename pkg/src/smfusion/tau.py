"""Solver for the small multiplier programs behind every fusion step.

Each step reduces to choosing nonnegative multipliers ``tau`` that minimise a
size objective subject to a linear matrix inequality ``F(tau) >= 0``.  For all
programs in this package ``F(0) = e1 e1^T`` and ``F`` is affine, so
``F(c d) = e1 e1^T + c M(d)`` and the objective is homogeneous of degree -1.
The optimum therefore lies on the feasibility boundary, and the search is
carried out over directions ``d`` on the simplex with ``tau = c_max(d) d``.

Programs without that structure fall back to a direct search in ``log(tau)``
with an infinite barrier outside the feasible set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.optimize import minimize

from .ellipsoid import SizeObjective, symmetrize
from .errors import (
    DimensionMismatch,
    InfeasibleStart,
    InvalidParameter,
    NoFeasiblePoint,
)

BOUNDARY_SHRINK = 1.0 - 1e-12
TIE_RTOL = 1e-12
RAY_SCALE_CAP = 1e8
BOX_GRID_CAP = 3_000_000


@dataclass(frozen=True)
class TauAssignment:
    """Nonnegative multipliers of one fusion step.

    ``extras`` holds the step-specific multipliers: ``(tau_w, tau_f)`` for the
    prediction, ``(tau_v_1..tau_v_L, tau_h_1..tau_h_L)`` for the centralized
    update, ``(tau_y_1..tau_y_L)`` for the distributed update.
    """

    tau_u: float
    extras: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "tau_u", float(self.tau_u))
        object.__setattr__(self, "extras", tuple(float(x) for x in self.extras))
        values = (self.tau_u,) + self.extras
        if any(not math.isfinite(v) or v < 0.0 for v in values):
            raise InvalidParameter(f"multipliers must be finite and >= 0, got {values}")

    @property
    def dim(self) -> int:
        return 1 + len(self.extras)

    def as_array(self) -> np.ndarray:
        return np.array((self.tau_u,) + self.extras)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> TauAssignment:
        v = np.asarray(values, dtype=float).reshape(-1)
        if v.size == 0:
            raise DimensionMismatch("an assignment needs at least tau_u")
        return cls(float(v[0]), tuple(float(x) for x in v[1:]))

    def total(self) -> float:
        return self.tau_u + sum(self.extras)


RayFunction = Callable[[np.ndarray], "tuple[float, float]"]
RayGradFunction = Callable[[np.ndarray], "tuple[float, float, np.ndarray]"]


@dataclass
class TauProblem:
    """A multiplier program.

    Args:
        objective: size of the decoupled shape matrix at an assignment.
        feasibility: symmetric matrix whose positive semidefiniteness is the
            constraint.
        dim: number of multipliers.
        ray: optional fast evaluator. Given a direction ``d`` (positive,
            summing to one) it returns ``(c_max, value)``: the largest scale
            with ``c d`` feasible and the objective there. ``(inf, inf)``
            marks a direction that never meets the boundary.
        lifted: optional matrix ``B`` such that the objective equals
            ``size(B G^{-1} B^T)`` with ``G`` the trailing block of the
            feasibility matrix. Lets the grid oracle evaluate in batches.
        size: the size measure used together with ``lifted``.
        ray_grad: optional ``d -> (c_max, value, gradient)``, the gradient of
            the boundary value with respect to ``d``. Enables the quasi-Newton
            search in place of Nelder-Mead.
    """

    objective: Callable[[TauAssignment], float]
    feasibility: Callable[[TauAssignment], np.ndarray]
    dim: int
    ray: RayFunction | None = None
    ray_grad: RayGradFunction | None = None
    lifted: np.ndarray | None = None
    size: SizeObjective | None = None
    _affine: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    _affine_checked: bool = field(default=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InvalidParameter("a program needs at least one multiplier")

    def affine_basis(self) -> tuple[np.ndarray, np.ndarray] | None:
        """``(F0, F_j)`` if the feasibility map is affine, else ``None``."""
        if self._affine_checked:
            return self._affine
        self._affine_checked = True
        zero = TauAssignment.from_array(np.zeros(self.dim))
        f0 = np.asarray(self.feasibility(zero), dtype=float)
        basis = []
        for j in range(self.dim):
            unit = np.zeros(self.dim)
            unit[j] = 1.0
            basis.append(np.asarray(self.feasibility(TauAssignment.from_array(unit))) - f0)
        fj = np.array(basis)
        probe = np.linspace(0.3, 0.7, self.dim) / self.dim
        direct = np.asarray(self.feasibility(TauAssignment.from_array(probe)))
        combined = f0 + np.tensordot(probe, fj, axes=1)
        scale = 1.0 + float(np.max(np.abs(direct)))
        if np.max(np.abs(direct - combined)) <= 1e-9 * scale:
            self._affine = (f0, fj)
        return self._affine

    def is_ray_structured(self) -> bool:
        if self.ray is not None:
            return True
        basis = self.affine_basis()
        if basis is None:
            return False
        return _origin_is_e1(basis[0])


def is_feasible(p: TauProblem, t: TauAssignment, tol: float = 1e-8) -> bool:
    """PSD test of the constraint matrix, relative to its spectral radius."""
    if t.dim != p.dim:
        raise DimensionMismatch(f"assignment has {t.dim} entries, program expects {p.dim}")
    values = t.as_array()
    if np.any(values < 0):
        return False
    m = symmetrize(p.feasibility(t))
    eig = np.linalg.eigvalsh(m)
    rho = float(np.max(np.abs(eig)))
    return bool(eig[0] >= -tol * (1.0 + rho))


def default_start(p: TauProblem, max_halvings: int = 60) -> TauAssignment:
    """Uniform assignment shrunk by 0.9^k until strictly feasible."""
    base = np.full(p.dim, 1.0 / p.dim)
    for k in range(max_halvings + 1):
        t = TauAssignment.from_array(base * 0.9**k)
        if is_feasible(p, t, tol=0.0):
            return t
    raise InfeasibleStart("no strictly feasible scaled-uniform start found")


@dataclass(frozen=True)
class SolveResult:
    tau: TauAssignment
    value: float
    evaluations: int
    exhausted: bool = False
    unbounded: bool = False

    def __iter__(self) -> Iterator:
        return iter((self.tau, self.value))


class _RayEvaluator:
    """Direction-space objective, counting evaluations.

    ``unbounded`` records whether some direction stayed feasible at every
    scale, i.e. the objective can be driven to zero.
    """

    def __init__(self, p: TauProblem) -> None:
        self.p = p
        self.count = 0
        self.unbounded = False
        if p.ray is not None:
            self._ray = p.ray
        else:
            self._ray = self._bisection_ray

    def _bisection_ray(self, d: np.ndarray) -> tuple[float, float]:
        p = self.p

        def ok(c: float) -> bool:
            return is_feasible(p, TauAssignment.from_array(c * d), tol=0.0)

        hi = 1.0
        if ok(hi):
            while ok(hi * 2.0):
                hi *= 2.0
                if hi > RAY_SCALE_CAP:
                    return math.inf, math.inf
            lo, hi = hi, hi * 2.0
        else:
            lo = 0.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        if lo <= 0.0:
            return 0.0, math.inf
        return lo, float(p.objective(TauAssignment.from_array(lo * d)))

    def with_grad(self, y: np.ndarray) -> tuple[float, np.ndarray]:
        """Boundary value and its gradient in log-ratio coordinates ``y``."""
        self.count += 1
        d = _softmax_direction(y)
        c, v, grad = self.p.ray_grad(d)
        self.unbounded = self.unbounded or c == math.inf
        if not (math.isfinite(c) and math.isfinite(v)) or c <= 0.0 or v <= 0.0:
            return math.inf, np.zeros_like(y)
        # the value is scale-invariant in d, so d(value)/dy_k = d_k * grad_k
        return v, (d * grad)[1:]

    def __call__(self, d: np.ndarray) -> tuple[float, float]:
        self.count += 1
        c, v = self._ray(d)
        self.unbounded = self.unbounded or c == math.inf
        if not (math.isfinite(c) and math.isfinite(v)) or c <= 0.0 or v <= 0.0:
            return math.inf, math.inf
        return c, v


def _softmax_direction(y: np.ndarray) -> np.ndarray:
    z = np.concatenate(([0.0], y))
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _direction_coords(d: np.ndarray) -> np.ndarray:
    d = np.maximum(np.asarray(d, dtype=float), 1e-300)
    return np.log(d[1:] / d[0])


def _better(a: tuple[float, np.ndarray], b: tuple[float, np.ndarray]) -> bool:
    """True if candidate ``a`` beats ``b`` (objective, then lexicographic tau)."""
    va, ta = a
    vb, tb = b
    if not math.isfinite(vb):
        return math.isfinite(va)
    if abs(va - vb) <= TIE_RTOL * max(abs(va), abs(vb)):
        return tuple(ta) < tuple(tb)
    return va < vb


def _seed_directions(start: np.ndarray, warm: np.ndarray | None, dim: int) -> list[np.ndarray]:
    seeds = [start / start.sum()]
    if warm is not None and np.all(warm > 0):
        seeds.append(warm / warm.sum())
    else:
        heavy = np.full(dim, 0.5 / max(dim - 1, 1))
        heavy[0] = 0.5
        seeds.append(heavy)
    seeds.append(np.full(dim, 1.0 / dim))
    unique: list[np.ndarray] = []
    for s in seeds:
        if not any(np.allclose(s, u, rtol=0.0, atol=1e-12) for u in unique):
            unique.append(s)
    return unique


def solve(
    p: TauProblem,
    start: TauAssignment | None = None,
    budget: int | None = None,
    warm: TauAssignment | None = None,
    xatol: float = 1e-7,
    fatol: float = 1e-11,
) -> SolveResult:
    """Minimise the program's objective over feasible multipliers.

    Nelder-Mead restarted from up to three deterministic seeds (the start,
    a warm start or a tau_u-heavy heuristic, and the uniform direction);
    the best result wins, ties broken by the lexicographically smallest tau.

    Args:
        p: the program.
        start: strictly feasible assignment with all entries positive.
            Defaults to :func:`default_start`.
        budget: total objective evaluations across restarts, at least 100*dim.
        warm: optional warm-start assignment, e.g. the previous step's optimum.
        xatol: simplex size tolerance in log-ratio coordinates.
        fatol: tolerance on the normalised objective.

    Returns:
        SolveResult, unpackable as ``(tau, value)``.

    Raises:
        InfeasibleStart: ``start`` is not strictly feasible.
    """
    if start is None:
        start = default_start(p)
    if start.dim != p.dim:
        raise DimensionMismatch(f"start has {start.dim} entries, program expects {p.dim}")
    if budget is None:
        budget = 400 * p.dim
    if budget < 100 * p.dim:
        raise InvalidParameter(f"budget must be >= {100 * p.dim}, got {budget}")
    s = start.as_array()
    if np.any(s <= 0) or not is_feasible(p, start, tol=0.0):
        raise InfeasibleStart("start must be strictly feasible with all multipliers > 0")

    if p.is_ray_structured():
        return _solve_ray(p, start, budget, warm, xatol, fatol)
    return _solve_log(p, start, budget, xatol, fatol)


def _solve_ray(
    p: TauProblem,
    start: TauAssignment,
    budget: int,
    warm: TauAssignment | None,
    xatol: float,
    fatol: float,
) -> SolveResult:
    ev = _RayEvaluator(p)
    s = start.as_array()
    start_value = float(p.objective(start))
    best: tuple[float, np.ndarray] = (math.inf, s)
    exhausted = False

    if p.dim == 1:
        c, v = ev(np.ones(1))
        cand = (v, np.array([c * BOUNDARY_SHRINK]))
    else:
        seeds = _seed_directions(s, None if warm is None else warm.as_array(), p.dim)
        per_seed = budget // len(seeds)
        _, v0 = ev(seeds[0])
        norm = v0 if math.isfinite(v0) else start_value
        cand = (math.inf, s)
        for seed in seeds:
            y0 = _direction_coords(seed)
            if p.ray_grad is not None:
                y, hit_budget = _quasi_newton(ev.with_grad, y0, per_seed)
            else:
                y, hit_budget = _nelder_mead(ev, y0, norm, per_seed, xatol, fatol)
            exhausted = exhausted or hit_budget
            d = _softmax_direction(y)
            c, v = ev(d)
            if math.isfinite(v):
                option = (v, c * BOUNDARY_SHRINK * d)
                if _better(option, cand):
                    cand = option
    if math.isfinite(cand[0]):
        tau = _make_feasible(p, cand[1])
        value = float(p.objective(TauAssignment.from_array(tau)))
        best = (value, tau)
    if not math.isfinite(best[0]) or best[0] > start_value:
        best = (start_value, s)
    return SolveResult(TauAssignment.from_array(best[1]), best[0], ev.count, exhausted, ev.unbounded)


def _nelder_mead(
    ev: _RayEvaluator, y0: np.ndarray, norm: float, max_evals: int, xatol: float, fatol: float
) -> tuple[np.ndarray, bool]:
    k = y0.shape[0]
    simplex = np.vstack([y0] + [y0 + 0.7 * np.eye(k)[j] for j in range(k)])
    res = minimize(
        lambda y: ev(_softmax_direction(y))[1] / norm,
        y0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": xatol,
            "fatol": fatol,
            "maxfev": max_evals,
            "maxiter": max_evals,
        },
    )
    return np.asarray(res.x), bool(res.nfev >= max_evals and not res.success)


def _quasi_newton(
    fg: Callable[[np.ndarray], tuple[float, np.ndarray]],
    y0: np.ndarray,
    max_evals: int,
    gtol: float = 1e-9,
    max_step: float = 2.0,
) -> tuple[np.ndarray, bool]:
    """BFGS with Armijo backtracking; infinite values shrink the step.

    Works on the log-ratio direction coordinates, where the objective is
    smooth; the gradient vanishes as a multiplier's share goes to zero, so
    boundary optima end the search through ``gtol``.
    """
    y = np.asarray(y0, dtype=float).copy()
    f, g = fg(y)
    evals = 1
    if not math.isfinite(f):
        return y, False
    k = y.shape[0]
    h = np.eye(k)
    stalls = 0
    while evals < max_evals:
        if np.max(np.abs(g)) <= gtol * abs(f):
            return y, False
        p = -h @ g
        slope = float(g @ p)
        if slope >= 0.0:
            h = np.eye(k)
            p = -g
            slope = float(g @ p)
        alpha = min(1.0, max_step / float(np.max(np.abs(p))))
        accepted = False
        while evals < max_evals and alpha > 1e-14:
            y_new = y + alpha * p
            f_new, g_new = fg(y_new)
            evals += 1
            if math.isfinite(f_new) and f_new <= f + 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return y, evals >= max_evals
        s_vec = y_new - y
        yk = g_new - g
        decrease = f - f_new
        y, f, g = y_new, f_new, g_new
        sy = float(s_vec @ yk)
        if sy > 1e-14 * float(np.linalg.norm(s_vec) * np.linalg.norm(yk)):
            rho = 1.0 / sy
            v = np.eye(k) - rho * np.outer(s_vec, yk)
            h = v @ h @ v.T + rho * np.outer(s_vec, s_vec)
        stalls = stalls + 1 if decrease <= 1e-15 * abs(f) else 0
        if stalls >= 3:
            return y, False
    return y, True


def _make_feasible(p: TauProblem, tau: np.ndarray) -> np.ndarray:
    """Pull a boundary point inward until the PSD check passes at 1e-10."""
    t = tau.copy()
    for _ in range(40):
        if is_feasible(p, TauAssignment.from_array(t), tol=1e-10):
            return t
        t = t * (1.0 - 1e-9)
    return t


def _solve_log(
    p: TauProblem,
    start: TauAssignment,
    budget: int,
    xatol: float,
    fatol: float,
) -> SolveResult:
    count = 0
    s = start.as_array()
    start_value = float(p.objective(start))
    norm = abs(start_value) if start_value != 0 else 1.0

    def value_at(t: np.ndarray) -> float:
        nonlocal count
        count += 1
        a = TauAssignment.from_array(t)
        if not is_feasible(p, a, tol=0.0):
            return math.inf
        v = float(p.objective(a))
        return v if math.isfinite(v) else math.inf

    seeds = [s, np.full(p.dim, s.mean())]
    per_seed = budget // len(seeds)
    best = (start_value, s)
    exhausted = False
    for seed in seeds:
        if value_at(seed) == math.inf:
            continue
        x0 = np.log(seed)
        simplex = np.vstack([x0] + [x0 - 0.5 * np.eye(p.dim)[j] for j in range(p.dim)])
        res = minimize(
            lambda x: value_at(np.exp(x)) / norm,
            x0,
            method="Nelder-Mead",
            options={"initial_simplex": simplex, "xatol": xatol, "fatol": fatol,
                     "maxfev": per_seed, "maxiter": per_seed},
        )
        if res.nfev >= per_seed and not res.success:
            exhausted = True
        t = np.exp(np.asarray(res.x))
        v = value_at(t)
        if math.isfinite(v) and _better((v, t), best):
            best = (v, t)
    return SolveResult(TauAssignment.from_array(best[1]), best[0], count, exhausted)


# ---------------------------------------------------------------------------
# Grid oracle


def _compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]])
    bars = np.array(list(itertools.combinations(range(total + parts - 1), parts - 1)))
    padded = np.hstack([np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), total + parts - 1)])
    return np.diff(padded, axis=1) - 1


def _batched_ray(
    p: TauProblem, basis: tuple[np.ndarray, np.ndarray], dirs: np.ndarray, chunk: int = 20000
) -> tuple[np.ndarray, np.ndarray]:
    """Boundary scale and objective for many directions at once.

    Directions whose lower block has identically zero rows (variables no
    active multiplier touches) are evaluated on the reduced block.
    """
    _, fj = basis
    out_c = np.full(len(dirs), np.inf)
    out_v = np.full(len(dirs), np.inf)
    for lo in range(0, len(dirs), chunk):
        d = dirs[lo : lo + chunk]
        m = np.tensordot(d, fj, axes=1)
        zero_rows = ~np.any(m[:, 1:, 1:] != 0.0, axis=2)
        plain = ~np.any(zero_rows, axis=1)
        idx = np.flatnonzero(plain)
        c, v = _ray_values(p, m[plain], dirs[lo + idx])
        out_c[lo + idx], out_v[lo + idx] = c, v
        for i in np.flatnonzero(~plain):
            keep = np.concatenate(([True], ~zero_rows[i]))
            if np.any(m[i, 0, 1:][zero_rows[i]] != 0.0):
                continue
            lifted = None if p.lifted is None else p.lifted[:, ~zero_rows[i]]
            if lifted is not None and np.any(p.lifted[:, zero_rows[i]] != 0.0):
                continue
            sub = m[i][np.ix_(keep, keep)][None]
            ci, vi = _ray_values(p, sub, dirs[lo + i][None], lifted=lifted, exact_objective=False)
            out_c[lo + i], out_v[lo + i] = ci[0], vi[0]
    return out_c, out_v


def _ray_values(
    p: TauProblem,
    m: np.ndarray,
    dirs: np.ndarray,
    lifted: np.ndarray | None = None,
    exact_objective: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    out_c = np.full(len(dirs), np.inf)
    out_v = np.full(len(dirs), np.inf)
    if len(dirs) == 0:
        return out_c, out_v
    lifted = p.lifted if lifted is None else lifted
    m11 = m[:, 0, 0]
    m12 = m[:, 0, 1:]
    m22 = m[:, 1:, 1:]
    if m22.shape[1] == 0:
        ok = np.ones(len(dirs), dtype=bool)
    else:
        eig = np.linalg.eigvalsh(m22)
        ok = eig[:, 0] > 1e-13 * np.maximum(1.0, eig[:, -1])
    if not np.any(ok):
        return out_c, out_v
    m22 = m22[ok]
    sol = np.linalg.solve(m22, m12[ok][..., None])[..., 0]
    schur = m11[ok] - np.einsum("ij,ij->i", m12[ok], sol)
    bounded = schur < 0
    c = np.where(bounded, -1.0 / np.where(bounded, schur, -1.0), np.inf)
    if lifted is not None and p.size is not None:
        inv = np.linalg.inv(m22)
        shape = np.einsum("ij,njk,lk->nil", lifted, inv, lifted)
        w = p.size.diag_weights(lifted.shape[0])
        size = np.einsum("nii,i->n", shape, w)
        v = np.where(bounded, size / c, np.inf)
    elif exact_objective:
        idx = np.flatnonzero(ok)
        v = np.full(len(idx), np.inf)
        for k, (i, ck) in enumerate(zip(idx, c)):
            if math.isfinite(ck):
                v[k] = p.objective(TauAssignment.from_array(ck * dirs[i]))
    else:
        v = np.full(int(ok.sum()), np.inf)
    out_c[ok] = c
    out_v[ok] = v
    return out_c, out_v


def grid_oracle(p: TauProblem, resolution: int, refine: int = 0) -> SolveResult:
    """Exhaustive grid search, used only to check :func:`solve`.

    For ray-structured programs the grid is over directions
    ``k / resolution`` with nonnegative integer ``k`` summing to ``resolution``
    (faces of the simplex included),
    each scaled to its exact feasibility boundary; ``refine`` extra levels
    re-grid a +-2 step neighbourhood of the incumbent at half the spacing.
    Other programs are searched on the literal box grid ``{j/resolution}``
    per multiplier, filtered by :func:`is_feasible`.

    Raises:
        NoFeasiblePoint: no grid point is feasible with a finite objective.
    """
    if resolution < 1:
        raise InvalidParameter("resolution must be positive")
    if p.dim > 6:
        raise InvalidParameter("grid oracle supports at most 6 multipliers")
    basis = p.affine_basis()
    if basis is not None and _origin_is_e1(basis[0]):
        return _grid_ray(p, basis, resolution, refine)
    return _grid_box(p, resolution)


def _origin_is_e1(f0: np.ndarray) -> bool:
    target = np.zeros_like(f0)
    target[0, 0] = 1.0
    return bool(np.max(np.abs(f0 - target)) <= 1e-12)


def _grid_ray(
    p: TauProblem, basis: tuple[np.ndarray, np.ndarray], resolution: int, refine: int
) -> SolveResult:
    if p.dim == 1:
        dirs = np.ones((1, 1))
    else:
        dirs = _compositions(resolution, p.dim) / resolution
    c, v = _batched_ray(p, basis, dirs)
    evaluations = len(dirs)
    if not np.any(np.isfinite(v)):
        raise NoFeasiblePoint("no grid direction meets a finite feasibility boundary")
    i = _argmin_lex(v, dirs * np.where(np.isfinite(c), c, 0.0)[:, None])
    best_d, best_c, best_v = dirs[i], c[i], v[i]
    step = 1.0 / resolution
    offsets = None
    if p.dim > 1 and refine > 0:
        offsets = np.array(list(itertools.product(range(-2, 3), repeat=p.dim)), dtype=float)
    for _ in range(refine if p.dim > 1 else 0):
        step *= 0.5
        cand = best_d[None, :] + step * offsets
        cand = cand[np.all(cand >= 0, axis=1) & (cand.sum(axis=1) > 0)]
        cand = cand / cand.sum(axis=1, keepdims=True)
        cc, cv = _batched_ray(p, basis, cand)
        evaluations += len(cand)
        if np.any(np.isfinite(cv)):
            j = _argmin_lex(cv, cand * np.where(np.isfinite(cc), cc, 0.0)[:, None])
            if cv[j] < best_v:
                best_d, best_c, best_v = cand[j], cc[j], cv[j]
    tau = best_c * BOUNDARY_SHRINK * best_d
    tau = _make_feasible(p, tau)
    value = float(p.objective(TauAssignment.from_array(tau)))
    return SolveResult(TauAssignment.from_array(tau), value, evaluations)


def _argmin_lex(values: np.ndarray, taus: np.ndarray) -> int:
    finite = np.isfinite(values)
    vmin = np.min(values[finite])
    ties = np.flatnonzero(finite & (values <= vmin + TIE_RTOL * abs(vmin)))
    if len(ties) == 1:
        return int(ties[0])
    order = np.lexsort(taus[ties].T[::-1])
    return int(ties[order[0]])


def _grid_box(p: TauProblem, resolution: int) -> SolveResult:
    if resolution**p.dim > BOX_GRID_CAP:
        raise InvalidParameter(
            f"box grid of {resolution}^{p.dim} points exceeds the cap of {BOX_GRID_CAP}"
        )
    axis = np.arange(1, resolution + 1) / resolution
    best: tuple[float, np.ndarray] = (math.inf, np.zeros(p.dim))
    count = 0
    for point in itertools.product(axis, repeat=p.dim):
        t = np.array(point)
        a = TauAssignment.from_array(t)
        count += 1
        if not is_feasible(p, a, tol=0.0):
            continue
        v = float(p.objective(a))
        if math.isfinite(v) and _better((v, t), best):
            best = (v, t)
    if not math.isfinite(best[0]):
        raise NoFeasiblePoint("no feasible grid point")
    return SolveResult(TauAssignment.from_array(best[1]), best[0], count)
