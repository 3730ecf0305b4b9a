"""Oracle-equivalence checks of the multiplier solvers on random instances."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .centralized import _blocks_from_terms, _FastUpdateRay, _information_update, _sensor_terms, fuse_update
from .centralized import update_problem
from .distributed import fuse_distributed, fusion_problem
from .ellipsoid import Ellipsoid, SizeObjective
from .model import SystemModel
from .prediction import closed_form_weights, prediction_problem_from_factors
from .remainder import bound_remainder
from .tau import TauAssignment, grid_oracle, is_feasible

# local refinement levels of the grid oracle (spacing halves per level)
REFINE = 5


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check: worst observed error against its tolerance."""

    name: str
    passed: bool
    worst: float
    tolerance: float
    instances: int
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: worst {self.worst:.3e} (tol {self.tolerance:.0e}) "
            f"over {self.instances} instances in {self.seconds:.1f}s"
        )


def random_spd(rng: np.random.Generator, n: int, spread: float = 10.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues log-uniform in ``[1/spread, spread]``."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.exp(rng.uniform(-np.log(spread), np.log(spread), n))
    return (q * eig) @ q.T


def random_point_in(e: Ellipsoid, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """Uniform point of the ellipsoid scaled by ``radius``."""
    u = rng.standard_normal(e.dim)
    u *= radius * rng.uniform() ** (1.0 / e.dim) / np.linalg.norm(u)
    return e.center + e.factor @ u


def relative_gap(value: float, reference: float) -> float:
    return abs(value - reference) / max(abs(reference), 1e-300)


def _sine_sensor(a: np.ndarray, b: float) -> Callable[[np.ndarray], np.ndarray]:
    def h(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x @ a + b * np.sin(x[..., 0]))[..., None]

    return h


def random_update_instance(rng: np.random.Generator, n: int, L: int, seed: int):
    """Prediction, scalar-output model, measurements and remainder bounds.

    Each sensor is ``h_i(x) = a_i^T x + b_i sin(x_0)``; the truth lies in the
    prediction and every measurement error lies in its noise ellipsoid.
    """
    pred = Ellipsoid(rng.standard_normal(n), random_spd(rng, n, 4.0))
    sensors = [_sine_sensor(rng.standard_normal(n), rng.uniform(0.2, 1.0)) for _ in range(L)]
    R = [random_spd(rng, 1, 4.0) for _ in range(L)]
    model = SystemModel(f=lambda x: x, h=tuple(sensors), Q=np.eye(n), R=tuple(R))
    truth = random_point_in(pred, rng, 0.9)
    ys = [model.h[i](truth) + random_point_in(Ellipsoid(np.zeros(1), R[i]), rng) for i in range(L)]
    rems = [
        bound_remainder(model.h[i], pred.center, pred.factor, model.jacobian_h(i, pred.center), seed=seed + i)
        for i in range(L)
    ]
    return pred, model, ys, rems


def random_fusion_instance(rng: np.random.Generator, n: int, L: int) -> tuple[Ellipsoid, list[Ellipsoid]]:
    """Prediction and locals that all contain one common point."""
    pred = Ellipsoid(rng.standard_normal(n), random_spd(rng, n, 4.0))
    common = random_point_in(pred, rng, 0.8)
    locals_ = []
    for _ in range(L):
        shape = random_spd(rng, n, 4.0)
        offset = random_point_in(Ellipsoid(np.zeros(n), shape), rng, 0.8)
        locals_.append(Ellipsoid(common - offset, shape))
    return pred, locals_


def check_prediction(count: int = 200, resolution: int = 200, seed: int = 1) -> CheckResult:
    """Closed-form prediction multipliers against the simplex grid oracle."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for k in range(count):
        n = (1, 2, 4)[k % 3]
        obj = SizeObjective.trace()
        factors = [np.linalg.cholesky(random_spd(rng, n)) for _ in range(3)]
        sizes = np.array([obj(b @ b.T) for b in factors])
        tau = closed_form_weights(sizes)
        closed = float(sum(a / t for a, t in zip(sizes, tau)))
        problem = prediction_problem_from_factors(factors, [np.eye(n)] * 3, obj)
        oracle = grid_oracle(problem, resolution, refine=REFINE).value
        worst = max(worst, relative_gap(closed, oracle))
    tol = 1e-3
    return CheckResult("prediction closed form vs grid oracle", worst <= tol, worst, tol, count,
                       time.perf_counter() - start)


def _random_feasible(ray, dim: int, rng: np.random.Generator) -> np.ndarray | None:
    d = rng.dirichlet(np.ones(dim))
    c_max, _ = ray(d)
    if not np.isfinite(c_max):
        return None
    return rng.uniform(0.1, 1.0) * c_max * d


def check_update(count: int = 50, resolution: int = 60, seed: int = 2, draws: int = 20) -> tuple[CheckResult, CheckResult]:
    """Centralized solver against the grid oracle, and the decoupled shape identity."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst_obj = 0.0
    worst_id = 0.0
    for k in range(count):
        n, L = 1 + k % 2, 1 + (k // 2) % 2
        obj = SizeObjective.trace()
        pred, model, ys, rems = random_update_instance(rng, n, L, seed=1000 * seed + 10 * k)
        res = fuse_update(pred, model, ys, rems, obj)
        terms = _sensor_terms(pred, model, ys, rems)
        blocks = _blocks_from_terms(pred, model, terms)
        oracle = grid_oracle(update_problem(blocks, obj), resolution, refine=REFINE).value
        worst_obj = max(worst_obj, relative_gap(obj(res.ellipsoid.shape), oracle))
        ray = _FastUpdateRay(pred, model, terms, obj)
        problem = update_problem(blocks, obj)
        for _ in range(draws):
            free = _random_feasible(ray, blocks.tau_dim, rng)
            if free is None or not is_feasible(problem, TauAssignment.from_array(free)):
                continue
            t = blocks.expand(free)
            decoupled = blocks.decoupled_shape(t)
            explicit = _information_update(pred, model, terms, t).shape
            worst_id = max(worst_id, np.max(np.abs(decoupled - explicit)) / np.max(np.abs(explicit)))
    elapsed = time.perf_counter() - start
    return (
        CheckResult("centralized solver vs grid oracle", worst_obj <= 1e-3, worst_obj, 1e-3, count, elapsed),
        CheckResult("centralized decoupled shape identity", worst_id <= 1e-8, worst_id, 1e-8, count, elapsed),
    )


def check_distributed(count: int = 50, resolution: int = 60, seed: int = 3) -> tuple[CheckResult, CheckResult]:
    """Distributed solver against the grid oracle, and the identical-input fixed point."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst_obj = 0.0
    worst_fix = 0.0
    for k in range(count):
        n, L = 1 + k % 2, 1 + (k // 2) % 2
        obj = SizeObjective.trace()
        pred, locals_ = random_fusion_instance(rng, n, L)
        res = fuse_distributed(pred, locals_, obj)
        oracle = grid_oracle(fusion_problem(pred, locals_, obj, fast=False), resolution, refine=REFINE).value
        worst_obj = max(worst_obj, relative_gap(obj(res.ellipsoid.shape), oracle))
        same = fuse_distributed(pred, [pred] * L, obj).ellipsoid
        scale = max(1.0, np.max(np.abs(pred.shape)))
        gap = max(np.max(np.abs(same.shape - pred.shape)) / scale,
                  np.max(np.abs(same.center - pred.center)) / max(1.0, np.max(np.abs(pred.center))))
        worst_fix = max(worst_fix, gap)
    elapsed = time.perf_counter() - start
    return (
        CheckResult("distributed solver vs grid oracle", worst_obj <= 1e-3, worst_obj, 1e-3, count, elapsed),
        CheckResult("distributed identical-input fixed point", worst_fix <= 1e-9, worst_fix, 1e-9, count, elapsed),
    )


def run_all(quick: bool = False, seed: int = 0) -> list[CheckResult]:
    """Every oracle check; ``quick`` uses a tenth of the instances."""
    scale = 10 if quick else 1
    results = [check_prediction(count=200 // scale, seed=seed + 1)]
    results += check_update(count=max(50 // scale, 4), seed=seed + 2)
    results += check_distributed(count=max(50 // scale, 4), seed=seed + 3)
    return results
