"""Monte Carlo tracking scenario: truth, measurements, filters and outputs."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .centralized import build_blocks, fuse_update, update_containment_matrix
from .distributed import distributed_containment_matrix, fuse_distributed
from .ellipsoid import Ellipsoid, SizeObjective, min_eigenvalue
from .errors import (
    ConfigError,
    InfeasibleUpdate,
    InvalidParameter,
    RejectionBudgetExceeded,
    RunAborted,
    SMFusionError,
)
from .model import SystemModel, transition_matrix, tracking_model
from .multi import WeightBank, intersect_axis_bounds
from .prediction import predict, prediction_containment_matrix
from .remainder import bound_remainder
from .tau import TauAssignment

METHOD_CHOICES = ("smf", "csmf", "dsmf", "msmf")
METHOD_CODES = {"smf": 1, "csmf": 2, "dsmf": 3, "msmf": 4}
REJECTION_BUDGET = 1_000_000
ABORT_FRACTION = 0.01
FMT = ".17g"


def _fmt(x: float) -> str:
    return format(float(x), FMT)


@dataclass
class ScenarioConfig:
    """Experiment description; the defaults reproduce the two-sensor tracking setup."""

    horizon: int = 50
    runs: int = 100
    seed: int = 20240101
    T: float = 1.0
    sigma2: float = 1.0
    sensors: list[list[float]] = field(default_factory=lambda: [[525.0, 525.0], [524.0, 524.0]])
    x0: list[float] = field(default_factory=lambda: [120.0, 120.0, 6.0, 6.0])
    P0: list[list[float]] = field(
        default_factory=lambda: np.diag([100.0, 100.0, 30.0, 30.0]).tolist()
    )
    noise: dict[str, Any] = field(
        default_factory=lambda: {"kind": "truncated-gaussian", "covariance_scale": 1.0 / 9.0}
    )
    methods: list[str] = field(default_factory=lambda: list(METHOD_CHOICES))
    weights: list[float] = field(default_factory=lambda: [0.25, 0.25, 0.25, 0.25])
    weight_bank: list[list[float]] = field(
        default_factory=lambda: [list(w) for w in WeightBank.emphasis(4).weights]
    )
    msmf_pipeline: str = "csmf"
    samples: int = 500
    inflate: float = 1.05
    cv_standard: bool = False
    certificates: bool = True
    output: str | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        try:
            if int(self.horizon) < 1:
                raise ConfigError("horizon must be >= 1")
            if int(self.runs) < 1:
                raise ConfigError("runs must be >= 1")
            if not (self.T > 0 and self.sigma2 > 0):
                raise ConfigError("T and sigma2 must be positive")
            kind = self.noise.get("kind")
            if kind not in ("truncated-gaussian", "uniform-in-ellipsoid"):
                raise ConfigError(f"unknown noise kind {kind!r}")
            if kind == "truncated-gaussian":
                scale = float(self.noise.get("covariance_scale", 1.0 / 9.0))
                if not 0.0 < scale <= 1.0:
                    raise ConfigError("covariance_scale must lie in (0, 1]")
            bad = [m for m in self.methods if m not in METHOD_CHOICES]
            if bad:
                raise ConfigError(f"unknown methods {bad}; choose from {METHOD_CHOICES}")
            if self.msmf_pipeline not in ("csmf", "dsmf"):
                raise ConfigError("msmf_pipeline must be 'csmf' or 'dsmf'")
            if len(self.x0) != 4 or np.asarray(self.P0).shape != (4, 4):
                raise ConfigError("x0 must have 4 entries and P0 must be 4x4")
            if not self.sensors or any(len(s) != 2 for s in self.sensors):
                raise ConfigError("sensors must be a nonempty list of 2-vectors")
            if int(self.samples) < 100:
                raise ConfigError("samples must be >= 100")
            if not self.inflate >= 1.0:
                raise ConfigError("inflate must be >= 1")
            SizeObjective.weighted(self.weights)
            WeightBank(tuple(tuple(w) for w in self.weight_bank))
            Ellipsoid(self.x0, self.P0)
        except ConfigError:
            raise
        except (SMFusionError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path: str | Path) -> ScenarioConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def model(self) -> SystemModel:
        return tracking_model(self.T, self.sigma2, self.sensors, cv_standard=self.cv_standard)

    def method_names(self) -> list[str]:
        names = []
        for m in METHOD_CHOICES:
            if m not in self.methods:
                continue
            if m == "smf":
                names += [f"smf{i + 1}" for i in range(len(self.sensors))]
            else:
                names.append(m)
        return names


# ---------------------------------------------------------------------------
# Noise


def sample_truncated_gaussian(
    shape: np.ndarray, scale: float, rng: np.random.Generator, budget: int = REJECTION_BUDGET
) -> np.ndarray:
    """Draw from N(0, scale * shape) conditioned on ``w^T shape^{-1} w <= 1``.

    Raises:
        RejectionBudgetExceeded: more than ``budget`` rejections.
    """
    if not scale > 0:
        raise InvalidParameter(f"scale must be positive, got {scale}")
    shape = np.atleast_2d(np.asarray(shape, dtype=float))
    factor = np.linalg.cholesky(shape)
    rejects = 0
    root = math.sqrt(scale)
    while True:
        u = root * rng.standard_normal(shape.shape[0])
        # w = factor @ u, so w^T shape^{-1} w = |u|^2
        if u @ u <= 1.0:
            return factor @ u
        rejects += 1
        if rejects >= budget:
            raise RejectionBudgetExceeded(f"{rejects} rejections without an in-bound sample")


def sample_uniform_ellipsoid(shape: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    shape = np.atleast_2d(np.asarray(shape, dtype=float))
    n = shape.shape[0]
    g = rng.standard_normal(n)
    g /= np.linalg.norm(g)
    return np.linalg.cholesky(shape) @ (g * rng.random() ** (1.0 / n))


def _noise(cfg: ScenarioConfig, shape: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if cfg.noise["kind"] == "uniform-in-ellipsoid":
        return sample_uniform_ellipsoid(shape, rng)
    return sample_truncated_gaussian(shape, float(cfg.noise.get("covariance_scale", 1.0 / 9.0)), rng)


# ---------------------------------------------------------------------------
# Results


@dataclass
class RunResult:
    """Per-method arrays indexed (trial, step[, axis]).

    ``bounds[m]`` holds axis error bounds (half-widths), ``contained[m]`` the
    truth-membership flags, ``fallback[m]`` steps where the update had to keep
    the prediction. ``cert_pred``/``cert_update`` hold the minimum eigenvalue of
    each step's containment certificate. ``dsmf_inputs_ok`` marks steps where
    the truth lay in the fusion center's prediction and in every local estimate.
    ``local_centers``/``local_shapes`` hold the per-sensor estimates sent to
    the fusion center, indexed (trial, step, sensor[, row, col]).
    """

    config: ScenarioConfig
    methods: list[str]
    bounds: dict[str, np.ndarray]
    contained: dict[str, np.ndarray]
    fallback: dict[str, np.ndarray]
    cert_pred: dict[str, np.ndarray]
    cert_update: dict[str, np.ndarray]
    taus: dict[str, list]
    dsmf_inputs_ok: np.ndarray
    truth: np.ndarray
    local_centers: np.ndarray
    local_shapes: np.ndarray
    aborted: list[tuple[int, str]]
    timing: dict[str, float]
    wall_time: float = 0.0

    def valid_trials(self) -> np.ndarray:
        bad = {t for t, _ in self.aborted}
        return np.array([t not in bad for t in range(self.config.runs)])

    def mean_bounds(self, method: str) -> np.ndarray:
        """Mean bound over non-aborted trials, shape (horizon, n)."""
        ok = self.valid_trials()
        return self.bounds[method][ok].mean(axis=0)

    def containment_rate(self, method: str) -> float:
        ok = self.valid_trials()
        flags = self.contained[method][ok]
        return float(flags.mean()) if flags.size else 1.0


def _empty_result(cfg: ScenarioConfig, methods: list[str]) -> RunResult:
    runs, horizon = cfg.runs, cfg.horizon
    return RunResult(
        config=cfg,
        methods=methods,
        bounds={m: np.full((runs, horizon, 4), np.nan) for m in methods},
        contained={m: np.zeros((runs, horizon), bool) for m in methods},
        fallback={m: np.zeros((runs, horizon), bool) for m in methods},
        cert_pred={m: np.full((runs, horizon), np.nan) for m in methods},
        cert_update={m: np.full((runs, horizon), np.nan) for m in methods},
        taus={m: [[None] * horizon for _ in range(runs)] for m in methods},
        dsmf_inputs_ok=np.zeros((runs, horizon), bool),
        truth=np.full((runs, horizon + 1, 4), np.nan),
        local_centers=np.full((runs, horizon, len(cfg.sensors), 4), np.nan),
        local_shapes=np.full((runs, horizon, len(cfg.sensors), 4, 4), np.nan),
        aborted=[],
        timing={m: 0.0 for m in methods},
    )


# ---------------------------------------------------------------------------
# Filters


@dataclass
class _Track:
    """Recursion state of one filter pipeline."""

    estimate: Ellipsoid
    warm: TauAssignment | None = None


@dataclass
class _StepOutcome:
    pred: Ellipsoid
    pred_tau: TauAssignment
    estimate: Ellipsoid
    tau: TauAssignment | None
    fallback: bool
    pred_cert: float
    update_cert: float


class _Runner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.model = cfg.model()
        self.L = self.model.L
        self.sub_models = [self.model.subset([i]) for i in range(self.L)]
        self.obj = SizeObjective.weighted(cfg.weights)
        self.bank = WeightBank(tuple(tuple(w) for w in cfg.weight_bank))
        self.A = transition_matrix(cfg.T, cfg.cv_standard)

    def _seed(self, trial: int, step: int, method: int, pipeline: int, stage: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.cfg.seed, spawn_key=(trial, step, method, pipeline, stage))

    def predict_step(self, model: SystemModel, est: Ellipsoid, obj: SizeObjective, seed) -> tuple:
        rem_f = bound_remainder(
            model.f, est.center, est.factor, model.jacobian_f(est.center),
            samples=self.cfg.samples, seed=seed, inflate=self.cfg.inflate,
        )
        pred, tau = predict(est, model, rem_f, obj)
        cert = np.nan
        if self.cfg.certificates:
            cert = min_eigenvalue(prediction_containment_matrix(est, model, rem_f, pred, tau))
        return pred, tau, cert

    def measurement_rems(self, model: SystemModel, pred: Ellipsoid, seeds) -> list:
        return [
            bound_remainder(
                model.h[i], pred.center, pred.factor, model.jacobian_h(i, pred.center),
                samples=self.cfg.samples, seed=seeds[i], inflate=self.cfg.inflate,
                angular=model.angular,
            )
            for i in range(model.L)
        ]

    def central_step(
        self, model: SystemModel, track: _Track, ys: list, obj: SizeObjective,
        trial: int, step: int, method: int, pipeline: int,
    ) -> _StepOutcome:
        pred, pred_tau, pred_cert = self.predict_step(
            model, track.estimate, obj, self._seed(trial, step, method, pipeline, 0)
        )
        seeds = [self._seed(trial, step, method, pipeline, 1 + i) for i in range(model.L)]
        rems = self.measurement_rems(model, pred, seeds)
        try:
            res = fuse_update(pred, model, ys, rems, obj, warm=track.warm)
        except InfeasibleUpdate:
            return _StepOutcome(pred, pred_tau, pred, None, True, pred_cert, np.nan)
        cert = np.nan
        if self.cfg.certificates:
            blocks = build_blocks(pred, model, ys, rems)
            cert = min_eigenvalue(update_containment_matrix(blocks, res.ellipsoid, res.tau))
        return _StepOutcome(pred, pred_tau, res.ellipsoid, res.tau, False, pred_cert, cert)

    def distributed_step(
        self, track: _Track, locals_: list[Ellipsoid], obj: SizeObjective,
        trial: int, step: int, pipeline: int,
    ) -> _StepOutcome:
        method = METHOD_CODES["dsmf"]
        pred, pred_tau, pred_cert = self.predict_step(
            self.model, track.estimate, obj, self._seed(trial, step, method, pipeline, 0)
        )
        try:
            res = fuse_distributed(pred, locals_, obj, warm=track.warm)
        except InfeasibleUpdate:
            return _StepOutcome(pred, pred_tau, pred, None, True, pred_cert, np.nan)
        cert = np.nan
        if self.cfg.certificates:
            cert = min_eigenvalue(distributed_containment_matrix(pred, locals_, res.ellipsoid, res.tau))
        return _StepOutcome(pred, pred_tau, res.ellipsoid, res.tau, False, pred_cert, cert)


def _record(result: RunResult, name: str, trial: int, k: int, out: _StepOutcome, x: np.ndarray) -> None:
    result.bounds[name][trial, k] = out.estimate.axis_bounds()
    result.contained[name][trial, k] = out.estimate.contains(x, tol=1e-9)
    result.fallback[name][trial, k] = out.fallback
    result.cert_pred[name][trial, k] = out.pred_cert
    result.cert_update[name][trial, k] = out.update_cert
    result.taus[name][trial][k] = None if out.tau is None else out.tau.as_array().tolist()


def _run_trial(runner: _Runner, result: RunResult, trial: int) -> None:
    cfg = runner.cfg
    methods = set(result.methods)
    model = runner.model
    L = runner.L
    noise_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(trial,)))
    x = np.asarray(cfg.x0, dtype=float)
    result.truth[trial, 0] = x
    e0 = Ellipsoid(cfg.x0, cfg.P0)

    need_locals = any(m.startswith("smf") for m in methods) or "dsmf" in methods
    local_tracks = [_Track(e0) for _ in range(L)] if need_locals else []
    central = _Track(e0)
    dist = _Track(e0)
    msmf_central = [_Track(e0) for _ in range(len(runner.bank))]
    msmf_dist = [_Track(e0) for _ in range(len(runner.bank))]
    msmf_locals = [[_Track(e0) for _ in range(L)] for _ in range(len(runner.bank))]

    for k in range(cfg.horizon):
        step = k + 1
        x = runner.A @ x + _noise(cfg, model.Q, noise_rng)
        ys = [np.asarray(model.h[i](x)) + _noise(cfg, model.R[i], noise_rng) for i in range(L)]
        result.truth[trial, step] = x

        local_outs = []
        if need_locals:
            t0 = time.perf_counter()
            for i in range(L):
                out = runner.central_step(
                    runner.sub_models[i], local_tracks[i], [ys[i]], runner.obj,
                    trial, step, METHOD_CODES["smf"], i,
                )
                local_tracks[i] = _Track(out.estimate, out.tau or local_tracks[i].warm)
                local_outs.append(out)
                result.local_centers[trial, k, i] = out.estimate.center
                result.local_shapes[trial, k, i] = out.estimate.shape
                name = f"smf{i + 1}"
                if name in methods:
                    _record(result, name, trial, k, out, x)
            for i in range(L):
                name = f"smf{i + 1}"
                if name in methods:
                    result.timing[name] += (time.perf_counter() - t0) / L

        if "csmf" in methods:
            t0 = time.perf_counter()
            out = runner.central_step(model, central, ys, runner.obj, trial, step, METHOD_CODES["csmf"], 0)
            central = _Track(out.estimate, out.tau or central.warm)
            _record(result, "csmf", trial, k, out, x)
            result.timing["csmf"] += time.perf_counter() - t0

        if "dsmf" in methods:
            t0 = time.perf_counter()
            locals_ = [o.estimate for o in local_outs]
            out = runner.distributed_step(dist, locals_, runner.obj, trial, step, 0)
            result.dsmf_inputs_ok[trial, k] = out.pred.contains(x, tol=1e-9) and all(
                e.contains(x, tol=1e-9) for e in locals_
            )
            dist = _Track(out.estimate, out.tau or dist.warm)
            _record(result, "dsmf", trial, k, out, x)
            result.timing["dsmf"] += time.perf_counter() - t0

        if "msmf" in methods:
            t0 = time.perf_counter()
            members, outs = _msmf_step(runner, msmf_central, msmf_dist, msmf_locals, ys, trial, step)
            box = intersect_axis_bounds(members)
            result.bounds["msmf"][trial, k] = box.half_widths
            result.contained["msmf"][trial, k] = all(e.contains(x, tol=1e-9) for e in members)
            result.fallback["msmf"][trial, k] = any(o.fallback for o in outs)
            result.cert_pred["msmf"][trial, k] = min(o.pred_cert for o in outs)
            result.cert_update["msmf"][trial, k] = min(o.update_cert for o in outs)
            result.taus["msmf"][trial][k] = [None if o.tau is None else o.tau.as_array().tolist() for o in outs]
            result.timing["msmf"] += time.perf_counter() - t0


def _msmf_step(runner, msmf_central, msmf_dist, msmf_locals, ys, trial, step):
    """Advance every weighted pipeline; returns member ellipsoids and step outcomes."""
    code = METHOD_CODES["msmf"]
    members, outs = [], []
    for j, obj in enumerate(runner.bank.objectives()):
        if runner.cfg.msmf_pipeline == "csmf":
            out = runner.central_step(runner.model, msmf_central[j], ys, obj, trial, step, code, j)
            msmf_central[j] = _Track(out.estimate, out.tau or msmf_central[j].warm)
        else:
            locs = []
            for i in range(runner.L):
                lo = runner.central_step(
                    runner.sub_models[i], msmf_locals[j][i], [ys[i]], obj,
                    trial, step, code, 100 * (j + 1) + i,
                )
                msmf_locals[j][i] = _Track(lo.estimate, lo.tau or msmf_locals[j][i].warm)
                locs.append(lo.estimate)
            out = runner.distributed_step(msmf_dist[j], locs, obj, trial, step, j + 1)
            msmf_dist[j] = _Track(out.estimate, out.tau or msmf_dist[j].warm)
        members.append(out.estimate)
        outs.append(out)
    return members, outs


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Run every requested method over all trials.

    A trial that raises a library error is recorded in ``aborted`` and its
    rows are excluded from the means. More than 1% aborted trials raises.

    Raises:
        RunAborted: too many trials aborted; the partial result is attached as ``result``.
    """
    cfg.validate()
    methods = cfg.method_names()
    result = _empty_result(cfg, methods)
    if not methods:
        return result
    runner = _Runner(cfg)
    start = time.perf_counter()
    for trial in range(cfg.runs):
        try:
            _run_trial(runner, result, trial)
        except SMFusionError as exc:
            result.aborted.append((trial, f"{type(exc).__name__}: {exc}"))
    result.wall_time = time.perf_counter() - start
    if len(result.aborted) > ABORT_FRACTION * cfg.runs:
        raise RunAborted(
            f"{len(result.aborted)} of {cfg.runs} trials aborted; first: {result.aborted[0][1]}",
            result,
        )
    return result


# ---------------------------------------------------------------------------
# Output


def bounds_rows(r: RunResult) -> list[list[str]]:
    rows = []
    ok = r.valid_trials()
    for m in r.methods:
        b = r.bounds[m][ok]
        if b.shape[0] == 0:
            continue
        mean, lo, hi = b.mean(axis=0), b.min(axis=0), b.max(axis=0)
        for axis in range(b.shape[2]):
            for k in range(b.shape[1]):
                rows.append([m, str(axis), str(k + 1), _fmt(mean[k, axis]), _fmt(lo[k, axis]), _fmt(hi[k, axis])])
    return rows


def emit_results(r: RunResult, path: str | Path) -> dict[str, Path]:
    """Write ``bounds.csv``, ``containment.csv``, ``locals.csv`` and ``summary.json`` into ``path``.

    ``locals.csv`` carries the per-sensor local estimates (center and
    row-major shape) received by the fusion center at each step.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "bounds": out / "bounds.csv",
        "containment": out / "containment.csv",
        "locals": out / "locals.csv",
        "summary": out / "summary.json",
    }
    with files["bounds"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "axis", "step", "mean_bound", "min_bound", "max_bound"])
        w.writerows(bounds_rows(r))
    ok = r.valid_trials()
    with files["containment"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "trial", "step", "contained"])
        for m in r.methods:
            flags = r.contained[m]
            for t in range(flags.shape[0]):
                if not ok[t]:
                    continue
                for k in range(flags.shape[1]):
                    w.writerow([m, t, k + 1, int(flags[t, k])])
    n = r.local_centers.shape[-1]
    with files["locals"].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["trial", "step", "sensor"] + [f"c{a}" for a in range(n)]
        header += [f"p{a}{b}" for a in range(n) for b in range(n)]
        w.writerow(header)
        for t in range(r.local_centers.shape[0]):
            if not ok[t]:
                continue
            for k in range(r.local_centers.shape[1]):
                for i in range(r.local_centers.shape[2]):
                    c = r.local_centers[t, k, i]
                    if not np.all(np.isfinite(c)):
                        continue
                    vals = list(c) + list(r.local_shapes[t, k, i].ravel())
                    w.writerow([t, k + 1, i + 1] + [_fmt(v) for v in vals])
    summary = {
        "version": __version__,
        "config": r.config.to_dict(),
        "wall_time_s": r.wall_time,
        "aborted": [{"trial": t, "error": msg} for t, msg in r.aborted],
        "methods": {},
    }
    for m in r.methods:
        summary["methods"][m] = {
            "mean_bounds": [[float(_fmt(v)) for v in row] for row in r.mean_bounds(m).tolist()]
            if ok.any() else [],
            "containment_rate": r.containment_rate(m),
            "fallback_steps": int(r.fallback[m][ok].sum()),
            "min_prediction_certificate": _nanmin(r.cert_pred[m][ok]),
            "min_update_certificate": _nanmin(r.cert_update[m][ok]),
            "time_s": r.timing[m],
        }
    with files["summary"].open("w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return files


def _nanmin(a: np.ndarray) -> float | None:
    a = a[np.isfinite(a)]
    return float(a.min()) if a.size else None


def probe_bounds(cfg: ScenarioConfig, step: int, trial: int = 0) -> dict[str, Any]:
    """Remainder bounds of the centralized filter at ``step`` of one trial."""
    if not 1 <= step <= cfg.horizon:
        raise ConfigError(f"step must lie in [1, {cfg.horizon}]")
    runner = _Runner(cfg)
    model = runner.model
    noise_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(trial,)))
    x = np.asarray(cfg.x0, dtype=float)
    track = _Track(Ellipsoid(cfg.x0, cfg.P0))
    code = METHOD_CODES["csmf"]
    for k in range(1, step + 1):
        x = runner.A @ x + _noise(cfg, model.Q, noise_rng)
        ys = [np.asarray(model.h[i](x)) + _noise(cfg, model.R[i], noise_rng) for i in range(model.L)]
        est = track.estimate
        if k == step:
            rem_f = bound_remainder(
                model.f, est.center, est.factor, model.jacobian_f(est.center),
                samples=cfg.samples, seed=runner._seed(trial, k, code, 0, 0), inflate=cfg.inflate,
            )
            pred, _ = predict(est, model, rem_f, runner.obj)
            rems = runner.measurement_rems(
                model, pred, [runner._seed(trial, k, code, 0, 1 + i) for i in range(model.L)]
            )
            return {
                "step": step,
                "state_remainder": {"center": rem_f.e.tolist(), "shape": rem_f.P.tolist()},
                "measurement_remainders": [
                    {"sensor": i + 1, "center": r.e.tolist(), "shape": r.P.tolist()}
                    for i, r in enumerate(rems)
                ],
            }
        out = runner.central_step(model, track, ys, runner.obj, trial, k, code, 0)
        track = _Track(out.estimate, out.tau or track.warm)
    raise AssertionError("unreachable")
