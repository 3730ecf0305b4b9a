"""Command-line entry point: ``smfusion simulate | validate | bound-probe``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from typing import Sequence

from .errors import ConfigError, RunAborted
from .scenario import ScenarioConfig, emit_results, probe_bounds, run_scenario
from .validation import run_all

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2

log = logging.getLogger("smfusion")


def _load(path: str | None) -> ScenarioConfig:
    return ScenarioConfig() if path is None else ScenarioConfig.from_json(path)


def _simulate(args: argparse.Namespace) -> int:
    cfg = _load(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "runs", "horizon") if getattr(args, k) is not None}
    if overrides:
        cfg = replace(cfg, **overrides)
    out = args.out or cfg.output
    if out is None:
        raise ConfigError("an output directory is required (--out or 'output' in the config)")
    log.info("running %d trials x %d steps, methods %s", cfg.runs, cfg.horizon, cfg.method_names())
    try:
        result = run_scenario(cfg)
    except RunAborted as exc:
        # keep the partial run on disk; summary.json lists the aborted trials
        files = emit_results(exc.result, out)
        print(f"wrote partial results to {files['summary'].parent}", file=sys.stderr)
        raise
    files = emit_results(result, out)
    for m in result.methods:
        print(f"{m}: containment {result.containment_rate(m):.6f}")
    print(f"wrote {', '.join(str(p) for p in files.values())}")
    return EXIT_OK


def _validate(args: argparse.Namespace) -> int:
    results = run_all(quick=args.quick, seed=args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_ABORT


def _bound_probe(args: argparse.Namespace) -> int:
    cfg = _load(args.config)
    print(json.dumps(probe_bounds(cfg, args.step, args.trial), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smfusion", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the Monte Carlo tracking scenario")
    sim.add_argument("--config", help="JSON scenario file; defaults reproduce the two-sensor setup")
    sim.add_argument("--out", help="output directory")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--horizon", type=int)
    sim.set_defaults(func=_simulate)

    val = sub.add_parser("validate", help="check the solvers against grid oracles")
    val.add_argument("--quick", action="store_true", help="a tenth of the random instances")
    val.add_argument("--seed", type=int, default=0)
    val.set_defaults(func=_validate)

    probe = sub.add_parser("bound-probe", help="print the remainder bounds at one step")
    probe.add_argument("--config", help="JSON scenario file")
    probe.add_argument("--step", type=int, required=True)
    probe.add_argument("--trial", type=int, default=0)
    probe.set_defaults(func=_bound_probe)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunAborted as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
