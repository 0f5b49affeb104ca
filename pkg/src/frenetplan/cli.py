"""Command-line entry point.

    frenetplan plan --scenario f.json --out dir [--format csv,svg,json-summary]
                    [--ds 0.5] [--cached-guide-line guide.csv]
                    [--weights w_dddl=1e5,...] [--seed 0]
    frenetplan bench --scenarios dir --reps 50

Exit codes: 0 success, 1 I/O or schema errors, 2 infeasible corridor/path.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .errors import (
    BlockedCorridor,
    InfeasibleGuideLine,
    IoError,
    NoUsableLane,
    PathInfeasible,
    ScenarioError,
    StageError,
)
from .geometry import GuideLine

EXIT_OK = 0
EXIT_IO = 1
EXIT_INFEASIBLE = 2

_INFEASIBLE = (BlockedCorridor, InfeasibleGuideLine, NoUsableLane, PathInfeasible)


def _parse_weights(spec: str) -> dict[str, float]:
    out = {}
    for item in spec.split(","):
        if not item:
            continue
        key, _, val = item.partition("=")
        if not val:
            raise ValueError(f"bad weight override {item!r}, expected k=v")
        out[key.strip()] = float(val)
    return out


def _apply_overrides(sc: pipeline.Scenario, args) -> pipeline.Scenario:
    smoother_cfg = sc.smoother_cfg
    boundary_cfg = sc.boundary_cfg
    path_cfg = sc.path_cfg
    if args.ds is not None:
        boundary_cfg = dataclasses.replace(boundary_cfg, ds=args.ds)
        path_cfg = dataclasses.replace(path_cfg, ds=args.ds)
    if args.weights:
        for key, val in _parse_weights(args.weights).items():
            if key in {f.name for f in dataclasses.fields(path_cfg)}:
                path_cfg = dataclasses.replace(path_cfg, **{key: val})
            elif key in {f.name for f in dataclasses.fields(smoother_cfg)}:
                smoother_cfg = dataclasses.replace(smoother_cfg, **{key: val})
            elif key in {f.name for f in dataclasses.fields(boundary_cfg)}:
                boundary_cfg = dataclasses.replace(boundary_cfg, **{key: val})
            else:
                raise ScenarioError(f"unknown weight/config field {key!r}")
    return dataclasses.replace(
        sc, smoother_cfg=smoother_cfg, boundary_cfg=boundary_cfg, path_cfg=path_cfg
    )


def cmd_plan(args) -> int:
    try:
        sc = pipeline.load_scenario(args.scenario)
        sc = _apply_overrides(sc, args)
        cached = GuideLine.from_csv(args.cached_guide_line) if args.cached_guide_line else None
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    formats = {f.strip() for f in args.format.split(",") if f.strip()}
    unknown = formats - {"csv", "svg", "json-summary"}
    if unknown:
        print(f"error: unknown formats {sorted(unknown)}", file=sys.stderr)
        return EXIT_IO

    try:
        result = pipeline.run_pipeline(sc, cached_guide_line=cached)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, _INFEASIBLE):
            return EXIT_INFEASIBLE
        if isinstance(exc.cause, (ScenarioError, IoError, OSError)):
            return EXIT_IO
        raise

    try:
        written = pipeline.emit(result, args.out, formats)
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in written:
        print(p)
    return EXIT_OK


def cmd_bench(args) -> int:
    sdir = Path(args.scenarios)
    files = sorted(sdir.glob("*.json"))
    if not files:
        print(f"error: no scenario files in {sdir}", file=sys.stderr)
        return EXIT_IO
    scenarios = []
    for f in files:
        try:
            scenarios.append(pipeline.load_scenario(f))
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        report = pipeline.bench(scenarios, args.reps)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE if isinstance(exc.cause, _INFEASIBLE) else EXIT_IO
    json.dump(report, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frenetplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a single scenario and emit artifacts")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", default="csv", help="comma list of csv,svg,json-summary")
    p.add_argument("--ds", type=float, default=None, help="station resolution override [m]")
    p.add_argument("--cached-guide-line", default=None, help="precomputed guide line CSV")
    p.add_argument("--weights", default=None, help="config overrides k=v,...")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (reserved; planning is deterministic)")
    p.set_defaults(func=cmd_plan)

    b = sub.add_parser("bench", help="timing report over a scenario directory")
    b.add_argument("--scenarios", required=True, help="directory of scenario JSON files")
    b.add_argument("--reps", type=int, default=10, help="repetitions per scenario")
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
