"""Scenario ingestion, end-to-end orchestration, emitters and timing.

Stages: smooth -> project -> decide -> bound -> optimize -> convert.
Scenario files are self-describing JSON with units in field names
(`_m`, `_rad`, `_mps`); see README for the schema.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import statistics
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import boundary as bd
from . import pjpath as pj
from . import qp
from . import smoother as sm
from .errors import (
    IoError,
    OutOfScope,
    ScenarioError,
    StageError,
)
from .geometry import (
    CartesianPose,
    FrenetState,
    GuideLine,
    VehicleParams,
    cartesian_to_frenet,
    project_point,
)

log = logging.getLogger(__name__)

STATIC_SPEED_THRESHOLD = 0.5  # m/s; faster obstacles belong to speed planning

DEFAULT_VEHICLE = VehicleParams(
    wheelbase_L=2.8,
    max_steer_alpha=0.6,
    width=1.8,
    rear_axle_to_front=3.6,
    rear_axle_to_back=1.0,
)


@dataclass(frozen=True)
class ScenarioObstacle:
    id: str
    polygon: tuple[tuple[float, float], ...]
    speed: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    raw_line: sm.RawLine
    road: bd.RoadModel
    ego_pose: CartesianPose
    ego_speed: float
    obstacles: tuple[ScenarioObstacle, ...]
    vehicle: VehicleParams = DEFAULT_VEHICLE
    smoother_cfg: sm.SmootherConfig = sm.SmootherConfig()
    boundary_cfg: bd.BoundaryConfig = bd.BoundaryConfig()
    path_cfg: pj.PjConfig = pj.PjConfig()


@dataclass
class PlanResult:
    scenario: str
    guide_line: GuideLine
    boundary: Optional[bd.PathBoundary] = None
    path: Optional[pj.PiecewiseJerkPath] = None
    cartesian: Optional[list[CartesianPose]] = None
    cartesian_s: Optional[np.ndarray] = None
    init_state: Optional[FrenetState] = None
    timings_ms: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario JSON document."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> Scenario:
    _require(isinstance(doc.get("name"), str) and doc["name"], "missing scenario name")
    pts = doc.get("guide_line_xy_m")
    _require(isinstance(pts, list) and len(pts) >= 3, "guide_line_xy_m needs >= 3 points")
    raw = sm.RawLine(tuple((float(p[0]), float(p[1])) for p in pts))

    lanes_doc = doc.get("lanes")
    _require(isinstance(lanes_doc, list) and lanes_doc, "lanes must be a non-empty list")
    lanes = []
    ego_idx = None
    for i, ld in enumerate(lanes_doc):
        _require("id" in ld, f"lane {i}: missing id")
        lane = bd.Lane(
            id=str(ld["id"]),
            direction=ld.get("direction", "forward"),
            left_bound_l=_bound_spec(ld, "left_bound_l_m", i),
            right_bound_l=_bound_spec(ld, "right_bound_l_m", i),
            adjacency=ld.get("adjacency", "adjacent"),
        )
        _require(lane.direction in ("forward", "reverse"), f"lane {lane.id}: bad direction")
        _require(
            lane.adjacency in ("ego", "adjacent", "reverse"),
            f"lane {lane.id}: bad adjacency",
        )
        if lane.adjacency == "ego":
            _require(ego_idx is None, "exactly one lane must have adjacency 'ego'")
            ego_idx = i
        lanes.append(lane)
    _require(ego_idx is not None, "exactly one lane must have adjacency 'ego'")
    road = bd.RoadModel(lanes=tuple(lanes), ego_lane_index=ego_idx)

    ego = doc.get("ego", {})
    for key in ("x_m", "y_m", "theta_rad"):
        _require(key in ego, f"ego: missing {key}")
    ego_pose = CartesianPose(
        x=float(ego["x_m"]),
        y=float(ego["y_m"]),
        theta=float(ego["theta_rad"]),
        kappa=float(ego.get("kappa_inv_m", 0.0)),
    )

    obstacles = []
    for i, od in enumerate(doc.get("obstacles", [])):
        poly = od.get("polygon_xy_m")
        _require(
            isinstance(poly, list) and len(poly) >= 3,
            f"obstacle {i}: polygon_xy_m needs >= 3 vertices",
        )
        _require(_is_convex(poly), f"obstacle {i}: polygon must be convex")
        obstacles.append(
            ScenarioObstacle(
                id=str(od.get("id", f"obstacle_{i}")),
                polygon=tuple((float(p[0]), float(p[1])) for p in poly),
                speed=float(od.get("speed_mps", 0.0)),
            )
        )

    vehicle = DEFAULT_VEHICLE
    if "vehicle" in doc:
        vd = doc["vehicle"]
        vehicle = VehicleParams(
            wheelbase_L=float(vd.get("wheelbase_m", DEFAULT_VEHICLE.wheelbase_L)),
            max_steer_alpha=float(vd.get("max_steer_rad", DEFAULT_VEHICLE.max_steer_alpha)),
            width=float(vd.get("width_m", DEFAULT_VEHICLE.width)),
            rear_axle_to_front=float(vd.get("front_overhang_m", DEFAULT_VEHICLE.rear_axle_to_front)),
            rear_axle_to_back=float(vd.get("back_overhang_m", DEFAULT_VEHICLE.rear_axle_to_back)),
        )

    over = doc.get("overrides", {})
    try:
        smoother_cfg = replace(sm.SmootherConfig(), **over.get("smoother", {}))
        boundary_cfg = replace(bd.BoundaryConfig(), **over.get("boundary", {}))
        path_cfg = replace(pj.PjConfig(), **over.get("path", {}))
    except TypeError as exc:
        raise ScenarioError(f"bad override field: {exc}") from exc

    return Scenario(
        name=doc["name"],
        raw_line=raw,
        road=road,
        ego_pose=ego_pose,
        ego_speed=float(ego.get("speed_mps", 0.0)),
        obstacles=tuple(obstacles),
        vehicle=vehicle,
        smoother_cfg=smoother_cfg,
        boundary_cfg=boundary_cfg,
        path_cfg=path_cfg,
    )


def _bound_spec(ld: dict, key: str, i: int):
    _require(key in ld, f"lane {i}: missing {key}")
    v = ld[key]
    if isinstance(v, (int, float)):
        return float(v)
    _require(isinstance(v, list) and all(len(p) == 2 for p in v), f"lane {i}: bad {key}")
    return tuple((float(s), float(l)) for s, l in v)


def _is_convex(poly: Sequence[Sequence[float]]) -> bool:
    pts = np.asarray(poly, dtype=float)
    n = len(pts)
    sign = 0
    for i in range(n):
        a, b, c = pts[i], pts[(i + 1) % n], pts[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if abs(cross) < 1e-12:
            continue
        s = 1 if cross > 0 else -1
        if sign == 0:
            sign = s
        elif s != sign:
            return False
    return True


def run_pipeline(sc: Scenario, cached_guide_line: GuideLine | None = None) -> PlanResult:
    """Execute all six stages in order; any stage error is wrapped with the
    stage name and partial results."""
    timings: dict[str, float] = {}
    diagnostics: dict[str, dict] = {}
    result = PlanResult(scenario=sc.name, guide_line=None)  # type: ignore[arg-type]

    def timed(stage, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            raise StageError(stage, sc.name, exc, partial=result) from exc
        timings[stage] = (time.perf_counter() - t0) * 1e3
        result.timings_ms = dict(timings)
        return out

    def stage_smooth():
        if cached_guide_line is not None:
            return cached_guide_line
        resampled = sm.resample(sc.raw_line, sc.smoother_cfg.resample_interval)
        return sm.smooth(resampled, sc.smoother_cfg)

    line = timed("smooth", stage_smooth)
    result.guide_line = line

    def stage_project():
        r, _s = project_point(line, sc.ego_pose.x, sc.ego_pose.y)
        init = cartesian_to_frenet(sc.ego_pose, r)
        obstacles = []
        for ob in sc.obstacles:
            if ob.speed >= STATIC_SPEED_THRESHOLD:
                log.warning(
                    "scenario %s: dropping dynamic obstacle %s (%.1f m/s)",
                    sc.name,
                    ob.id,
                    ob.speed,
                )
                continue
            try:
                slbox = bd.project_obstacle(line, ob.polygon)
            except OutOfScope:
                log.warning("scenario %s: obstacle %s outside scope", sc.name, ob.id)
                continue
            obstacles.append(replace_id(slbox, ob.id))
        return init, obstacles

    init, obstacles = timed("project", stage_project)
    result.init_state = init

    def stage_decide():
        s_end = min(init.s + sc.boundary_cfg.scope_s, line.length)
        return bd.decide_lane_usage(
            sc.road, init, obstacles, sc.vehicle, sc.boundary_cfg, s_end=s_end
        )

    corridor = timed("decide", stage_decide)

    def stage_bound():
        return bd.generate_boundary(corridor, obstacles, init, sc.vehicle, sc.boundary_cfg)

    path_bounds = timed("bound", stage_bound)
    result.boundary = path_bounds

    def stage_optimize():
        init_rel = FrenetState(s=0.0, l=init.l, dl=init.dl, ddl=init.ddl)
        path, sol = pj.optimize_path(path_bounds, init_rel, sc.vehicle, line, sc.path_cfg)
        diagnostics["path_qp"] = {
            "iterations": sol.iterations,
            "primal_residual": sol.primal_residual,
            "dual_residual": sol.dual_residual,
        }
        return path

    path = timed("optimize", stage_optimize)
    result.path = path

    def stage_convert():
        return pj.to_cartesian(path, line, sc.path_cfg.ds, s0=path_bounds.s0)

    result.cartesian = timed("convert", stage_convert)
    result.cartesian_s = path_bounds.s0 + pj.sample_stations(path, sc.path_cfg.ds)
    diagnostics["kappa_max"] = sc.vehicle.kappa_max
    result.diagnostics = diagnostics
    return result


def replace_id(box: bd.ObstacleSL, new_id: str) -> bd.ObstacleSL:
    return bd.ObstacleSL(
        id=new_id, s_start=box.s_start, s_end=box.s_end, l_min=box.l_min, l_max=box.l_max
    )


def emit(result: PlanResult, out_dir, formats: set[str]) -> list[Path]:
    """Write deterministic `<scenario>.<artifact>.<ext>` files."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc
    written: list[Path] = []
    name = result.scenario
    try:
        if "csv" in formats:
            p = out / f"{name}.guide_line.csv"
            result.guide_line.to_csv(p)
            written.append(p)
            if result.boundary is not None:
                p = out / f"{name}.boundary.csv"
                result.boundary.to_csv(p)
                written.append(p)
            if result.path is not None:
                p = out / f"{name}.path_frenet.csv"
                result.path.to_csv(p)
                written.append(p)
            if result.cartesian is not None:
                p = out / f"{name}.path_cartesian.csv"
                _write_cartesian_csv(p, result)
                written.append(p)
        if "svg" in formats and result.path is not None:
            from .plots import render_plan_svg

            p = out / f"{name}.plan.svg"
            render_plan_svg(result, p)
            written.append(p)
        if "json-summary" in formats:
            p = out / f"{name}.summary.json"
            _write_summary(p, result)
            written.append(p)
    except OSError as exc:
        raise IoError(f"cannot write outputs under {out}: {exc}") from exc
    return written


def _write_cartesian_csv(path, result: PlanResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "x", "y", "theta", "kappa"])
        for s, pose in zip(result.cartesian_s, result.cartesian):
            w.writerow(f"{v:.9g}" for v in (s, pose.x, pose.y, pose.theta, pose.kappa))


def _write_summary(path, result: PlanResult) -> None:
    summary = {
        "scenario": result.scenario,
        "guide_line_points": len(result.guide_line),
        "stations": len(result.path) if result.path else 0,
        "max_abs_l": float(np.max(np.abs(result.path.l))) if result.path else None,
        "max_abs_kappa": (
            max(abs(p.kappa) for p in result.cartesian) if result.cartesian else None
        ),
        "timings_ms": result.timings_ms,
        "diagnostics": result.diagnostics,
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass(frozen=True)
class StageTiming:
    mean_ms: float
    p95_ms: float


def bench(scenarios: Sequence[Scenario], repetitions: int) -> dict:
    """Repeatedly run the pipeline and report per-stage mean/p95 wall time."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples: dict[str, list[float]] = {}
    for sc in scenarios:
        for _ in range(repetitions):
            result = run_pipeline(sc)
            for stage, ms in result.timings_ms.items():
                samples.setdefault(stage, []).append(ms)
    report = {
        "machine": {
            "platform": platform.platform(),
            "processor": platform.processor() or platform.machine(),
            "python": platform.python_version(),
        },
        "repetitions": repetitions,
        "scenarios": [sc.name for sc in scenarios],
        "stages": {},
    }
    for stage, vals in samples.items():
        vals_sorted = sorted(vals)
        p95 = vals_sorted[min(len(vals_sorted) - 1, int(math.ceil(0.95 * len(vals_sorted))) - 1)]
        report["stages"][stage] = {
            "mean_ms": statistics.fmean(vals),
            "p95_ms": p95,
            "samples": len(vals),
        }
    return report
