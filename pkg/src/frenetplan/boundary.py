"""Stage two, part one: lane-utilization decision and per-station lateral
bounds around static obstacles.

Bounds apply to the vehicle's rear-axle reference point; obstacle and lane
edges are inset by (vehicle.width / 2 + lateral_buffer) so the footprint
clears them. The gap search is a depth-first search over stations with
gaps ranked widest-first, tie-broken toward the estimated ego lateral
position, which is carried forward as the clamp of the previous estimate
into the chosen interval.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    BlockedCorridor,
    DegenerateInput,
    NoUsableLane,
    OutOfScope,
    SingularProjection,
)
from .geometry import FrenetState, GuideLine, VehicleParams, cartesian_to_frenet, project_point

# A lateral lane edge: either constant or piecewise-linear samples (s, l).
LaneBoundSpec = Union[float, Sequence[tuple[float, float]]]


def _eval_bound(bound: LaneBoundSpec, s: float) -> float:
    if isinstance(bound, (int, float)):
        return float(bound)
    pts = np.asarray(bound, dtype=float)
    return float(np.interp(s, pts[:, 0], pts[:, 1]))


@dataclass(frozen=True)
class Lane:
    id: str
    direction: str  # "forward" | "reverse"
    left_bound_l: LaneBoundSpec
    right_bound_l: LaneBoundSpec
    adjacency: str  # "ego" | "adjacent" | "reverse"

    def bounds_at(self, s: float) -> tuple[float, float]:
        lo = _eval_bound(self.right_bound_l, s)
        hi = _eval_bound(self.left_bound_l, s)
        if hi <= lo:
            raise ValueError(f"lane {self.id}: left bound must exceed right bound")
        return lo, hi


@dataclass(frozen=True)
class RoadModel:
    lanes: tuple[Lane, ...]
    ego_lane_index: int

    def __post_init__(self):
        if not self.lanes:
            raise ValueError("road needs at least one lane")
        if not (0 <= self.ego_lane_index < len(self.lanes)):
            raise ValueError("ego lane index out of range")

    @property
    def ego_lane(self) -> Lane:
        return self.lanes[self.ego_lane_index]


@dataclass(frozen=True)
class ObstacleSL:
    """Station-lateral bounding box of a static obstacle."""

    id: str
    s_start: float
    s_end: float
    l_min: float
    l_max: float

    def __post_init__(self):
        if self.s_start >= self.s_end or self.l_min >= self.l_max:
            raise ValueError(f"obstacle {self.id}: degenerate SL box")

    def active_at(self, s: float) -> bool:
        return self.s_start <= s <= self.s_end


@dataclass(frozen=True)
class BoundaryConfig:
    ds: float = 0.5
    scope_s: float = 160.0
    lateral_buffer: float = 0.3
    ego_estimate_decay: float = 1.0

    def __post_init__(self):
        if self.ds <= 0 or self.scope_s < self.ds:
            raise ValueError("ds > 0 and scope_s >= ds required")


@dataclass(frozen=True)
class Corridor:
    """Per-station drivable lateral interval from the lane decision."""

    s0: float
    ds: float
    lower: np.ndarray
    upper: np.ndarray

    def __len__(self) -> int:
        return len(self.lower)

    def stations(self) -> np.ndarray:
        return self.s0 + self.ds * np.arange(len(self))


@dataclass(frozen=True)
class PathBoundary:
    """The corridor function l_B: per-station [l_min, l_max] plus the
    source of each interval."""

    s0: float
    ds: float
    l_min: np.ndarray
    l_max: np.ndarray
    sources: tuple[str, ...]

    def __post_init__(self):
        if np.any(self.l_min >= self.l_max):
            raise ValueError("boundary interval collapsed (l_min >= l_max)")
        lo, hi = self.l_min, self.l_max
        if np.any(np.maximum(lo[:-1], lo[1:]) > np.minimum(hi[:-1], hi[1:]) + 1e-12):
            raise ValueError("consecutive boundary intervals must overlap")

    def __len__(self) -> int:
        return len(self.l_min)

    def stations(self) -> np.ndarray:
        return self.s0 + self.ds * np.arange(len(self))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "l_min", "l_max", "source"])
            for s, lo, hi, src in zip(self.stations(), self.l_min, self.l_max, self.sources):
                w.writerow([f"{s:.9g}", f"{lo:.9g}", f"{hi:.9g}", src])


def project_obstacle(line: GuideLine, polygon: Sequence[tuple[float, float]]) -> ObstacleSL:
    """Conservative SL bounding box of a convex polygon's projected vertices."""
    if len(polygon) < 3:
        raise DegenerateInput("obstacle polygon needs >= 3 vertices")
    ss, ls = [], []
    for vx, vy in polygon:
        r, s = project_point(line, vx, vy)
        f = cartesian_to_frenet(
            # Heading is irrelevant for the extent box; use the tangent.
            _point_pose(vx, vy, r.theta),
            r,
        )
        ss.append(s)
        ls.append(f.l)
    s_lo, s_hi = min(ss), max(ss)
    if s_hi <= 0.0 or s_lo >= line.length:
        raise OutOfScope(f"obstacle outside [0, {line.length:.1f}]")
    return ObstacleSL("", s_lo, s_hi, min(ls), max(ls))


def _point_pose(x, y, theta):
    from .geometry import CartesianPose

    return CartesianPose(x=x, y=y, theta=theta, kappa=0.0)


def decide_lane_usage(
    road: RoadModel,
    ego: FrenetState,
    obstacles: Sequence[ObstacleSL],
    vehicle: VehicleParams,
    cfg: BoundaryConfig,
    s_end: float | None = None,
) -> Corridor:
    """Rule-based lane decision. The ego lane is always available. An
    adjacent same-direction lane is borrowed only over station ranges where
    an obstacle's lateral intrusion into the ego lane exceeds
    (lane free width - vehicle width - 2 * buffer). The reverse lane is
    borrowed only when no same-direction neighbor exists and the ego lane
    is blocked. The corridor is the contiguous union containing the ego
    lane."""
    s0 = ego.s
    if s_end is None:
        s_end = s0 + cfg.scope_s
    n = int(math.floor((s_end - s0) / cfg.ds + 1e-9)) + 1
    if n < 2:
        raise DegenerateInput("corridor scope shorter than one station step")
    stations = s0 + cfg.ds * np.arange(n)

    ego_idx = road.ego_lane_index
    same_dir = [
        lane
        for i, lane in enumerate(road.lanes)
        if abs(i - ego_idx) == 1 and lane.adjacency == "adjacent"
        and lane.direction == road.ego_lane.direction
    ]
    reverse = [
        lane
        for i, lane in enumerate(road.lanes)
        if abs(i - ego_idx) == 1 and (lane.adjacency == "reverse" or lane.direction != road.ego_lane.direction)
    ]

    margin = vehicle.length  # longitudinal transition margin around blockages
    lower = np.empty(n)
    upper = np.empty(n)
    for k, s in enumerate(stations):
        ego_lo, ego_hi = road.ego_lane.bounds_at(s)
        lane_w = ego_hi - ego_lo
        threshold = lane_w - vehicle.width - 2.0 * cfg.lateral_buffer
        blocked = False
        for ob in obstacles:
            if not (ob.s_start - margin <= s <= ob.s_end + margin):
                continue
            overlap = min(ob.l_max, ego_hi) - max(ob.l_min, ego_lo)
            if overlap > threshold:
                blocked = True
                break
        lo, hi = ego_lo, ego_hi
        if blocked:
            borrow = same_dir if same_dir else reverse
            if not borrow:
                raise NoUsableLane(f"ego lane blocked at s={s:.2f} with nothing to borrow")
            for lane in borrow:
                b_lo, b_hi = lane.bounds_at(s)
                # Union only if contiguous with the current interval.
                if b_lo <= hi + 1e-9 and b_hi >= lo - 1e-9:
                    lo = min(lo, b_lo)
                    hi = max(hi, b_hi)
        lower[k] = lo
        upper[k] = hi
    return Corridor(s0=s0, ds=cfg.ds, lower=lower, upper=upper)


def _free_gaps(lo: float, hi: float, blocks: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Maximal sub-intervals of [lo, hi] not covered by any block."""
    gaps = []
    cur = lo
    for b_lo, b_hi in sorted(blocks):
        if b_lo > cur:
            gaps.append((cur, min(b_lo, hi)))
        cur = max(cur, b_hi)
        if cur >= hi:
            break
    if cur < hi:
        gaps.append((cur, hi))
    return [(a, b) for a, b in gaps if b > a]


def generate_boundary(
    corridor: Corridor,
    obstacles: Sequence[ObstacleSL],
    ego: FrenetState,
    vehicle: VehicleParams,
    cfg: BoundaryConfig,
) -> PathBoundary:
    """Ranked depth-first gap search over stations.

    At each station the free space (corridor minus active obstacle
    extents) splits into gaps; candidates must survive the footprint inset
    and overlap the previously chosen interval. Candidates are tried
    widest-first, ties broken toward the carried ego estimate; exhausting
    a station back-tracks to the most recent station with alternatives.
    """
    n = len(corridor)
    stations = corridor.stations()
    inset = vehicle.width / 2.0 + cfg.lateral_buffer

    def candidates(k: int, prev: tuple[float, float] | None, est: float):
        lo_c, hi_c = corridor.lower[k], corridor.upper[k]
        s = stations[k]
        active = [(ob.l_min, ob.l_max) for ob in obstacles if ob.active_at(s)]
        cands = []
        for g_lo, g_hi in _free_gaps(lo_c, hi_c, active):
            a, b = g_lo + inset, g_hi - inset
            if b <= a:
                continue  # infeasible gap, pruned
            if prev is not None and (max(a, prev[0]) > min(b, prev[1])):
                continue  # would break the overlap invariant
            width = g_hi - g_lo
            center = 0.5 * (a + b)
            cands.append(((-width, abs(center - est), a), (a, b, bool(active), g_lo, g_hi)))
        cands.sort(key=lambda item: item[0])
        return [item[1] for item in cands]

    chosen: list[tuple[float, float, str]] = []
    estimates: list[float] = []
    stack: list[list] = []  # per-station remaining candidates
    k = 0
    est0 = ego.l
    deepest_fail = -1
    while k < n:
        prev = (chosen[k - 1][0], chosen[k - 1][1]) if k > 0 else None
        est = estimates[k - 1] if k > 0 else est0
        if len(stack) == k:
            stack.append(candidates(k, prev, est))
        if not stack[k]:
            # Dead end: back-track to the most recent choice point.
            deepest_fail = max(deepest_fail, k)
            stack.pop()
            if not chosen:
                s_fail = float(stations[deepest_fail])
                raise BlockedCorridor(_nearest_blocker(obstacles, s_fail), s_fail)
            chosen.pop()
            estimates.pop()
            k -= 1
            continue
        a, b, has_obstacle, g_lo, g_hi = stack[k].pop(0)
        src = "lane"
        if has_obstacle:
            src = _pass_side(obstacles, stations[k], a, b)
        chosen.append((a, b, src))
        estimates.append(min(max(est, a), b))
        k += 1

    l_min = np.array([c[0] for c in chosen])
    l_max = np.array([c[1] for c in chosen])
    sources = [c[2] for c in chosen]

    # Initial-state accommodation: widen the first few stations linearly so
    # the pinned start l0 = ego.l stays inside the box.
    if not (l_min[0] <= ego.l <= l_max[0]):
        kwid = max(1, math.ceil(2.0 / cfg.ds))
        pad = 0.01
        for i in range(min(kwid, n)):
            t = i / kwid
            want_lo = (1.0 - t) * min(ego.l - pad, l_min[i]) + t * l_min[i]
            want_hi = (1.0 - t) * max(ego.l + pad, l_max[i]) + t * l_max[i]
            if want_lo < l_min[i] or want_hi > l_max[i]:
                l_min[i] = min(l_min[i], want_lo)
                l_max[i] = max(l_max[i], want_hi)
                sources[i] = sources[i] + "+ego-init"

    return PathBoundary(
        s0=corridor.s0, ds=corridor.ds, l_min=l_min, l_max=l_max, sources=tuple(sources)
    )


def _nearest_blocker(obstacles: Sequence[ObstacleSL], s: float) -> str:
    active = [ob for ob in obstacles if ob.active_at(s)]
    if active:
        return active[0].id or "<unnamed>"
    return "<corridor>"


def _pass_side(obstacles: Sequence[ObstacleSL], s: float, a: float, b: float) -> str:
    """Classify the chosen gap relative to the nearest active obstacle:
    gap above the obstacle means passing it on its left."""
    center = 0.5 * (a + b)
    active = [ob for ob in obstacles if ob.active_at(s)]
    if not active:
        return "lane"
    nearest = min(active, key=lambda ob: abs(0.5 * (ob.l_min + ob.l_max) - center))
    if center >= 0.5 * (nearest.l_min + nearest.l_max):
        return "obstacle-left-pass"
    return "obstacle-right-pass"
