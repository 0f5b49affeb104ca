"""Stage one: turn a raw map polyline into a curvature-continuous guide line.

The QP minimizes, over the 2n point coordinates,

    w_smooth * sum ||2 p_i - p_{i-1} - p_{i+1}||^2
  + w_dev    * sum ||p_i - p_i0||^2
  + w_length * sum ||p_{i+1} - p_i||^2

subject to per-coordinate deviation boxes p_i in p_i0 +- d. Endpoints are
pinned (d = 0) to keep the planning frame anchored. The length term is an
extension over the mid-point objective; w_length=0 disables it.

Geometry (theta, kappa, dkappa) is recovered by finite differencing the
optimized positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import qp
from .errors import DegenerateInput, SmoothingFailed
from .geometry import GuideLine, GuideLinePoint, wrap_angle


@dataclass(frozen=True)
class RawLine:
    """Ordered map polyline (n >= 3, consecutive points distinct)."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 3:
            raise DegenerateInput("raw line needs at least 3 points")
        xy = np.asarray(pts)
        seg = np.hypot(*np.diff(xy, axis=0).T)
        if np.any(seg <= 1e-6):
            raise DegenerateInput("consecutive raw points must be > 1e-6 m apart")

    @property
    def xy(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    @property
    def arc_length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.xy, axis=0).T)))


@dataclass(frozen=True)
class SmootherConfig:
    w_smooth: float = 1000.0
    w_dev: float = 1.0
    w_length: float = 1.0
    deviation_bound_d: float = 0.1
    resample_interval: float = 0.25

    def __post_init__(self):
        if min(self.w_smooth, self.w_dev, self.w_length) < 0 or self.w_smooth <= 0:
            raise ValueError("weights must be >= 0 and w_smooth > 0")
        if self.deviation_bound_d < 0 or self.resample_interval <= 0:
            raise ValueError("deviation bound >= 0 and interval > 0 required")


def resample(raw: RawLine, interval: float) -> RawLine:
    """Walk the polyline at uniform arc-length steps; the last original
    point is always kept (final segment may be shorter)."""
    if interval <= 0:
        raise ValueError("interval must be > 0")
    xy = raw.xy
    seg = np.hypot(*np.diff(xy, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    if total < 2.0 * interval:
        raise DegenerateInput(f"polyline length {total:.3f} < 2 * interval")
    stations = np.arange(0.0, total, interval)
    out_x = np.interp(stations, cum, xy[:, 0])
    out_y = np.interp(stations, cum, xy[:, 1])
    pts = list(zip(out_x, out_y))
    last = (float(xy[-1, 0]), float(xy[-1, 1]))
    if math.hypot(pts[-1][0] - last[0], pts[-1][1] - last[1]) < 1e-9:
        pts[-1] = last
    else:
        pts.append(last)
    return RawLine(tuple(pts))


def build_smoothing_qp(raw: RawLine, cfg: SmootherConfig) -> qp.QpProblem:
    """Assemble the smoothing QP over interleaved coordinates
    [x0, y0, x1, y1, ...]; constraint rows are the 2n deviation boxes with
    the first and last point pinned."""
    xy = raw.xy
    n = len(xy)
    p0 = xy.reshape(-1)

    d2 = sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n))
    d1 = sp.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n))
    m = (
        cfg.w_smooth * (d2.T @ d2)
        + cfg.w_dev * sp.eye(n)
        + cfg.w_length * (d1.T @ d1)
    )
    hessian = 2.0 * sp.kron(m, sp.eye(2), format="csc")
    linear = -2.0 * cfg.w_dev * p0

    # Pin two points at each end: position plus boundary heading, so the
    # smoothed frame stays anchored to the up/downstream route segments.
    d = np.full(2 * n, cfg.deviation_bound_d)
    d[:4] = 0.0
    d[-4:] = 0.0
    return qp.QpProblem(hessian, linear, sp.eye(2 * n, format="csc"), p0 - d, p0 + d)


def derive_geometry(points: np.ndarray, interval: float) -> GuideLine:
    """Finite-difference geometry from uniformly spaced positions:
    theta from central position differences (one-sided at the ends),
    kappa from central heading differences, dkappa from central kappa
    differences."""
    xy = np.asarray(points, dtype=float)
    n = len(xy)
    if n < 3:
        raise DegenerateInput("need at least 3 points for geometry")
    x, y = xy[:, 0], xy[:, 1]

    theta = np.empty(n)
    theta[1:-1] = np.arctan2(y[2:] - y[:-2], x[2:] - x[:-2])
    theta[0] = math.atan2(y[1] - y[0], x[1] - x[0])
    theta[-1] = math.atan2(y[-1] - y[-2], x[-1] - x[-2])

    def dwrap(a, b):
        return np.asarray([wrap_angle(v) for v in np.atleast_1d(a - b)])

    kappa = np.empty(n)
    kappa[1:-1] = dwrap(theta[2:], theta[:-2]) / (2.0 * interval)
    # One-sided chord headings sit at effective arc position interval/2, so
    # tangent pairs touching an end are interval/2 resp. 1.5*interval apart.
    kappa[0] = wrap_angle(theta[1] - theta[0]) / (0.5 * interval)
    kappa[-1] = wrap_angle(theta[-1] - theta[-2]) / (0.5 * interval)
    if n > 3:
        kappa[1] = wrap_angle(theta[2] - theta[0]) / (1.5 * interval)
        kappa[-2] = wrap_angle(theta[-1] - theta[-3]) / (1.5 * interval)

    dkappa = np.empty(n)
    dkappa[1:-1] = (kappa[2:] - kappa[:-2]) / (2.0 * interval)
    dkappa[0] = (kappa[1] - kappa[0]) / interval
    dkappa[-1] = (kappa[-1] - kappa[-2]) / interval

    s = np.arange(n) * interval
    return GuideLine(interval, s, x, y, theta, kappa, dkappa)


def smooth(raw: RawLine, cfg: SmootherConfig = SmootherConfig()) -> GuideLine:
    """Solve the smoothing QP and derive finite-difference geometry.

    The input must already be resampled at cfg.resample_interval; a
    trailing short segment (left over by resampling) is dropped so the
    output grid is uniform.
    """
    xy = raw.xy
    seg = np.hypot(*np.diff(xy, axis=0).T)
    # Resampling keeps the original end point, so the tail segment may be
    # short; drop it to get a uniform station grid.
    if len(xy) > 3 and seg[-1] < 0.55 * cfg.resample_interval:
        xy = xy[:-1]
        seg = seg[:-1]
    if np.any(seg < 0.5 * cfg.resample_interval) or np.any(seg > 1.5 * cfg.resample_interval):
        raise DegenerateInput("input must be resampled near cfg.resample_interval")
    uniform = RawLine(tuple(map(tuple, xy)))

    problem = build_smoothing_qp(uniform, cfg)
    settings = qp.QpSettings(warm_start_x=xy.reshape(-1))
    sol = qp.solve(problem, settings)
    if sol.status is qp.SolveStatus.MAX_ITERATIONS:
        raise SmoothingFailed(
            f"smoothing QP hit iteration limit (residuals {sol.primal_residual:.2e}, "
            f"{sol.dual_residual:.2e})"
        )
    if not sol.solved:
        raise SmoothingFailed(f"smoothing QP status {sol.status.value}")
    return derive_geometry(sol.x.reshape(-1, 2), cfg.resample_interval)


def interpolate(line: GuideLine, s: float) -> GuideLinePoint:
    """Linear interpolation of all guide fields; theta along the shorter arc."""
    return line.point_at(s)
