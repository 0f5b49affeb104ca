"""Vehicle configuration types, bicycle-model limits and exact/approximate
Frenet <-> Cartesian conversions.

Sign convention: lateral offset l > 0 is to the LEFT of the guide-line
tangent. All heading arithmetic is normalized to (-pi, pi] immediately
after each operation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousProjection,
    DegenerateInput,
    HeadingFold,
    OutOfRange,
    SingularProjection,
)

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class CartesianPose:
    """Map-frame configuration (x, y, theta, kappa)."""

    x: float
    y: float
    theta: float
    kappa: float = 0.0
    dkappa: float = 0.0

    def __post_init__(self):
        if not (-math.pi < self.theta <= math.pi + 1e-12):
            object.__setattr__(self, "theta", wrap_angle(self.theta))
        if not math.isfinite(self.kappa):
            raise ValueError("kappa must be finite")


@dataclass(frozen=True)
class FrenetState:
    """Lateral offset and its spatial derivatives at station s."""

    s: float
    l: float
    dl: float = 0.0
    ddl: float = 0.0

    def __post_init__(self):
        if self.s < 0.0:
            raise ValueError("station s must be >= 0")


@dataclass(frozen=True)
class GuideLinePoint:
    """One smoothed guide-line sample: position, tangent, curvature and
    curvature rate, indexed by arc length s."""

    s: float
    x: float
    y: float
    theta: float
    kappa: float
    dkappa: float = 0.0


@dataclass(frozen=True)
class VehicleParams:
    """Bicycle-model vehicle description (rear-axle reference point)."""

    wheelbase_L: float
    max_steer_alpha: float
    width: float
    rear_axle_to_front: float = 3.6
    rear_axle_to_back: float = 1.0

    def __post_init__(self):
        if self.wheelbase_L <= 0.0:
            raise ValueError("wheelbase must be > 0")
        if not (0.0 < self.max_steer_alpha < math.pi / 2):
            raise ValueError("max steer angle must be in (0, pi/2)")
        if self.width <= 0.0:
            raise ValueError("width must be > 0")

    @property
    def kappa_max(self) -> float:
        """Tightest drivable curvature, tan(alpha_max) / L."""
        return math.tan(self.max_steer_alpha) / self.wheelbase_L

    @property
    def length(self) -> float:
        return self.rear_axle_to_front + self.rear_axle_to_back


class GuideLine:
    """Arc-length-indexed smoothed polyline with tangent/curvature data.

    Points sit at s = i * interval; the final segment may be shorter if the
    source line length was not a multiple of the interval (the trailing
    point is then dropped by the smoother, so in practice spacing is
    uniform).
    """

    __slots__ = ("interval", "s", "x", "y", "theta", "kappa", "dkappa")

    def __init__(self, interval, s, x, y, theta, kappa, dkappa):
        self.interval = float(interval)
        self.s = np.asarray(s, dtype=float)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.theta = np.asarray(theta, dtype=float)
        self.kappa = np.asarray(kappa, dtype=float)
        self.dkappa = np.asarray(dkappa, dtype=float)
        if len(self.s) < 2:
            raise DegenerateInput("guide line needs at least 2 points")
        if np.any(np.diff(self.s) <= 0.0):
            raise ValueError("stations must be strictly increasing")

    def __len__(self) -> int:
        return len(self.s)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def point(self, i: int) -> GuideLinePoint:
        return GuideLinePoint(
            s=float(self.s[i]),
            x=float(self.x[i]),
            y=float(self.y[i]),
            theta=float(self.theta[i]),
            kappa=float(self.kappa[i]),
            dkappa=float(self.dkappa[i]),
        )

    @property
    def points(self) -> list[GuideLinePoint]:
        return [self.point(i) for i in range(len(self))]

    def point_at(self, s: float) -> GuideLinePoint:
        """Linear interpolation of all fields; theta along the shorter arc."""
        if s < self.s[0] - 1e-9 or s > self.s[-1] + 1e-9:
            raise OutOfRange(f"s={s} outside [{self.s[0]}, {self.s[-1]}]")
        s = min(max(s, float(self.s[0])), float(self.s[-1]))
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self) - 2)
        ds = self.s[i + 1] - self.s[i]
        t = (s - self.s[i]) / ds
        theta = wrap_angle(
            self.theta[i] + wrap_angle(self.theta[i + 1] - self.theta[i]) * t
        )
        lerp = lambda a: float(a[i] + (a[i + 1] - a[i]) * t)
        return GuideLinePoint(
            s=float(s),
            x=lerp(self.x),
            y=lerp(self.y),
            theta=theta,
            kappa=lerp(self.kappa),
            dkappa=lerp(self.dkappa),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "x", "y", "theta", "kappa", "dkappa"])
            for i in range(len(self)):
                w.writerow(
                    f"{v:.9g}"
                    for v in (
                        self.s[i],
                        self.x[i],
                        self.y[i],
                        self.theta[i],
                        self.kappa[i],
                        self.dkappa[i],
                    )
                )

    @classmethod
    def from_csv(cls, path) -> "GuideLine":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 6:
            raise DegenerateInput("guide line CSV must have 6 columns")
        s = data[:, 0]
        interval = float(np.median(np.diff(s)))
        return cls(interval, s, data[:, 1], data[:, 2], data[:, 3], data[:, 4], data[:, 5])


def _check_valid_side(one_minus_kl: float) -> None:
    if one_minus_kl <= 0.0:
        raise SingularProjection(
            f"1 - kappa_r * l = {one_minus_kl:.6g} <= 0: point beyond center of curvature"
        )


def curvature_in_cartesian(
    l: float, dl: float, ddl: float, r: GuideLinePoint, dtheta: float
) -> float:
    """Exact map-frame curvature of a Frenet-described point.

    kappa = (((l'' + (dkr*l + kr*l') tan(dth)) cos^2(dth)) / (1 - kr*l) + kr)
            * cos(dth) / (1 - kr*l)
    """
    one_minus_kl = 1.0 - r.kappa * l
    _check_valid_side(one_minus_kl)
    if abs(dtheta) >= math.pi / 2:
        raise HeadingFold(f"|dtheta| = {abs(dtheta):.4f} >= pi/2")
    cos_dt = math.cos(dtheta)
    tan_dt = math.tan(dtheta)
    inner = (ddl + (r.dkappa * l + r.kappa * dl) * tan_dt) * cos_dt * cos_dt
    return (inner / one_minus_kl + r.kappa) * cos_dt / one_minus_kl


def approx_curvature(l: float, kappa_r: float) -> float:
    """Small-angle, zero-l'' approximation: kappa = kappa_r / (1 - kappa_r*l)."""
    one_minus_kl = 1.0 - kappa_r * l
    _check_valid_side(one_minus_kl)
    return kappa_r / one_minus_kl


def frenet_to_cartesian(f: FrenetState, r: GuideLinePoint) -> CartesianPose:
    """Map a Frenet state back to a map-frame pose at the matched guide point."""
    one_minus_kl = 1.0 - r.kappa * f.l
    _check_valid_side(one_minus_kl)
    x = r.x - f.l * math.sin(r.theta)
    y = r.y + f.l * math.cos(r.theta)
    dtheta = math.atan2(f.dl, one_minus_kl)
    theta = wrap_angle(r.theta + dtheta)
    kappa = curvature_in_cartesian(f.l, f.dl, f.ddl, r, dtheta)
    return CartesianPose(x=x, y=y, theta=theta, kappa=kappa)


def cartesian_to_frenet(p: CartesianPose, r: GuideLinePoint) -> FrenetState:
    """Project a map-frame pose into the Frenet frame of the matched point.

    l'' is the exact-curvature equation solved algebraically for l'':
      l'' = ((kappa*(1-kr*l)/cos(dth) - kr) * (1-kr*l) / cos^2(dth))
            - (dkr*l + kr*l') * tan(dth)
    """
    dx = p.x - r.x
    dy = p.y - r.y
    l = dy * math.cos(r.theta) - dx * math.sin(r.theta)
    one_minus_kl = 1.0 - r.kappa * l
    _check_valid_side(one_minus_kl)
    dtheta = wrap_angle(p.theta - r.theta)
    if abs(dtheta) >= math.pi / 2:
        raise HeadingFold(f"|dtheta| = {abs(dtheta):.4f} >= pi/2")
    cos_dt = math.cos(dtheta)
    tan_dt = math.tan(dtheta)
    dl = one_minus_kl * tan_dt
    ddl = (
        (p.kappa * one_minus_kl / cos_dt - r.kappa) * one_minus_kl / (cos_dt * cos_dt)
        - (r.dkappa * l + r.kappa * dl) * tan_dt
    )
    return FrenetState(s=r.s, l=l, dl=dl, ddl=ddl)


def project_point(line: GuideLine, x: float, y: float) -> tuple[GuideLinePoint, float]:
    """Nearest point on the guide polyline, with linear attribute interpolation.

    Raises AmbiguousProjection when two non-adjacent segments tie within
    1e-9 (self-approaching line).
    """
    if len(line) < 2:
        raise DegenerateInput("guide line needs at least 2 points")
    ax, ay = line.x[:-1], line.y[:-1]
    ex, ey = np.diff(line.x), np.diff(line.y)
    seg_len2 = ex * ex + ey * ey
    t = ((x - ax) * ex + (y - ay) * ey) / np.maximum(seg_len2, 1e-18)
    t = np.clip(t, 0.0, 1.0)
    fx = ax + t * ex
    fy = ay + t * ey
    d2 = (x - fx) ** 2 + (y - fy) ** 2
    best = int(np.argmin(d2))
    dbest = math.sqrt(float(d2[best]))
    near = np.flatnonzero(np.sqrt(d2) <= dbest + 1e-9)
    if near.size and (near.max() - near.min()) > 1:
        raise AmbiguousProjection(
            f"segments {near.min()} and {near.max()} tie at distance {dbest:.3g}"
        )
    s = float(line.s[best] + t[best] * (line.s[best + 1] - line.s[best]))
    return line.point_at(s), s
