"""Stage two, part two: the piecewise-jerk path QP.

Variables are (l_i, l'_i, l''_i) per station, interleaved so both the
Hessian and the constraint matrix stay banded. Between stations a constant
third derivative j = (l''_{i+1} - l''_i) / ds connects the points, which
makes the path globally C2.

Kinematic feasibility uses the one-shot linear row
    tan(a_max) * kr * l  <=  tan(a_max) - |kr| * L
derived from kappa ~ kr / (1 - kr*l) and kappa_max = tan(a_max) / L.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import qp
from .boundary import PathBoundary
from .errors import (
    InfeasibleGuideLine,
    OutOfRange,
    PathInfeasible,
    StationMismatch,
)
from .geometry import (
    CartesianPose,
    FrenetState,
    GuideLine,
    VehicleParams,
    curvature_in_cartesian,
    wrap_angle,
)

CONTINUITY_TOL = 1e-6


@dataclass(frozen=True)
class PjConfig:
    ds: float = 0.5
    w_l: float = 1.0
    w_dl: float = 20.0
    w_ddl: float = 1000.0
    w_dddl: float = 50000.0
    w_obs: float = 0.0
    dl_bound: float = 2.0
    ddl_bound: float = 0.5

    def __post_init__(self):
        if self.ds <= 0:
            raise ValueError("ds must be > 0")
        if min(self.w_l, self.w_dl, self.w_ddl, self.w_dddl, self.w_obs) < 0:
            raise ValueError("weights must be >= 0")
        if self.w_l <= 0 and self.w_obs <= 0:
            raise ValueError("need w_l > 0 or w_obs > 0 for strict convexity in l")


def jerk_between(ddl_i: float, ddl_next: float, ds: float) -> float:
    """Constant jerk over one segment, (l''_{i+1} - l''_i) / ds."""
    if ds <= 0:
        raise ValueError("ds must be > 0")
    return (ddl_next - ddl_i) / ds


def propagate(l_i, dl_i, ddl_i, jerk, ds) -> tuple[float, float, float]:
    """Exact constant-jerk advance over one station step."""
    if ds <= 0:
        raise ValueError("ds must be > 0")
    ddl_next = ddl_i + jerk * ds
    dl_next = dl_i + ddl_i * ds + 0.5 * jerk * ds * ds
    l_next = l_i + dl_i * ds + 0.5 * ddl_i * ds * ds + jerk * ds * ds * ds / 6.0
    return l_next, dl_next, ddl_next


@dataclass(frozen=True)
class PiecewiseJerkPath:
    ds: float
    l: np.ndarray
    dl: np.ndarray
    ddl: np.ndarray

    def __post_init__(self):
        for name in ("l", "dl", "ddl"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.l)
        if n < 2 or len(self.dl) != n or len(self.ddl) != n:
            raise ValueError("need matching l/dl/ddl arrays of length >= 2")
        res = self.continuity_residuals()
        if res.size and res.max() > CONTINUITY_TOL:
            raise ValueError(f"continuity residual {res.max():.3e} > {CONTINUITY_TOL}")

    def __len__(self) -> int:
        return len(self.l)

    @property
    def length(self) -> float:
        return (len(self) - 1) * self.ds

    def continuity_residuals(self) -> np.ndarray:
        """Componentwise propagate-vs-stored mismatch at each junction."""
        out = np.zeros((len(self) - 1, 3))
        for i in range(len(self) - 1):
            j = jerk_between(self.ddl[i], self.ddl[i + 1], self.ds)
            nxt = propagate(self.l[i], self.dl[i], self.ddl[i], j, self.ds)
            out[i] = (
                abs(nxt[0] - self.l[i + 1]),
                abs(nxt[1] - self.dl[i + 1]),
                abs(nxt[2] - self.ddl[i + 1]),
            )
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "l", "dl", "ddl"])
            for i in range(len(self)):
                w.writerow(
                    f"{v:.9g}" for v in (i * self.ds, self.l[i], self.dl[i], self.ddl[i])
                )


def evaluate(path: PiecewiseJerkPath, s: float) -> tuple[float, float, float]:
    """Cubic in-segment evaluation; exact at knots, C2 across them."""
    if s < -1e-9 or s > path.length + 1e-9:
        raise OutOfRange(f"s={s} outside [0, {path.length}]")
    s = min(max(s, 0.0), path.length)
    i = min(int(s / path.ds), len(path) - 2)
    delta = s - i * path.ds
    j = jerk_between(path.ddl[i], path.ddl[i + 1], path.ds)
    l = (
        path.l[i]
        + path.dl[i] * delta
        + 0.5 * path.ddl[i] * delta * delta
        + j * delta * delta * delta / 6.0
    )
    dl = path.dl[i] + path.ddl[i] * delta + 0.5 * j * delta * delta
    ddl = path.ddl[i] + j * delta
    return float(l), float(dl), float(ddl)


def curvature_constraint_row(kappa_r: float, vehicle: VehicleParams) -> tuple[float, float]:
    """Linear kinematic-feasibility row a * l <= u with
    a = tan(a_max) * kr and u = tan(a_max) - |kr| * L."""
    tan_a = math.tan(vehicle.max_steer_alpha)
    return tan_a * kappa_r, tan_a - abs(kappa_r) * vehicle.wheelbase_L


def _check_curvature_row_feasible(a, u, l_lo, l_hi, station):
    best = a * l_lo if a > 0 else a * l_hi
    if best > u + 1e-12:
        raise InfeasibleGuideLine(
            station,
            f"station {station}: guide curvature exceeds vehicle limit for every "
            f"l in [{l_lo:.2f}, {l_hi:.2f}]",
        )


def build_path_qp(
    bounds: PathBoundary,
    init: FrenetState,
    vehicle: VehicleParams,
    line: GuideLine,
    cfg: PjConfig,
) -> qp.QpProblem:
    """Assemble the path QP.

    Rows, in order: 3 continuity rows per junction (the second-order row is
    identically zero once the jerk is the finite difference of l''; it is
    kept so the row layout matches the three printed equalities), n lateral
    boxes, 2n derivative boxes, n curvature rows, 3 initial-state pins.
    """
    if abs(bounds.ds - cfg.ds) > 1e-9:
        raise StationMismatch(f"bounds ds {bounds.ds} != cfg ds {cfg.ds}")
    n = len(bounds)
    if n < 2:
        raise StationMismatch("need at least 2 stations")
    if not (bounds.l_min[0] - 1e-9 <= init.l <= bounds.l_max[0] + 1e-9):
        raise StationMismatch(
            f"initial offset {init.l:.3f} outside first boundary interval"
        )
    ds = cfg.ds
    nv = 3 * n
    idx_l = lambda i: 3 * i
    idx_dl = lambda i: 3 * i + 1
    idx_ddl = lambda i: 3 * i + 2

    # Objective 1/2 x'Px + q'x; each weighted square contributes 2w to P.
    diag = np.zeros(nv)
    diag[0::3] += 2.0 * (cfg.w_l + cfg.w_obs)
    diag[1::3] += 2.0 * cfg.w_dl
    diag[2::3] += 2.0 * cfg.w_ddl
    rows, cols, vals = [], [], []
    wj = cfg.w_dddl / (ds * ds)
    for i in range(n - 1):
        diag[idx_ddl(i)] += 2.0 * wj
        diag[idx_ddl(i + 1)] += 2.0 * wj
        rows += [idx_ddl(i), idx_ddl(i + 1)]
        cols += [idx_ddl(i + 1), idx_ddl(i)]
        vals += [-2.0 * wj, -2.0 * wj]
    P = sp.coo_matrix(
        (np.concatenate([diag, vals]),
         (np.concatenate([np.arange(nv), rows]), np.concatenate([np.arange(nv), cols]))),
        shape=(nv, nv),
    ).tocsc()

    q = np.zeros(nv)
    if cfg.w_obs > 0:
        centers = 0.5 * (bounds.l_min + bounds.l_max)
        q[0::3] = -2.0 * cfg.w_obs * centers

    a_rows, a_cols, a_vals = [], [], []
    lo, up = [], []
    r = 0

    def add(entries, lo_v, up_v):
        nonlocal r
        for c, v in entries:
            a_rows.append(r)
            a_cols.append(c)
            a_vals.append(v)
        lo.append(lo_v)
        up.append(up_v)
        r += 1

    for i in range(n - 1):
        # Second-order row: identically satisfied by the jerk definition.
        add([], 0.0, 0.0)
        add(
            [
                (idx_dl(i + 1), 1.0),
                (idx_dl(i), -1.0),
                (idx_ddl(i), -0.5 * ds),
                (idx_ddl(i + 1), -0.5 * ds),
            ],
            0.0,
            0.0,
        )
        add(
            [
                (idx_l(i + 1), 1.0),
                (idx_l(i), -1.0),
                (idx_dl(i), -ds),
                (idx_ddl(i), -ds * ds / 3.0),
                (idx_ddl(i + 1), -ds * ds / 6.0),
            ],
            0.0,
            0.0,
        )
    for i in range(n):
        add([(idx_l(i), 1.0)], float(bounds.l_min[i]), float(bounds.l_max[i]))
    for i in range(n):
        add([(idx_dl(i), 1.0)], -cfg.dl_bound, cfg.dl_bound)
    for i in range(n):
        add([(idx_ddl(i), 1.0)], -cfg.ddl_bound, cfg.ddl_bound)
    stations = bounds.stations()
    for i in range(n):
        kr = line.point_at(float(min(stations[i], line.length))).kappa
        a, u = curvature_constraint_row(kr, vehicle)
        _check_curvature_row_feasible(a, u, bounds.l_min[i], bounds.l_max[i], i)
        add([(idx_l(i), a)], -np.inf, float(u))
    add([(idx_l(0), 1.0)], init.l, init.l)
    add([(idx_dl(0), 1.0)], init.dl, init.dl)
    add([(idx_ddl(0), 1.0)], init.ddl, init.ddl)

    A = sp.coo_matrix((a_vals, (a_rows, a_cols)), shape=(r, nv)).tocsc()
    return qp.QpProblem(P, q, A, np.asarray(lo), np.asarray(up))


def optimize_path(
    bounds: PathBoundary,
    init: FrenetState,
    vehicle: VehicleParams,
    line: GuideLine,
    cfg: PjConfig,
    settings: qp.QpSettings | None = None,
) -> tuple[PiecewiseJerkPath, qp.QpSolution]:
    """Build and solve the path QP; returns the path and solver diagnostics."""
    problem = build_path_qp(bounds, init, vehicle, line, cfg)
    if settings is None:
        settings = qp.QpSettings(eps_primal=1e-7, eps_dual=1e-7)
    sol = qp.solve(problem, settings)
    if sol.status is qp.SolveStatus.INFEASIBLE:
        raise PathInfeasible(
            f"path QP infeasible (residuals {sol.primal_residual:.2e}, "
            f"{sol.dual_residual:.2e})"
        )
    if not sol.solved:
        raise PathInfeasible(f"path QP did not converge: {sol.status.value}")
    x = sol.x
    path = PiecewiseJerkPath(ds=cfg.ds, l=x[0::3], dl=x[1::3], ddl=x[2::3])
    return path, sol


def to_cartesian(
    path: PiecewiseJerkPath,
    line: GuideLine,
    sample_ds: float,
    s0: float = 0.0,
) -> list[CartesianPose]:
    """Sample the path and convert each sample to a map-frame pose; kappa
    uses the exact conversion with the sample's actual dtheta, l', l''."""
    if s0 + path.length > line.length + 1e-6:
        raise OutOfRange("path extends beyond the guide line")
    poses = []
    for s in sample_stations(path, sample_ds):
        l, dl, ddl = evaluate(path, s)
        r = line.point_at(min(s0 + s, line.length))
        one_minus_kl = 1.0 - r.kappa * l
        dtheta = math.atan2(dl, one_minus_kl)
        kappa = curvature_in_cartesian(l, dl, ddl, r, dtheta)
        poses.append(
            CartesianPose(
                x=r.x - l * math.sin(r.theta),
                y=r.y + l * math.cos(r.theta),
                theta=wrap_angle(r.theta + dtheta),
                kappa=kappa,
            )
        )
    return poses


def sample_stations(path: PiecewiseJerkPath, sample_ds: float) -> np.ndarray:
    """Uniform sample grid over the path, always including the endpoint."""
    if sample_ds <= 0:
        raise ValueError("sample_ds must be > 0")
    s = np.arange(0.0, path.length, sample_ds)
    if path.length - (s[-1] if s.size else 0.0) > 1e-9:
        s = np.append(s, path.length)
    return s
