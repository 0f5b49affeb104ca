"""Convex QP representation and an operator-splitting (ADMM) solver.

Problems are in the canonical form

    minimize    1/2 x' P x + q' x
    subject to  lower <= A x <= upper

with P symmetric PSD. Both planner stages (guide-line smoothing and
piecewise-jerk path optimization) compile to this form with banded P and A,
which the sparse LU factorization of the ADMM KKT system exploits.

Optimality is certified by residuals, never by iteration count alone:
`kkt_residuals` shares no state with the solve loop.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch

INF = float("inf")

# ADMM constants (OSQP defaults).
_SIGMA = 1e-6
_ALPHA = 1.6
_RHO_EQ_SCALE = 1e3
_CHECK_EVERY = 10
_RHO_ADAPT_EVERY = 50
_EPS_PINF = 1e-7


class SolveStatus(Enum):
    SOLVED = "solved"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpSettings:
    eps_primal: float = 1e-6
    eps_dual: float = 1e-6
    max_iterations: int = 20000
    warm_start_x: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.eps_primal <= 0.0 or self.eps_dual <= 0.0:
            raise ValueError("tolerances must be > 0")


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    y: np.ndarray
    status: SolveStatus
    iterations: int
    primal_residual: float
    dual_residual: float

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED


class QpProblem:
    """Immutable QP data. Matrices are stored CSC; P must be symmetric."""

    def __init__(self, hessian_P, linear_q, constraint_A=None, lower=None, upper=None):
        P = sp.csc_matrix(hessian_P)
        q = np.asarray(linear_q, dtype=float).ravel()
        n = q.size
        if P.shape != (n, n):
            raise DimensionMismatch(f"P shape {P.shape} vs q size {n}")
        if constraint_A is None:
            A = sp.csc_matrix((0, n))
        else:
            A = sp.csc_matrix(constraint_A)
        m = A.shape[0]
        if A.shape[1] != n:
            raise DimensionMismatch(f"A shape {A.shape} vs n={n}")
        lo = np.full(m, -INF) if lower is None else np.asarray(lower, dtype=float).ravel()
        up = np.full(m, INF) if upper is None else np.asarray(upper, dtype=float).ravel()
        if lo.size != m or up.size != m:
            raise DimensionMismatch("bound vectors must have one entry per row of A")
        if np.any(lo > up):
            raise ValueError("lower > upper for some constraint row")
        for name, arr in (("P", P.data), ("q", q), ("A", A.data)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("bounds contain NaN")
        scale = max(1.0, float(abs(P).max()) if P.nnz else 1.0)
        asym = abs(P - P.T)
        if asym.nnz and asym.max() > 1e-12 * scale:
            raise ValueError("P is not symmetric within 1e-12")
        self.P = P
        self.q = q
        self.A = A
        self.lower = lo
        self.upper = up

    @property
    def dim_n(self) -> int:
        return self.q.size

    @property
    def num_constraints(self) -> int:
        return self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ (self.P @ x) + self.q @ x)


def kkt_residuals(p: QpProblem, x, y) -> tuple[float, float]:
    """Independent optimality check:
    primal = ||A x - clamp(A x, lower, upper)||_inf,
    dual   = ||P x + q + A' y||_inf.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != p.dim_n or y.size != p.num_constraints:
        raise DimensionMismatch(
            f"x size {x.size} (want {p.dim_n}), y size {y.size} (want {p.num_constraints})"
        )
    ax = p.A @ x
    primal = _norm_inf(ax - np.clip(ax, p.lower, p.upper))
    dual = _norm_inf(p.P @ x + p.q + p.A.T @ y)
    return primal, dual


def _norm_inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


_dump_counter = itertools.count()


def _maybe_dump(p: QpProblem) -> None:
    target = os.environ.get("PLANNER_DUMP_QP")
    if not target:
        return
    os.makedirs(target, exist_ok=True)
    idx = next(_dump_counter)
    path = os.path.join(target, f"qp_{os.getpid()}_{idx:04d}.txt")
    with open(path, "w") as fh:
        fh.write(f"n {p.dim_n}\nm {p.num_constraints}\n")
        coo = p.P.tocoo()
        fh.write(f"P {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
        fh.write("q\n" + " ".join(f"{v:.17g}" for v in p.q) + "\n")
        coo = p.A.tocoo()
        fh.write(f"A {coo.nnz}\n")
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
        fh.write("lower\n" + " ".join(f"{v:.17g}" for v in p.lower) + "\n")
        fh.write("upper\n" + " ".join(f"{v:.17g}" for v in p.upper) + "\n")


def _build_rho(p: QpProblem, rho_bar: float) -> np.ndarray:
    rho = np.full(p.num_constraints, rho_bar)
    eq = np.isfinite(p.lower) & np.isfinite(p.upper) & (p.upper - p.lower < 1e-12)
    rho[eq] = rho_bar * _RHO_EQ_SCALE
    loose = ~np.isfinite(p.lower) & ~np.isfinite(p.upper)
    rho[loose] = rho_bar * 1e-6
    return rho


def _factor_kkt(p: QpProblem, rho: np.ndarray):
    n = p.dim_n
    reg = p.P + _SIGMA * sp.eye(n, format="csc")
    if p.num_constraints == 0:
        return spla.splu(reg.tocsc())
    kkt = sp.bmat(
        [[reg, p.A.T], [p.A, -sp.diags(1.0 / rho)]], format="csc"
    )
    return spla.splu(kkt)


def _polish(p: QpProblem, x, y, z):
    """Solve the equality-constrained KKT system on the detected active set
    and accept the result only if it improves both residuals."""
    low_act = (y < -1e-12) | (np.isfinite(p.lower) & (z <= p.lower + 1e-9))
    up_act = (y > 1e-12) | (np.isfinite(p.upper) & (z >= p.upper - 1e-9))
    eq = np.isfinite(p.lower) & np.isfinite(p.upper) & (p.upper - p.lower < 1e-12)
    active = low_act | up_act | eq
    rows = np.flatnonzero(active)
    b = np.where(up_act[rows] & ~low_act[rows], p.upper[rows], p.lower[rows])
    b = np.where(eq[rows], p.lower[rows], b)
    A_act = p.A[rows]
    k = rows.size
    n = p.dim_n
    delta = 1e-9
    if k:
        kkt = sp.bmat(
            [[p.P + delta * sp.eye(n), A_act.T], [A_act, -delta * sp.eye(k)]],
            format="csc",
        )
        full = sp.bmat([[p.P, A_act.T], [A_act, sp.csc_matrix((k, k))]], format="csc")
        rhs = np.concatenate([-p.q, b])
    else:
        kkt = (p.P + delta * sp.eye(n)).tocsc()
        full = p.P
        rhs = -p.q
    try:
        lu = spla.splu(kkt)
    except RuntimeError:
        return None
    sol = lu.solve(rhs)
    # One step of iterative refinement against the unregularized system.
    resid = rhs - full @ sol
    sol = sol + lu.solve(resid)
    x_new = sol[:n]
    y_new = np.zeros(p.num_constraints)
    if k:
        y_new[rows] = sol[n:]
    return x_new, y_new


def solve(p: QpProblem, settings: QpSettings = QpSettings()) -> QpSolution:
    """ADMM solve with vectorized step size, adaptive rho and a final
    active-set polish. Infeasibility is detected from the primal
    infeasibility certificate built on the dual increment."""
    _maybe_dump(p)
    n, m = p.dim_n, p.num_constraints

    if settings.warm_start_x is not None:
        x = np.asarray(settings.warm_start_x, dtype=float).ravel().copy()
        if x.size != n:
            raise DimensionMismatch("warm_start_x has wrong size")
    else:
        x = np.zeros(n)

    if m == 0:
        lu = _factor_kkt(p, np.empty(0))
        y = np.empty(0)
        for it in range(1, settings.max_iterations + 1):
            x = lu.solve(_SIGMA * x - p.q)
            prim, dual = kkt_residuals(p, x, y)
            if dual <= settings.eps_dual:
                return QpSolution(x, y, SolveStatus.SOLVED, it, prim, dual)
        return QpSolution(x, y, SolveStatus.MAX_ITERATIONS, settings.max_iterations, prim, dual)

    rho_bar = 0.1
    rho = _build_rho(p, rho_bar)
    lu = _factor_kkt(p, rho)

    z = np.clip(p.A @ x, p.lower, p.upper)
    y = np.zeros(m)

    prim, dual = _residuals(p, x, z, y)
    if prim <= settings.eps_primal and dual <= settings.eps_dual:
        return QpSolution(x, y, SolveStatus.SOLVED, 0, prim, dual)

    status = SolveStatus.MAX_ITERATIONS
    iterations = settings.max_iterations
    lo_fin = np.isfinite(p.lower)
    up_fin = np.isfinite(p.upper)

    for it in range(1, settings.max_iterations + 1):
        rhs = np.concatenate([_SIGMA * x - p.q, z - y / rho])
        sol = lu.solve(rhs)
        x_t = sol[:n]
        nu = sol[n:]
        z_t = z + (nu - y) / rho
        x_new = _ALPHA * x_t + (1.0 - _ALPHA) * x
        z_relax = _ALPHA * z_t + (1.0 - _ALPHA) * z + y / rho
        z_new = np.clip(z_relax, p.lower, p.upper)
        # y + rho*(alpha z~ + (1-alpha) z - z_new); the +y is already inside z_relax.
        y_new = rho * (z_relax - z_new)
        dy = y_new - y
        x, z, y = x_new, z_new, y_new

        if it % _CHECK_EVERY == 0 or it == settings.max_iterations:
            prim, dual = _residuals(p, x, z, y)
            if prim <= settings.eps_primal and dual <= settings.eps_dual:
                status = SolveStatus.SOLVED
                iterations = it
                break
            if _primal_infeasible(p, dy, lo_fin, up_fin):
                return QpSolution(x, y, SolveStatus.INFEASIBLE, it, prim, dual)
            if it % _RHO_ADAPT_EVERY == 0:
                new_bar = _adapt_rho(p, x, z, y, prim, dual, rho_bar)
                if new_bar / rho_bar > 5.0 or rho_bar / new_bar > 5.0:
                    rho_bar = new_bar
                    rho = _build_rho(p, rho_bar)
                    lu = _factor_kkt(p, rho)

    polished = _polish(p, x, y, z)
    if polished is not None:
        xp, yp = polished
        pp, dp = kkt_residuals(p, xp, yp)
        if np.isfinite(pp) and np.isfinite(dp) and max(pp, dp) <= max(prim, dual):
            x, y = xp, yp
            prim, dual = pp, dp
            if prim <= settings.eps_primal and dual <= settings.eps_dual:
                status = SolveStatus.SOLVED
    return QpSolution(x, y, status, iterations, prim, dual)


def _residuals(p: QpProblem, x, z, y) -> tuple[float, float]:
    prim = _norm_inf(p.A @ x - z)
    dual = _norm_inf(p.P @ x + p.q + p.A.T @ y)
    return prim, dual


def _adapt_rho(p, x, z, y, prim, dual, rho_bar) -> float:
    ax = _norm_inf(p.A @ x)
    prim_rel = prim / max(ax, _norm_inf(z), 1e-10)
    dual_rel = dual / max(
        _norm_inf(p.P @ x), _norm_inf(p.A.T @ y), _norm_inf(p.q), 1e-10
    )
    if dual_rel <= 0.0 or prim_rel <= 0.0:
        return rho_bar
    return float(np.clip(rho_bar * math.sqrt(prim_rel / dual_rel), 1e-6, 1e6))


def _primal_infeasible(p, dy, lo_fin, up_fin) -> bool:
    ndy = _norm_inf(dy)
    if ndy < 1e-14:
        return False
    v = dy / ndy
    if _norm_inf(p.A.T @ v) > _EPS_PINF:
        return False
    # Certificate must not push on infinite bounds.
    if np.any((v > _EPS_PINF) & ~up_fin) or np.any((v < -_EPS_PINF) & ~lo_fin):
        return False
    support = float(
        np.sum(p.upper[up_fin] * np.maximum(v[up_fin], 0.0))
        + np.sum(p.lower[lo_fin] * np.minimum(v[lo_fin], 0.0))
    )
    return support < -_EPS_PINF
