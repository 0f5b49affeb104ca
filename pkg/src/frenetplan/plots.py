"""Matplotlib figure rendering for plan results.

Figures are written as SVG with stable group ids (`gid`) on the curves so
downstream tooling (and the test suite) can locate the polylines inside
the SVG document.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "frenetplan"


def render_plan_svg(result, path) -> None:
    """Two-panel figure: map view (guide line, corridor band, path) on top,
    kappa(s) with the vehicle curvature limit below."""
    fig, (ax_map, ax_kappa) = plt.subplots(
        2, 1, figsize=(9, 7), height_ratios=[2, 1], constrained_layout=True
    )

    line = result.guide_line
    ax_map.plot(line.x, line.y, color="tab:orange", lw=1.2, label="guide line")
    ax_map.set_gid("guide-line")

    if result.boundary is not None:
        lo_xy, hi_xy = _boundary_edges(result.boundary, line)
        ax_map.plot(lo_xy[:, 0], lo_xy[:, 1], "g--", lw=0.8, gid="boundary-low")
        ax_map.plot(hi_xy[:, 0], hi_xy[:, 1], "g--", lw=0.8, gid="boundary-high")

    if result.cartesian:
        xs = [p.x for p in result.cartesian]
        ys = [p.y for p in result.cartesian]
        ax_map.plot(xs, ys, color="tab:blue", lw=1.8, gid="planned-path", label="path")
    ax_map.set_aspect("equal", adjustable="datalim")
    ax_map.set_xlabel("x [m]")
    ax_map.set_ylabel("y [m]")
    ax_map.legend(loc="best", fontsize=8)
    ax_map.set_title(result.scenario)

    if result.cartesian:
        s = np.asarray(result.cartesian_s, dtype=float)
        kappa = np.asarray([p.kappa for p in result.cartesian])
        ax_kappa.plot(s, kappa, color="tab:blue", lw=1.2, gid="path-kappa")
        kmax = result.diagnostics.get("kappa_max")
        if kmax is None:
            kmax = _infer_kappa_max(result)
        if kmax is not None:
            ax_kappa.axhline(kmax, color="red", lw=1.0, gid="kappa-max")
            ax_kappa.axhline(-kmax, color="red", lw=1.0, gid="kappa-min")
    ax_kappa.set_xlabel("s [m]")
    ax_kappa.set_ylabel("kappa [1/m]")

    fig.savefig(path, format="svg")
    plt.close(fig)


def _boundary_edges(boundary, line):
    lo_pts, hi_pts = [], []
    for s, lo, hi in zip(boundary.stations(), boundary.l_min, boundary.l_max):
        r = line.point_at(min(s, line.length))
        sin_t, cos_t = math.sin(r.theta), math.cos(r.theta)
        lo_pts.append((r.x - lo * sin_t, r.y + lo * cos_t))
        hi_pts.append((r.x - hi * sin_t, r.y + hi * cos_t))
    return np.asarray(lo_pts), np.asarray(hi_pts)


def _infer_kappa_max(result):
    veh = result.diagnostics.get("vehicle")
    if veh is not None:
        return veh.kappa_max
    return None
