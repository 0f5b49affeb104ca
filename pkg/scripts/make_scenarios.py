#!/usr/bin/env python3
"""Regenerate the scenario fixture corpus under scenarios/.

Deterministic: every coordinate is computed, rounded, and dumped with
sorted keys, so reruns are byte-identical.
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "scenarios"

LANE_EGO = {
    "id": "ego",
    "direction": "forward",
    "adjacency": "ego",
    "left_bound_l_m": 1.75,
    "right_bound_l_m": -1.75,
}
LANE_LEFT = {
    "id": "left",
    "direction": "forward",
    "adjacency": "adjacent",
    "left_bound_l_m": 5.25,
    "right_bound_l_m": 1.75,
}
LANE_REVERSE = {
    "id": "oncoming",
    "direction": "reverse",
    "adjacency": "reverse",
    "left_bound_l_m": 5.25,
    "right_bound_l_m": 1.75,
}


def rnd(v, nd=4):
    return round(float(v), nd)


def straight_line(length=165.0, step=5.0):
    n = int(length / step) + 1
    return [[rnd(i * step), 0.0] for i in range(n)]


def box(cx, cy, hx, hy):
    return [
        [rnd(cx - hx), rnd(cy - hy)],
        [rnd(cx + hx), rnd(cy - hy)],
        [rnd(cx + hx), rnd(cy + hy)],
        [rnd(cx - hx), rnd(cy + hy)],
    ]


def ego_at(x=0.5, y=0.0, theta=0.0, speed=5.0):
    return {"x_m": rnd(x), "y_m": rnd(y), "theta_rad": rnd(theta), "speed_mps": speed}


def s_curve_line():
    # 40 m straight, 60 m gentle S (R = 120), then straight again.
    pts = []
    x = y = th = 0.0
    step = 2.0
    for i in range(90):
        s = i * step
        if 40.0 <= s < 70.0:
            k = 1.0 / 120.0
        elif 70.0 <= s < 100.0:
            k = -1.0 / 120.0
        else:
            k = 0.0
        pts.append([rnd(x), rnd(y)])
        th += k * step
        x += step * math.cos(th)
        y += step * math.sin(th)
    return pts


def uturn_line(r=3.5, leg=40.0):
    # Left U-turn: +x leg, semicircle of radius r, -x leg.
    pts = []
    step = 1.0
    n_leg = int(leg / step)
    for i in range(n_leg + 1):
        pts.append([rnd(i * step), 0.0])
    n_arc = 36
    for i in range(1, n_arc + 1):
        ang = math.pi * i / n_arc
        pts.append([rnd(leg + r * math.sin(ang)), rnd(r * (1.0 - math.cos(ang)))])
    for i in range(1, n_leg + 1):
        pts.append([rnd(leg - i * step), rnd(2.0 * r)])
    return pts


def scenario(name, line, lanes, ego, obstacles, vehicle=None, overrides=None):
    doc = {
        "name": name,
        "guide_line_xy_m": line,
        "lanes": lanes,
        "ego": ego,
        "obstacles": obstacles,
    }
    if vehicle:
        doc["vehicle"] = vehicle
    if overrides:
        doc["overrides"] = overrides
    return doc


def main():
    OUT.mkdir(exist_ok=True)
    docs = []

    docs.append(scenario("straight_empty", straight_line(), [LANE_EGO], ego_at(), []))

    docs.append(
        scenario(
            "side_block_right",
            straight_line(),
            [LANE_LEFT, LANE_EGO],
            ego_at(),
            [{"id": "parked", "polygon_xy_m": box(25, -1.2, 2.0, 0.6), "speed_mps": 0.0}],
        )
    )

    docs.append(
        scenario(
            "side_block_left",
            straight_line(),
            [LANE_LEFT, LANE_EGO],
            ego_at(),
            [{"id": "parked", "polygon_xy_m": box(25, 1.2, 2.0, 0.6), "speed_mps": 0.0}],
        )
    )

    docs.append(
        scenario(
            "narrow_passage",
            straight_line(),
            [LANE_EGO],
            ego_at(),
            [
                {"id": "left_wall", "polygon_xy_m": box(30, 1.6, 3.0, 0.45), "speed_mps": 0.0},
                {"id": "right_wall", "polygon_xy_m": box(30, -1.6, 3.0, 0.45), "speed_mps": 0.0},
            ],
            overrides={"boundary": {"lateral_buffer": 0.15}},
        )
    )

    docs.append(
        scenario(
            "lane_borrow_left",
            straight_line(),
            [LANE_LEFT, LANE_EGO],
            ego_at(),
            [{"id": "stalled", "polygon_xy_m": box(40, -0.3, 3.0, 1.2), "speed_mps": 0.0}],
        )
    )

    docs.append(
        scenario(
            "lane_borrow_reverse",
            straight_line(),
            [LANE_REVERSE, LANE_EGO],
            ego_at(),
            [{"id": "stalled", "polygon_xy_m": box(40, -0.3, 3.0, 1.2), "speed_mps": 0.0}],
        )
    )

    docs.append(
        scenario(
            "staggered_two",
            straight_line(),
            [LANE_LEFT, LANE_EGO],
            ego_at(),
            [
                {"id": "upper", "polygon_xy_m": box(45, 2.3, 3.0, 1.5), "speed_mps": 0.0},
                {"id": "lower", "polygon_xy_m": box(65, -0.4, 3.0, 1.4), "speed_mps": 0.0},
            ],
        )
    )

    docs.append(
        scenario(
            "blocked_single_lane",
            straight_line(),
            [LANE_EGO],
            ego_at(),
            [{"id": "wall", "polygon_xy_m": box(25, 0.0, 1.5, 0.55), "speed_mps": 0.0}],
        )
    )

    docs.append(
        scenario(
            "cluttered",
            straight_line(),
            [LANE_LEFT, LANE_EGO],
            ego_at(),
            [
                {"id": "a", "polygon_xy_m": box(25, -1.1, 2.0, 0.6), "speed_mps": 0.0},
                {"id": "b", "polygon_xy_m": box(50, 1.0, 2.5, 0.7), "speed_mps": 0.0},
                {"id": "c", "polygon_xy_m": box(75, -0.9, 2.0, 0.8), "speed_mps": 0.0},
                {"id": "van", "polygon_xy_m": box(100, 0.0, 2.5, 1.0), "speed_mps": 9.0},
            ],
        )
    )

    docs.append(
        scenario(
            "s_curve_block",
            s_curve_line(),
            [LANE_LEFT, LANE_EGO],
            ego_at(x=1.0),
            [{"id": "parked", "polygon_xy_m": box(55, 1.0, 2.0, 0.9), "speed_mps": 0.0}],
        )
    )

    docs.append(
        scenario(
            "noisy_map_line",
            # Coarse zig-zag map polyline; the smoother has to clean it up.
            [[rnd(i * 3.0), rnd(0.08 * (-1) ** i)] for i in range(55)],
            [LANE_EGO],
            ego_at(),
            [],
        )
    )

    docs.append(
        scenario(
            "uturn",
            uturn_line(),
            [
                {
                    "id": "turnpocket",
                    "direction": "forward",
                    "adjacency": "ego",
                    "left_bound_l_m": 1.5,
                    "right_bound_l_m": -4.0,
                }
            ],
            ego_at(x=1.0, speed=3.0),
            [],
            vehicle={
                "wheelbase_m": 2.8,
                "max_steer_rad": 0.50607,  # tan() / 2.8 ~= 1 / 5.05 m turning radius
                "width_m": 1.8,
                "front_overhang_m": 3.6,
                "back_overhang_m": 1.0,
            },
            overrides={"smoother": {"deviation_bound_d": 0.05}},
        )
    )

    for doc in docs:
        path = OUT / f"{doc['name']}.json"
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        print(path)


if __name__ == "__main__":
    main()
