import math

import numpy as np
import pytest

from frenetplan import boundary
from frenetplan.boundary import (
    BoundaryConfig,
    Corridor,
    Lane,
    ObstacleSL,
    PathBoundary,
    RoadModel,
    decide_lane_usage,
    generate_boundary,
    project_obstacle,
)
from frenetplan.errors import BlockedCorridor, NoUsableLane, OutOfScope
from frenetplan.geometry import FrenetState, GuideLine, VehicleParams

VEHICLE = VehicleParams(wheelbase_L=2.8, max_steer_alpha=0.6, width=1.8,
                        rear_axle_to_front=3.6, rear_axle_to_back=1.0)


def straight_line(length=120.0, interval=0.5):
    n = int(length / interval) + 1
    s = np.arange(n) * interval
    z = np.zeros(n)
    return GuideLine(interval, s, s.copy(), z, z.copy(), z.copy(), z.copy())


def single_lane_road(half_width=1.75):
    return RoadModel(
        lanes=(Lane("ego", "forward", half_width, -half_width, "ego"),),
        ego_lane_index=0,
    )


def two_lane_road():
    return RoadModel(
        lanes=(
            Lane("left", "forward", 5.25, 1.75, "adjacent"),
            Lane("ego", "forward", 1.75, -1.75, "ego"),
        ),
        ego_lane_index=1,
    )


def flat_corridor(lo, hi, length=100.0, ds=0.5, s0=0.0):
    n = int(length / ds) + 1
    return Corridor(s0=s0, ds=ds, lower=np.full(n, lo), upper=np.full(n, hi))


class TestProjectObstacle:
    def test_unit_square(self):
        line = straight_line()
        half = 0.5
        poly = [(20 - half, 1 - half), (20 + half, 1 - half),
                (20 + half, 1 + half), (20 - half, 1 + half)]
        box = project_obstacle(line, poly)
        assert (box.s_start, box.s_end) == pytest.approx((19.5, 20.5))
        assert (box.l_min, box.l_max) == pytest.approx((0.5, 1.5))

    def test_behind_line_raises(self):
        line = straight_line()
        poly = [(-5.0, 0.0), (-4.0, 0.0), (-4.0, 1.0), (-5.0, 1.0)]
        with pytest.raises(OutOfScope):
            project_obstacle(line, poly)

    def test_rotated_square(self):
        line = straight_line()
        h = math.sqrt(2.0) / 2.0
        poly = [(20 - h, 1.0), (20.0, 1 - h), (20 + h, 1.0), (20.0, 1 + h)]
        box = project_obstacle(line, poly)
        assert (box.s_start, box.s_end) == pytest.approx((20 - h, 20 + h))
        assert (box.l_min, box.l_max) == pytest.approx((1 - h, 1 + h))


class TestDecideLaneUsage:
    def test_no_obstacles_is_ego_lane(self):
        corr = decide_lane_usage(
            two_lane_road(), FrenetState(s=0.0, l=0.0), [], VEHICLE,
            BoundaryConfig(scope_s=50.0),
        )
        np.testing.assert_allclose(corr.lower, -1.75)
        np.testing.assert_allclose(corr.upper, 1.75)

    def test_borrow_range_covers_obstacle_plus_margin(self):
        ob = ObstacleSL("blk", 20.0, 40.0, -1.75, 0.5)
        corr = decide_lane_usage(
            two_lane_road(), FrenetState(s=0.0, l=0.0), [ob], VEHICLE,
            BoundaryConfig(scope_s=80.0),
        )
        s = corr.stations()
        widened = corr.upper > 1.75 + 1e-9
        # The widened range contains [20, 40] and transitions within a
        # vehicle length on each side.
        inside = (s >= 20.0) & (s <= 40.0)
        assert np.all(widened[inside])
        assert np.all(corr.upper[widened] == pytest.approx(5.25))
        margin = VEHICLE.length
        assert not np.any(widened[s < 20.0 - margin - 1e-9])
        assert not np.any(widened[s > 40.0 + margin + 1e-9])
        np.testing.assert_allclose(corr.lower, -1.75)

    def test_small_intrusion_does_not_borrow(self):
        # Intrusion below lane_width - vehicle - 2*buffer = 1.1 m.
        ob = ObstacleSL("edge", 20.0, 30.0, -1.75, -0.75)
        corr = decide_lane_usage(
            two_lane_road(), FrenetState(s=0.0, l=0.0), [ob], VEHICLE,
            BoundaryConfig(scope_s=60.0),
        )
        np.testing.assert_allclose(corr.upper, 1.75)

    def test_blocked_single_lane_no_borrow(self):
        ob = ObstacleSL("wall", 20.0, 25.0, -1.75, 1.75)
        with pytest.raises(NoUsableLane):
            decide_lane_usage(
                single_lane_road(), FrenetState(s=0.0, l=0.0), [ob], VEHICLE,
                BoundaryConfig(scope_s=60.0),
            )

    def test_reverse_lane_only_without_adjacent(self):
        road = RoadModel(
            lanes=(
                Lane("oncoming", "reverse", 5.25, 1.75, "reverse"),
                Lane("ego", "forward", 1.75, -1.75, "ego"),
            ),
            ego_lane_index=1,
        )
        ob = ObstacleSL("blk", 20.0, 30.0, -1.75, 1.0)
        corr = decide_lane_usage(
            road, FrenetState(s=0.0, l=0.0), [ob], VEHICLE,
            BoundaryConfig(scope_s=60.0),
        )
        s = corr.stations()
        inside = (s >= 20.0) & (s <= 30.0)
        assert np.all(corr.upper[inside] == pytest.approx(5.25))


class TestGenerateBoundary:
    def test_no_obstacles_pure_inset(self):
        corr = flat_corridor(-1.75, 1.75)
        b = generate_boundary(
            corr, [], FrenetState(s=0.0, l=0.0), VEHICLE, BoundaryConfig()
        )
        # inset = width/2 + buffer = 0.9 + 0.3
        np.testing.assert_allclose(b.l_min, -0.55)
        np.testing.assert_allclose(b.l_max, 0.55)

    def test_left_pass_hand_case(self):
        corr = flat_corridor(-1.75, 5.25)
        ob = ObstacleSL("mid", 20.0, 40.0, -1.0, 1.0)
        cfg = BoundaryConfig(lateral_buffer=0.2)
        b = generate_boundary(corr, [ob], FrenetState(s=0.0, l=0.0), VEHICLE, cfg)
        s = b.stations()
        inside = (s >= 20.0) & (s <= 40.0)
        np.testing.assert_allclose(b.l_min[inside], 2.1)
        np.testing.assert_allclose(b.l_max[inside], 4.15)
        assert all(src == "obstacle-left-pass" for src in np.asarray(b.sources)[inside])

    def test_fully_blocked_raises_blocked_corridor(self):
        corr = flat_corridor(-1.75, 1.75)
        ob = ObstacleSL("wall", 20.0, 25.0, -0.55, 0.55)
        with pytest.raises(BlockedCorridor) as err:
            generate_boundary(corr, [ob], FrenetState(s=0.0, l=0.0), VEHICLE,
                              BoundaryConfig())
        assert err.value.obstacle_id == "wall"
        assert 20.0 <= err.value.s <= 25.0

    def test_staggered_alternation_and_overlap(self):
        corr = flat_corridor(-1.75, 5.25)
        obs = [
            ObstacleSL("upper", 20.0, 30.0, 0.8, 5.25),
            ObstacleSL("lower", 40.0, 50.0, -1.75, 1.0),
        ]
        b = generate_boundary(corr, obs, FrenetState(s=0.0, l=0.0), VEHICLE,
                              BoundaryConfig())
        s = b.stations()
        srcs = np.asarray(b.sources)
        in_a = (s >= 20.0) & (s <= 30.0)
        in_b = (s >= 40.0) & (s <= 50.0)
        assert set(srcs[in_a]) == {"obstacle-right-pass"}
        assert set(srcs[in_b]) == {"obstacle-left-pass"}
        lo, hi = b.l_min, b.l_max
        assert np.all(np.minimum(hi[:-1], hi[1:]) >= np.maximum(lo[:-1], lo[1:]))

    def test_safety_invariant(self):
        corr = flat_corridor(-1.75, 5.25)
        obs = [
            ObstacleSL("a", 15.0, 22.0, 1.0, 5.25),
            ObstacleSL("b", 35.0, 45.0, -1.75, 0.2),
        ]
        b = generate_boundary(corr, obs, FrenetState(s=0.0, l=0.0), VEHICLE,
                              BoundaryConfig())
        half = VEHICLE.width / 2.0
        for k, s in enumerate(b.stations()):
            for ob in obs:
                if ob.active_at(float(s)):
                    assert b.l_max[k] + half <= ob.l_min + 1e-9 or \
                        b.l_min[k] - half >= ob.l_max - 1e-9

    def test_determinism(self):
        corr = flat_corridor(-1.75, 5.25)
        obs = [ObstacleSL("a", 10.0, 18.0, 1.0, 5.25),
               ObstacleSL("b", 30.0, 36.0, -1.75, 0.4)]
        args = (corr, obs, FrenetState(s=0.0, l=0.0), VEHICLE, BoundaryConfig())
        b1 = generate_boundary(*args)
        b2 = generate_boundary(*args)
        np.testing.assert_array_equal(b1.l_min, b2.l_min)
        np.testing.assert_array_equal(b1.l_max, b2.l_max)
        assert b1.sources == b2.sources

    def test_monotone_scope_prefix(self):
        ob = ObstacleSL("far", 70.0, 75.0, -1.75, 0.5)
        ego = FrenetState(s=0.0, l=0.0)
        short = generate_boundary(flat_corridor(-1.75, 5.25, length=50.0),
                                  [ob], ego, VEHICLE, BoundaryConfig(scope_s=50.0))
        full = generate_boundary(flat_corridor(-1.75, 5.25, length=100.0),
                                 [ob], ego, VEHICLE, BoundaryConfig(scope_s=100.0))
        n = len(short)
        np.testing.assert_array_equal(full.l_min[:n], short.l_min)
        np.testing.assert_array_equal(full.l_max[:n], short.l_max)

    def test_ego_init_widening(self):
        corr = flat_corridor(-1.75, 1.75)
        ego = FrenetState(s=0.0, l=1.2)  # outside the inset interval 0.55
        b = generate_boundary(corr, [], ego, VEHICLE, BoundaryConfig())
        assert b.l_min[0] <= 1.2 <= b.l_max[0]
        assert b.sources[0].endswith("+ego-init")
        # Far stations revert to the plain inset.
        assert b.l_max[-1] == pytest.approx(0.55)


class TestPathBoundary:
    def test_collapsed_interval_rejected(self):
        with pytest.raises(ValueError):
            PathBoundary(0.0, 0.5, np.array([0.0, 0.5]), np.array([1.0, 0.4]),
                         ("lane", "lane"))

    def test_non_overlapping_rejected(self):
        with pytest.raises(ValueError):
            PathBoundary(0.0, 0.5, np.array([0.0, 2.0]), np.array([1.0, 3.0]),
                         ("lane", "lane"))

    def test_csv(self, tmp_path):
        b = PathBoundary(0.0, 0.5, np.array([-0.5, -0.5]), np.array([0.5, 0.5]),
                         ("lane", "lane"))
        f = tmp_path / "b.csv"
        b.to_csv(f)
        lines = f.read_text().strip().splitlines()
        assert lines[0] == "s,l_min,l_max,source"
        assert lines[1] == "0,-0.5,0.5,lane"
        assert lines[2] == "0.5,-0.5,0.5,lane"
