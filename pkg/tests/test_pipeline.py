import json
from pathlib import Path

import numpy as np
import pytest

from frenetplan import cli, pipeline
from frenetplan.errors import ScenarioError, StageError
from frenetplan.geometry import cartesian_to_frenet, project_point

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name):
    return pipeline.load_scenario(SCENARIOS / f"{name}.json")


def minimal_doc(**overrides):
    doc = {
        "name": "mini",
        "guide_line_xy_m": [[i * 5.0, 0.0] for i in range(25)],
        "lanes": [
            {"id": "ego", "direction": "forward", "adjacency": "ego",
             "left_bound_l_m": 1.75, "right_bound_l_m": -1.75}
        ],
        "ego": {"x_m": 0.5, "y_m": 0.0, "theta_rad": 0.0, "speed_mps": 5.0},
        "obstacles": [],
    }
    doc.update(overrides)
    return doc


class TestScenarioLoading:
    def test_fixture_corpus_loads(self):
        files = sorted(SCENARIOS.glob("*.json"))
        assert len(files) >= 10
        for f in files:
            sc = pipeline.load_scenario(f)
            assert sc.name == f.stem

    def test_missing_name_rejected(self):
        doc = minimal_doc()
        del doc["name"]
        with pytest.raises(ScenarioError):
            pipeline.scenario_from_dict(doc)

    def test_two_ego_lanes_rejected(self):
        doc = minimal_doc()
        doc["lanes"] = doc["lanes"] * 2
        with pytest.raises(ScenarioError):
            pipeline.scenario_from_dict(doc)

    def test_nonconvex_obstacle_rejected(self):
        doc = minimal_doc(obstacles=[{
            "id": "bad",
            "polygon_xy_m": [[0, 0], [2, 0], [2, 2], [1, 0.5], [0, 2]],
        }])
        with pytest.raises(ScenarioError):
            pipeline.scenario_from_dict(doc)

    def test_overrides_applied(self):
        doc = minimal_doc(overrides={"path": {"w_dddl": 123.0},
                                     "boundary": {"lateral_buffer": 0.25}})
        sc = pipeline.scenario_from_dict(doc)
        assert sc.path_cfg.w_dddl == 123.0
        assert sc.boundary_cfg.lateral_buffer == 0.25

    def test_unknown_override_rejected(self):
        doc = minimal_doc(overrides={"path": {"nope": 1.0}})
        with pytest.raises(ScenarioError):
            pipeline.scenario_from_dict(doc)


class TestRunPipeline:
    def test_straight_empty_zero_offset(self):
        res = pipeline.run_pipeline(load("straight_empty"))
        assert np.max(np.abs(res.path.l)) <= 1e-6
        assert set(res.timings_ms) == {
            "smooth", "project", "decide", "bound", "optimize", "convert"
        }

    def test_dynamic_obstacle_dropped(self, caplog):
        import logging

        sc = load("cluttered")
        with caplog.at_level(logging.WARNING):
            res = pipeline.run_pipeline(sc)
        assert any("van" in r.message for r in caplog.records)
        # The 9 m/s van sits dead-center at x=100; a static read of it
        # would have forced an excursion there.
        s = res.boundary.stations()
        near = (s > 95.0) & (s < 105.0)
        idx = np.flatnonzero(near)[: len(res.path.l)]
        assert np.all(res.path.l[idx] <= 0.56)

    def test_stage_error_carries_partials(self):
        sc = load("blocked_single_lane")
        with pytest.raises(StageError) as err:
            pipeline.run_pipeline(sc)
        assert err.value.stage == "bound"
        assert err.value.partial.guide_line is not None
        assert err.value.partial.path is None

    def test_alternating_sides_cluttered(self):
        res = pipeline.run_pipeline(load("cluttered"))
        srcs = set(res.boundary.sources)
        assert "obstacle-left-pass" in srcs or "obstacle-right-pass" in srcs
        # Safety at every station against all static projected obstacles.
        assert np.all(res.path.l >= res.boundary.l_min[: len(res.path.l)] - 1e-6)
        assert np.all(res.path.l <= res.boundary.l_max[: len(res.path.l)] + 1e-6)

    def test_cached_guide_line(self, tmp_path):
        sc = load("side_block_right")
        res = pipeline.run_pipeline(sc)
        f = tmp_path / "line.csv"
        res.guide_line.to_csv(f)
        from frenetplan.geometry import GuideLine

        cached = GuideLine.from_csv(f)
        res2 = pipeline.run_pipeline(sc, cached_guide_line=cached)
        # CSV stores 9 significant digits; the reloaded line shifts the
        # station grid by round-off, so plans agree only to a few cm.
        assert len(res2.path) == len(res.path)
        np.testing.assert_allclose(res2.path.l, res.path.l, atol=0.05)
        assert "smooth" in res2.timings_ms

    def test_round_trip_reprojection(self):
        res = pipeline.run_pipeline(load("s_curve_block"))
        line = res.guide_line
        for s_emit, pose in list(zip(res.cartesian_s, res.cartesian))[::7]:
            r, _s = project_point(line, pose.x, pose.y)
            f = cartesian_to_frenet(pose, r)
            l_expect, _, _ = (
                res.path.l, None, None
            )
            # Compare against the Frenet offset evaluated at this station.
            from frenetplan import pjpath

            l_path, _, _ = pjpath.evaluate(res.path, float(s_emit - res.boundary.s0))
            assert abs(f.l - l_path) <= 1e-4


class TestEmit:
    def test_csv_only(self, tmp_path):
        res = pipeline.run_pipeline(load("straight_empty"))
        files = pipeline.emit(res, tmp_path, {"csv"})
        names = sorted(p.name for p in files)
        assert names == [
            "straight_empty.boundary.csv",
            "straight_empty.guide_line.csv",
            "straight_empty.path_cartesian.csv",
            "straight_empty.path_frenet.csv",
        ]

    def test_empty_format_set(self, tmp_path):
        res = pipeline.run_pipeline(load("straight_empty"))
        assert pipeline.emit(res, tmp_path, set()) == []

    def test_svg_and_summary(self, tmp_path):
        res = pipeline.run_pipeline(load("side_block_right"))
        files = pipeline.emit(res, tmp_path, {"svg", "json-summary"})
        names = sorted(p.name for p in files)
        assert names == [
            "side_block_right.plan.svg",
            "side_block_right.summary.json",
        ]
        summary = json.loads((tmp_path / "side_block_right.summary.json").read_text())
        assert summary["scenario"] == "side_block_right"
        assert summary["stations"] > 100

    def test_determinism_byte_identical(self, tmp_path):
        sc = load("staggered_two")
        a = tmp_path / "a"
        b = tmp_path / "b"
        pipeline.emit(pipeline.run_pipeline(sc), a, {"csv"})
        pipeline.emit(pipeline.run_pipeline(sc), b, {"csv"})
        for fa in sorted(a.iterdir()):
            fb = b / fa.name
            assert fa.read_bytes() == fb.read_bytes()


class TestBench:
    def test_single_repetition(self):
        report = pipeline.bench([load("straight_empty")], 1)
        assert report["repetitions"] == 1
        assert "optimize" in report["stages"]
        assert report["stages"]["optimize"]["samples"] == 1
        assert report["stages"]["optimize"]["mean_ms"] > 0.0

    def test_rejects_zero_reps(self):
        with pytest.raises(ValueError):
            pipeline.bench([], 0)


class TestCli:
    def test_plan_success(self, tmp_path, capsys):
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "side_block_right.json"),
            "--out", str(tmp_path), "--format", "csv,svg,json-summary",
        ])
        assert rc == cli.EXIT_OK
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 6
        assert (tmp_path / "side_block_right.plan.svg").exists()

    def test_missing_scenario_is_io_error(self, tmp_path):
        rc = cli.main([
            "plan", "--scenario", str(tmp_path / "nope.json"),
            "--out", str(tmp_path),
        ])
        assert rc == cli.EXIT_IO

    def test_bad_format_is_io_error(self, tmp_path):
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "straight_empty.json"),
            "--out", str(tmp_path), "--format", "csv,bogus",
        ])
        assert rc == cli.EXIT_IO

    def test_blocked_scenario_exits_2(self, tmp_path):
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "blocked_single_lane.json"),
            "--out", str(tmp_path),
        ])
        assert rc == cli.EXIT_INFEASIBLE
        assert not list(tmp_path.glob("*.path_frenet.csv"))

    def test_weights_override(self, tmp_path):
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "straight_empty.json"),
            "--out", str(tmp_path), "--weights", "w_dddl=1e4,lateral_buffer=0.2",
        ])
        assert rc == cli.EXIT_OK

    def test_unknown_weight_is_io_error(self, tmp_path):
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "straight_empty.json"),
            "--out", str(tmp_path), "--weights", "bogus=1",
        ])
        assert rc == cli.EXIT_IO

    def test_cached_guide_line_flag(self, tmp_path):
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "straight_empty.json"),
            "--out", str(tmp_path),
        ])
        assert rc == cli.EXIT_OK
        cached = tmp_path / "straight_empty.guide_line.csv"
        out2 = tmp_path / "second"
        rc = cli.main([
            "plan", "--scenario", str(SCENARIOS / "straight_empty.json"),
            "--out", str(out2), "--cached-guide-line", str(cached),
        ])
        assert rc == cli.EXIT_OK
        assert (out2 / "straight_empty.guide_line.csv").read_bytes() == cached.read_bytes()

    def test_bench_command(self, tmp_path, capsys):
        rc = cli.main([
            "bench", "--scenarios", str(SCENARIOS), "--reps", "1",
        ])
        # blocked_single_lane makes the bench directory infeasible; point at
        # a directory with only feasible scenarios instead.
        assert rc == cli.EXIT_INFEASIBLE
        import shutil

        good = tmp_path / "good"
        good.mkdir()
        shutil.copy(SCENARIOS / "straight_empty.json", good / "straight_empty.json")
        rc = cli.main(["bench", "--scenarios", str(good), "--reps", "2"])
        assert rc == cli.EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["repetitions"] == 2
        assert report["stages"]["smooth"]["samples"] == 2


class TestSvgContent:
    def test_kappa_polyline_under_limit_uturn(self, tmp_path):
        import xml.etree.ElementTree as ET

        res = pipeline.run_pipeline(load("uturn"))
        pipeline.emit(res, tmp_path, {"svg"})
        tree = ET.parse(tmp_path / "uturn.plan.svg")
        ns = {"svg": "http://www.w3.org/2000/svg"}
        root = tree.getroot()

        def polyline_ys(gid):
            g = root.find(f".//svg:g[@id='{gid}']", ns)
            assert g is not None, f"missing SVG group {gid}"
            path = g.find(".//svg:path", ns)
            d = path.get("d")
            # matplotlib writes "M x y L x y ...": strip the command
            # letters and pair up the remaining floats.
            nums = [
                float(tok)
                for tok in d.replace("M", " ").replace("L", " ").replace("z", " ").split()
            ]
            assert len(nums) % 2 == 0
            return list(zip(nums[0::2], nums[1::2]))

        kappa = polyline_ys("path-kappa")
        upper = polyline_ys("kappa-max")
        lower = polyline_ys("kappa-min")
        assert kappa and upper and lower
        # SVG y-axis points down: the limit lines must bracket the curve.
        # The plotted curvature is the exact Cartesian conversion, which may
        # exceed the limit by up to 0.01; allow the pixel equivalent.
        y_upper = upper[0][1]
        y_lower = lower[0][1]
        kappa_max = res.diagnostics["kappa_max"]
        tol = 0.01 * abs(y_lower - y_upper) / (2.0 * kappa_max)
        ys = [y for _x, y in kappa]
        assert all(min(y_upper, y_lower) - tol <= y <= max(y_upper, y_lower) + tol
                   for y in ys)
