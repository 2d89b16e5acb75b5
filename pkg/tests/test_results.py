"""Tests for result files: JSON, timings, CSV profile and SVG drawing."""

import json
import math

import numpy as np
import pytest
from lxml import etree

from gcs_planner.bezier import sample_trajectory
from gcs_planner.errors import ResultWriteError, ScenarioError
from gcs_planner.results import SVG_NS, read_result, render_svg, snapshot_times, write_result
from gcs_planner.verify import audit, body_headings

LAYERS = ["lanes", "regions", "goal", "static-obstacles", "dynamic-obstacles", "ego", "path"]


@pytest.fixture(scope="module")
def static_report(static_fixture, static_plan):
    return audit(static_plan, static_fixture)


def test_write_all_files(tmp_path, static_fixture, static_plan, static_report):
    written = write_result(static_plan, static_report, tmp_path / "run", static_fixture)
    assert set(written) == {"result", "timings", "profile", "svg"}
    assert all(p.exists() for p in written.values())

    doc = json.loads(written["result"].read_text())
    assert doc["scenario"] == "static_avoidance"
    assert doc["path"] == list(static_plan.path)
    assert [s["vertex"] for s in doc["segments"]] == list(static_plan.path)
    assert doc["audit"]["passed"] is True
    assert doc["strategy"] == "enumerate"

    timings = json.loads(written["timings"].read_text())
    assert "total" in timings


def test_result_json_is_deterministic(tmp_path, static_fixture, static_plan, static_report):
    a = write_result(static_plan, static_report, tmp_path / "a", static_fixture)
    b = write_result(static_plan, static_report, tmp_path / "b", static_fixture)
    assert a["result"].read_bytes() == b["result"].read_bytes()


def test_minimal_write(tmp_path, static_plan):
    written = write_result(static_plan, None, tmp_path)
    assert set(written) == {"result", "timings"}
    assert json.loads(written["result"].read_text())["audit"] is None


def test_read_back_and_reaudit(tmp_path, static_fixture, static_plan, static_report):
    written = write_result(static_plan, static_report, tmp_path, static_fixture)
    stored = read_result(written["result"])
    assert stored.scenario == "static_avoidance"
    assert stored.path == static_plan.path
    assert stored.objective == pytest.approx(static_plan.objective)
    for a, b in zip(stored.segments, static_plan.segments):
        np.testing.assert_allclose(a.spatial.control_points, b.spatial.control_points)
        np.testing.assert_allclose(a.temporal.taus, b.temporal.taus)
    assert audit(stored, static_fixture).passed


def test_read_result_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_result(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("[1, 2")
    with pytest.raises(ScenarioError) as excinfo:
        read_result(broken)
    assert excinfo.value.check == "result"
    partial = tmp_path / "partial.json"
    partial.write_text(json.dumps({"scenario": "x", "segments": [{"vertex": "A"}]}))
    with pytest.raises(ScenarioError):
        read_result(partial)


def test_write_into_a_file_fails(tmp_path, static_plan):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(ResultWriteError):
        write_result(static_plan, None, blocker)


def test_svg_layers(static_fixture, static_plan):
    root = render_svg(static_fixture, static_plan.segments, static_plan.path).getroot()
    groups = root.findall(f"{{{SVG_NS}}}g")
    assert [g.get("id") for g in groups] == LAYERS
    obstacles = root.find(f"{{{SVG_NS}}}g[@id='static-obstacles']")
    assert len(obstacles) == len(static_fixture.static_obstacles)
    line = root.find(f".//{{{SVG_NS}}}polyline")
    assert line.find(f"{{{SVG_NS}}}title").text == ">".join(static_plan.path)


def test_svg_marks_windowed_regions():
    from gcs_planner.planner import PlanOptions, plan
    from gcs_planner.scenario import load_fixture

    scenario = load_fixture("lane_change")
    result = plan(scenario, PlanOptions(strategy="enumerate"))
    tree = render_svg(scenario, result.segments, result.path)
    transitions = tree.getroot().findall(f".//{{{SVG_NS}}}polygon[@class='region transition']")
    assert [p.find(f"{{{SVG_NS}}}title").text for p in transitions] == ["T"]
    dynamic = tree.getroot().find(f"{{{SVG_NS}}}g[@id='dynamic-obstacles']")
    assert len(dynamic) == 2 * len(snapshot_times(result.segments, scenario.settings.snapshot_dt))
    assert etree.tostring(tree).startswith(b"<svg")


def test_snapshot_times(straight_segment):
    np.testing.assert_allclose(snapshot_times([straight_segment], 0.5), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(snapshot_times([straight_segment], 0.4), [0.0, 0.4, 0.8, 1.2])


def test_svg_ego_follows_body_yaw(static_fixture, static_plan):
    root = render_svg(static_fixture, static_plan.segments, static_plan.path).getroot()
    ego = root.find(f"{{{SVG_NS}}}g[@id='ego']")
    times = snapshot_times(static_plan.segments, static_fixture.settings.snapshot_dt)
    yaws, _ = body_headings(sample_trajectory(static_plan.segments, times), static_fixture)
    assert len(ego) == len(times)
    for polygon, yaw in zip(ego, yaws):
        pts = np.array([[float(c) for c in p.split(",")] for p in polygon.get("points").split()])
        dx, dy = pts[1] - pts[2]
        # the drawing flips the y-axis
        assert math.atan2(-dy, dx) == pytest.approx(yaw, abs=1e-3)
