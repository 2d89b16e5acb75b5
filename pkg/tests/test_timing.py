"""Tests for obstacle prediction, occupancy intervals and timing windows."""

import math

import numpy as np
import pytest

from gcs_planner.errors import ScenarioError
from gcs_planner.geometry import Polytope
from gcs_planner.timing import (
    ObstaclePrediction,
    ProfilePiece,
    TimingWindow,
    footprint,
    merge_windows,
    occupancy_interval,
    predict_pose,
    separation_windows,
    timing_windows,
)


def _point(position, speed, **kwargs):
    return ObstaclePrediction(
        id=kwargs.pop("id", "car"),
        position=position,
        yaw=kwargs.pop("yaw", 0.0),
        pieces=(ProfilePiece(20.0, speed),),
        length=0.0,
        width=0.0,
        **kwargs,
    )


# ---- Profiles and poses ----

def test_profile_arc_length_and_speed():
    o = ObstaclePrediction("car", (0, 0), 0.0, (ProfilePiece(2.0, 5.0, 1.0), ProfilePiece(3.0, 7.0)), 4.0, 2.0)
    assert o.arc_length(2.0) == pytest.approx(12.0)
    assert o.arc_length(4.0) == pytest.approx(26.0)
    assert o.arc_length(6.0) == pytest.approx(40.0)
    assert o.speed(1.0) == pytest.approx(6.0)
    assert o.speed(9.0) == pytest.approx(7.0)


def test_profile_piece_validation():
    with pytest.raises(ValueError):
        ProfilePiece(0.0, 1.0)
    with pytest.raises(ValueError):
        ProfilePiece(2.0, 1.0, accel=-1.0)


def test_unknown_separation_mode():
    with pytest.raises(ValueError):
        _point((0, 0), 1.0, separation={"A": "swerve"})


def test_straight_prediction():
    o = _point((1.0, 2.0), 4.0, yaw=math.pi / 2)
    position, yaw = predict_pose(o, 2.5)
    np.testing.assert_allclose(position, [1.0, 12.0], atol=1e-12)
    assert yaw == pytest.approx(math.pi / 2)


def test_route_prediction_turns_the_corner():
    o = _point((0.0, 0.0), 1.0, route=[(0, 0), (10, 0), (10, 10)])
    position, yaw = predict_pose(o, 15.0)
    np.testing.assert_allclose(position, [10.0, 5.0], atol=1e-12)
    assert yaw == pytest.approx(math.pi / 2)


def test_prediction_rejects_negative_time():
    with pytest.raises(ValueError):
        predict_pose(_point((0, 0), 1.0), -0.1)


def test_prediction_is_continuous_across_profile_pieces():
    o = ObstaclePrediction(
        "varying", (35.0, 0.0), 0.0, (ProfilePiece(5.0, 3.0, 1.0), ProfilePiece(5.0, 8.0, -1.0)), 4.8, 2.0
    )
    before, _ = predict_pose(o, 5.0 - 1e-9)
    at, _ = predict_pose(o, 5.0)
    after, _ = predict_pose(o, 5.0 + 1e-9)
    np.testing.assert_allclose(at, [35.0 + 27.5, 0.0], atol=1e-12)
    np.testing.assert_allclose(before, at, atol=1e-7)
    np.testing.assert_allclose(after, at, atol=1e-7)
    assert o.speed(5.0 - 1e-9) == pytest.approx(o.speed(5.0 + 1e-9), abs=1e-7)
    end, _ = predict_pose(o, 10.0)
    assert end[0] == pytest.approx(35.0 + 55.0)


def test_footprint_margin():
    o = ObstaclePrediction("car", (0, 0), 0.0, (ProfilePiece(1.0, 0.0),), 4.0, 2.0)
    xs, ys = footprint(o, 0.0, margin=(1.0, 0.5)).vertices.T
    assert (xs.min(), xs.max()) == pytest.approx((-3.0, 3.0))
    assert (ys.min(), ys.max()) == pytest.approx((-1.5, 1.5))


# ---- Occupancy ----

def test_occupancy_interval_entry_until_horizon():
    region = Polytope.from_box(30.0, 50.0, -5.0, 5.0)
    t_in, t_out = occupancy_interval(_point((20.0, 0.0), 3.0), region, horizon=10.0)
    assert t_in == pytest.approx(10.0 / 3.0, abs=1.1e-3)
    assert t_in <= 10.0 / 3.0
    assert t_out == 10.0


def test_occupancy_interval_pass_through():
    region = Polytope.from_box(10.0, 20.0, -1.0, 1.0)
    t_in, t_out = occupancy_interval(_point((0.0, 0.0), 10.0), region, horizon=5.0)
    assert t_in == pytest.approx(1.0, abs=1.1e-3)
    assert t_out == pytest.approx(2.0, abs=1.1e-3)
    assert t_in <= 1.0 and t_out >= 2.0


def test_occupancy_interval_grows_with_margin():
    region = Polytope.from_box(10.0, 20.0, -1.0, 1.0)
    t_in, t_out = occupancy_interval(_point((0.0, 0.0), 10.0), region, horizon=5.0, margin=(1.0, 0.0))
    assert t_in == pytest.approx(0.9, abs=1.1e-3)
    assert t_out == pytest.approx(2.1, abs=1.1e-3)


def test_occupancy_interval_never_reached():
    region = Polytope.from_box(0.0, 10.0, 40.0, 50.0)
    assert occupancy_interval(_point((0.0, 0.0), 10.0), region, horizon=5.0) is None


def test_occupancy_interval_rejects_bad_horizon():
    with pytest.raises(ValueError):
        occupancy_interval(_point((0, 0), 1.0), Polytope.from_box(0, 1, 0, 1), horizon=0.0)


# ---- Windows ----

def test_separation_modes():
    regions = {"A": Polytope.from_box(10.0, 20.0, -1.0, 1.0), "B": Polytope.from_box(30.0, 40.0, -1.0, 1.0)}
    o = _point((0.0, 0.0), 10.0, separation={"A": "exit_before", "B": "ignore"})
    windows = separation_windows([o], regions, horizon=5.0, margin=(0.0, 0.0))
    assert len(windows) == 1
    (w,) = windows
    assert w.vertex == "A"
    assert w.exit_max == pytest.approx(1.0, abs=1.1e-3)
    assert w.entry_min is None
    assert w.sources == ("car:exit_before",)


def test_enter_after_is_the_default():
    regions = {"A": Polytope.from_box(10.0, 20.0, -1.0, 1.0)}
    (w,) = separation_windows([_point((0.0, 0.0), 10.0)], regions, horizon=5.0, margin=(0.0, 0.0))
    assert w.entry_min == pytest.approx(2.0, abs=1.1e-3)
    assert w.exit_max is None


def test_empty_window_is_rejected():
    with pytest.raises(ScenarioError) as excinfo:
        TimingWindow("A", entry_min=3.0, entry_max=2.0)
    assert excinfo.value.check == "window-order"
    with pytest.raises(ScenarioError):
        TimingWindow("A", entry_min=3.0, exit_max=1.0)
    with pytest.raises(ScenarioError):
        TimingWindow("A", max_dwell=0.0)


def test_merge_keeps_the_tighter_bounds():
    a = TimingWindow("A", entry_min=1.0, entry_max=5.0, max_dwell=4.0)
    b = TimingWindow("A", entry_min=2.0, exit_max=6.0, sources=("car:exit_before",))
    m = a.merge(b)
    assert (m.entry_min, m.entry_max, m.exit_max, m.max_dwell) == (2.0, 5.0, 6.0, 4.0)
    assert m.sources == ("pinned", "car:exit_before")


def test_merge_can_expose_a_contradiction():
    with pytest.raises(ScenarioError):
        TimingWindow("A", entry_max=1.0).merge(TimingWindow("A", entry_min=2.0))


def test_merge_windows_groups_by_vertex():
    merged = merge_windows([
        TimingWindow("A", entry_max=5.0),
        TimingWindow("B", exit_min=1.0),
        TimingWindow("A", entry_max=3.0),
    ])
    assert sorted(merged) == ["A", "B"]
    assert merged["A"].entry_max == 3.0


def test_lane_change_windows():
    from gcs_planner.scenario import load_fixture

    windows = timing_windows(load_fixture("lane_change"))
    assert [w.vertex for w in windows] == ["T"]
    (w,) = windows
    assert w.entry_max == 2.4
    assert w.max_dwell == 4.0
    assert w.sources == ("pinned",)


def test_overtaking_windows_come_from_both_vehicles():
    from gcs_planner.scenario import load_fixture

    scenario = load_fixture("overtaking")
    derived = separation_windows(
        scenario.dynamic_obstacles,
        {r.id: r.polytope for r in scenario.regions},
        scenario.limits.t_max,
        (0.5 * scenario.ego.length, 0.5 * scenario.ego.width),
    )
    by_source = {w.sources[0]: w for w in derived}
    assert set(by_source) == {"varying-right:enter_after", "fast-left:enter_after"}
    assert all(w.vertex == "T1" for w in derived)
    # inflated rears clear x = 38: 30.2 + 3t + t^2/2 for one, 0.2 + 20t for the other
    assert by_source["varying-right:enter_after"].entry_min == pytest.approx(-3.0 + math.sqrt(24.6), abs=2e-3)
    assert by_source["fast-left:enter_after"].entry_min == pytest.approx(37.8 / 20.0, abs=2e-3)
