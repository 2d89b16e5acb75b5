"""Tests for scenario parsing, validation, defaults and the bundled fixtures."""

import json
import math

import numpy as np
import pytest

from gcs_planner.errors import ScenarioError
from gcs_planner.scenario import (
    fixture_names,
    fixture_path,
    load_fixture,
    load_scenario,
    parse_scenario,
    scenario_to_dict,
)


def _check_of(doc):
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(doc)
    return excinfo.value


def test_parse_chain(chain_scenario):
    assert [r.id for r in chain_scenario.regions] == ["A", "B"]
    assert chain_scenario.edges == (("A", "B"),)
    assert chain_scenario.ego.yaw == pytest.approx(0.0)
    assert chain_scenario.limits.v_max == 20.0
    assert chain_scenario.settings.degree == 6
    np.testing.assert_allclose(chain_scenario.region("A").direction, [1.0, 0.0])
    with pytest.raises(KeyError):
        chain_scenario.region("Z")


def test_defaults_are_recorded(chain_scenario):
    notes = chain_scenario.provenance
    assert "limits.v_max=20.0 (default)" in notes
    assert "regions[A].direction=[1.0, 0.0] (default)" in notes
    assert "planner.degree=6 (default)" in notes


def test_explicit_fields_are_not_recorded(chain_doc):
    chain_doc["limits"] = {"v_max": 12.0}
    notes = parse_scenario(chain_doc).provenance
    assert not any(n.startswith("limits.v_max=") for n in notes)
    assert "limits.t_max=10.0 (default)" in notes


def test_schema_errors(chain_doc):
    del chain_doc["goal"]
    err = _check_of(chain_doc)
    assert err.check == "schema"
    assert err.path == "$"


def test_schema_rejects_unknown_fields(chain_doc):
    chain_doc["ego"]["colour"] = "red"
    assert _check_of(chain_doc).check == "schema"


def test_schema_rejects_two_shapes(chain_doc):
    chain_doc["regions"][0]["vertices"] = [[0, 0], [1, 0], [0, 1]]
    assert _check_of(chain_doc).check == "schema"


def test_inverted_box(chain_doc):
    chain_doc["regions"][1]["box"] = [60.0, 15.0, -2.0, 2.0]
    err = _check_of(chain_doc)
    assert err.check == "region-bounded"
    assert err.path.startswith("$.regions[1]")


def test_unbounded_halfspaces(chain_doc):
    chain_doc["regions"][1] = {
        "id": "B",
        "halfspaces": {"normals": [[-1, 0], [0, 1], [0, -1]], "offsets": [-15, 2, 2]},
    }
    assert _check_of(chain_doc).check == "region-bounded"


def test_collinear_vertices(chain_doc):
    chain_doc["regions"][1] = {"id": "B", "vertices": [[15, 0], [30, 0], [60, 0]]}
    err = _check_of(chain_doc)
    assert err.check == "region-bounded"
    assert err.path.startswith("$.regions[1]")


def test_start_outside_source(chain_doc):
    chain_doc["ego"]["position"] = [30.0, 0.0]
    assert _check_of(chain_doc).check == "start-containment"


def test_goal_outside_target(chain_doc):
    chain_doc["goal"]["region"] = {"box": [100.0, 110.0, -1.0, 1.0]}
    assert _check_of(chain_doc).check == "goal-in-target"


def test_boundary_speed_above_limit(chain_doc):
    chain_doc["ego"]["velocity"] = [30.0, 0.0]
    assert _check_of(chain_doc).check == "boundary-speed"


def test_window_on_unknown_region(chain_doc):
    chain_doc["windows"] = [{"vertex": "Z", "entry_max": 1.0}]
    assert _check_of(chain_doc).check == "window-vertex"


def test_contradictory_window(chain_doc):
    chain_doc["windows"] = [{"vertex": "B", "entry_min": 3.0, "entry_max": 1.0}]
    assert _check_of(chain_doc).check == "window-order"


def test_bad_limits(chain_doc):
    chain_doc["limits"] = {"v_min": 15.0, "v_max": 10.0}
    assert _check_of(chain_doc).check == "limits"


def _obstacle(**extra):
    return {"id": "car", "position": [10.0, 5.0], "profile": [{"duration": 5.0, "speed": 1.0}], **extra}


def test_separation_on_unknown_region(chain_doc):
    chain_doc["dynamic_obstacles"] = [_obstacle(separation={"Z": "exit_before"})]
    assert _check_of(chain_doc).check == "separation-vertex"


def test_negative_obstacle_speed(chain_doc):
    chain_doc["dynamic_obstacles"] = [_obstacle(profile=[{"duration": 5.0, "speed": 1.0, "accel": -1.0}])]
    assert _check_of(chain_doc).check == "obstacle-profile"


def test_obstacle_defaults(chain_doc):
    chain_doc["dynamic_obstacles"] = [_obstacle()]
    scenario = parse_scenario(chain_doc)
    (o,) = scenario.dynamic_obstacles
    assert (o.length, o.width) == (0.0, 0.0)
    assert o.separation_default == "enter_after"
    assert "dynamic_obstacles[car].length=0.0 (default)" in scenario.provenance


def test_with_overrides(chain_scenario):
    tuned = chain_scenario.with_overrides(v_max=12.0, degree=7, alpha=(1, 2, 3, 4), t_max=None)
    assert tuned.limits.v_max == 12.0
    assert tuned.limits.t_max == chain_scenario.limits.t_max
    assert tuned.settings.degree == 7
    assert tuned.weights.alpha == (1.0, 2.0, 3.0, 4.0)
    assert "v_max=12.0 (override)" in tuned.provenance
    assert chain_scenario.limits.v_max == 20.0
    with pytest.raises(ValueError):
        chain_scenario.with_overrides(colour="red")


def test_load_scenario_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ScenarioError) as excinfo:
        load_scenario(broken)
    assert excinfo.value.check == "json"


def test_load_scenario_from_file(tmp_path, chain_doc):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(chain_doc))
    assert load_scenario(path).name == "chain"


def test_fixture_registry():
    assert fixture_names() == ["lane_change", "overtaking", "static_avoidance"]
    assert fixture_path("overtaking").name == "overtaking.json"
    with pytest.raises(FileNotFoundError, match="Choose from"):
        fixture_path("roundabout")


def test_overtaking_fixture():
    scenario = load_fixture("overtaking")
    assert scenario.source == "L" and scenario.target == "L2"
    assert scenario.ego.steady
    (window,) = scenario.timing
    assert window.vertex == "T1"
    assert window.entry_max == 2.7
    # the slow vehicle's inflated rear clears x = 38 once it has covered 7.8 m
    assert window.entry_min == pytest.approx(-3.0 + math.sqrt(9.0 + 15.6), abs=2e-3)
    assert window.sources == ("pinned", "varying-right:enter_after", "fast-left:enter_after")


def test_steady_flag_round_trips(chain_doc):
    assert not parse_scenario(chain_doc).ego.steady
    chain_doc["ego"]["steady"] = True
    scenario = parse_scenario(chain_doc)
    assert scenario.program_context().steady_start
    assert scenario_to_dict(scenario)["ego"]["steady"] is True


def test_scenario_to_dict_reparses(static_fixture):
    doc = scenario_to_dict(static_fixture)
    again = parse_scenario(json.loads(json.dumps(doc)))
    assert again.provenance == ()
    assert [r.id for r in again.regions] == [r.id for r in static_fixture.regions]
    assert again.graph.edges == static_fixture.graph.edges
    for a, b in zip(again.regions, static_fixture.regions):
        np.testing.assert_allclose(a.polytope.offsets, b.polytope.offsets)
