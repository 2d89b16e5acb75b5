"""Shared fixtures for gcs-planner tests."""

import numpy as np
import pytest

from gcs_planner.bezier import BezierCurve, TimeScaling, TrajectorySegment
from gcs_planner.planner import PlanOptions, plan
from gcs_planner.scenario import load_fixture, parse_scenario


@pytest.fixture
def chain_doc():
    """Two overlapping boxes along the x-axis, cruising at 8 m/s."""
    return {
        "name": "chain",
        "regions": [
            {"id": "A", "box": [-1.0, 20.0, -2.0, 2.0]},
            {"id": "B", "box": [15.0, 60.0, -2.0, 2.0]},
        ],
        "edges": [["A", "B"]],
        "source": "A",
        "target": "B",
        "ego": {"position": [0.0, 0.0], "velocity": [8.0, 0.0]},
        "goal": {"region": {"box": [40.0, 55.0, -1.0, 1.0]}, "velocity": [8.0, 0.0]},
    }


@pytest.fixture
def chain_scenario(chain_doc):
    return parse_scenario(chain_doc)


@pytest.fixture
def diamond_doc():
    """Source and target joined by two branches that do not touch each other."""
    return {
        "name": "diamond",
        "regions": [
            {"id": "S", "box": [-1.0, 12.0, -3.0, 3.0]},
            {"id": "A", "box": [8.0, 32.0, 0.5, 3.0]},
            {"id": "B", "box": [8.0, 32.0, -3.0, -0.5]},
            {"id": "T", "box": [28.0, 70.0, -3.0, 3.0]},
        ],
        "edges": [["S", "A"], ["S", "B"], ["A", "T"], ["B", "T"]],
        "source": "S",
        "target": "T",
        "ego": {"position": [0.0, 0.0], "velocity": [8.0, 0.0]},
        "goal": {"region": {"box": [45.0, 60.0, -1.0, 1.0]}, "velocity": [8.0, 0.0]},
    }


@pytest.fixture
def diamond_scenario(diamond_doc):
    return parse_scenario(diamond_doc)


def _layered_doc(rng, layers: int) -> dict:
    """Random layered corridor: every inner layer holds one wide box or two stacked lanes."""
    regions = [{"id": "S", "box": [-1.0, 14.0, -3.0, 3.0]}]
    previous = ["S"]
    edges = []
    for k in range(1, layers + 1):
        x0 = 12.0 * k - 1.0
        if rng.random() < 0.5:
            current = [f"W{k}"]
            regions.append({"id": f"W{k}", "box": [x0, x0 + 15.0, -3.0, 3.0]})
        else:
            current = [f"U{k}", f"D{k}"]
            regions.append({"id": f"U{k}", "box": [x0, x0 + 15.0, 0.5, 3.0]})
            regions.append({"id": f"D{k}", "box": [x0, x0 + 15.0, -3.0, -0.5]})
        for u in previous:
            for v in current:
                if u[0] in "SW" or v[0] == "W" or u[0] == v[0]:
                    edges.append([u, v])
        previous = current
    x0 = 12.0 * (layers + 1) - 1.0
    regions.append({"id": "T", "box": [x0, x0 + 30.0, -3.0, 3.0]})
    edges.extend([u, "T"] for u in previous)
    return {
        "name": f"layered-{layers}",
        "regions": regions,
        "edges": edges,
        "source": "S",
        "target": "T",
        "ego": {"position": [0.0, 0.0], "velocity": [8.0, 0.0]},
        "goal": {"region": {"box": [x0 + 8.0, x0 + 25.0, -1.0, 1.0]}, "velocity": [8.0, 0.0]},
    }


@pytest.fixture
def straight_segment():
    """Degree-6 segment along the x-axis at a constant 10 m/s over 1.2 s."""
    pts = np.column_stack([2.0 * np.arange(7), np.zeros(7)])
    return TrajectorySegment(BezierCurve(pts), TimeScaling.from_times(0.2 * np.arange(7)))


@pytest.fixture
def curved_segment():
    pts = [(0, 0), (2, 1), (4, 3), (7, 3), (9, 2), (11, 0), (13, 0)]
    taus = [0.0, 0.3, 0.55, 0.9, 1.2, 1.6, 2.0]
    return TrajectorySegment(BezierCurve(pts), TimeScaling.from_times(taus))


@pytest.fixture(scope="session")
def static_fixture():
    return load_fixture("static_avoidance")


@pytest.fixture(scope="session")
def static_plan(static_fixture):
    return plan(static_fixture, PlanOptions(strategy="enumerate"))


@pytest.fixture
def no_user_config(tmp_path, monkeypatch):
    """Keep RunConfig.load away from any config file on the test machine."""
    monkeypatch.delenv("GCS_PLANNER_CONFIG", raising=False)
    monkeypatch.delenv("GCS_PLANNER_OUT", raising=False)
    monkeypatch.setattr("gcs_planner.config.get_default_config_path", lambda: tmp_path / "absent.yaml")
    return tmp_path


@pytest.fixture
def layered_doc():
    """Factory for random layered corridors: ``layered_doc(rng, layers)``."""
    return _layered_doc
