"""Scenario documents: schema validation, invariant checks and the in-memory model.

A scenario is a JSON file describing the region graph, the ego boundary
states, obstacles, limits and planner settings. Optional sections fall back
to defaults, each of which is recorded in ``Scenario.provenance``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from gcs_planner.errors import GeometryError, ScenarioError
from gcs_planner.flatness import VehicleParams
from gcs_planner.geometry import ConvexPolygon, Polytope, contains, oriented_rectangle, unit_ball_facets
from gcs_planner.graph import RegionGraph
from gcs_planner.program import CostWeights, Limits, ProgramContext, VertexData
from gcs_planner.timing import ObstaclePrediction, ProfilePiece, TimingWindow, timing_windows

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).parent / "schema" / "scenario.schema.json"
FIXTURE_DIR = Path(__file__).parent / "fixtures"

DEFAULT_EGO_LENGTH = 4.8
DEFAULT_EGO_WIDTH = 2.0


@dataclass(frozen=True, eq=False)
class Lane:
    id: str
    centerline: np.ndarray
    width: float


@dataclass(frozen=True, eq=False)
class Region:
    id: str
    polytope: Polytope
    direction: np.ndarray


@dataclass(frozen=True, eq=False)
class EgoState:
    position: np.ndarray
    velocity: np.ndarray
    yaw: float
    length: float = DEFAULT_EGO_LENGTH
    width: float = DEFAULT_EGO_WIDTH
    steady: bool = False


@dataclass(frozen=True, eq=False)
class Goal:
    polytope: Polytope
    velocity: np.ndarray


@dataclass(frozen=True, eq=False)
class StaticObstacle:
    id: str
    center: np.ndarray
    yaw: float
    length: float
    width: float

    @property
    def polygon(self) -> ConvexPolygon:
        return oriented_rectangle(self.center, self.yaw, self.length, self.width)


@dataclass(frozen=True)
class PlannerSettings:
    degree: int = 6
    facets: int = 16
    audit_dt: float = 0.01
    snapshot_dt: float = 1.0


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    regions: tuple[Region, ...]
    edges: tuple[tuple[str, str], ...]
    source: str
    target: str
    ego: EgoState
    goal: Goal
    description: str = ""
    lanes: tuple[Lane, ...] = ()
    windows: tuple[TimingWindow, ...] = ()
    static_obstacles: tuple[StaticObstacle, ...] = ()
    dynamic_obstacles: tuple[ObstaclePrediction, ...] = ()
    limits: Limits = field(default_factory=Limits)
    weights: CostWeights = field(default_factory=CostWeights)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    settings: PlannerSettings = field(default_factory=PlannerSettings)
    provenance: tuple[str, ...] = ()

    def region(self, region_id: str) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise KeyError(region_id)

    @cached_property
    def graph(self) -> RegionGraph:
        return RegionGraph.build([r.id for r in self.regions], self.edges, self.source, self.target)

    @cached_property
    def timing(self) -> tuple[TimingWindow, ...]:
        """Pinned and obstacle-derived windows, merged per vertex."""
        return tuple(timing_windows(self))

    def program_context(self) -> ProgramContext:
        windows = {w.vertex: w for w in self.timing}
        vertices = {
            r.id: VertexData(r.id, r.polytope, r.direction, windows.get(r.id))
            for r in self.regions
        }
        return ProgramContext(
            vertices=vertices,
            start=self.ego.position,
            start_velocity=self.ego.velocity,
            goal=self.goal.polytope,
            goal_velocity=self.goal.velocity,
            limits=self.limits,
            weights=self.weights,
            facets=unit_ball_facets(self.settings.facets),
            degree=self.settings.degree,
            steady_start=self.ego.steady,
        )

    def with_overrides(self, **overrides: Any) -> Scenario:
        """Copy with limit, weight or planner-setting overrides applied.

        Accepted keys: degree, facets, audit_dt, alpha, v_min, v_max,
        h_prime_min, t_max. ``None`` values are ignored.
        """
        overrides = {k: v for k, v in overrides.items() if v is not None}
        settings_keys = {"degree", "facets", "audit_dt"}
        limit_keys = {"v_min", "v_max", "h_prime_min", "t_max"}
        unknown = set(overrides) - settings_keys - limit_keys - {"alpha"}
        if unknown:
            raise ValueError(f"unknown scenario overrides: {', '.join(sorted(unknown))}")
        settings = replace(self.settings, **{k: overrides[k] for k in settings_keys & set(overrides)})
        limits = replace(self.limits, **{k: overrides[k] for k in limit_keys & set(overrides)})
        weights = CostWeights(tuple(overrides["alpha"])) if "alpha" in overrides else self.weights
        notes = tuple(f"{k}={overrides[k]!r} (override)" for k in sorted(overrides))
        return replace(self, settings=settings, limits=limits, weights=weights,
                       provenance=self.provenance + notes)


# ====================================================================
# Loading
# ====================================================================

def _schema() -> dict:
    with open(SCHEMA_PATH) as f:
        return json.load(f)


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _unit(vector, path: str) -> np.ndarray:
    v = np.asarray(vector, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm <= 1e-12:
        raise ScenarioError("direction must be non-zero", path=path, check="direction")
    return v / norm


def _shape(doc: dict, path: str) -> Polytope:
    try:
        if "box" in doc:
            xmin, xmax, ymin, ymax = doc["box"]
            if not (xmin < xmax and ymin < ymax):
                raise ScenarioError("box must satisfy xmin < xmax and ymin < ymax", path=f"{path}.box",
                                    check="region-bounded")
            polytope = Polytope.from_box(xmin, xmax, ymin, ymax)
        elif "halfspaces" in doc:
            polytope = Polytope(doc["halfspaces"]["normals"], doc["halfspaces"]["offsets"])
        else:
            polytope = Polytope.from_vertices(doc["vertices"])
        polytope.validate()
    except GeometryError as exc:
        raise ScenarioError(str(exc), path=path, check="region-bounded") from exc
    return polytope


class _Defaults:
    """Reads optional fields, remembering which ones fell back to a default."""

    def __init__(self) -> None:
        self.notes: list[str] = []

    def get(self, section: dict, key: str, default, label: str):
        if key in section:
            return section[key]
        self.notes.append(f"{label}={default!r} (default)")
        return default


def parse_scenario(doc: dict, origin: str = "<document>") -> Scenario:
    """Validate *doc* against the schema and the scenario invariants."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        raise ScenarioError(first.message, path=_json_path(first.absolute_path), check="schema")

    defaults = _Defaults()
    regions = []
    for i, item in enumerate(doc["regions"]):
        path = f"$.regions[{i}]"
        direction = defaults.get(item, "direction", [1.0, 0.0], f"regions[{item['id']}].direction")
        regions.append(Region(item["id"], _shape(item, path), _unit(direction, f"{path}.direction")))

    limits_doc = doc.get("limits", {})
    base = Limits()
    try:
        limits = Limits(**{
            key: defaults.get(limits_doc, key, getattr(base, key), f"limits.{key}")
            for key in ("v_min", "v_max", "h_prime_min", "t_max", "v_floor", "max_heading")
        })
        weights = CostWeights(tuple(defaults.get(doc.get("weights", {}), "alpha", CostWeights().alpha, "weights.alpha")))
    except ValueError as exc:
        raise ScenarioError(str(exc), path="$.limits", check="limits") from exc

    vehicle_doc = doc.get("vehicle", {})
    vehicle = VehicleParams(**{
        key: defaults.get(vehicle_doc, key, getattr(VehicleParams(), key), f"vehicle.{key}")
        for key in ("m", "i_z", "l_f", "l_r", "c_f", "c_r")
    })
    planner_doc = doc.get("planner", {})
    settings = PlannerSettings(**{
        key: defaults.get(planner_doc, key, getattr(PlannerSettings(), key), f"planner.{key}")
        for key in ("degree", "facets", "audit_dt", "snapshot_dt")
    })

    ego_doc = doc["ego"]
    velocity = np.asarray(ego_doc["velocity"], dtype=float)
    ego = EgoState(
        position=np.asarray(ego_doc["position"], dtype=float),
        velocity=velocity,
        yaw=float(defaults.get(ego_doc, "yaw", math.atan2(velocity[1], velocity[0]), "ego.yaw")),
        length=float(defaults.get(ego_doc, "length", DEFAULT_EGO_LENGTH, "ego.length")),
        width=float(defaults.get(ego_doc, "width", DEFAULT_EGO_WIDTH, "ego.width")),
        steady=bool(ego_doc.get("steady", False)),
    )
    goal = Goal(_shape(doc["goal"]["region"], "$.goal.region"), np.asarray(doc["goal"]["velocity"], dtype=float))

    region_ids = {r.id for r in regions}
    windows = []
    for i, w in enumerate(doc.get("windows", [])):
        if w["vertex"] not in region_ids:
            raise ScenarioError(f"unknown region '{w['vertex']}'", path=f"$.windows[{i}].vertex",
                                check="window-vertex")
        windows.append(TimingWindow(**w))

    dynamic = []
    for i, o in enumerate(doc.get("dynamic_obstacles", [])):
        path = f"$.dynamic_obstacles[{i}]"
        for vertex in o.get("separation", {}):
            if vertex not in region_ids:
                raise ScenarioError(f"unknown region '{vertex}'", path=f"{path}.separation",
                                    check="separation-vertex")
        try:
            dynamic.append(ObstaclePrediction(
                id=o["id"],
                position=o["position"],
                yaw=float(o.get("yaw", 0.0)),
                pieces=tuple(ProfilePiece(**piece) for piece in o["profile"]),
                length=float(defaults.get(o, "length", 0.0, f"dynamic_obstacles[{o['id']}].length")),
                width=float(defaults.get(o, "width", 0.0, f"dynamic_obstacles[{o['id']}].width")),
                route=o.get("route"),
                separation=dict(o.get("separation", {})),
                separation_default=o.get("separation_default", "enter_after"),
            ))
        except ValueError as exc:
            raise ScenarioError(str(exc), path=path, check="obstacle-profile") from exc

    scenario = Scenario(
        name=doc["name"],
        description=doc.get("description", ""),
        lanes=tuple(Lane(l["id"], np.asarray(l["centerline"], dtype=float), float(l["width"]))
                    for l in doc.get("lanes", [])),
        regions=tuple(regions),
        edges=tuple((u, v) for u, v in doc["edges"]),
        source=doc["source"],
        target=doc["target"],
        windows=tuple(windows),
        ego=ego,
        goal=goal,
        static_obstacles=tuple(
            StaticObstacle(s["id"], np.asarray(s["center"], dtype=float), float(s.get("yaw", 0.0)),
                           float(s["length"]), float(s["width"]))
            for s in doc.get("static_obstacles", [])
        ),
        dynamic_obstacles=tuple(dynamic),
        limits=limits,
        weights=weights,
        vehicle=vehicle,
        settings=settings,
        provenance=tuple(defaults.notes),
    )
    _check_invariants(scenario)
    for note in scenario.provenance:
        logger.info("%s: %s", origin, note)
    return scenario


def _check_invariants(scenario: Scenario) -> None:
    scenario.graph  # raises on unknown endpoints, self-loops and unreachable targets

    source = scenario.region(scenario.source).polytope
    if not contains(source, scenario.ego.position, tol=1e-9):
        raise ScenarioError("ego start lies outside the source region", path="$.ego.position",
                            check="start-containment")

    target = scenario.region(scenario.target).polytope
    overlap = Polytope(
        np.vstack([target.normals, scenario.goal.polytope.normals]),
        np.concatenate([target.offsets, scenario.goal.polytope.offsets]),
    )
    try:
        overlap.chebyshev_center()
    except GeometryError as exc:
        raise ScenarioError("goal region does not meet the target region", path="$.goal.region",
                            check="goal-in-target") from exc

    facets = unit_ball_facets(scenario.settings.facets)
    for label, v in (("ego", scenario.ego.velocity), ("goal", scenario.goal.velocity)):
        if facets.norm(v) > scenario.limits.v_max + 1e-9:
            raise ScenarioError(f"{label} speed exceeds v_max", path=f"$.{label}.velocity", check="boundary-speed")

    scenario.timing  # raises on contradictory windows


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path).expanduser()
    if not path.exists():
        raise FileNotFoundError(f"Scenario file not found: {path}")
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}", check="json") from exc
    return parse_scenario(doc, origin=path.name)


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FIXTURE_DIR.glob("*.json"))


def fixture_path(name: str) -> Path:
    path = FIXTURE_DIR / f"{name}.json"
    if not path.exists():
        raise FileNotFoundError(
            f"Unknown fixture '{name}'. Choose from: {', '.join(fixture_names())}"
        )
    return path


def load_fixture(name: str) -> Scenario:
    return load_scenario(fixture_path(name))


# ====================================================================
# Serialization
# ====================================================================

def _halfspaces(p: Polytope) -> dict:
    return {"halfspaces": {"normals": p.normals.tolist(), "offsets": p.offsets.tolist()}}


def _window_dict(w: TimingWindow) -> dict:
    out: dict[str, Any] = {"vertex": w.vertex}
    for key in ("entry_min", "entry_max", "exit_min", "exit_max", "max_dwell"):
        value = getattr(w, key)
        if value is not None:
            out[key] = value
    return out


def scenario_to_dict(scenario: Scenario) -> dict:
    """Schema-valid document with every default spelled out; regions as half-spaces."""
    limits = {
        key: getattr(scenario.limits, key)
        for key in ("v_min", "v_max", "h_prime_min", "t_max", "v_floor")
    }
    if scenario.limits.max_heading is not None:
        limits["max_heading"] = scenario.limits.max_heading
    dynamic = []
    for o in scenario.dynamic_obstacles:
        item: dict[str, Any] = {
            "id": o.id,
            "position": o.position.tolist(),
            "yaw": o.yaw,
            "length": o.length,
            "width": o.width,
            "profile": [{"duration": p.duration, "speed": p.speed, "accel": p.accel} for p in o.pieces],
            "separation": dict(o.separation),
            "separation_default": o.separation_default,
        }
        if o.route is not None:
            item["route"] = o.route.tolist()
        dynamic.append(item)
    return {
        "name": scenario.name,
        "description": scenario.description,
        "lanes": [{"id": l.id, "centerline": l.centerline.tolist(), "width": l.width} for l in scenario.lanes],
        "regions": [
            {"id": r.id, **_halfspaces(r.polytope), "direction": r.direction.tolist()}
            for r in scenario.regions
        ],
        "edges": [list(e) for e in scenario.edges],
        "source": scenario.source,
        "target": scenario.target,
        "windows": [_window_dict(w) for w in scenario.windows],
        "ego": {
            "position": scenario.ego.position.tolist(),
            "velocity": scenario.ego.velocity.tolist(),
            "yaw": scenario.ego.yaw,
            "length": scenario.ego.length,
            "width": scenario.ego.width,
            "steady": scenario.ego.steady,
        },
        "goal": {"region": _halfspaces(scenario.goal.polytope), "velocity": scenario.goal.velocity.tolist()},
        "static_obstacles": [
            {"id": s.id, "center": s.center.tolist(), "yaw": s.yaw, "length": s.length, "width": s.width}
            for s in scenario.static_obstacles
        ],
        "dynamic_obstacles": dynamic,
        "limits": limits,
        "weights": {"alpha": list(scenario.weights.alpha)},
        "vehicle": {
            key: getattr(scenario.vehicle, key) for key in ("m", "i_z", "l_f", "l_r", "c_f", "c_r")
        },
        "planner": {
            "degree": scenario.settings.degree,
            "facets": scenario.settings.facets,
            "audit_dt": scenario.settings.audit_dt,
            "snapshot_dt": scenario.settings.snapshot_dt,
        },
    }
