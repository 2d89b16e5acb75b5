"""Dynamic-obstacle prediction and the timing windows derived from it.

An obstacle that is predicted to occupy region C_v during [T_in, T_out] is
avoided by bounding the ego's entry and exit times of that region: either it
leaves before T_in or it enters after T_out. The choice is made per
(obstacle, region) in the scenario file.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from gcs_planner.errors import ScenarioError
from gcs_planner.geometry import ConvexPolygon, Polytope, intersects, rectangle_vertices

if TYPE_CHECKING:
    from gcs_planner.scenario import Scenario

logger = logging.getLogger(__name__)

SEPARATION_MODES = ("exit_before", "enter_after", "ignore")

SAMPLE_STEP = 0.01
REFINE_STEP = 0.001


@dataclass(frozen=True)
class ProfilePiece:
    """Constant-acceleration stretch of an obstacle's speed profile."""

    duration: float
    speed: float
    accel: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"profile piece duration must be positive, got {self.duration}")
        if self.speed < 0 or self.end_speed < -1e-9:
            raise ValueError("obstacle speed must stay non-negative within a profile piece")

    @property
    def end_speed(self) -> float:
        return self.speed + self.accel * self.duration

    @property
    def advance(self) -> float:
        return self.speed * self.duration + 0.5 * self.accel * self.duration**2


@dataclass(frozen=True, eq=False)
class ObstaclePrediction:
    id: str
    position: np.ndarray
    yaw: float
    pieces: tuple[ProfilePiece, ...]
    length: float
    width: float
    route: np.ndarray | None = None
    separation: Mapping[str, str] = field(default_factory=dict)
    separation_default: str = "enter_after"

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(2))
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if self.length < 0 or self.width < 0:
            raise ValueError("obstacle footprint dimensions must be non-negative")
        for mode in list(self.separation.values()) + [self.separation_default]:
            if mode not in SEPARATION_MODES:
                raise ValueError(f"unknown separation mode '{mode}'")
        if self.route is not None:
            route = np.asarray(self.route, dtype=float).reshape(-1, 2)
            if len(route) < 2:
                raise ValueError("an obstacle route needs at least two points")
            object.__setattr__(self, "route", route)

    def separation_for(self, vertex: str) -> str:
        return self.separation.get(vertex, self.separation_default)

    def arc_length(self, t: float) -> float:
        """Distance travelled after *t* seconds."""
        travelled, elapsed = 0.0, 0.0
        for piece in self.pieces:
            if t <= elapsed + piece.duration:
                tau = t - elapsed
                return travelled + piece.speed * tau + 0.5 * piece.accel * tau**2
            travelled += piece.advance
            elapsed += piece.duration
        final = self.pieces[-1].end_speed if self.pieces else 0.0
        return travelled + max(final, 0.0) * (t - elapsed)

    def speed(self, t: float) -> float:
        elapsed = 0.0
        for piece in self.pieces:
            if t <= elapsed + piece.duration:
                return piece.speed + piece.accel * (t - elapsed)
            elapsed += piece.duration
        return max(self.pieces[-1].end_speed, 0.0) if self.pieces else 0.0


@dataclass(frozen=True)
class TimingWindow:
    """Bounds on a vertex's entry time tau_0 and exit time tau_m (seconds)."""

    vertex: str
    entry_min: float | None = None
    entry_max: float | None = None
    exit_min: float | None = None
    exit_max: float | None = None
    max_dwell: float | None = None
    sources: tuple[str, ...] = ("pinned",)

    def __post_init__(self):
        checks = (
            (self.entry_min, self.entry_max, "entry"),
            (self.exit_min, self.exit_max, "exit"),
            (self.entry_min, self.exit_max, "entry/exit"),
        )
        for lo, hi, label in checks:
            if lo is not None and hi is not None and lo > hi + 1e-12:
                raise ScenarioError(
                    f"{label} window for vertex '{self.vertex}' is empty ({lo:.6g} > {hi:.6g})",
                    path=f"$.windows.{self.vertex}",
                    check="window-order",
                )
        if self.max_dwell is not None and self.max_dwell <= 0:
            raise ScenarioError(
                f"max dwell for vertex '{self.vertex}' must be positive",
                path=f"$.windows.{self.vertex}",
                check="window-order",
            )

    def merge(self, other: TimingWindow) -> TimingWindow:
        def tighter(a, b, pick):
            if a is None:
                return b
            if b is None:
                return a
            return pick(a, b)

        return TimingWindow(
            vertex=self.vertex,
            entry_min=tighter(self.entry_min, other.entry_min, max),
            entry_max=tighter(self.entry_max, other.entry_max, min),
            exit_min=tighter(self.exit_min, other.exit_min, max),
            exit_max=tighter(self.exit_max, other.exit_max, min),
            max_dwell=tighter(self.max_dwell, other.max_dwell, min),
            sources=self.sources + other.sources,
        )


# ====================================================================
# Prediction
# ====================================================================

def _route_pose(route: np.ndarray, arc: float) -> tuple[np.ndarray, float]:
    steps = np.diff(route, axis=0)
    lengths = np.linalg.norm(steps, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    i = int(np.clip(np.searchsorted(cum, arc, side="right") - 1, 0, len(steps) - 1))
    direction = steps[i] / lengths[i]
    return route[i] + (arc - cum[i]) * direction, math.atan2(direction[1], direction[0])


def _route_offset(route: np.ndarray, point: np.ndarray) -> float:
    """Arc length of the projection of *point* onto *route*."""
    best, best_arc, travelled = math.inf, 0.0, 0.0
    for p, q in zip(route[:-1], route[1:]):
        d = q - p
        length = float(np.linalg.norm(d))
        u = float(np.clip((point - p) @ d / length**2, 0.0, 1.0))
        gap = float(np.linalg.norm(p + u * d - point))
        if gap < best:
            best, best_arc = gap, travelled + u * length
        travelled += length
    return best_arc


def predict_pose(o: ObstaclePrediction, t: float) -> tuple[np.ndarray, float]:
    """Position and yaw of *o* at time *t* >= 0."""
    if t < 0:
        raise ValueError(f"prediction time must be non-negative, got {t}")
    arc = o.arc_length(t)
    if o.route is None:
        heading = np.array([math.cos(o.yaw), math.sin(o.yaw)])
        return o.position + arc * heading, o.yaw
    return _route_pose(o.route, _route_offset(o.route, o.position) + arc)


def footprint(o: ObstaclePrediction, t: float, margin: tuple[float, float] = (0.0, 0.0)) -> ConvexPolygon:
    """Obstacle rectangle at *t*, grown by *margin* (longitudinal, lateral) on each side."""
    center, yaw = predict_pose(o, t)
    return ConvexPolygon(
        rectangle_vertices(center, yaw, o.length + 2.0 * margin[0], o.width + 2.0 * margin[1])
    )


def occupancy_interval(o: ObstaclePrediction, region: Polytope, horizon: float,
                       margin: tuple[float, float] = (0.0, 0.0)) -> tuple[float, float] | None:
    """First and last times in [0, horizon] at which the inflated footprint meets *region*.

    Sampled every 10 ms, then refined by bisection to 1 ms. The returned
    bounds are the outer ends of the refined brackets.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    polygon = region.as_polygon()

    def occupied(t: float) -> bool:
        return intersects(footprint(o, t, margin), polygon)

    times = np.linspace(0.0, horizon, int(math.ceil(horizon / SAMPLE_STEP)) + 1)
    hits = np.array([occupied(float(t)) for t in times])
    if not hits.any():
        return None
    first, last = int(np.argmax(hits)), int(len(hits) - 1 - np.argmax(hits[::-1]))

    t_in = 0.0
    if first > 0:
        lo, hi = float(times[first - 1]), float(times[first])
        while hi - lo > REFINE_STEP:
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if occupied(mid) else (mid, hi)
        t_in = lo
    t_out = horizon
    if last < len(times) - 1:
        lo, hi = float(times[last]), float(times[last + 1])
        while hi - lo > REFINE_STEP:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if occupied(mid) else (lo, mid)
        t_out = hi
    return t_in, t_out


# ====================================================================
# Windows
# ====================================================================

def merge_windows(windows: Iterable[TimingWindow]) -> dict[str, TimingWindow]:
    merged: dict[str, TimingWindow] = {}
    for w in windows:
        merged[w.vertex] = merged[w.vertex].merge(w) if w.vertex in merged else w
    return merged


def separation_windows(obstacles: Sequence[ObstaclePrediction], regions: Mapping[str, Polytope],
                       horizon: float, margin: tuple[float, float]) -> list[TimingWindow]:
    out = []
    for o in obstacles:
        for vertex, polytope in regions.items():
            mode = o.separation_for(vertex)
            if mode == "ignore":
                continue
            interval = occupancy_interval(o, polytope, horizon, margin)
            if interval is None:
                continue
            t_in, t_out = interval
            logger.info(
                "Obstacle %s occupies %s during [%.3f, %.3f] s; ego must %s",
                o.id, vertex, t_in, t_out, mode.replace("_", " "),
            )
            source = f"{o.id}:{mode}"
            if mode == "exit_before":
                out.append(TimingWindow(vertex, exit_max=t_in, sources=(source,)))
            else:
                out.append(TimingWindow(vertex, entry_min=t_out, sources=(source,)))
    return out


def timing_windows(scenario: Scenario) -> list[TimingWindow]:
    """Pinned windows merged with the separation bounds of every dynamic obstacle.

    Returns one merged window per constrained vertex, in region order.
    """
    margin = (0.5 * scenario.ego.length, 0.5 * scenario.ego.width)
    regions = {r.id: r.polytope for r in scenario.regions}
    derived = separation_windows(scenario.dynamic_obstacles, regions, scenario.limits.t_max, margin)
    merged = merge_windows(list(scenario.windows) + derived)
    return [merged[r.id] for r in scenario.regions if r.id in merged]
