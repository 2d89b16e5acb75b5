"""Formulation-blind audit of a planned trajectory.

The audit only looks at the emitted segments and the scenario. It samples
the composed trajectory on a uniform grid and measures obstacle clearance,
speed, acceleration components and steering, then checks junction
continuity, timing windows, region containment and the goal state.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gcs_planner.bezier import (
    Kinematics,
    TrajectorySegment,
    accel_components,
    derivatives_at,
    invert_time,
    sample_trajectory,
    segment_index,
)
from gcs_planner.errors import BezierError, FlatnessError
from gcs_planner.flatness import RolloutReport, flat_reconstruct_many, rollout_consistency
from gcs_planner.geometry import contains, oriented_rectangle, polygon_distance, unit_ball_facets
from gcs_planner.scenario import Scenario
from gcs_planner.timing import footprint

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "x", "y", "v", "a_T", "a_N", "delta", "min_dist")
JUNCTION_TOL = 1e-6
CONTAINMENT_TOL = 1e-6
WINDOW_TOL = 1e-6
GOAL_SPEED_TOL = 0.2
ROLLOUT_DT = 1e-3


@dataclass(frozen=True)
class WindowCheck:
    vertex: str
    entry: float
    exit: float
    satisfied: bool


@dataclass(frozen=True)
class ContainmentCheck:
    vertex: str
    worst_violation: float

    @property
    def satisfied(self) -> bool:
        return self.worst_violation <= CONTAINMENT_TOL


@dataclass
class FeasibilityReport:
    dt: float
    times: np.ndarray
    positions: np.ndarray
    speeds: np.ndarray
    accel_tangential: np.ndarray
    accel_normal: np.ndarray
    steering: np.ndarray
    distances: np.ndarray
    min_distance: float
    min_distance_time: float
    closest_obstacle: str | None
    junction_jumps: list[dict[str, float]] = field(default_factory=list)
    windows: list[WindowCheck] = field(default_factory=list)
    containment: list[ContainmentCheck] = field(default_factory=list)
    speed_violations: list[tuple[float, float]] = field(default_factory=list)
    goal_reached: bool = True
    goal_speed_error: float = 0.0
    low_speed_samples: int = 0
    rollout: RolloutReport | None = None
    failures: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("audit step must be positive")

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def speed_range(self) -> tuple[float, float]:
        return float(self.speeds.min()), float(self.speeds.max())

    @property
    def max_accel_tangential(self) -> float:
        return float(np.nanmax(np.abs(self.accel_tangential)))

    @property
    def max_accel_normal(self) -> float:
        return float(np.nanmax(np.abs(self.accel_normal)))

    @property
    def max_steering(self) -> float | None:
        if np.all(np.isnan(self.steering)):
            return None
        return float(np.nanmax(np.abs(self.steering)))

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            # no obstacles leaves the distance infinite, which JSON cannot hold
            "min_distance": self.min_distance if math.isfinite(self.min_distance) else None,
            "min_distance_time": self.min_distance_time,
            "closest_obstacle": self.closest_obstacle,
            "speed_range": list(self.speed_range),
            "max_accel_tangential": self.max_accel_tangential,
            "max_accel_normal": self.max_accel_normal,
            "max_steering": self.max_steering,
            "goal_reached": self.goal_reached,
            "goal_speed_error": self.goal_speed_error,
            "rollout_max_deviation": self.rollout.max_deviation if self.rollout else None,
            "failures": list(self.failures),
        }


def _grid(t0: float, t1: float, dt: float) -> np.ndarray:
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    return t0 + dt * np.arange(n)


def _junction_jumps(segments: Sequence[TrajectorySegment]) -> list[dict[str, float]]:
    jumps = []
    for a, b in zip(segments, segments[1:]):
        left, right = derivatives_at(a, 1.0), derivatives_at(b, 0.0)
        jumps.append({
            name: float(np.max(np.abs(getattr(left, name) - getattr(right, name))))
            for name in ("position", "velocity", "acceleration", "jerk")
        })
        scale = {
            name: max(1.0, float(np.max(np.abs(getattr(left, name)))))
            for name in ("position", "velocity", "acceleration", "jerk")
        }
        jumps[-1]["relative"] = max(jumps[-1][name] / scale[name] for name in scale)
    return jumps


def _accel_profile(segments: Sequence[TrajectorySegment], times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tangential and normal acceleration per sample; NaN where the tangent vanishes."""
    a_t = np.full(len(times), np.nan)
    a_n = np.full(len(times), np.nan)
    for i, t in enumerate(times):
        seg = segments[segment_index(segments, float(t))]
        s = invert_time(seg.temporal, min(max(float(t), seg.start_time), seg.end_time))
        try:
            a_t[i], a_n[i] = accel_components(seg, s)
        except BezierError:
            continue
    return a_t, a_n


def body_headings(k: Kinematics, scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """Body yaw and steering angle per sample from the flat reconstruction.

    Below ``v_floor`` the steering is NaN and the yaw holds its last
    reconstructed value, starting from the ego's initial yaw.
    """
    n = len(k.velocity)
    speeds = np.hypot(k.velocity[:, 0], k.velocity[:, 1])
    valid = speeds >= scenario.limits.v_floor
    steering = np.full(n, np.nan)
    flat_psi = np.zeros(n)
    if valid.any():
        flat = flat_reconstruct_many(k.velocity[valid], k.acceleration[valid], k.jerk[valid],
                                     scenario.vehicle, scenario.limits.v_floor)
        steering[valid] = flat["delta"]
        flat_psi[valid] = flat["psi"]
    psi = np.empty(n)
    last = scenario.ego.yaw
    for i in range(n):
        if valid[i]:
            last = flat_psi[i]
        psi[i] = last
    return psi, steering


def audit(plan, scenario: Scenario, dt: float | None = None) -> FeasibilityReport:
    """Audit the trajectory of *plan* (a PlanResult or anything with ``path`` and ``segments``)."""
    dt = scenario.settings.audit_dt if dt is None else dt
    if not 0 < dt <= 0.1:
        raise ValueError(f"audit step must lie in (0, 0.1], got {dt}")
    segments = list(plan.segments)
    path = list(plan.path)
    times = _grid(segments[0].start_time, segments[-1].end_time, dt)
    k = sample_trajectory(segments, times)
    speeds = np.hypot(k.velocity[:, 0], k.velocity[:, 1])

    a_t, a_n = _accel_profile(segments, times)

    v_floor = scenario.limits.v_floor
    psi, steering = body_headings(k, scenario)
    low = int((speeds < v_floor).sum())
    if low:
        logger.warning("%d samples below v_floor=%.2f m/s; steering left blank there", low, v_floor)

    distances = np.full(len(times), np.inf)
    closest: list[str | None] = [None] * len(times)
    for i, t in enumerate(times):
        ego = oriented_rectangle(k.position[i], psi[i], scenario.ego.length, scenario.ego.width)
        for s in scenario.static_obstacles:
            d = polygon_distance(ego, s.polygon)
            if d < distances[i]:
                distances[i], closest[i] = d, s.id
        for o in scenario.dynamic_obstacles:
            d = polygon_distance(ego, footprint(o, float(t)))
            if d < distances[i]:
                distances[i], closest[i] = d, o.id
    i_min = int(np.argmin(distances))

    report = FeasibilityReport(
        dt=dt,
        times=times,
        positions=k.position,
        speeds=speeds,
        accel_tangential=a_t,
        accel_normal=a_n,
        steering=steering,
        distances=distances,
        min_distance=float(distances[i_min]),
        min_distance_time=float(times[i_min]),
        closest_obstacle=closest[i_min],
        low_speed_samples=low,
    )
    failures = report.failures
    if report.min_distance <= 0.0:
        failures.append(
            f"collision with {report.closest_obstacle} at t={report.min_distance_time:.3f} s"
        )

    bound = scenario.limits.v_max * unit_ball_facets(scenario.settings.facets).conservativeness
    report.speed_violations = [(float(t), float(v)) for t, v in zip(times, speeds) if v > bound + 1e-9]
    if report.speed_violations:
        failures.append(f"{len(report.speed_violations)} samples exceed the speed bound {bound:.3f} m/s")

    report.junction_jumps = _junction_jumps(segments)
    for j, jump in enumerate(report.junction_jumps):
        if jump["relative"] > JUNCTION_TOL:
            failures.append(f"junction {j} is discontinuous (relative jump {jump['relative']:.3g})")

    windows = {w.vertex: w for w in scenario.timing}
    for vertex, seg in zip(path, segments):
        w = windows.get(vertex)
        if w is None:
            continue
        entry, exit_ = seg.start_time, seg.end_time
        ok = all((
            w.entry_min is None or entry >= w.entry_min - WINDOW_TOL,
            w.entry_max is None or entry <= w.entry_max + WINDOW_TOL,
            w.exit_min is None or exit_ >= w.exit_min - WINDOW_TOL,
            w.exit_max is None or exit_ <= w.exit_max + WINDOW_TOL,
            w.max_dwell is None or exit_ - entry <= w.max_dwell + WINDOW_TOL,
        ))
        report.windows.append(WindowCheck(vertex, entry, exit_, ok))
        if not ok:
            failures.append(f"timing window of {vertex} violated (entry {entry:.3f} s, exit {exit_:.3f} s)")

    for vertex, seg in zip(path, segments):
        region = scenario.region(vertex).polytope
        pts = seg.spatial.control_points
        worst = float(np.max(pts @ region.normals.T - region.offsets))
        report.containment.append(ContainmentCheck(vertex, max(worst, 0.0)))
        if worst > CONTAINMENT_TOL:
            failures.append(f"control points leave region {vertex} by {worst:.3g} m")

    end = derivatives_at(segments[-1], 1.0)
    report.goal_reached = contains(scenario.goal.polytope, end.position, tol=CONTAINMENT_TOL)
    report.goal_speed_error = abs(float(np.linalg.norm(end.velocity)) - float(np.linalg.norm(scenario.goal.velocity)))
    if not report.goal_reached:
        failures.append("final position lies outside the goal region")
    if report.goal_speed_error > GOAL_SPEED_TOL:
        failures.append(f"final speed is off by {report.goal_speed_error:.3f} m/s")

    try:
        report.rollout = rollout_consistency(segments, scenario.vehicle, ROLLOUT_DT, v_floor)
    except FlatnessError as exc:
        logger.warning("Rollout check skipped: %s", exc)

    logger.info(
        "Audit of %d samples: min distance %.3f m, %d failure(s)",
        len(times), report.min_distance, len(failures),
    )
    return report


def profile_csv(report: FeasibilityReport) -> str:
    """Per-sample profile table with a header row and 15 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i, t in enumerate(report.times):
        row = (
            t,
            report.positions[i, 0],
            report.positions[i, 1],
            report.speeds[i],
            report.accel_tangential[i],
            report.accel_normal[i],
            report.steering[i],
            report.distances[i],
        )
        writer.writerow([format(float(v), ".15g") for v in row])
    return buf.getvalue()
