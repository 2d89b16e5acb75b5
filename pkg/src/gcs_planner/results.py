"""Result files: plan JSON, profile CSV, trajectory SVG and wall-clock timings.

``result.json`` holds only deterministic content so that repeated runs with
the same configuration write identical bytes. Wall-clock timings go to
``timings.json`` next to it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from lxml import etree

from gcs_planner.bezier import BezierCurve, TimeScaling, TrajectorySegment, sample_trajectory
from gcs_planner.errors import ResultWriteError, ScenarioError
from gcs_planner.geometry import rectangle_vertices
from gcs_planner.planner import PlanResult
from gcs_planner.scenario import Scenario
from gcs_planner.timing import TimingWindow, footprint
from gcs_planner.verify import FeasibilityReport, body_headings, profile_csv

logger = logging.getLogger(__name__)

RESULT_FILE = "result.json"
PROFILE_FILE = "profile.csv"
SVG_FILE = "trajectory.svg"
TIMINGS_FILE = "timings.json"

SVG_NS = "http://www.w3.org/2000/svg"
PIXELS_PER_METER = 10.0
_MARGIN = 5.0


@dataclass(frozen=True)
class StoredResult:
    scenario: str
    path: tuple[str, ...]
    segments: list[TrajectorySegment]
    objective: float
    lower_bound: float | None


def _window_dict(w: TimingWindow) -> dict:
    return {
        "vertex": w.vertex,
        "entry_min": w.entry_min,
        "entry_max": w.entry_max,
        "exit_min": w.exit_min,
        "exit_max": w.exit_max,
        "max_dwell": w.max_dwell,
        "sources": list(w.sources),
    }


def result_to_dict(plan: PlanResult, report: FeasibilityReport | None = None) -> dict:
    return {
        "scenario": plan.scenario,
        "strategy": plan.strategy,
        "path": list(plan.path),
        "objective": plan.objective,
        "lower_bound": plan.lower_bound,
        "rounded_path": list(plan.rounded_path) if plan.rounded_path else None,
        "segments": [
            {
                "vertex": vertex,
                "control_points": seg.spatial.control_points.tolist(),
                "tau": seg.temporal.taus.tolist(),
            }
            for vertex, seg in zip(plan.path, plan.segments)
        ],
        "windows": [_window_dict(w) for w in plan.windows],
        "candidates": [
            {"path": list(c.path), "objective": c.objective, "diagnostics": c.diagnostics}
            for c in plan.candidates
        ],
        "audit": report.summary() if report is not None else None,
    }


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise ResultWriteError(path, exc) from exc


def write_result(plan: PlanResult, report: FeasibilityReport | None, out_dir: str | Path,
                 scenario: Scenario | None = None) -> dict[str, Path]:
    """Write result JSON, timings JSON and, when available, the CSV profile and SVG."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ResultWriteError(out_dir, exc) from exc

    written = {}
    path = out_dir / RESULT_FILE
    _write_text(path, json.dumps(result_to_dict(plan, report), indent=2) + "\n")
    written["result"] = path

    path = out_dir / TIMINGS_FILE
    _write_text(path, json.dumps({k: round(v, 6) for k, v in plan.timings.items()}, indent=2) + "\n")
    written["timings"] = path

    if report is not None:
        path = out_dir / PROFILE_FILE
        _write_text(path, profile_csv(report))
        written["profile"] = path
    if scenario is not None:
        path = out_dir / SVG_FILE
        try:
            render_svg(scenario, plan.segments, plan.path).write(
                str(path), pretty_print=True, xml_declaration=True, encoding="utf-8"
            )
        except OSError as exc:
            raise ResultWriteError(path, exc) from exc
        written["svg"] = path

    for name, p in written.items():
        logger.info("Wrote %s: %s", name, p)
    return written


def read_result(path: str | Path) -> StoredResult:
    """Load a result JSON back into trajectory segments."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Result file not found: {path}")
    try:
        with open(path) as f:
            doc = json.load(f)
        segments = [
            TrajectorySegment(BezierCurve(s["control_points"]), TimeScaling.from_times(s["tau"]))
            for s in doc["segments"]
        ]
        return StoredResult(
            scenario=doc["scenario"],
            path=tuple(s["vertex"] for s in doc["segments"]),
            segments=segments,
            objective=float(doc["objective"]),
            lower_bound=doc.get("lower_bound"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"malformed result document: {exc}", path=str(path), check="result") from exc


# ====================================================================
# SVG
# ====================================================================

class _Canvas:
    def __init__(self, xmin: float, xmax: float, ymin: float, ymax: float):
        self.xmin, self.ymax = xmin, ymax
        self.width = (xmax - xmin) * PIXELS_PER_METER
        self.height = (ymax - ymin) * PIXELS_PER_METER
        self.root = etree.Element(f"{{{SVG_NS}}}svg", nsmap={None: SVG_NS})
        self.root.set("width", f"{self.width:.0f}")
        self.root.set("height", f"{self.height:.0f}")
        self.root.set("viewBox", f"0 0 {self.width:.2f} {self.height:.2f}")

    def points(self, pts: np.ndarray) -> str:
        px = (pts[:, 0] - self.xmin) * PIXELS_PER_METER
        py = (self.ymax - pts[:, 1]) * PIXELS_PER_METER
        return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))

    def layer(self, name: str) -> etree._Element:
        return etree.SubElement(self.root, f"{{{SVG_NS}}}g", id=name)

    def polygon(self, parent, pts: np.ndarray, cls: str, fill: str, stroke: str = "none",
                opacity: float = 1.0, title: str | None = None) -> etree._Element:
        el = etree.SubElement(parent, f"{{{SVG_NS}}}polygon", points=self.points(pts))
        el.set("class", cls)
        el.set("fill", fill)
        el.set("stroke", stroke)
        el.set("fill-opacity", f"{opacity:g}")
        if title:
            etree.SubElement(el, f"{{{SVG_NS}}}title").text = title
        return el


def _lane_band(centerline: np.ndarray, width: float) -> list[np.ndarray]:
    bands = []
    for p, q in zip(centerline[:-1], centerline[1:]):
        d = q - p
        yaw = math.atan2(d[1], d[0])
        bands.append(rectangle_vertices(0.5 * (p + q), yaw, float(np.linalg.norm(d)), width))
    return bands


def _bounds(scenario: Scenario) -> tuple[float, float, float, float]:
    pts = [r.polytope.vertices() for r in scenario.regions]
    pts.append(scenario.goal.polytope.vertices())
    for lane in scenario.lanes:
        pts.extend(_lane_band(lane.centerline, lane.width))
    allpts = np.vstack(pts)
    lo, hi = allpts.min(axis=0) - _MARGIN, allpts.max(axis=0) + _MARGIN
    return lo[0], hi[0], lo[1], hi[1]


def snapshot_times(segments: Sequence[TrajectorySegment], step: float) -> np.ndarray:
    t0, t1 = segments[0].start_time, segments[-1].end_time
    return t0 + step * np.arange(int(math.floor((t1 - t0) / step + 1e-9)) + 1)


def render_svg(scenario: Scenario, segments: Sequence[TrajectorySegment],
               path: Sequence[str]) -> etree._ElementTree:
    """Top-down drawing: lanes, regions, goal, obstacles, snapshots and the planned path."""
    canvas = _Canvas(*_bounds(scenario))
    windows = {w.vertex for w in scenario.timing}

    lanes = canvas.layer("lanes")
    for lane in scenario.lanes:
        for band in _lane_band(lane.centerline, lane.width):
            canvas.polygon(lanes, band, "lane", "#d9d9d9", stroke="#ffffff")

    regions = canvas.layer("regions")
    for r in scenario.regions:
        transition = r.id in windows
        canvas.polygon(
            regions, r.polytope.vertices(), "region transition" if transition else "region",
            "#4caf50" if transition else "#90caf9", stroke="#1e88e5", opacity=0.3, title=r.id,
        )

    goal = canvas.layer("goal")
    canvas.polygon(goal, scenario.goal.polytope.vertices(), "goal", "#fdd835", opacity=0.5, title="goal")

    static = canvas.layer("static-obstacles")
    for s in scenario.static_obstacles:
        canvas.polygon(static, s.polygon.vertices, "obstacle", "#424242", title=s.id)

    times = snapshot_times(segments, scenario.settings.snapshot_dt)
    samples = sample_trajectory(segments, times)

    dynamic = canvas.layer("dynamic-obstacles")
    for o in scenario.dynamic_obstacles:
        for t in times:
            poly = footprint(o, float(t))
            if len(poly.vertices) >= 3:
                canvas.polygon(dynamic, poly.vertices, "dynamic", "#1565c0", opacity=0.4,
                               title=f"{o.id} t={t:.1f}s")

    ego = canvas.layer("ego")
    yaws, _ = body_headings(samples, scenario)
    for t, q, yaw in zip(times, samples.position, yaws):
        corners = rectangle_vertices(q, yaw, scenario.ego.length, scenario.ego.width)
        canvas.polygon(ego, corners, "ego", "#fb8c00", opacity=0.6, title=f"ego t={t:.1f}s")

    trace = sample_trajectory(segments, snapshot_times(segments, 0.05)).position
    line = etree.SubElement(canvas.layer("path"), f"{{{SVG_NS}}}polyline", points=canvas.points(trace))
    line.set("class", "path")
    line.set("fill", "none")
    line.set("stroke", "#c62828")
    line.set("stroke-width", "2")
    etree.SubElement(line, f"{{{SVG_NS}}}title").text = ">".join(path)
    return etree.ElementTree(canvas.root)
