"""Linear programs over Bézier control points.

Each region vertex v on a path carries spatial control points P_{l,v} and
time-scaling control points tau_{l,v}, l = 0..m. The path program keeps them
inside the region, orders them in time, bounds their speed through the
facet norm, glues consecutive segments up to the third difference, and fixes
the boundary states. The smoothness objective uses epigraph variables so the
whole problem stays linear.

The lifted relaxation reuses the same per-vertex blocks: every edge holds a
tail copy and a head copy, each homogenized by the edge's flow y_e.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from gcs_planner.bezier import BezierCurve, TimeScaling, TrajectorySegment
from gcs_planner.errors import BezierError, ExtractionError
from gcs_planner.geometry import Polytope, UnitBallFacets
from gcs_planner.lp import LinearProgram, ProgramBuilder
from gcs_planner.timing import TimingWindow

logger = logging.getLogger(__name__)

CONSTRAINT_FAMILIES = (
    "containment",
    "timing",
    "velocity",
    "min_speed",
    "continuity",
    "boundary_start",
    "boundary_goal",
    "windows",
)

MONOTONE_TOL = 1e-7
GLUING_TOL = 1e-6

# Forward-difference stencils, lowest index first.
_STENCILS = {
    0: (1.0,),
    1: (-1.0, 1.0),
    2: (1.0, -2.0, 1.0),
    3: (-1.0, 3.0, -3.0, 1.0),
}


@dataclass(frozen=True)
class CostWeights:
    """Weights on the second and third differences of P, then of tau."""

    alpha: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != 4:
            raise ValueError("cost weights need exactly four entries")
        if any(not math.isfinite(a) or a < 0 for a in alpha):
            raise ValueError("cost weights must be finite and non-negative")
        if not any(alpha):
            raise ValueError("at least one cost weight must be positive")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class Limits:
    v_min: float = 0.0
    v_max: float = 20.0
    h_prime_min: float = 0.05
    t_max: float = 10.0
    v_floor: float = 0.5
    max_heading: float | None = None

    def __post_init__(self):
        if not 0 <= self.v_min < self.v_max:
            raise ValueError(f"need 0 <= v_min < v_max, got {self.v_min} and {self.v_max}")
        if not self.h_prime_min > 0:
            raise ValueError("h_prime_min must be positive")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.v_floor > 0:
            raise ValueError("v_floor must be positive")
        if self.max_heading is not None and not 0 < self.max_heading < math.pi / 2:
            raise ValueError("max_heading must lie strictly between 0 and pi/2")


@dataclass(frozen=True, eq=False)
class VertexData:
    id: str
    polytope: Polytope
    direction: np.ndarray
    window: TimingWindow | None = None


@dataclass(frozen=True, eq=False)
class ProgramContext:
    """Everything a program needs besides the vertex path itself."""

    vertices: Mapping[str, VertexData]
    start: np.ndarray
    start_velocity: np.ndarray
    goal: Polytope
    goal_velocity: np.ndarray
    limits: Limits
    weights: CostWeights
    facets: UnitBallFacets
    degree: int
    steady_start: bool = False

    @property
    def min_gap(self) -> float:
        """Smallest allowed step between consecutive tau control points."""
        return self.limits.h_prime_min / self.degree


@dataclass(frozen=True, eq=False)
class VertexBlock:
    vertex: str
    p: np.ndarray
    tau: np.ndarray


@dataclass(frozen=True, eq=False)
class PathProgram:
    path: tuple[str, ...]
    program: LinearProgram
    blocks: tuple[VertexBlock, ...]
    degree: int
    min_gap: float

    @property
    def label(self) -> str:
        return ">".join(self.path)


@dataclass(frozen=True, eq=False)
class RelaxationProgram:
    program: LinearProgram
    edges: tuple[tuple[str, str], ...]
    flow_index: np.ndarray
    # tail and head copies per edge, scaled by its flow
    copies: tuple[tuple[VertexBlock, VertexBlock], ...] = ()


def variables_per_vertex(degree: int) -> int:
    """Control points plus epigraph variables for one vertex."""
    return 3 * (degree + 1) + 2 * (2 * degree - 3)


# ====================================================================
# Building blocks
# ====================================================================

def _add_block(builder: ProgramBuilder, vertex: str, ctx: ProgramContext, with_cost: bool) -> VertexBlock:
    m = ctx.degree
    p = builder.add_variables(2 * (m + 1)).reshape(m + 1, 2)
    tau = builder.add_variables(m + 1, lower=0.0)
    block = VertexBlock(vertex, p, tau)
    if with_cost:
        _add_smoothness_cost(builder, block, ctx)
    return block


def _add_smoothness_cost(builder: ProgramBuilder, block: VertexBlock, ctx: ProgramContext) -> None:
    a1, a2, a3, a4 = ctx.weights.alpha
    m = ctx.degree
    for order, alpha_p, alpha_t in ((2, a1, a3), (3, a2, a4)):
        stencil = _STENCILS[order]
        for l in range(m + 1 - order):
            (e,) = builder.add_variables(1, lower=0.0, cost=alpha_p)
            for a in ctx.facets.directions:
                terms = [
                    (block.p[l + j, c], stencil[j] * a[c])
                    for j in range(order + 1)
                    for c in (0, 1)
                ]
                builder.add_le(terms + [(e, -1.0)], 0.0, "cost")
            (t,) = builder.add_variables(1, lower=0.0, cost=alpha_t)
            tau_terms = [(block.tau[l + j], stencil[j]) for j in range(order + 1)]
            builder.add_le(tau_terms + [(t, -1.0)], 0.0, "cost")
            builder.add_le([(i, -v) for i, v in tau_terms] + [(t, -1.0)], 0.0, "cost")


def _step_terms(block: VertexBlock, l: int, direction) -> list[tuple[int, float]]:
    """Terms of direction @ (P_{l+1} - P_l)."""
    return [
        (block.p[l + 1, 0], direction[0]),
        (block.p[l + 1, 1], direction[1]),
        (block.p[l, 0], -direction[0]),
        (block.p[l, 1], -direction[1]),
    ]


def _add_vertex_constraints(builder: ProgramBuilder, block: VertexBlock, data: VertexData,
                            ctx: ProgramContext, scale: int | None = None) -> None:
    m = ctx.degree
    limits = ctx.limits
    tau = block.tau

    for l in range(m + 1):
        for a, b in zip(data.polytope.normals, data.polytope.offsets):
            builder.add_le([(block.p[l, 0], a[0]), (block.p[l, 1], a[1])], b, "containment", scale=scale)

    for l in range(m):
        builder.add_le([(tau[l], 1.0), (tau[l + 1], -1.0)], -ctx.min_gap, "timing", scale=scale)
    builder.add_le([(tau[m], 1.0)], limits.t_max, "timing", scale=scale)

    d = data.direction
    normal = np.array([-d[1], d[0]])
    for l in range(m):
        dt = [(tau[l + 1], 1.0), (tau[l], -1.0)]
        for a in ctx.facets.directions:
            builder.add_le(_step_terms(block, l, a) + [(i, -limits.v_max * v) for i, v in dt], 0.0, "velocity")
        if limits.v_min > 0:
            builder.add_le(
                _step_terms(block, l, -d) + [(i, limits.v_min * v) for i, v in dt], 0.0, "min_speed"
            )
        if limits.max_heading is not None:
            slope = math.tan(limits.max_heading)
            for side in (normal, -normal):
                builder.add_le(_step_terms(block, l, side - slope * d), 0.0, "velocity")

    w = data.window
    if w is None:
        return
    if w.entry_min is not None:
        builder.add_ge([(tau[0], 1.0)], w.entry_min, "windows", scale=scale)
    if w.entry_max is not None:
        builder.add_le([(tau[0], 1.0)], w.entry_max, "windows", scale=scale)
    if w.exit_min is not None:
        builder.add_ge([(tau[m], 1.0)], w.exit_min, "windows", scale=scale)
    if w.exit_max is not None:
        builder.add_le([(tau[m], 1.0)], w.exit_max, "windows", scale=scale)
    if w.max_dwell is not None:
        builder.add_le([(tau[m], 1.0), (tau[0], -1.0)], w.max_dwell, "windows", scale=scale)


def _add_gluing(builder: ProgramBuilder, tail: VertexBlock, head: VertexBlock, m: int) -> None:
    """Equal position and first three differences of P and tau at the junction."""
    for k, stencil in _STENCILS.items():
        columns = [(tail.p[:, 0], head.p[:, 0]), (tail.p[:, 1], head.p[:, 1]), (tail.tau, head.tau)]
        for tail_idx, head_idx in columns:
            terms = [(tail_idx[m - k + j], c) for j, c in enumerate(stencil)]
            terms += [(head_idx[j], -c) for j, c in enumerate(stencil)]
            builder.add_eq(terms, 0.0, "continuity")


def _velocity_ratio_terms(block: VertexBlock, hi: int, lo: int, velocity, c: int) -> list[tuple[int, float]]:
    """Terms of (P_hi - P_lo)[c] - velocity[c] * (tau_hi - tau_lo)."""
    return [
        (block.p[hi, c], 1.0),
        (block.p[lo, c], -1.0),
        (block.tau[hi], -velocity[c]),
        (block.tau[lo], velocity[c]),
    ]


def _add_start(builder: ProgramBuilder, block: VertexBlock, ctx: ProgramContext,
               scale: int | None = None) -> None:
    for c in (0, 1):
        builder.add_eq([(block.p[0, c], 1.0)], ctx.start[c], "boundary_start", scale=scale)
        builder.add_eq(_velocity_ratio_terms(block, 1, 0, ctx.start_velocity, c), 0.0, "boundary_start")
    builder.add_eq([(block.tau[0], 1.0)], 0.0, "timing")
    if ctx.steady_start:
        _add_steady_start(builder, block, ctx.start_velocity)


def _add_steady_start(builder: ProgramBuilder, block: VertexBlock, velocity) -> None:
    """Zero curvature and curvature rate at the start.

    The second and third control-point differences get no component across
    the start velocity, so the curve leaves the start on a straight line.
    """
    normal = np.array([-velocity[1], velocity[0]], dtype=float)
    if not np.any(normal):
        return
    for coeffs in ((1.0, -2.0, 1.0, 0.0), (-1.0, 3.0, -3.0, 1.0)):
        terms = []
        for l, k in enumerate(coeffs):
            if k:
                terms += [(block.p[l, 0], k * normal[0]), (block.p[l, 1], k * normal[1])]
        builder.add_eq(terms, 0.0, "boundary_start")


def _add_goal(builder: ProgramBuilder, block: VertexBlock, ctx: ProgramContext,
              scale: int | None = None) -> None:
    m = ctx.degree
    for a, b in zip(ctx.goal.normals, ctx.goal.offsets):
        builder.add_le([(block.p[m, 0], a[0]), (block.p[m, 1], a[1])], b, "boundary_goal", scale=scale)
    for c in (0, 1):
        builder.add_eq(_velocity_ratio_terms(block, m, m - 1, ctx.goal_velocity, c), 0.0, "boundary_goal")


def _check_context(ctx: ProgramContext) -> None:
    if ctx.degree < 4:
        raise ValueError(f"curve degree must be at least 4 for third-difference gluing, got {ctx.degree}")


# ====================================================================
# Path programs
# ====================================================================

def assemble_path_program(path: Sequence[str], ctx: ProgramContext) -> PathProgram:
    """Program for one fixed vertex path; its optimum is the path's cost."""
    if not path:
        raise ValueError("cannot assemble a program for an empty path")
    _check_context(ctx)
    builder = ProgramBuilder()
    blocks = []
    for vertex in path:
        block = _add_block(builder, vertex, ctx, with_cost=True)
        _add_vertex_constraints(builder, block, ctx.vertices[vertex], ctx)
        blocks.append(block)
    for tail, head in zip(blocks, blocks[1:]):
        _add_gluing(builder, tail, head, ctx.degree)
    _add_start(builder, blocks[0], ctx)
    _add_goal(builder, blocks[-1], ctx)

    program = builder.build()
    logger.debug(
        "Path %s: %d variables, %d inequalities, %d equalities",
        ">".join(path), program.n_vars, program.n_ub, program.n_eq,
    )
    return PathProgram(tuple(path), program, tuple(blocks), ctx.degree, ctx.min_gap)


def extract(x: np.ndarray, pp: PathProgram) -> list[TrajectorySegment]:
    """Trajectory segments from a solved path program.

    Monotonicity and gluing breaches beyond solver tolerance raise
    :class:`ExtractionError` instead of being clamped.
    """
    x = np.asarray(x, dtype=float)
    segments = []
    for block in pp.blocks:
        taus = x[block.tau]
        breach = float(np.max(pp.min_gap - np.diff(taus)))
        if breach > MONOTONE_TOL:
            raise ExtractionError(
                f"time scaling of {block.vertex} undercuts the minimum slope by {breach:.3g} s"
            )
        try:
            segments.append(TrajectorySegment(BezierCurve(x[block.p]), TimeScaling.from_times(taus)))
        except BezierError as exc:
            raise ExtractionError(f"segment for {block.vertex} is invalid: {exc}") from exc
    residual = gluing_residual(segments)
    if residual > GLUING_TOL:
        raise ExtractionError(f"junction mismatch {residual:.3g} exceeds {GLUING_TOL:g}")
    return segments


def gluing_residual(segments: Sequence[TrajectorySegment]) -> float:
    """Largest mismatch of position and first three differences across all junctions."""
    worst = 0.0
    for a, b in zip(segments, segments[1:]):
        for tail, head in ((a.spatial.control_points, b.spatial.control_points),
                           (a.temporal.curve.control_points, b.temporal.curve.control_points)):
            m = len(tail) - 1
            for k, stencil in _STENCILS.items():
                left = sum(c * tail[m - k + j] for j, c in enumerate(stencil))
                right = sum(c * head[j] for j, c in enumerate(stencil))
                worst = max(worst, float(np.max(np.abs(left - right))))
    return worst


# ====================================================================
# Lifted relaxation
# ====================================================================

def assemble_relaxation(vertices: Sequence[str], edges: Sequence[tuple[str, str]], source: str,
                        target: str, ctx: ProgramContext) -> RelaxationProgram:
    """Convex relaxation of the shortest-path problem over the region graph.

    Flows y_e lie in [0, 1]. Vertex costs are attributed to the tail copy of
    each edge and, for the target, to the head copies of its incoming edges.
    """
    _check_context(ctx)
    m = ctx.degree
    builder = ProgramBuilder()
    y = builder.add_variables(len(edges), lower=0.0, upper=1.0)
    outgoing: dict[str, list[tuple[int, VertexBlock]]] = defaultdict(list)
    incoming: dict[str, list[tuple[int, VertexBlock]]] = defaultdict(list)
    copies = []

    for i, (u, v) in enumerate(edges):
        scale = int(y[i])
        tail = _add_block(builder, u, ctx, with_cost=True)
        _add_vertex_constraints(builder, tail, ctx.vertices[u], ctx, scale=scale)
        head = _add_block(builder, v, ctx, with_cost=(v == target))
        _add_vertex_constraints(builder, head, ctx.vertices[v], ctx, scale=scale)
        _add_gluing(builder, tail, head, m)
        if u == source:
            _add_start(builder, tail, ctx, scale=scale)
        if v == target:
            _add_goal(builder, head, ctx, scale=scale)
        copies.append((tail, head))
        outgoing[u].append((i, tail))
        incoming[v].append((i, head))

    for v in vertices:
        out_flow = [(y[i], 1.0) for i, _ in outgoing[v]]
        in_flow = [(y[i], 1.0) for i, _ in incoming[v]]
        if v == source:
            builder.add_eq(out_flow + [(j, -c) for j, c in in_flow], 1.0, "flow")
            continue
        if v == target:
            builder.add_eq(in_flow + [(j, -c) for j, c in out_flow], 1.0, "flow")
            continue
        builder.add_eq(out_flow + [(j, -c) for j, c in in_flow], 0.0, "flow")
        builder.add_le(in_flow, 1.0, "flow")
        # The copies entering and leaving v describe the same segment.
        for l in range(m + 1):
            for c in (0, 1):
                terms = [(b.p[l, c], 1.0) for _, b in outgoing[v]] + [(b.p[l, c], -1.0) for _, b in incoming[v]]
                builder.add_eq(terms, 0.0, "continuity")
            terms = [(b.tau[l], 1.0) for _, b in outgoing[v]] + [(b.tau[l], -1.0) for _, b in incoming[v]]
            builder.add_eq(terms, 0.0, "continuity")

    program = builder.build()
    logger.debug(
        "Relaxation over %d edges: %d variables, %d inequalities, %d equalities",
        len(edges), program.n_vars, program.n_ub, program.n_eq,
    )
    return RelaxationProgram(program, tuple(edges), y, tuple(copies))
