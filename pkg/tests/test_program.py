"""Tests for path-program assembly, extraction and the cost model."""

from dataclasses import replace

import numpy as np
import pytest

from gcs_planner.errors import ExtractionError
from gcs_planner.geometry import Polytope, contains, unit_ball_facets
from gcs_planner.lp import LPStatus, elastic_residuals, solve_lp
from gcs_planner.program import (
    CONSTRAINT_FAMILIES,
    CostWeights,
    Limits,
    ProgramContext,
    VertexData,
    assemble_path_program,
    extract,
    gluing_residual,
    variables_per_vertex,
)
from gcs_planner.timing import TimingWindow


def _single_region_context(**limits) -> ProgramContext:
    region = Polytope.from_box(-1.0, 6.0, -3.0, 3.0)
    return ProgramContext(
        vertices={"R": VertexData("R", region, np.array([1.0, 0.0]))},
        start=np.array([0.0, 0.0]),
        start_velocity=np.array([1.0, 0.0]),
        goal=Polytope.from_box(4.5, 5.5, -0.5, 0.5),
        goal_velocity=np.array([1.0, 0.0]),
        limits=Limits(**{"v_min": 0.5, "v_max": 3.0, **limits}),
        weights=CostWeights(),
        facets=unit_ball_facets(16),
        degree=6,
    )


def _solve(path, ctx):
    pp = assemble_path_program(path, ctx)
    sol = solve_lp(pp.program)
    assert sol.optimal, sol.message
    return pp, sol


def test_variables_per_vertex():
    assert variables_per_vertex(6) == 39
    pp = assemble_path_program(["R"], _single_region_context())
    assert pp.program.n_vars == 39
    assert pp.label == "R"


def test_straight_run_costs_nothing():
    pp, sol = _solve(["R"], _single_region_context())
    assert sol.objective == pytest.approx(0.0, abs=1e-7)
    (seg,) = extract(sol.x, pp)
    np.testing.assert_allclose(seg.spatial.control_points[:, 1], 0.0, atol=1e-6)
    np.testing.assert_allclose(seg.spatial.control_points[0], [0.0, 0.0], atol=1e-9)
    assert seg.start_time == pytest.approx(0.0, abs=1e-9)


def test_extracted_segment_honours_constraints():
    ctx = _single_region_context()
    pp, sol = _solve(["R"], ctx)
    (seg,) = extract(sol.x, pp)
    points = seg.spatial.control_points
    assert all(contains(ctx.vertices["R"].polytope, p, tol=1e-7) for p in points)
    assert contains(ctx.goal, points[-1], tol=1e-7)
    steps = np.diff(seg.temporal.taus)
    assert np.all(steps >= ctx.min_gap - 1e-7)
    assert seg.end_time <= ctx.limits.t_max + 1e-7
    speeds = np.array([ctx.facets.norm(d) for d in np.diff(points, axis=0)]) / steps
    assert np.all(speeds <= ctx.limits.v_max + 1e-6)
    assert pp.program.max_violation(sol.x) < 1e-7


def test_short_horizon_is_infeasible():
    pp = assemble_path_program(["R"], _single_region_context(t_max=1.0))
    assert solve_lp(pp.program).status is LPStatus.INFEASIBLE
    residuals = elastic_residuals(pp.program)
    assert residuals
    assert set(residuals) <= set(CONSTRAINT_FAMILIES)


def test_entry_window_rejects_late_start():
    ctx = _single_region_context()
    data = ctx.vertices["R"]
    windowed = replace(ctx, vertices={"R": replace(data, window=TimingWindow("R", entry_min=0.5))})
    pp = assemble_path_program(["R"], windowed)
    assert solve_lp(pp.program).status is LPStatus.INFEASIBLE


def test_exit_window_is_respected():
    ctx = _single_region_context()
    data = ctx.vertices["R"]
    windowed = replace(ctx, vertices={"R": replace(data, window=TimingWindow("R", exit_max=3.0))})
    pp, sol = _solve(["R"], windowed)
    (seg,) = extract(sol.x, pp)
    assert seg.end_time <= 3.0 + 1e-7


def test_two_region_chain_is_glued(chain_scenario):
    ctx = chain_scenario.program_context()
    pp, sol = _solve(["A", "B"], ctx)
    segments = extract(sol.x, pp)
    assert len(segments) == 2
    assert gluing_residual(segments) <= 1e-6
    assert segments[1].start_time == pytest.approx(segments[0].end_time, abs=1e-7)
    assert contains(ctx.goal, segments[1].spatial.control_points[-1], tol=1e-7)


def test_steady_start_leaves_on_a_straight_line():
    ctx = replace(_single_region_context(), goal=Polytope.from_box(4.5, 5.5, 1.5, 2.0))
    free_pp, free_sol = _solve(["R"], ctx)
    steady = replace(ctx, steady_start=True)
    pp, sol = _solve(["R"], steady)
    assert pp.program.n_eq == free_pp.program.n_eq + 2
    (seg,) = extract(sol.x, pp)
    # zero lateral second and third differences keep P0..P3 on the start heading
    np.testing.assert_allclose(seg.spatial.control_points[:4, 1], 0.0, atol=1e-6)
    assert sol.objective >= free_sol.objective - 1e-7


def test_extract_rejects_flat_time_scaling():
    pp = assemble_path_program(["R"], _single_region_context())
    with pytest.raises(ExtractionError):
        extract(np.zeros(pp.program.n_vars), pp)


def test_degree_below_four_is_rejected():
    ctx = replace(_single_region_context(), degree=3)
    with pytest.raises(ValueError):
        assemble_path_program(["R"], ctx)


def test_empty_path_is_rejected():
    with pytest.raises(ValueError):
        assemble_path_program([], _single_region_context())


def test_limits_validation():
    with pytest.raises(ValueError):
        Limits(v_min=5.0, v_max=5.0)
    with pytest.raises(ValueError):
        Limits(h_prime_min=0.0)
    with pytest.raises(ValueError):
        Limits(max_heading=2.0)


def test_cost_weights_validation():
    assert CostWeights((1, 0, 2, 0)).alpha == (1.0, 0.0, 2.0, 0.0)
    with pytest.raises(ValueError):
        CostWeights((1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        CostWeights((0.0, 0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        CostWeights((1.0, -1.0, 1.0, 1.0))
