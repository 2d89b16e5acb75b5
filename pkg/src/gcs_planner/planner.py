"""Top-level planning: choose a vertex path, solve its program, extract the trajectory.

Two strategies are available:

- enumerate: solve the program of every simple path and keep the cheapest.
- relax-round: solve the lifted flow relaxation, round the flows to one path
  and re-solve that path exactly.

``auto`` enumerates when the graph has few paths and relaxes otherwise;
``both`` runs the two and records whether they agree.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from gcs_planner.bezier import TrajectorySegment
from gcs_planner.errors import InfeasibleError, RoundingError
from gcs_planner.graph import DEFAULT_MAX_LEN, enumerate_paths, relax_solve, round_flows
from gcs_planner.lp import elastic_residuals, solve_lp
from gcs_planner.program import PathProgram, ProgramContext, assemble_path_program, extract
from gcs_planner.scenario import Scenario
from gcs_planner.timing import TimingWindow

logger = logging.getLogger(__name__)

STRATEGIES = ("auto", "enumerate", "relax-round", "both")


@dataclass(frozen=True)
class PlanOptions:
    strategy: str = "auto"
    max_len: int = DEFAULT_MAX_LEN
    enumerate_limit: int = 64
    workers: int = 1
    lp_method: str = "highs"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"Unknown strategy '{self.strategy}'. Choose from: {', '.join(STRATEGIES)}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass(frozen=True)
class PathOutcome:
    path: tuple[str, ...]
    index: int
    objective: float | None
    x: np.ndarray | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)
    program: PathProgram | None = None
    assembly_time: float = 0.0
    solve_time: float = 0.0

    @property
    def feasible(self) -> bool:
        return self.objective is not None

    @property
    def label(self) -> str:
        return ">".join(self.path)


@dataclass
class PlanResult:
    scenario: str
    path: tuple[str, ...]
    segments: list[TrajectorySegment]
    objective: float
    strategy: str
    lower_bound: float | None = None
    rounded_path: tuple[str, ...] | None = None
    candidates: list[PathOutcome] = field(default_factory=list)
    windows: tuple[TimingWindow, ...] = ()
    timings: dict[str, float] = field(default_factory=dict)
    report: object | None = None

    @property
    def start_time(self) -> float:
        return self.segments[0].start_time

    @property
    def end_time(self) -> float:
        return self.segments[-1].end_time


def _solve_path(path: tuple[str, ...], index: int, ctx: ProgramContext, method: str) -> PathOutcome:
    t = time.perf_counter()
    pp = assemble_path_program(path, ctx)
    assembled = time.perf_counter()
    sol = solve_lp(pp.program, method=method)
    if sol.optimal:
        logger.info("Path %s: objective %.6g", pp.label, sol.objective)
        return PathOutcome(path, index, sol.objective, sol.x, program=pp, assembly_time=assembled - t,
                           solve_time=time.perf_counter() - assembled)
    diagnostics = elastic_residuals(pp.program)
    logger.info("Path %s: %s (%s)", pp.label, sol.status.value, ", ".join(diagnostics) or "no residual")
    return PathOutcome(path, index, None, diagnostics=diagnostics, assembly_time=assembled - t,
                       solve_time=time.perf_counter() - assembled)


def solve_paths(paths: list[tuple[str, ...]], ctx: ProgramContext, workers: int = 1,
                method: str = "highs") -> list[PathOutcome]:
    """Solve every path program; outcomes come back in input order."""
    if workers == 1 or len(paths) < 2:
        return [_solve_path(p, i, ctx, method) for i, p in enumerate(paths)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_solve_path, p, i, ctx, method) for i, p in enumerate(paths)]
        return [f.result() for f in futures]


def _best(outcomes: list[PathOutcome]) -> PathOutcome | None:
    feasible = [o for o in outcomes if o.feasible]
    if not feasible:
        return None
    return min(feasible, key=lambda o: (round(o.objective, 9), o.index))


def plan(scenario: Scenario, options: PlanOptions | None = None) -> PlanResult:
    """Plan a trajectory for *scenario*.

    ``timings`` holds wall seconds per phase: setup, enumeration, relaxation,
    assembly, solve, extract and total. Assembly and solve are summed over
    the candidate paths. Scenario parsing happens before this call and is
    not counted.

    Raises :class:`InfeasibleError` with per-path constraint-family residuals
    when no candidate path admits a solution.
    """
    options = options or PlanOptions()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    graph = scenario.graph
    ctx = scenario.program_context()
    timings["setup"] = time.perf_counter() - t0

    def enumerate_timed() -> list[tuple[str, ...]]:
        t = time.perf_counter()
        found = enumerate_paths(graph, options.max_len)
        timings["enumeration"] = timings.get("enumeration", 0.0) + time.perf_counter() - t
        return found

    paths: list[tuple[str, ...]] | None = None
    strategy = options.strategy
    if strategy != "relax-round":
        paths = enumerate_timed()
    if strategy == "auto":
        strategy = "enumerate" if len(paths) <= options.enumerate_limit else "relax-round"
        logger.info("Strategy auto -> %s (%d paths)", strategy, len(paths))

    lower_bound = None
    rounded = None
    if strategy in ("relax-round", "both"):
        t = time.perf_counter()
        flows = relax_solve(graph, ctx, method=options.lp_method)
        lower_bound = flows.objective
        timings["relaxation"] = time.perf_counter() - t
        try:
            rounded = round_flows(flows, graph)
            logger.info("Rounded path: %s", ">".join(rounded))
        except RoundingError as exc:
            logger.warning("Rounding failed (%s); falling back to path enumeration", exc)
            strategy = "enumerate"
            if paths is None:
                paths = enumerate_timed()

    candidates = [rounded] if strategy == "relax-round" else paths
    if not candidates:
        raise InfeasibleError(
            f"no source-target path with at most {options.max_len} regions", diagnostics={}
        )

    outcomes = solve_paths(candidates, ctx, options.workers, options.lp_method)
    timings["assembly"] = sum(o.assembly_time for o in outcomes)
    timings["solve"] = sum(o.solve_time for o in outcomes)

    best = _best(outcomes)
    if best is None:
        diagnostics = {o.label: o.diagnostics for o in outcomes}
        raise InfeasibleError(
            f"none of {len(outcomes)} candidate path(s) admits a feasible trajectory", diagnostics
        )
    if strategy == "both" and rounded is not None and rounded != best.path:
        logger.warning(
            "Rounded path %s differs from the enumerated optimum %s", ">".join(rounded), best.label
        )

    t = time.perf_counter()
    segments = extract(best.x, best.program)
    timings["extract"] = time.perf_counter() - t
    timings["total"] = time.perf_counter() - t0
    logger.info("Phase times: %s", ", ".join(f"{k} {v * 1000:.2f} ms" for k, v in timings.items()))

    return PlanResult(
        scenario=scenario.name,
        path=best.path,
        segments=segments,
        objective=float(best.objective),
        strategy=strategy,
        lower_bound=lower_bound,
        rounded_path=rounded,
        candidates=outcomes,
        windows=scenario.timing,
        timings=timings,
    )
