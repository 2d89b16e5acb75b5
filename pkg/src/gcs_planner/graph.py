"""Region graph: validation, path enumeration, the flow relaxation and rounding."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import networkx as nx
import numpy as np

from gcs_planner.errors import InfeasibleError, RoundingError, ScenarioError
from gcs_planner.lp import elastic_residuals, solve_lp
from gcs_planner.program import ProgramContext, assemble_relaxation

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-6
DEFAULT_MAX_LEN = 12


@dataclass(frozen=True, eq=False)
class RegionGraph:
    """Directed graph over region ids with a designated source and target.

    Build instances with :meth:`build`, which prunes what cannot lie on a
    source-to-target path.
    """

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    source: str
    target: str

    @classmethod
    def build(cls, vertices: Sequence[str], edges: Sequence[Sequence[str]], source: str,
              target: str) -> RegionGraph:
        known = set(vertices)
        if len(known) != len(vertices):
            raise ScenarioError("region ids must be unique", path="$.regions", check="unique-ids")
        for label, v in (("source", source), ("target", target)):
            if v not in known:
                raise ScenarioError(f"unknown {label} region '{v}'", path=f"$.{label}", check="edge-endpoint")
        if source == target:
            raise ScenarioError("source and target must differ", path="$.target", check="source-target")

        kept = []
        for i, (u, v) in enumerate(edges):
            if u not in known or v not in known:
                raise ScenarioError(f"edge ({u}, {v}) names an unknown region",
                                    path=f"$.edges[{i}]", check="edge-endpoint")
            if u == v:
                raise ScenarioError(f"self-loop on '{u}'", path=f"$.edges[{i}]", check="self-loop")
            if v == source or u == target:
                logger.warning("Dropping edge %s->%s: it enters the source or leaves the target", u, v)
                continue
            if (u, v) not in kept:
                kept.append((u, v))

        g = nx.DiGraph()
        g.add_nodes_from(vertices)
        g.add_edges_from(kept)
        if not nx.has_path(g, source, target):
            raise ScenarioError(f"target '{target}' is unreachable from source '{source}'",
                                path="$.edges", check="reachability")

        useful = (nx.descendants(g, source) | {source}) & (nx.ancestors(g, target) | {target})
        pruned = [v for v in vertices if v not in useful]
        if pruned:
            logger.warning("Pruning regions off every source-target path: %s", ", ".join(pruned))
        return cls(
            vertices=tuple(v for v in vertices if v in useful),
            edges=tuple((u, v) for u, v in kept if u in useful and v in useful),
            source=source,
            target=target,
        )

    @cached_property
    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.vertices)
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def _order(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def path_key(self, path: Sequence[str]) -> tuple[int, ...]:
        return tuple(self._order[v] for v in path)


@dataclass(frozen=True)
class FlowSolution:
    edges: tuple[tuple[str, str], ...]
    flows: np.ndarray
    objective: float

    def flow(self, u: str, v: str) -> float:
        return float(self.flows[self.edges.index((u, v))])

    def conservation_residual(self, g: RegionGraph) -> float:
        """Largest imbalance of net outflow against +1 at the source, -1 at the target, 0 elsewhere."""
        net = {v: 0.0 for v in g.vertices}
        for (u, v), y in zip(self.edges, self.flows):
            net[u] += y
            net[v] -= y
        expected = {g.source: 1.0, g.target: -1.0}
        return max(abs(net[v] - expected.get(v, 0.0)) for v in g.vertices)


def enumerate_paths(g: RegionGraph, max_len: int = DEFAULT_MAX_LEN) -> list[tuple[str, ...]]:
    """All simple source-to-target paths with at most *max_len* vertices.

    Ordered lexicographically by vertex declaration order.
    """
    if max_len < 2:
        raise ValueError(f"max_len must be at least 2, got {max_len}")
    paths = nx.all_simple_paths(g.digraph, g.source, g.target, cutoff=max_len - 1)
    return sorted((tuple(p) for p in paths), key=g.path_key)


def relax_solve(g: RegionGraph, ctx: ProgramContext, method: str = "highs") -> FlowSolution:
    relaxation = assemble_relaxation(g.vertices, g.edges, g.source, g.target, ctx)
    sol = solve_lp(relaxation.program, method=method)
    if not sol.optimal:
        residuals = elastic_residuals(relaxation.program)
        raise InfeasibleError(
            f"the graph relaxation is {sol.status.value}", diagnostics={"relaxation": residuals}
        )
    flows = np.clip(sol.x[relaxation.flow_index], 0.0, 1.0)
    logger.info(
        "Relaxation bound %.6g with %d edges carrying flow",
        sol.objective, int(np.sum(flows > SUPPORT_TOL)),
    )
    return FlowSolution(relaxation.edges, flows, sol.objective)


def round_flows(f: FlowSolution, g: RegionGraph) -> tuple[str, ...]:
    """Depth-first walk from the source along the heaviest remaining edge.

    Ties break on edge order. Dead ends backtrack to the next-best edge.
    """
    options: dict[str, list[tuple[float, int, str]]] = {v: [] for v in g.vertices}
    for idx, ((u, v), y) in enumerate(zip(f.edges, f.flows)):
        if y > SUPPORT_TOL:
            options[u].append((-float(y), idx, v))
    for choices in options.values():
        choices.sort()

    def walk(vertex: str, visited: frozenset[str]) -> list[str] | None:
        if vertex == g.target:
            return [vertex]
        for _, _, nxt in options[vertex]:
            if nxt in visited:
                continue
            rest = walk(nxt, visited | {nxt})
            if rest is not None:
                return [vertex] + rest
        return None

    path = walk(g.source, frozenset({g.source}))
    if path is None:
        raise RoundingError("flow support holds no source-to-target path")
    return tuple(path)
