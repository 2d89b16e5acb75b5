"""Planar convex geometry: half-space polytopes, convex polygons, distances."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from gcs_planner.errors import GeometryError
from gcs_planner.lp import LPStatus, ProgramBuilder, solve_lp

_SUPPORT_DIRECTIONS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


@dataclass(frozen=True, eq=False)
class Polytope:
    """The set {x : normals @ x <= offsets} in the plane."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        normals = np.asarray(self.normals, dtype=float).reshape(-1, 2)
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if len(normals) != len(offsets):
            raise GeometryError("normals and offsets must have equal length")
        if len(normals) < 3:
            raise GeometryError("a bounded planar polytope needs at least 3 half-spaces")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise GeometryError("polytope coefficients must be finite")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_box(cls, xmin: float, xmax: float, ymin: float, ymax: float) -> Polytope:
        return cls(
            normals=[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)],
            offsets=[xmax, ymax, -xmin, -ymin],
        )

    @classmethod
    def from_vertices(cls, points) -> Polytope:
        """Half-space form of the convex hull of *points*, one row per hull edge."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        try:
            hull = ConvexHull(pts)
        except QhullError as exc:
            raise GeometryError(f"vertices span no area: {exc}") from exc
        ring = pts[hull.vertices]  # counterclockwise in 2-D
        edges = np.roll(ring, -1, axis=0) - ring
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        return cls(normals, np.einsum("ij,ij->i", normals, ring))

    def __len__(self) -> int:
        return len(self.offsets)

    def validate(self) -> None:
        """Reject unbounded or empty sets, and sets without interior.

        Four support LPs bound the set along the axes; one more finds the
        largest inscribed disc.
        """
        for d in _SUPPORT_DIRECTIONS:
            builder = ProgramBuilder()
            x = builder.add_variables(2)
            builder.add_cost(x[0], -d[0])
            builder.add_cost(x[1], -d[1])
            for a, b in zip(self.normals, self.offsets):
                builder.add_le(zip(x, a), b, "containment")
            sol = solve_lp(builder.build())
            if sol.status is LPStatus.INFEASIBLE:
                raise GeometryError("polytope is empty")
            if sol.status is LPStatus.UNBOUNDED:
                raise GeometryError(f"polytope is unbounded along {d}")
        _, radius = self.chebyshev_center()
        if radius <= 1e-9:
            raise GeometryError("polytope has empty interior")

    def chebyshev_center(self) -> tuple[np.ndarray, float]:
        """Center and radius of the largest inscribed disc (radius capped at 1e6)."""
        builder = ProgramBuilder()
        x = builder.add_variables(2)
        (r,) = builder.add_variables(1, lower=0.0, upper=1e6, cost=-1.0)
        for a, b in zip(self.normals, self.offsets):
            builder.add_le([(x[0], a[0]), (x[1], a[1]), (r, float(np.hypot(*a)))], b, "containment")
        sol = solve_lp(builder.build())
        if not sol.optimal:
            raise GeometryError("polytope is empty")
        return sol.x[:2], float(sol.x[2])

    @cached_property
    def _vertex_ring(self) -> np.ndarray:
        a, b = self.normals, self.offsets
        scale = max(1.0, float(np.abs(b).max()))
        found = []
        for i in range(len(b)):
            for j in range(i + 1, len(b)):
                det = a[i, 0] * a[j, 1] - a[i, 1] * a[j, 0]
                if abs(det) < 1e-12:
                    continue
                p = np.linalg.solve(np.array([a[i], a[j]]), np.array([b[i], b[j]]))
                if np.all(a @ p <= b + 1e-9 * scale):
                    if not any(np.allclose(p, q, atol=1e-9 * scale) for q in found):
                        found.append(p)
        if len(found) < 3:
            raise GeometryError("polytope has fewer than three vertices")
        pts = np.array(found)
        center = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
        return pts[order]

    def vertices(self) -> np.ndarray:
        """Vertices in counterclockwise order."""
        return self._vertex_ring.copy()

    def as_polygon(self) -> ConvexPolygon:
        return ConvexPolygon(self._vertex_ring)


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Counterclockwise vertex list. One or two vertices describe a point or segment."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) == 0 or not np.all(np.isfinite(v)):
            raise GeometryError("polygon needs finite vertices")
        if len(v) >= 3:
            edges = np.roll(v, -1, axis=0) - v
            nxt = np.roll(edges, -1, axis=0)
            cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
            if np.any(cross < -1e-12):
                raise GeometryError("polygon vertices are not in convex counterclockwise order")
        object.__setattr__(self, "vertices", v)

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def support(self, direction: np.ndarray) -> np.ndarray:
        return self.vertices[int(np.argmax(self.vertices @ direction))]

    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        v = self.vertices
        if len(v) == 1:
            return []
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]


@dataclass(frozen=True, eq=False)
class UnitBallFacets:
    """Outward normals of a regular polygon inscribed in the unit circle."""

    directions: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float).reshape(-1, 2)
        if len(d) < 4:
            raise GeometryError("at least 4 facet directions are required")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise GeometryError("facet directions must be unit vectors")
        object.__setattr__(self, "directions", d)

    @property
    def count(self) -> int:
        return len(self.directions)

    @property
    def conservativeness(self) -> float:
        """Bound on ||v|| / c whenever every a_k @ v <= c."""
        return 1.0 / math.cos(math.pi / self.count)

    def norm(self, v) -> float:
        """Polyhedral norm max_k a_k @ v, within cos(pi/F) of the Euclidean norm."""
        return float(np.max(self.directions @ np.asarray(v, dtype=float)))


# ====================================================================
# Operations
# ====================================================================

def contains(p: Polytope, x, tol: float = 0.0) -> bool:
    return bool(np.all(p.normals @ np.asarray(x, dtype=float) <= p.offsets + tol))


def unit_ball_facets(count: int = 16) -> UnitBallFacets:
    if count < 4:
        raise GeometryError(f"facet count must be at least 4, got {count}")
    angles = 2.0 * np.pi * np.arange(count) / count
    return UnitBallFacets(np.column_stack([np.cos(angles), np.sin(angles)]))


def rectangle_vertices(center, yaw: float, length: float, width: float) -> np.ndarray:
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([(hl, -hw), (hl, hw), (-hl, hw), (-hl, -hw)])
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(center, dtype=float) + local @ rot.T


def oriented_rectangle(center, yaw: float, length: float, width: float) -> ConvexPolygon:
    if length <= 0 or width <= 0:
        raise GeometryError("rectangle length and width must be positive")
    return ConvexPolygon(rectangle_vertices(center, yaw, length, width))


def _axes(poly: ConvexPolygon) -> list[np.ndarray]:
    v = poly.vertices
    if len(v) < 2:
        return []
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(edges, axis=1)
    edges = edges[lengths > 1e-12] / lengths[lengths > 1e-12, None]
    axes = [np.array([e[1], -e[0]]) for e in edges]
    if len(v) < 3 or _area(v) <= 1e-12:
        axes.extend(edges)
    return axes


def _area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def intersects(a: ConvexPolygon, b: ConvexPolygon, tol: float = 1e-12) -> bool:
    """Separating-axis test; touching boundaries count as intersecting."""
    axes = _axes(a) + _axes(b)
    if not axes:
        return bool(np.linalg.norm(a.vertices[0] - b.vertices[0]) <= tol)
    for n in axes:
        pa, pb = a.vertices @ n, b.vertices @ n
        if pa.min() > pb.max() + tol or pb.min() > pa.max() + tol:
            return False
    return True


def _closest_on_segment(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    d = q - p
    dd = float(d @ d)
    if dd <= 0.0:
        return p, [p]
    t = -float(p @ d) / dd
    if t <= 0.0:
        return p, [p]
    if t >= 1.0:
        return q, [q]
    return p + t * d, [p, q]


def _closest_on_simplex(simplex: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    if len(simplex) == 1:
        return simplex[0], simplex
    if len(simplex) == 2:
        return _closest_on_segment(simplex[0], simplex[1])
    a, b, c = simplex
    signs = [
        (b[0] - a[0]) * (-a[1]) - (b[1] - a[1]) * (-a[0]),
        (c[0] - b[0]) * (-b[1]) - (c[1] - b[1]) * (-b[0]),
        (a[0] - c[0]) * (-c[1]) - (a[1] - c[1]) * (-c[0]),
    ]
    if all(s >= 0 for s in signs) or all(s <= 0 for s in signs):
        return np.zeros(2), simplex
    best = None
    for p, q in ((a, b), (b, c), (c, a)):
        point, sub = _closest_on_segment(p, q)
        if best is None or point @ point < best[0] @ best[0]:
            best = (point, sub)
    return best


def _point_segment_distance(x: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    point, _ = _closest_on_segment(p - x, q - x)
    return float(np.linalg.norm(point))


def brute_force_distance(a: ConvexPolygon, b: ConvexPolygon) -> float:
    """Exact distance by checking every vertex against every edge."""
    if intersects(a, b):
        return 0.0
    best = min(float(np.linalg.norm(p - q)) for p in a.vertices for q in b.vertices)
    for first, second in ((a, b), (b, a)):
        for x in first.vertices:
            for p, q in second.edges():
                best = min(best, _point_segment_distance(x, p, q))
    return best


def polygon_distance(a: ConvexPolygon, b: ConvexPolygon, *, rel_tol: float = 1e-12,
                     max_iter: int = 64) -> float:
    """Euclidean distance between two convex polygons, 0 when they intersect.

    Support-function descent over the Minkowski difference a - b, keeping a
    simplex of at most three support points. Falls back to the brute-force
    vertex/edge scan if the descent does not settle.
    """
    v = a.vertices[0] - b.vertices[0]
    simplex = [v]
    for _ in range(max_iter):
        vv = float(v @ v)
        if vv <= 1e-24:
            return 0.0
        w = a.support(-v) - b.support(v)
        if vv - float(v @ w) <= rel_tol * vv or any(np.array_equal(w, s) for s in simplex):
            return math.sqrt(vv)
        v, simplex = _closest_on_simplex(simplex + [w])
        if len(simplex) == 3:
            return 0.0
    return brute_force_distance(a, b)
