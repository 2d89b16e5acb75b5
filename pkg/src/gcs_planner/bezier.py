"""Bézier curves for spatial paths r(s) and time scalings h(s).

A planned trajectory is a chain of :class:`TrajectorySegment` objects, each
pairing a planar curve ``r`` with a scalar, strictly increasing scaling
``h``. Time-domain quantities follow from the chain rule::

    q'  = r' / h'
    q'' = (r'' h' - r' h'') / h'^3
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from gcs_planner.errors import BezierError, DegenerateScalingError

# Below these magnitudes tangents and scaling slopes are treated as vanishing.
TANGENT_EPS = 1e-9
SCALING_EPS = 1e-9

_BISECTION_STEPS = 60
_BISECTION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BezierCurve:
    """Control points P_0..P_m stored as an (m+1, d) array.

    Curves produced by differentiation may have degree 0 (a constant).
    """

    control_points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.control_points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or len(pts) == 0:
            raise BezierError("control points must be a non-empty (m+1, d) array")
        if not np.all(np.isfinite(pts)):
            raise BezierError("control points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "control_points", pts)

    @property
    def degree(self) -> int:
        return len(self.control_points) - 1

    @property
    def dim(self) -> int:
        return self.control_points.shape[1]

    def __call__(self, s: float) -> np.ndarray:
        return evaluate(self, s)


@dataclass(frozen=True, eq=False)
class TimeScaling:
    curve: BezierCurve

    def __post_init__(self):
        if self.curve.dim != 1:
            raise BezierError("a time scaling must be scalar")
        if self.curve.degree < 1:
            raise BezierError("a time scaling needs degree at least 1")
        tau = self.taus
        if tau[0] < -1e-9:
            raise BezierError(f"time scaling starts before t=0 ({tau[0]:.6g})")
        if np.any(np.diff(tau) <= 0.0):
            raise BezierError("time-scaling control points must be strictly increasing")

    @classmethod
    def from_times(cls, taus: Sequence[float]) -> TimeScaling:
        return cls(BezierCurve(np.asarray(taus, dtype=float).reshape(-1, 1)))

    @property
    def taus(self) -> np.ndarray:
        return self.curve.control_points[:, 0]

    @property
    def start(self) -> float:
        return float(self.taus[0])

    @property
    def end(self) -> float:
        return float(self.taus[-1])

    def __call__(self, s: float) -> float:
        return float(evaluate(self.curve, s)[0])


@dataclass(frozen=True)
class Kinematics:
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    jerk: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    spatial: BezierCurve
    temporal: TimeScaling

    def __post_init__(self):
        if self.spatial.dim != 2:
            raise BezierError("the spatial curve must be planar")
        if self.spatial.degree != self.temporal.curve.degree:
            raise BezierError(
                f"spatial degree {self.spatial.degree} differs from "
                f"temporal degree {self.temporal.curve.degree}"
            )

    @property
    def start_time(self) -> float:
        return self.temporal.start

    @property
    def end_time(self) -> float:
        return self.temporal.end

    @cached_property
    def spatial_derivatives(self) -> tuple[BezierCurve, BezierCurve, BezierCurve]:
        r1 = derivative(self.spatial)
        r2 = derivative(r1)
        return r1, r2, derivative(r2)

    @cached_property
    def temporal_derivatives(self) -> tuple[BezierCurve, BezierCurve, BezierCurve]:
        h1 = derivative(self.temporal.curve)
        h2 = derivative(h1)
        return h1, h2, derivative(h2)


# ====================================================================
# Curve algebra
# ====================================================================

def _check_parameter(s: float) -> None:
    if not 0.0 <= s <= 1.0:
        raise BezierError(f"curve parameter {s!r} lies outside [0, 1]")


def evaluate(c: BezierCurve, s: float) -> np.ndarray:
    """Point on *c* at parameter *s* by de Casteljau's recursion."""
    _check_parameter(s)
    pts = np.array(c.control_points)
    for r in range(1, len(pts)):
        pts[: len(pts) - r] = (1.0 - s) * pts[: len(pts) - r] + s * pts[1 : len(pts) - r + 1]
    return pts[0]


def evaluate_many(c: BezierCurve, s: np.ndarray) -> np.ndarray:
    """Vectorized :func:`evaluate`; returns an (n, d) array."""
    s = np.asarray(s, dtype=float).reshape(-1)
    if np.any((s < 0.0) | (s > 1.0)):
        raise BezierError("curve parameters must lie in [0, 1]")
    pts = np.broadcast_to(c.control_points, (len(s),) + c.control_points.shape).copy()
    w = s[:, None, None]
    n = c.control_points.shape[0]
    for r in range(1, n):
        pts[:, : n - r] = (1.0 - w) * pts[:, : n - r] + w * pts[:, 1 : n - r + 1]
    return pts[:, 0]


def derivative(c: BezierCurve) -> BezierCurve:
    if c.degree == 0:
        return BezierCurve(np.zeros((1, c.dim)))
    return BezierCurve(c.degree * np.diff(c.control_points, axis=0))


def forward_diff(points, order: int) -> np.ndarray:
    """Forward differences of the given order, e.g. P[l+3] - 3P[l+2] + 3P[l+1] - P[l]."""
    pts = np.asarray(points, dtype=float)
    if order not in (1, 2, 3):
        raise BezierError(f"difference order must be 1, 2 or 3, got {order}")
    if len(pts) <= order:
        raise BezierError(f"need more than {order} points for an order-{order} difference")
    return np.diff(pts, n=order, axis=0)


def curvature(r: BezierCurve, s: float) -> float:
    """Signed curvature (r'_x r''_y - r'_y r''_x) / |r'|^3."""
    d1 = evaluate(derivative(r), s)
    d2 = evaluate(derivative(derivative(r)), s)
    return _signed_curvature(d1, d2)


def _signed_curvature(d1: np.ndarray, d2: np.ndarray) -> float:
    speed = float(np.hypot(d1[0], d1[1]))
    if speed <= TANGENT_EPS:
        raise BezierError("curvature is undefined where the tangent vanishes")
    return float(d1[0] * d2[1] - d1[1] * d2[0]) / speed**3


# ====================================================================
# Time domain
# ====================================================================

def invert_time(h: TimeScaling, t: float) -> float:
    """Parameter s with h(s) = t, by bisection on the monotone scaling."""
    tol = 1e-12 * max(1.0, abs(h.end))
    if t < h.start - tol or t > h.end + tol:
        raise BezierError(f"time {t:.6g} lies outside [{h.start:.6g}, {h.end:.6g}]")
    if t <= h.start:
        return 0.0
    if t >= h.end:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        value = h(mid)
        if abs(value - t) <= _BISECTION_TOL:
            return mid
        if value < t:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def invert_time_many(h: TimeScaling, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float).reshape(-1)
    tol = 1e-12 * max(1.0, abs(h.end))
    if np.any(t < h.start - tol) or np.any(t > h.end + tol):
        raise BezierError(f"times must lie within [{h.start:.6g}, {h.end:.6g}]")
    lo = np.zeros_like(t)
    hi = np.ones_like(t)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = evaluate_many(h.curve, mid)[:, 0] < t
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    s = 0.5 * (lo + hi)
    s[t <= h.start] = 0.0
    s[t >= h.end] = 1.0
    return s


def derivatives_at(seg: TrajectorySegment, s: float) -> Kinematics:
    """Position and first three time derivatives at curve parameter *s*."""
    r = evaluate(seg.spatial, s)
    r1, r2, r3 = (evaluate(c, s) for c in seg.spatial_derivatives)
    h1, h2, h3 = (float(evaluate(c, s)[0]) for c in seg.temporal_derivatives)
    if h1 < SCALING_EPS:
        raise DegenerateScalingError(f"h'({s:.6g}) = {h1:.3g} is too small")
    numer = r2 * h1 - r1 * h2
    jerk = (r3 * h1 - r1 * h3) / h1**4 - 3.0 * numer * h2 / h1**5
    return Kinematics(position=r, velocity=r1 / h1, acceleration=numer / h1**3, jerk=jerk)


def kinematics_at(seg: TrajectorySegment, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = derivatives_at(seg, invert_time(seg.temporal, t))
    return k.position, k.velocity, k.acceleration


def accel_components(seg: TrajectorySegment, s: float) -> tuple[float, float]:
    """Tangential and normal acceleration, the normal taken to the left of travel."""
    r1 = evaluate(seg.spatial_derivatives[0], s)
    r2 = evaluate(seg.spatial_derivatives[1], s)
    h1 = float(evaluate(seg.temporal_derivatives[0], s)[0])
    h2 = float(evaluate(seg.temporal_derivatives[1], s)[0])
    if h1 < SCALING_EPS:
        raise DegenerateScalingError(f"h'({s:.6g}) = {h1:.3g} is too small")
    kappa = _signed_curvature(r1, r2)
    speed = float(np.hypot(r1[0], r1[1]))
    tangent = r1 / speed
    tangential = float(tangent @ r2) / h1**2 - (h2 / h1**3) * speed
    normal = kappa * speed**2 / h1**2
    return tangential, normal


def segment_index(segments: Sequence[TrajectorySegment], t: float) -> int:
    """Index of the segment whose time span holds *t* (the earlier one at a junction)."""
    if not segments:
        raise BezierError("empty trajectory")
    for i, seg in enumerate(segments):
        if t <= seg.end_time:
            return i
    return len(segments) - 1


def sample_trajectory(segments: Sequence[TrajectorySegment], times) -> Kinematics:
    """Kinematics of a segment chain on a time grid.

    Each field of the returned :class:`Kinematics` is an (n, 2) array. Times
    are clamped into the chain's span.
    """
    if not segments:
        raise BezierError("empty trajectory")
    times = np.asarray(times, dtype=float).reshape(-1)
    ends = np.array([seg.end_time for seg in segments])
    owner = np.minimum(np.searchsorted(ends, times, side="left"), len(segments) - 1)
    fields = {name: np.zeros((len(times), 2)) for name in ("position", "velocity", "acceleration", "jerk")}
    for i, seg in enumerate(segments):
        mask = owner == i
        if not mask.any():
            continue
        t = np.clip(times[mask], seg.start_time, seg.end_time)
        s = invert_time_many(seg.temporal, t)
        r = evaluate_many(seg.spatial, s)
        r1, r2, r3 = (evaluate_many(c, s) for c in seg.spatial_derivatives)
        h1, h2, h3 = (evaluate_many(c, s)[:, :1] for c in seg.temporal_derivatives)
        if np.any(h1 < SCALING_EPS):
            raise DegenerateScalingError(f"segment {i} has a vanishing time-scaling slope")
        numer = r2 * h1 - r1 * h2
        fields["position"][mask] = r
        fields["velocity"][mask] = r1 / h1
        fields["acceleration"][mask] = numer / h1**3
        fields["jerk"][mask] = (r3 * h1 - r1 * h3) / h1**4 - 3.0 * numer * h2 / h1**5
    return Kinematics(**fields)
