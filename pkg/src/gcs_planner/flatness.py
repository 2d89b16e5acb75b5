"""Flat-output reconstruction and forward rollout for the linear-tire bicycle model.

Position is treated as the flat output. From its first three time derivatives
the module recovers speed, heading, curvature, yaw rate, side slip, steering
and longitudinal acceleration. The side slip and steering angle come from the
quasi-steady lateral balance paired with the yaw balance.

The rollout integrates the six-state model with forward Euler and serves as
an independent check of how closely the planned path can be followed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np

from gcs_planner.bezier import TrajectorySegment, sample_trajectory
from gcs_planner.errors import FlatnessError

logger = logging.getLogger(__name__)

DEFAULT_V_FLOOR = 0.5
_SINGULAR_DET = 1e-9


@dataclass(frozen=True)
class VehicleParams:
    m: float = 1500.0
    i_z: float = 2500.0
    l_f: float = 1.35
    l_r: float = 1.35
    c_f: float = 8.0e4
    c_r: float = 8.0e4

    def __post_init__(self):
        for name, value in zip(("m", "i_z", "l_f", "l_r", "c_f", "c_r"), astuple(self)):
            if not (math.isfinite(value) and value > 0):
                raise FlatnessError(f"vehicle parameter {name} must be positive, got {value!r}")


@dataclass(frozen=True)
class FlatState:
    v: float
    theta: float
    k: float
    omega: float
    beta: float
    psi: float
    v_x: float
    v_y: float
    a: float
    delta: float
    v_dot: float = 0.0
    omega_dot: float = 0.0


@dataclass(frozen=True)
class FullState:
    p_x: float
    p_y: float
    psi: float
    v_x: float
    v_y: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


@dataclass(frozen=True)
class RolloutReport:
    max_deviation: float
    rms_deviation: float
    final_deviation: float
    path_length: float
    dt: float
    samples: int

    @property
    def relative_deviation(self) -> float:
        return self.max_deviation / self.path_length if self.path_length > 0 else 0.0


def quasi_steady_sideslip(params: VehicleParams, v: float, omega: float, delta: float) -> float:
    """Side slip from the lateral balance with transient slip dynamics neglected."""
    total = params.c_f + params.c_r
    moment = params.c_r * params.l_r - params.c_f * params.l_f
    return params.c_f / total * delta + (moment / v - params.m * v) * omega / total


def _solve_slip_and_steer(params: VehicleParams, v, omega, omega_dot):
    """Joint (beta, delta) from the lateral and yaw balances; works elementwise."""
    p = params
    m11, m12 = -(p.c_f + p.c_r), p.c_f
    m21, m22 = p.l_r * p.c_r - p.l_f * p.c_f, p.l_f * p.c_f
    det = m11 * m22 - m12 * m21
    if abs(det) < _SINGULAR_DET:
        raise FlatnessError("side-slip/steering balance is singular")
    r1 = p.m * omega * v - (p.c_r * p.l_r - p.c_f * p.l_f) * omega / v
    r2 = p.i_z * omega_dot + (p.l_f**2 * p.c_f + p.l_r**2 * p.c_r) * omega / v
    beta = (r1 * m22 - m12 * r2) / det
    delta = (m11 * r2 - m21 * r1) / det
    return beta, delta


def _reconstruct_arrays(vel, acc, jerk, params: VehicleParams, v_floor: float) -> dict[str, np.ndarray]:
    vel, acc, jerk = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (vel, acc, jerk))
    v = np.hypot(vel[:, 0], vel[:, 1])
    if np.any(v < v_floor):
        raise FlatnessError(
            f"speed {float(v.min()):.4g} m/s is below the reconstruction floor {v_floor:g} m/s"
        )
    cross = vel[:, 0] * acc[:, 1] - vel[:, 1] * acc[:, 0]
    cross_dot = vel[:, 0] * jerk[:, 1] - vel[:, 1] * jerk[:, 0]
    k = cross / v**3
    v_dot = np.einsum("ij,ij->i", vel, acc) / v
    k_dot = cross_dot / v**3 - 3.0 * cross * v_dot / v**4
    omega = v * k
    omega_dot = v_dot * k + v * k_dot
    beta, delta = _solve_slip_and_steer(params, v, omega, omega_dot)
    theta = np.arctan2(vel[:, 1], vel[:, 0])
    return {
        "v": v,
        "theta": theta,
        "k": k,
        "omega": omega,
        "beta": beta,
        "psi": theta - beta,
        "v_x": v,
        "v_y": v * beta,
        "a": v_dot - v**2 * k * beta,
        "delta": delta,
        "v_dot": v_dot,
        "omega_dot": omega_dot,
    }


def flat_reconstruct(q_dot, q_ddot, q_dddot, params: VehicleParams,
                     v_floor: float = DEFAULT_V_FLOOR) -> FlatState:
    arrays = _reconstruct_arrays(q_dot, q_ddot, q_dddot, params, v_floor)
    return FlatState(**{name: float(values[0]) for name, values in arrays.items()})


def flat_reconstruct_many(q_dot, q_ddot, q_dddot, params: VehicleParams,
                          v_floor: float = DEFAULT_V_FLOOR) -> dict[str, np.ndarray]:
    """Vectorized :func:`flat_reconstruct` over (n, 2) derivative arrays."""
    return _reconstruct_arrays(q_dot, q_ddot, q_dddot, params, v_floor)


# ====================================================================
# Forward dynamics
# ====================================================================

def rollout(params: VehicleParams, x0: FullState, inputs, dt: float,
            v_floor: float = DEFAULT_V_FLOOR) -> np.ndarray:
    """Forward-Euler rollout under piecewise-constant (a, delta) inputs.

    Returns an (n+1, 6) array whose rows are FullState vectors
    (p_x, p_y, psi, v_x, v_y, omega), starting with *x0*.
    """
    if not dt > 0:
        raise FlatnessError(f"time step must be positive, got {dt!r}")
    controls = np.asarray(inputs, dtype=float).reshape(-1, 2)
    p = params
    states = np.empty((len(controls) + 1, 6))
    px, py, psi, vx, vy, omega = astuple(x0)
    states[0] = (px, py, psi, vx, vy, omega)
    for i, (a, delta) in enumerate(controls):
        if vx < v_floor:
            raise FlatnessError(f"longitudinal speed fell to {vx:.4g} m/s at step {i}")
        alpha_f = delta - (vy + p.l_f * omega) / vx
        alpha_r = -(vy - p.l_r * omega) / vx
        f_f = p.c_f * alpha_f
        f_r = p.c_r * alpha_r
        c, s = math.cos(psi), math.sin(psi)
        px, py, psi, vx, vy, omega = (
            px + dt * (vx * c - vy * s),
            py + dt * (vx * s + vy * c),
            psi + dt * omega,
            vx + dt * (a + omega * vy),
            vy + dt * (-omega * vx + (f_f + f_r) / p.m),
            omega + dt * (f_f * p.l_f - f_r * p.l_r) / p.i_z,
        )
        states[i + 1] = (px, py, psi, vx, vy, omega)
    return states


def rollout_consistency(traj: Sequence[TrajectorySegment], params: VehicleParams, dt: float = 1e-3,
                        v_floor: float = DEFAULT_V_FLOOR) -> RolloutReport:
    """Roll the full model on flat-reconstructed inputs and compare positions with the plan."""
    t0, t1 = traj[0].start_time, traj[-1].end_time
    steps = max(1, int(math.floor((t1 - t0) / dt + 1e-9)))
    times = t0 + dt * np.arange(steps + 1)
    samples = sample_trajectory(traj, times)
    flat = flat_reconstruct_many(samples.velocity, samples.acceleration, samples.jerk, params, v_floor)

    x0 = FullState(
        p_x=float(samples.position[0, 0]),
        p_y=float(samples.position[0, 1]),
        psi=float(flat["psi"][0]),
        v_x=float(flat["v_x"][0]),
        v_y=float(flat["v_y"][0]),
        omega=float(flat["omega"][0]),
    )
    inputs = np.column_stack([flat["a"][:-1], flat["delta"][:-1]])
    states = rollout(params, x0, inputs, dt, v_floor)

    deviation = np.linalg.norm(states[:, :2] - samples.position, axis=1)
    length = float(np.linalg.norm(np.diff(samples.position, axis=0), axis=1).sum())
    report = RolloutReport(
        max_deviation=float(deviation.max()),
        rms_deviation=float(np.sqrt(np.mean(deviation**2))),
        final_deviation=float(deviation[-1]),
        path_length=length,
        dt=dt,
        samples=len(times),
    )
    logger.info(
        "Rollout over %.2f s: max deviation %.4f m (%.2f%% of %.1f m)",
        t1 - t0, report.max_deviation, 100 * report.relative_deviation, length,
    )
    return report
