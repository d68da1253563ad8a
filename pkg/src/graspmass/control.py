"""Joint-space quintic trajectories and a PD + gravity-compensation law.

The controller is intentionally simple: the estimation pipeline only needs
the arm to reach a pose and hold it, and a gravity-compensated PD does that
without integral windup clouding the disturbance picture.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .dynamics import gravity_vector
from .model_io import KinematicModel

__all__ = [
    "TrajectoryPlan",
    "plan_quintic",
    "sample_trajectory",
    "ControlGains",
    "pd_gravity_torque",
]


@dataclass(frozen=True)
class TrajectoryPlan:
    """Per-joint quintic polynomials q_i(t) = sum_k coeffs[i,k] t^k, t in [0,T]."""

    coeffs: np.ndarray  # (n, 6)
    duration: float
    q_start: np.ndarray
    q_goal: np.ndarray


def plan_quintic(
    q_start: np.ndarray,
    q_goal: np.ndarray,
    duration: float,
    qd_start: Optional[np.ndarray] = None,
    qd_goal: Optional[np.ndarray] = None,
    qdd_start: Optional[np.ndarray] = None,
    qdd_goal: Optional[np.ndarray] = None,
) -> TrajectoryPlan:
    """Fifth-order polynomial meeting position, velocity and acceleration
    boundary conditions at t=0 and t=duration (defaults: rest to rest)."""
    q_start = np.asarray(q_start, dtype=float)
    q_goal = np.asarray(q_goal, dtype=float)
    if q_start.shape != q_goal.shape:
        raise ValueError("start and goal dimension mismatch")
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = q_start.shape[0]
    z = np.zeros(n)
    qd0 = z if qd_start is None else np.asarray(qd_start, dtype=float)
    qdT = z if qd_goal is None else np.asarray(qd_goal, dtype=float)
    qdd0 = z if qdd_start is None else np.asarray(qdd_start, dtype=float)
    qddT = z if qdd_goal is None else np.asarray(qdd_goal, dtype=float)

    T = duration
    A = np.array([
        [1, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [0, 0, 2, 0, 0, 0],
        [1, T, T**2, T**3, T**4, T**5],
        [0, 1, 2 * T, 3 * T**2, 4 * T**3, 5 * T**4],
        [0, 0, 2, 6 * T, 12 * T**2, 20 * T**3],
    ], dtype=float)
    b = np.stack([q_start, qd0, qdd0, q_goal, qdT, qddT], axis=0)  # (6, n)
    coeffs = np.linalg.solve(A, b).T  # (n, 6)
    return TrajectoryPlan(coeffs=coeffs, duration=duration,
                          q_start=q_start.copy(), q_goal=q_goal.copy())


def sample_trajectory(plan: TrajectoryPlan, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(q_d, qd_d, qdd_d) at time t; clamps exactly to the goal for t >= duration."""
    if t >= plan.duration:
        n = plan.q_goal.shape[0]
        return plan.q_goal.copy(), np.zeros(n), np.zeros(n)
    if t <= 0.0:
        n = plan.q_start.shape[0]
        c = plan.coeffs
        return plan.q_start.copy(), c[:, 1].copy(), 2.0 * c[:, 2]
    tp = t ** np.arange(6)
    dv = np.array([0, 1, 2 * t, 3 * t**2, 4 * t**3, 5 * t**4])
    da = np.array([0, 0, 2, 6 * t, 12 * t**2, 20 * t**3])
    c = plan.coeffs
    return c @ tp, c @ dv, c @ da


@dataclass(frozen=True)
class ControlGains:
    kp: float = 2.5
    kd: float = 0.5

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise ValueError("control gains must be nonnegative")


def pd_gravity_torque(
    q_hat: np.ndarray,
    qd_hat: np.ndarray,
    q_des: np.ndarray,
    qd_des: np.ndarray,
    model: KinematicModel,
    gains: ControlGains,
) -> np.ndarray:
    """u = Kp (q_d - q) + Kd (qd_d - qd) + G(q), gravity from the nominal model.

    Runs on estimated state, so any payload appears to this law only through
    tracking error -- which is exactly what lets the observer see it.
    """
    q_hat = np.asarray(q_hat, dtype=float)
    qd_hat = np.asarray(qd_hat, dtype=float)
    g = gravity_vector(model, q_hat)
    return gains.kp * (np.asarray(q_des, dtype=float) - q_hat) + \
        gains.kd * (np.asarray(qd_des, dtype=float) - qd_hat) + g
