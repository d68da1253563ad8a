"""Serial-chain rigid-body dynamics: FK, inverse/forward dynamics, mass
matrix, gravity vector, and the pitch angle of a link frame.

The recursions live in _kernels (compiled). Models are packed into flat
arrays once and memoized on the model object, so repeated calls with the
same model are cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .model_io import KinematicModel, TopologyError, UnknownFrameError


class DynamicsError(Exception):
    pass


@dataclass
class RobotState:
    """Joint positions and velocities."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(-1).copy()
        self.qd = np.asarray(self.qd, dtype=float).reshape(-1).copy()
        if self.q.shape != self.qd.shape:
            raise ValueError(f"q and qd must match, got {self.q.shape} vs {self.qd.shape}")


@dataclass
class FramePose:
    """Orientation (world-from-frame rotation) and position of a link frame."""

    rotation: np.ndarray
    translation: np.ndarray


class PackedChain:
    """Array form of a serial chain, consumable by the compiled kernels."""

    __slots__ = (
        "jtype", "qidx", "R0", "p0", "axis", "mass", "com", "inertia",
        "damping", "lower", "upper", "effort", "gravity", "dof",
        "frame_body", "body_frames", "qnames",
    )

    def __init__(self, model: KinematicModel):
        model.require_serial_chain()
        K = len(model.joints)
        self.jtype = np.zeros(K, dtype=np.int64)
        self.qidx = np.full(K, -1, dtype=np.int64)
        self.R0 = np.zeros((K, 3, 3))
        self.p0 = np.zeros((K, 3))
        self.axis = np.zeros((K, 3))
        self.mass = np.zeros(K)
        self.com = np.zeros((K, 3))
        self.inertia = np.zeros((K, 3, 3))
        self.frame_body = {model.root: -1}  # link name -> body index (-1 = base)
        qi = 0
        damping, lower, upper, effort, qnames = [], [], [], [], []
        for k, joint in enumerate(model.joints):
            child = model.link(joint.child)
            if joint.actuated:
                self.jtype[k] = _kernels.JOINT_REVOLUTE
                self.qidx[k] = qi
                damping.append(joint.viscous_friction)
                lower.append(joint.lower)
                upper.append(joint.upper)
                effort.append(joint.effort if joint.effort is not None else np.nan)
                qnames.append(joint.name)
                qi += 1
            self.R0[k] = joint.origin_rotation()
            self.p0[k] = joint.origin_xyz
            self.axis[k] = joint.axis
            self.mass[k] = child.mass
            self.com[k] = child.center_of_mass
            self.inertia[k] = child.inertia
            self.frame_body[child.name] = k
        self.dof = qi
        self.damping = np.asarray(damping, dtype=float)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        self.effort = np.asarray(effort, dtype=float)
        self.gravity = np.asarray(model.gravity, dtype=float)
        self.qnames = tuple(qnames)


def packed(model: KinematicModel) -> PackedChain:
    pack = getattr(model, "_packed", None)
    if pack is None:
        pack = PackedChain(model)
        model._packed = pack
    return pack


def _check_q(pack: PackedChain, q, name="q"):
    arr = np.asarray(q, dtype=float).reshape(-1)
    if arr.shape != (pack.dof,):
        raise ValueError(f"{name} must have shape ({pack.dof},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def forward_kinematics(model: KinematicModel, q, frame: str) -> FramePose:
    """Pose of a link frame in the base frame at configuration q."""
    pack = packed(model)
    q = _check_q(pack, q)
    if frame not in pack.frame_body:
        raise UnknownFrameError(f"model '{model.name}' has no link '{frame}'")
    body = pack.frame_body[frame]
    if body < 0:
        return FramePose(np.eye(3), np.zeros(3))
    Rw, pw = _kernels.fk_chain(pack.jtype, pack.qidx, pack.R0, pack.p0, pack.axis, q)
    return FramePose(np.ascontiguousarray(Rw[body]), np.ascontiguousarray(pw[body]))


def frame_pitch(pose: FramePose) -> float:
    """Pitch of the Z-Y-X (yaw-pitch-roll) Euler decomposition, in
    [-pi/2, pi/2]: theta = -asin(R31)."""
    r31 = float(np.clip(pose.rotation[2, 0], -1.0, 1.0))
    return -math.asin(r31)


def pitch_is_degenerate(pose: FramePose, tol: float = 1e-9) -> bool:
    """True near the gimbal singularity (|R31| -> 1), where yaw and roll
    are no longer separable. frame_pitch itself stays finite."""
    return abs(float(pose.rotation[2, 0])) > 1.0 - tol


def inverse_dynamics(model: KinematicModel, q, qd, qdd) -> np.ndarray:
    """Joint torques realizing (q, qd, qdd), gravity included, viscous
    friction excluded (callers add B*qd)."""
    pack = packed(model)
    q = _check_q(pack, q)
    qd = _check_q(pack, qd, "qd")
    qdd = _check_q(pack, qdd, "qdd")
    return _kernels.rnea(pack.jtype, pack.qidx, pack.R0, pack.p0, pack.axis,
                         pack.mass, pack.com, pack.inertia, q, qd, qdd, pack.gravity)


def mass_matrix(model: KinematicModel, q) -> np.ndarray:
    pack = packed(model)
    q = _check_q(pack, q)
    return _kernels.crba(pack.jtype, pack.qidx, pack.R0, pack.p0, pack.axis,
                         pack.mass, pack.com, pack.inertia, q, pack.dof)


def gravity_vector(model: KinematicModel, q) -> np.ndarray:
    """Torques that hold configuration q against gravity: RNEA at zero
    velocity and zero acceleration."""
    pack = packed(model)
    q = _check_q(pack, q)
    zero = np.zeros(pack.dof)
    return _kernels.rnea(pack.jtype, pack.qidx, pack.R0, pack.p0, pack.axis,
                         pack.mass, pack.com, pack.inertia, q, zero, zero, pack.gravity)


def forward_dynamics(model: KinematicModel, q, qd, u) -> np.ndarray:
    """Joint accelerations under torque u, including the model's viscous
    friction. The SPD solve is Cholesky-based; a non-SPD mass matrix is
    surfaced as DynamicsError."""
    pack = packed(model)
    q = _check_q(pack, q)
    qd = _check_q(pack, qd, "qd")
    u = _check_q(pack, u, "u")
    try:
        return _kernels.fwd_dyn(pack.jtype, pack.qidx, pack.R0, pack.p0, pack.axis,
                                pack.mass, pack.com, pack.inertia, pack.damping,
                                q, qd, u, pack.gravity)
    except np.linalg.LinAlgError as exc:
        raise DynamicsError(
            f"mass matrix of '{model.name}' is not positive definite at q={q.tolist()}; "
            f"check link masses/inertias ({exc})"
        ) from None
