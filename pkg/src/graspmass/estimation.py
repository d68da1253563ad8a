"""Mass reconstruction from the filtered sliding-mode injection.

The chain of reasoning implemented here: the observer's switched term,
low-passed, is the acceleration-level signature of whatever generalized
force the nominal model failed to predict.  Multiplying by the nominal mass
matrix turns that back into joint torques.  On the wrist pitch joint of an
arm holding a point mass at lever l4, statics give

    tau = -m g l4 sin(theta)

with theta the pitch of the wrist frame below the horizontal plane, so the
mass follows by division.  The estimate is only defined when the arm is
quasi-static and the wrist is actually pitched; outside that window the
output is gated to zero rather than reported as garbage.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .dynamics import forward_kinematics, mass_matrix
from .model_io import KinematicModel, outbound_direction

__all__ = [
    "EstimationConfig",
    "MassEstimate",
    "SingularPitchError",
    "SelectionError",
    "disturbance_torque",
    "estimate_mass",
    "lever_pitch",
    "gated_mass_estimate",
    "select_estimation_joint",
    "MassAverager",
]

GRAVITY_DEFAULT = 9.81


class SingularPitchError(ValueError):
    """Mass requested at a wrist pitch too close to zero to divide by."""


class SelectionError(ValueError):
    """No joint in the chain qualifies as a weight-sensitive pitch joint."""


@dataclass(frozen=True)
class EstimationConfig:
    """Parameters of the torque-to-mass conversion and its validity gate.

    l4:              lever arm (m) from the estimation joint to the grasp point.
    estimation_joint: index into the actuated joints; its torque row is used.
    pitch_frame:     link whose orientation supplies theta.
    theta_threshold: |theta| at or below this gates the estimate (rad).
    speed_gate:      any |qd_hat[i]| above this gates the estimate (rad/s).
    """

    l4: float = 0.21
    estimation_joint: int = 5
    pitch_frame: str = ""
    theta_threshold: float = 0.2
    speed_gate: float = 0.5
    g: float = GRAVITY_DEFAULT

    def __post_init__(self):
        if self.l4 <= 0:
            raise ValueError("lever arm l4 must be positive")
        if self.theta_threshold < 0 or self.speed_gate <= 0:
            raise ValueError("gate thresholds must be positive")
        if self.g <= 0:
            raise ValueError("g must be positive (magnitude of gravity)")


@dataclass(frozen=True)
class MassEstimate:
    """One tick of the estimator: mass (kg, 0 when gated), the reconstructed
    torque on the estimation joint (N m), the wrist pitch (rad), and whether
    the validity gate suppressed the estimate."""

    mass: float
    joint_torque: float
    pitch: float
    gated: bool


def disturbance_torque(
    model: KinematicModel,
    q: np.ndarray,
    z2_eq: np.ndarray,
    qd_f: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Joint torques equivalent to the filtered injection: tau = M(q) z2_eq.

    Uses the nominal (observer-side) mass matrix at the measured position --
    the same model whose mismatch produced z2 in the first place.

    When the filtered observer velocity qd_f is supplied, the model's known
    viscous torque -B qd_f is credited back: the observer's velocity channel
    absorbs damping-at-estimated-velocity into the injection, and without
    this term that known torque would masquerade as external load.  At
    standstill qd_f is the encoder-dither bias, so the correction exactly
    cancels the systematic shrink the dither would otherwise cause.
    """
    tau = mass_matrix(model, q) @ np.asarray(z2_eq, dtype=float)
    if qd_f is not None:
        damping = np.array([j.viscous_friction for j in model.actuated_joints], dtype=float)
        tau = tau - damping * np.asarray(qd_f, dtype=float)
    return tau


def lever_pitch(
    model: KinematicModel,
    q: np.ndarray,
    joint_index: int,
    frame: Optional[str] = None,
) -> float:
    """Signed inclination of the assumed payload lever at the estimation joint.

    The grasped mass is assumed to sit along the wrist's outbound direction
    d (toward the chain tip).  Its weight torques the joint by
    -m g l (d x ghat) . a, so the angle theta with

        sin(theta) = -(d x ghat) . a      (all vectors in world frame)

    is exactly the angle the torque-to-mass formula needs.  For an arm whose
    grip extends along the wrist frame's -z axis this reduces to the wrist
    frame's pitch angle (-asin(R[2,0])); for chains built the other way the
    sign comes out right automatically, which a bare frame-pitch reading
    would not.  theta = 0 means the payload hangs straight below (or stands
    straight above) the joint and its weight is invisible to this joint.
    """
    joints = model.actuated_joints
    if not (0 <= joint_index < len(joints)):
        raise ValueError(f"joint index {joint_index} out of range for {len(joints)} joints")
    j = joints[joint_index]
    frame = frame or j.child
    pose = forward_kinematics(model, np.asarray(q, dtype=float), frame)
    d = pose.rotation @ outbound_direction(model, frame)
    a = pose.rotation @ np.asarray(j.axis, dtype=float)
    g = np.asarray(model.gravity, dtype=float)
    gn = float(np.linalg.norm(g))
    if gn == 0.0:
        raise ValueError("lever pitch is undefined in zero gravity")
    s = -float(np.cross(d, g / gn) @ a)
    return math.asin(min(1.0, max(-1.0, s)))


def estimate_mass(
    tau: float,
    theta: float,
    cfg: EstimationConfig,
) -> float:
    """m = -tau / (g l4 sin theta).  Raises when |theta| <= threshold."""
    if abs(theta) <= cfg.theta_threshold:
        raise SingularPitchError(
            f"wrist pitch {theta:.4f} rad is inside the gate threshold "
            f"{cfg.theta_threshold:.4f}; the lever arm projection is too small"
        )
    return -tau / (cfg.g * cfg.l4 * math.sin(theta))


def gated_mass_estimate(
    q: np.ndarray,
    qd_hat: np.ndarray,
    z2_eq: np.ndarray,
    model: KinematicModel,
    cfg: EstimationConfig,
    qd_f: Optional[np.ndarray] = None,
) -> MassEstimate:
    """Full per-tick estimate with the quasi-static validity gate.

    Gated (mass forced to 0) when any joint's estimated speed exceeds the
    speed gate or the wrist pitch magnitude is at or below the angle gate.
    The reconstructed torque and pitch are reported either way.  qd_f, when
    given, is the low-passed observer velocity used to credit known viscous
    torque back to the model side (see disturbance_torque).
    """
    q = np.asarray(q, dtype=float)
    qd_hat = np.asarray(qd_hat, dtype=float)
    tau = disturbance_torque(model, q, z2_eq, qd_f)
    j = cfg.estimation_joint
    if not (0 <= j < tau.shape[0]):
        raise ValueError(f"estimation_joint {j} out of range for a {tau.shape[0]}-DOF chain")
    theta = lever_pitch(model, q, j, cfg.pitch_frame or None)
    moving = float(np.max(np.abs(qd_hat))) > cfg.speed_gate
    flat = abs(theta) <= cfg.theta_threshold
    if moving or flat:
        return MassEstimate(mass=0.0, joint_torque=float(tau[j]), pitch=theta, gated=True)
    m = -float(tau[j]) / (cfg.g * cfg.l4 * math.sin(theta))
    return MassEstimate(mass=m, joint_torque=float(tau[j]), pitch=theta, gated=False)


def select_estimation_joint(
    model: KinematicModel,
    q_home: np.ndarray,
    axis_alignment_limit: float = 0.17,
) -> Tuple[int, str]:
    """Pick the pitch joint nearest the tip whose axis stays horizontal at home.

    A joint can carry weight information only if gravity produces a moment
    about it, i.e. its world axis is (near) perpendicular to gravity.  Roll
    joints whose axes align with gravity at the home pose are skipped.
    Returns (actuated joint index, child link name).  The alignment limit is
    the largest tolerated |cos| between the joint axis and the gravity
    direction (0.17 ~ 80 degrees or more away from vertical).
    """
    g = np.asarray(model.gravity, dtype=float)
    gn = np.linalg.norm(g)
    if gn == 0:
        raise SelectionError("cannot select a weight-sensitive joint in zero gravity")
    ghat = g / gn
    joints = model.actuated_joints
    report = []
    for idx in range(len(joints) - 1, -1, -1):
        j = joints[idx]
        pose = forward_kinematics(model, np.asarray(q_home, dtype=float), j.child)
        axis_w = pose.rotation @ np.asarray(j.axis, dtype=float)
        c = abs(float(axis_w @ ghat))
        report.append(f"{j.name}: |axis.g|={c:.3f}")
        if c <= axis_alignment_limit:
            return idx, j.child
    raise SelectionError(
        "no joint axis is horizontal enough at the home pose to sense weight; "
        + "; ".join(report)
    )


class MassAverager:
    """Moving average of the gated mass over a fixed time window.

    Gated ticks contribute their zeros -- the average is over wall time, not
    over valid samples, so a mostly-gated window correctly reads near zero.
    """

    def __init__(self, window_s: float = 1.0, sample_hz: float = 250.0):
        if window_s <= 0 or sample_hz <= 0:
            raise ValueError("window and sample rate must be positive")
        self._n = max(1, int(round(window_s * sample_hz)))
        self._buf: deque = deque(maxlen=self._n)
        self._sum = 0.0

    def update(self, mass: float) -> float:
        if len(self._buf) == self._buf.maxlen:
            self._sum -= self._buf[0]
        self._buf.append(mass)
        self._sum += mass
        return self._sum / len(self._buf)

    def reset(self):
        self._buf.clear()
        self._sum = 0.0
