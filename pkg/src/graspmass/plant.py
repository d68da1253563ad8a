"""Simulated plant: payload attachment, sensor quantization, RK4 integration.

The plant holds the *true* robot (possibly carrying a payload the observers
don't know about) and produces quantized, noisy measurements the way a real
servo chain would: encoder counts for position, DAC counts for commanded
torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels
from .dynamics import DynamicsError, RobotState, packed
from .model_io import KinematicModel, Link, outbound_direction

__all__ = [
    "Payload",
    "SensorModel",
    "PlantConfig",
    "PlantDivergenceError",
    "attach_payload",
    "quantize_position",
    "quantize_torque",
    "measure",
    "command_torque",
    "step_plant",
]

TWO_PI = 2.0 * math.pi


class PlantDivergenceError(DynamicsError):
    """Raised when integration blows up (joint speed beyond any physical rate)."""


@dataclass(frozen=True)
class Payload:
    """Point mass rigidly attached to a link of the arm.

    mass:         kilograms, >= 0.  Zero means "no payload" and leaves the
                  model untouched.
    offset:       metres from the attachment joint along the link, toward the
                  chain tip.  Sign follows the link geometry, not a global axis.
    attach_frame: link name the mass rides on; default is the chain tip link.
    """

    mass: float
    offset: float = 0.21
    attach_frame: Optional[str] = None

    def __post_init__(self):
        if not math.isfinite(self.mass) or self.mass < 0.0:
            raise ValueError(f"payload mass must be finite and >= 0, got {self.mass}")
        if not math.isfinite(self.offset):
            raise ValueError("payload offset must be finite")


def attach_payload(model: KinematicModel, payload: Payload) -> KinematicModel:
    """Return a model whose attach link also carries the payload point mass.

    The combined link keeps the original frame; mass, COM and rotational
    inertia are merged exactly (parallel-axis on both bodies about the new
    COM).  A zero-mass payload returns `model` unchanged.
    """
    if payload.mass == 0.0:
        return model
    frame = payload.attach_frame
    if frame is None:
        frame = model.joints[-1].child
    link = model.link(frame)

    if payload.offset == 0.0:
        p = np.zeros(3)
    else:
        p = outbound_direction(model, frame) * payload.offset
    m0, m1 = link.mass, payload.mass
    m = m0 + m1
    c0 = np.asarray(link.center_of_mass, dtype=float)
    c = (m0 * c0 + m1 * p) / m

    def _shift(inertia, mass, d):
        # parallel axis: I_about_new = I_about_com + m (|d|^2 E - d d^T)
        d = np.asarray(d, dtype=float)
        return inertia + mass * (float(d @ d) * np.eye(3) - np.outer(d, d))

    inertia = _shift(np.asarray(link.inertia, dtype=float), m0, c0 - c)
    inertia = inertia + _shift(np.zeros((3, 3)), m1, p - c)
    merged = Link(name=link.name, mass=m, center_of_mass=tuple(c), inertia=inertia)
    return model.replace_link(merged)


@dataclass(frozen=True)
class SensorModel:
    """Quantization + noise for the measurement and command paths.

    Positions are rounded to encoder counts; commanded torques are clamped
    to the actuator range and rounded to DAC counts.  Measurement noise is
    injected in integer counts (uniform over +/- noise_lsb by default) so a
    noisy reading is still a representable encoder value.
    """

    position_bits: int = 12
    position_range: float = TWO_PI
    torque_bits: int = 10
    torque_range: Optional[float] = None  # None -> per-joint effort limits
    noise_lsb: int = 2
    noise: str = "uniform"  # or "gaussian" (clipped at +/- noise_lsb counts)
    rng_seed: int = 0

    def __post_init__(self):
        if self.position_bits < 1 or self.torque_bits < 1:
            raise ValueError("bit widths must be >= 1")
        if self.noise not in ("uniform", "gaussian"):
            raise ValueError(f"unknown noise kind {self.noise!r}")
        if self.noise_lsb < 0:
            raise ValueError("noise_lsb must be >= 0")

    @property
    def position_step(self) -> float:
        return self.position_range / (1 << self.position_bits)

    def torque_step(self, torque_range: float) -> float:
        return 2.0 * torque_range / (1 << self.torque_bits)


def quantize_position(q: np.ndarray, sensor: SensorModel) -> np.ndarray:
    """Round to the encoder grid. Ties go up (toward +inf), matching the
    behaviour of a count register that increments on the tick edge."""
    step = sensor.position_step
    return np.floor(np.asarray(q, dtype=float) / step + 0.5) * step


def quantize_torque(u: np.ndarray, sensor: SensorModel, effort: np.ndarray) -> np.ndarray:
    """Clamp to actuator range, then round to the DAC grid (ties up)."""
    u = np.asarray(u, dtype=float)
    if sensor.torque_range is not None:
        rng_ = np.full(u.shape, float(sensor.torque_range))
    else:
        rng_ = np.where(np.isfinite(effort), effort, 10.0)
    u = np.clip(u, -rng_, rng_)
    step = 2.0 * rng_ / (1 << sensor.torque_bits)
    return np.floor(u / step + 0.5) * step


def _noise_counts(rng: np.random.Generator, sensor: SensorModel, n: int) -> np.ndarray:
    if sensor.noise_lsb == 0:
        return np.zeros(n)
    if sensor.noise == "uniform":
        return rng.integers(-sensor.noise_lsb, sensor.noise_lsb + 1, size=n).astype(float)
    sigma = sensor.noise_lsb / 2.0
    raw = np.rint(rng.normal(0.0, sigma, size=n))
    return np.clip(raw, -sensor.noise_lsb, sensor.noise_lsb)


@dataclass
class PlantConfig:
    """Everything the closed-loop simulation treats as 'the real world'.

    model:    the nominal robot description.
    payload:  optional grasped mass folded into the true dynamics only.
    sensor:   quantization/noise model; None disables both.
    sample_period:       controller tick, seconds.
    integrator_substeps: RK4 substeps per tick.
    """

    model: KinematicModel
    payload: Optional[Payload] = None
    sensor: Optional[SensorModel] = None
    sample_period: float = 0.004
    integrator_substeps: int = 4
    _true_model: KinematicModel = field(init=False, repr=False)
    _rng: Optional[np.random.Generator] = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.integrator_substeps < 1:
            raise ValueError("integrator_substeps must be >= 1")
        if self.payload is not None and self.payload.mass > 0.0:
            self._true_model = attach_payload(self.model, self.payload)
        else:
            self._true_model = self.model

    @property
    def true_model(self) -> KinematicModel:
        return self._true_model

    def rng(self) -> np.random.Generator:
        if self._rng is None:
            seed = self.sensor.rng_seed if self.sensor is not None else 0
            self._rng = np.random.default_rng(seed)
        return self._rng

    def reset_rng(self):
        self._rng = None


def measure(q: np.ndarray, config: PlantConfig) -> np.ndarray:
    """Encoder reading for the true position: quantize, then add count noise."""
    s = config.sensor
    if s is None:
        return np.asarray(q, dtype=float).copy()
    y = quantize_position(q, s)
    return y + _noise_counts(config.rng(), s, y.shape[0]) * s.position_step


def command_torque(u: np.ndarray, config: PlantConfig) -> np.ndarray:
    """Torque as actually applied after the DAC: clamped and quantized."""
    s = config.sensor
    pk = packed(config.model)
    if s is None:
        eff = pk.effort
        return np.clip(np.asarray(u, dtype=float), -np.where(np.isfinite(eff), eff, np.inf),
                       np.where(np.isfinite(eff), eff, np.inf))
    return quantize_torque(u, s, pk.effort)


def step_plant(state: RobotState, u: np.ndarray, config: PlantConfig) -> RobotState:
    """Advance the true dynamics one controller tick under zero-order-hold torque.

    Joint limits clamp position (and zero the corresponding velocity) at
    substep boundaries, the way a hard stop would.  Raises
    PlantDivergenceError if any joint speed passes 1e3 rad/s.
    """
    pk = packed(config.true_model)
    u = np.asarray(u, dtype=float)
    if u.shape != (pk.dof,):
        raise ValueError(f"torque shape {u.shape}, expected ({pk.dof},)")
    h = config.sample_period / config.integrator_substeps
    q, qd, ok = _kernels.rk4_plant(
        pk.jtype, pk.qidx, pk.R0, pk.p0, pk.axis, pk.mass, pk.com, pk.inertia,
        pk.damping, state.q.astype(float), state.qd.astype(float), u,
        pk.gravity, h, config.integrator_substeps, pk.lower, pk.upper,
    )
    if not ok:
        raise PlantDivergenceError(
            "plant integration diverged (joint speed exceeded 1e3 rad/s); "
            "check torque scaling and the integrator step"
        )
    return RobotState(q=q, qd=qd)
