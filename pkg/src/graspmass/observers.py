"""State observers: super-twisting sliding-mode observer, the low-pass
filter that extracts the equivalent output injection, and a joint-space EKF.

The sliding-mode observer runs the *nominal* model (no payload).  Whatever
torque the real arm feels that the nominal model cannot explain shows up in
the switching term z2; low-pass filtering z2 recovers its slow component,
the equivalent injection, which downstream code converts to a disturbance
torque and then a mass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import signal

from . import _kernels
from .dynamics import DynamicsError, packed
from .model_io import KinematicModel

__all__ = [
    "SmoGains",
    "SmoState",
    "ObserverDivergenceError",
    "FilterDesignError",
    "CovarianceError",
    "make_smo_state",
    "smo_step",
    "FilterState",
    "design_lowpass",
    "equivalent_injection",
    "EkfState",
    "make_ekf_state",
    "ekf_step",
]

_DIVERGE_SPEED = 1e3


class ObserverDivergenceError(DynamicsError):
    """Observer velocity estimate left any plausible operating range."""


class FilterDesignError(ValueError):
    """Low-pass design request that cannot be realized at this sample rate."""


class CovarianceError(DynamicsError):
    """EKF covariance lost positive semi-definiteness."""


@dataclass(frozen=True)
class SmoGains:
    """Super-twisting gains, shared across joints.

    lam scales the sqrt injection into the position estimate; alpha is the
    magnitude of the switched injection into the velocity estimate and must
    dominate the worst-case model mismatch (in acceleration units) for the
    sliding surface to hold.
    """

    lam: float = 6.0
    alpha: float = 4.2

    def __post_init__(self):
        if self.lam <= 0 or self.alpha <= 0:
            raise ValueError("sliding-mode gains must be positive")


@dataclass(frozen=True)
class SmoState:
    x1_hat: np.ndarray  # position estimate
    x2_hat: np.ndarray  # velocity estimate
    z2: np.ndarray      # last switched injection (pre-filter), accel units


def make_smo_state(q0: np.ndarray, qd0: Optional[np.ndarray] = None) -> SmoState:
    q0 = np.asarray(q0, dtype=float)
    qd0 = np.zeros_like(q0) if qd0 is None else np.asarray(qd0, dtype=float)
    return SmoState(x1_hat=q0.copy(), x2_hat=qd0.copy(), z2=np.zeros_like(q0))


def smo_step(
    state: SmoState,
    q_meas: np.ndarray,
    u: np.ndarray,
    model: KinematicModel,
    gains: SmoGains,
    dt: float,
) -> SmoState:
    """One forward-Euler update of the super-twisting observer.

    The model acceleration is evaluated at the measured position and the
    estimated velocity; both estimate channels are corrected by the position
    error e = q_meas - x1_hat:

        x1 <- x1 + dt (x2 + lam sqrt|e| sign e)
        x2 <- x2 + dt (f(q_meas, x2, u) + alpha sign e)

    sign(0) is 0, so the observer is exactly quiescent on the surface.

    f keeps the full model, viscous damping included: the -B x2 / M slope
    is what makes the velocity channel globally self-stabilizing, so a
    transient that briefly exceeds the switching authority alpha cannot
    latch the observer away from the sliding regime.  The price is that
    under encoder quantization the dither's nonzero mean couples into the
    injection through B; downstream torque reconstruction removes that by
    crediting the model's damping torque at the filtered velocity estimate
    back to the disturbance (see the estimation module).
    """
    pk = packed(model)
    q_meas = np.asarray(q_meas, dtype=float)
    u = np.asarray(u, dtype=float)
    e = q_meas - state.x1_hat
    s = np.sign(e)
    z1 = gains.lam * np.sqrt(np.abs(e)) * s
    z2 = gains.alpha * s
    acc = _kernels.fwd_dyn(
        pk.jtype, pk.qidx, pk.R0, pk.p0, pk.axis, pk.mass, pk.com, pk.inertia,
        pk.damping, q_meas, state.x2_hat, u, pk.gravity,
    )
    x1 = state.x1_hat + dt * (state.x2_hat + z1)
    x2 = state.x2_hat + dt * (acc + z2)
    if np.abs(x2).max() > _DIVERGE_SPEED:
        raise ObserverDivergenceError(
            "sliding-mode observer diverged (velocity estimate exceeded "
            f"{_DIVERGE_SPEED:g} rad/s); alpha likely too small for the model mismatch"
        )
    return SmoState(x1_hat=x1, x2_hat=x2, z2=z2)


# ---------------------------------------------------------------------------
# equivalent-injection filter


@dataclass(frozen=True)
class FilterState:
    """Cascaded-biquad low-pass with direct-form II transposed state.

    sos: (n_sections, 6) second-order sections; zi: (n_sections, 2, n_channels)
    internal state, allocated lazily on the first sample.
    """

    sos: np.ndarray
    zi: Optional[np.ndarray] = None


def design_lowpass(cutoff_hz: float, sample_hz: float, order: int = 4) -> FilterState:
    """Butterworth low-pass as second-order sections (bilinear transform)."""
    if cutoff_hz <= 0:
        raise FilterDesignError("cutoff must be positive")
    nyq = 0.5 * sample_hz
    if cutoff_hz >= nyq:
        raise FilterDesignError(
            f"cutoff {cutoff_hz} Hz must sit below the Nyquist rate {nyq} Hz"
        )
    if order < 1 or order % 2:
        raise FilterDesignError("order must be a positive even number")
    sos = signal.butter(order, cutoff_hz / nyq, btype="low", output="sos")
    return FilterState(sos=np.asarray(sos, dtype=float))


def equivalent_injection(filt: FilterState, z2: np.ndarray) -> Tuple[FilterState, np.ndarray]:
    """Push one sample of the switched injection through the low-pass.

    Returns the advanced filter state and the filtered value.  Pure function:
    the input state is not mutated.
    """
    x = np.asarray(z2, dtype=float)
    nsec = filt.sos.shape[0]
    zi = filt.zi
    if zi is None:
        zi = np.zeros((nsec, 2, x.shape[0]))
    else:
        zi = zi.copy()
    y = x.copy()
    for s in range(nsec):
        b0, b1, b2, _, a1, a2 = filt.sos[s]
        x_s = y
        y = b0 * x_s + zi[s, 0]
        zi[s, 0] = b1 * x_s - a1 * y + zi[s, 1]
        zi[s, 1] = b2 * x_s - a2 * y
    return FilterState(sos=filt.sos, zi=zi), y


# ---------------------------------------------------------------------------
# extended Kalman filter


@dataclass(frozen=True)
class EkfState:
    x1_hat: np.ndarray
    x2_hat: np.ndarray
    P: np.ndarray  # (2n, 2n), state ordered [position; velocity]
    Q: np.ndarray
    R: np.ndarray


def make_ekf_state(
    q0: np.ndarray,
    qd0: Optional[np.ndarray] = None,
    p0: float = 1e-2,
    q_scale: float = 0.003,
    r_scale: float = 0.001,
) -> EkfState:
    q0 = np.asarray(q0, dtype=float)
    qd0 = np.zeros_like(q0) if qd0 is None else np.asarray(qd0, dtype=float)
    n = q0.shape[0]
    return EkfState(
        x1_hat=q0.copy(),
        x2_hat=qd0.copy(),
        P=p0 * np.eye(2 * n),
        Q=q_scale * np.eye(2 * n),
        R=r_scale * np.eye(n),
    )


def ekf_step(
    state: EkfState,
    q_meas: np.ndarray,
    u: np.ndarray,
    model: KinematicModel,
    dt: float,
    jac_eps: float = 1e-6,
) -> EkfState:
    """Continuous-time EKF step, Euler-discretized.

    Positions are measured directly, so H = [I 0] and the gain reduces to
    K = P H^T R^-1 = P[:, :n] R^-1.  The Riccati update
    P' = P + dt (F P + P F^T - K R K^T + Q) uses a numerically differentiated
    dynamics Jacobian F (central differences at the current estimate).
    The covariance is re-symmetrized every step and checked for PSD.
    """
    pk = packed(model)
    n = pk.dof
    q_meas = np.asarray(q_meas, dtype=float)
    u = np.asarray(u, dtype=float)

    e = q_meas - state.x1_hat
    K = state.P[:, :n] @ np.linalg.inv(state.R)

    acc = _kernels.fwd_dyn(
        pk.jtype, pk.qidx, pk.R0, pk.p0, pk.axis, pk.mass, pk.com, pk.inertia,
        pk.damping, state.x1_hat, state.x2_hat, u, pk.gravity,
    )
    xdot = np.concatenate([state.x2_hat, acc]) + K @ e
    x1 = state.x1_hat + dt * xdot[:n]
    x2 = state.x2_hat + dt * xdot[n:]

    F = _kernels.ekf_state_jacobian(
        pk.jtype, pk.qidx, pk.R0, pk.p0, pk.axis, pk.mass, pk.com, pk.inertia,
        pk.damping, state.x1_hat, state.x2_hat, u, pk.gravity, jac_eps,
    )
    Pdot = F @ state.P + state.P @ F.T - K @ state.R @ K.T + state.Q
    P = state.P + dt * Pdot
    P = 0.5 * (P + P.T)
    eig_min = float(np.linalg.eigvalsh(P)[0])
    if eig_min < -1e-10 * max(1.0, float(np.abs(P).max())):
        raise CovarianceError(
            f"EKF covariance lost positive semi-definiteness (min eigenvalue {eig_min:g})"
        )
    if np.abs(x2).max() > _DIVERGE_SPEED:
        raise ObserverDivergenceError("EKF velocity estimate diverged")
    return EkfState(x1_hat=x1, x2_hat=x2, P=P, Q=state.Q, R=state.R)
