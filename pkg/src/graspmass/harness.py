"""Closed-loop scenario runner: topic bus, experiment suite, log export.

One process simulates what runs as separate nodes on the robot: the plant
(with its sensors), the observers, the controller and the mass estimator all
exchange samples over an in-process topic bus on a fixed 4 ms grid.  The bus
is synchronous and zero-latency: everything published at tick t is visible
to every consumer within the same tick.  Published estimates at time t are
the states *entering* that tick; state updates then integrate across
[t, t+dt] using the torque commanded at t, which is exactly the torque the
plant holds over that interval.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .control import ControlGains, TrajectoryPlan, pd_gravity_torque, plan_quintic, sample_trajectory
from .dynamics import RobotState, gravity_vector
from .estimation import (
    EstimationConfig,
    MassAverager,
    gated_mass_estimate,
    select_estimation_joint,
)
from .model_io import (
    KinematicModel,
    ValidationError,
    extract_chain,
    fixture_path,
    parse_urdf_file,
    scale_inertial,
)
from .observers import (
    SmoGains,
    design_lowpass,
    ekf_step,
    equivalent_injection,
    make_ekf_state,
    make_smo_state,
    smo_step,
)
from .plant import Payload, PlantConfig, SensorModel, command_torque, measure, step_plant

__all__ = [
    "Bus",
    "PoseSegment",
    "ScenarioConfig",
    "RunResult",
    "ScenarioError",
    "load_scenario",
    "scenario_hash",
    "run_scenario",
    "run_parameter_sensitivity",
    "run_l4_sensitivity",
    "run_katana_replication",
    "export_logs",
    "export_sweep",
]


class ScenarioError(ValueError):
    """Bad scenario configuration."""


class Bus:
    """Order-preserving in-process topic log.

    publish() appends one (t, vector) record; timestamps must be
    nondecreasing per topic.  This models the node graph's message transport
    with zero latency and doubles as the run's log store.
    """

    def __init__(self):
        self._records: Dict[str, List[Tuple[float, np.ndarray]]] = {}

    def publish(self, topic: str, t: float, values) -> None:
        values = np.atleast_1d(np.asarray(values, dtype=float))
        rec = self._records.setdefault(topic, [])
        if rec and t < rec[-1][0]:
            raise ValueError(
                f"topic {topic!r}: timestamp {t} precedes previous {rec[-1][0]}"
            )
        rec.append((t, values))

    def topics(self) -> Tuple[str, ...]:
        return tuple(sorted(self._records))

    def records(self, topic: str) -> List[Tuple[float, np.ndarray]]:
        return list(self._records[topic])

    def series(self, topic: str) -> Tuple[np.ndarray, np.ndarray]:
        """(times, values) arrays; values has one row per sample."""
        rec = self._records[topic]
        t = np.array([r[0] for r in rec])
        v = np.stack([r[1] for r in rec])
        return t, v


@dataclass(frozen=True)
class PoseSegment:
    """One goal pose: quintic move over move_time, then hold for hold_time."""

    goal: Tuple[float, ...]
    move_time: float = 3.0
    hold_time: float = 5.0

    def __post_init__(self):
        if self.move_time <= 0 or self.hold_time < 0:
            raise ValueError("segment times must be positive (hold may be 0)")


@dataclass
class ScenarioConfig:
    """Everything one closed-loop run needs; loadable from YAML.

    `urdf` is a filesystem path, or "fixture:NAME" for a bundled model.
    When `base`/`tip` are given the chain between them is extracted from a
    (possibly branching) whole-robot description.  `observer_model_scale`
    multiplies the observer/controller-side link masses and inertias; the
    plant always keeps nominal values.
    """

    urdf: str
    name: str = "scenario"
    base: Optional[str] = None
    tip: Optional[str] = None
    start_pose: Tuple[float, ...] = ()
    segments: Tuple[PoseSegment, ...] = ()
    payload: Optional[Payload] = None
    smo: SmoGains = field(default_factory=SmoGains)
    control: ControlGains = field(default_factory=ControlGains)
    sensor: Optional[SensorModel] = field(default_factory=SensorModel)
    l4: float = 0.21
    theta_threshold: float = 0.2
    speed_gate: float = 0.5
    g: float = 9.81
    estimation_joint: Optional[int] = None  # None -> auto-select
    pitch_frame: Optional[str] = None
    ekf_q_scale: float = 0.003
    ekf_r_scale: float = 0.001
    ekf_p0: float = 0.01
    filter_cutoff_hz: float = 1.0
    filter_order: int = 4
    sample_hz: float = 250.0
    duration: float = 20.0
    observer_model_scale: float = 1.0
    rng_seed: int = 1
    integrator_substeps: int = 4
    control_mode: str = "pd_gravity"  # or "constant_torque"
    speed_source: str = "ekf"  # or "smo" / "true"
    smoothing_window: float = 1.0
    gravity: Tuple[float, float, float] = (0.0, 0.0, -9.81)

    def __post_init__(self):
        if self.sample_hz <= 0 or self.duration <= 0:
            raise ScenarioError("sample_hz and duration must be positive")
        if self.observer_model_scale <= 0:
            raise ScenarioError("observer_model_scale must be positive")
        if self.control_mode not in ("pd_gravity", "constant_torque"):
            raise ScenarioError(f"unknown control_mode {self.control_mode!r}")
        if self.speed_source not in ("ekf", "smo", "true"):
            raise ScenarioError(f"unknown speed_source {self.speed_source!r}")
        if self.control_mode == "constant_torque" and self.speed_source == "ekf":
            raise ScenarioError(
                "constant_torque mode runs no EKF; set speed_source to 'smo' or 'true'"
            )
        if self.smoothing_window <= 0:
            raise ScenarioError("smoothing_window must be positive")


def _resolve_urdf(spec: str) -> str:
    if spec.startswith("fixture:"):
        return fixture_path(spec.split(":", 1)[1])
    return spec


def load_scenario(path: str) -> ScenarioConfig:
    """Read a scenario YAML file into a ScenarioConfig."""
    with open(path, "r") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: expected a mapping at top level")
    return scenario_from_dict(raw, origin=path)


def scenario_from_dict(raw: dict, origin: str = "<dict>") -> ScenarioConfig:
    raw = dict(raw)
    kwargs = {}
    try:
        kwargs["urdf"] = raw.pop("urdf")
    except KeyError:
        raise ScenarioError(f"{origin}: missing required key 'urdf'") from None
    chain = raw.pop("chain", None)
    if chain:
        kwargs["base"] = chain.get("base")
        kwargs["tip"] = chain.get("tip")
    if "start_pose" in raw:
        kwargs["start_pose"] = tuple(float(v) for v in raw.pop("start_pose"))
    segs = []
    for s in raw.pop("segments", []) or []:
        segs.append(PoseSegment(
            goal=tuple(float(v) for v in s["goal"]),
            move_time=float(s.get("move_time", 3.0)),
            hold_time=float(s.get("hold", s.get("hold_time", 5.0))),
        ))
    kwargs["segments"] = tuple(segs)
    pl = raw.pop("payload", None)
    if pl and float(pl.get("mass", 0.0)) != 0.0:
        kwargs["payload"] = Payload(
            mass=float(pl["mass"]),
            offset=float(pl.get("offset", 0.21)),
            attach_frame=pl.get("attach_frame"),
        )
    obs = raw.pop("observer", None) or {}
    kwargs["smo"] = SmoGains(lam=float(obs.get("lam", 6.0)), alpha=float(obs.get("alpha", 4.2)))
    for yaml_key, attr in (("q_scale", "ekf_q_scale"), ("r_scale", "ekf_r_scale"), ("p0", "ekf_p0")):
        if yaml_key in obs:
            kwargs[attr] = float(obs[yaml_key])
    ctl = raw.pop("control", None) or {}
    kwargs["control"] = ControlGains(kp=float(ctl.get("kp", 2.5)), kd=float(ctl.get("kd", 0.5)))
    est = raw.pop("estimation", None) or {}
    for yaml_key, attr in (
        ("l4", "l4"), ("theta_threshold", "theta_threshold"),
        ("speed_gate", "speed_gate"), ("g", "g"),
    ):
        if yaml_key in est:
            kwargs[attr] = float(est[yaml_key])
    if "estimation_joint" in est:
        kwargs["estimation_joint"] = int(est["estimation_joint"])
    if "pitch_frame" in est:
        kwargs["pitch_frame"] = est["pitch_frame"]
    sen = raw.pop("sensor", "default")
    if sen is None:
        kwargs["sensor"] = None
    elif sen != "default":
        kwargs["sensor"] = SensorModel(
            position_bits=int(sen.get("position_bits", 12)),
            position_range=float(sen.get("position_range", 2.0 * math.pi)),
            torque_bits=int(sen.get("torque_bits", 10)),
            torque_range=(float(sen["torque_range"]) if sen.get("torque_range") is not None else None),
            noise_lsb=int(sen.get("noise_lsb", 2)),
            noise=sen.get("noise", "uniform"),
            rng_seed=int(sen.get("rng_seed", raw.get("rng_seed", 1))),
        )
    if "gravity" in raw:
        kwargs["gravity"] = tuple(float(v) for v in raw.pop("gravity"))
    for key in (
        "name", "sample_hz", "duration", "observer_model_scale", "rng_seed",
        "integrator_substeps", "control_mode", "speed_source", "smoothing_window",
        "filter_cutoff_hz", "filter_order",
    ):
        if key in raw:
            kwargs[key] = raw.pop(key)
    unknown = set(raw) - {"chain"}
    if unknown:
        raise ScenarioError(f"{origin}: unknown keys {sorted(unknown)}")
    # seed the sensor RNG from the scenario seed unless the YAML pinned one
    cfg = ScenarioConfig(**kwargs)
    if cfg.sensor is not None and (not isinstance(sen, dict) or "rng_seed" not in sen):
        cfg.sensor = dataclasses.replace(cfg.sensor, rng_seed=int(cfg.rng_seed))
    return cfg


def _config_dict(cfg: ScenarioConfig) -> dict:
    d = dataclasses.asdict(cfg)
    # dataclasses.asdict already descends into the nested frozen dataclasses
    return d


def scenario_hash(cfg: ScenarioConfig) -> str:
    """sha256 over the canonical JSON form of the config (identifies a run)."""
    blob = json.dumps(_config_dict(cfg), sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunResult:
    summary: dict
    bus: Bus
    config: ScenarioConfig
    nominal_model: KinematicModel
    observer_model: KinematicModel


# ---------------------------------------------------------------------------
# trajectory schedule


class _Schedule:
    """Piecewise reference: quintic segments chained with holds."""

    def __init__(self, start_pose: np.ndarray, segments: Sequence[PoseSegment]):
        self._start = start_pose
        self._plans: List[Tuple[float, float, TrajectoryPlan]] = []
        t0 = 0.0
        prev = start_pose
        for seg in segments:
            goal = np.asarray(seg.goal, dtype=float)
            if goal.shape != start_pose.shape:
                raise ScenarioError(
                    f"segment goal has {goal.shape[0]} joints, chain has {start_pose.shape[0]}"
                )
            plan = plan_quintic(prev, goal, seg.move_time)
            end = t0 + seg.move_time + seg.hold_time
            self._plans.append((t0, end, plan))
            t0 = end
            prev = goal

    def sample(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        n = self._start.shape[0]
        for t0, end, plan in self._plans:
            if t < end or (t0, end, plan) is self._plans[-1]:
                if t >= t0:
                    q, qd, _ = sample_trajectory(plan, t - t0)
                    return q, qd
        return self._start.copy(), np.zeros(n)


# ---------------------------------------------------------------------------
# the loop


def _build_models(cfg: ScenarioConfig) -> Tuple[KinematicModel, KinematicModel]:
    path = _resolve_urdf(cfg.urdf)
    model = parse_urdf_file(path, require_chain=not (cfg.base or cfg.tip))
    if cfg.base or cfg.tip:
        if not (cfg.base and cfg.tip):
            raise ScenarioError("chain extraction needs both base and tip")
        model = extract_chain(model, cfg.base, cfg.tip)
    model = model.with_gravity(cfg.gravity)
    if cfg.observer_model_scale != 1.0:
        observer = scale_inertial(model, cfg.observer_model_scale)
    else:
        observer = model
    return model, observer


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Execute one closed-loop run; returns summary metrics plus full logs.

    Per tick k (t = k/sample_hz): read sensors, publish the entering
    estimator states and the mass estimate, sample the reference, command
    torque, then step observers and plant to t+dt.  Raises the originating
    module's error annotated with the failing timestamp if anything
    diverges.
    """
    nominal, observer_model = _build_models(cfg)
    dof = nominal.dof
    if cfg.start_pose:
        q0 = np.asarray(cfg.start_pose, dtype=float)
        if q0.shape != (dof,):
            raise ScenarioError(f"start_pose has {q0.shape[0]} values, chain has {dof} joints")
    else:
        q0 = np.zeros(dof)

    plant_cfg = PlantConfig(
        model=nominal,
        payload=cfg.payload,
        sensor=cfg.sensor,
        sample_period=1.0 / cfg.sample_hz,
        integrator_substeps=cfg.integrator_substeps,
    )
    plant_cfg.reset_rng()

    if cfg.estimation_joint is None:
        sel_idx, sel_frame = select_estimation_joint(observer_model, q0)
    else:
        sel_idx = cfg.estimation_joint
        sel_frame = cfg.pitch_frame or observer_model.actuated_joints[sel_idx].child
    est_cfg = EstimationConfig(
        l4=cfg.l4,
        estimation_joint=sel_idx,
        pitch_frame=cfg.pitch_frame or sel_frame,
        theta_threshold=cfg.theta_threshold,
        speed_gate=cfg.speed_gate,
        g=cfg.g,
    )
    selected_joint_name = observer_model.actuated_joints[sel_idx].name

    schedule = _Schedule(q0, cfg.segments) if cfg.control_mode == "pd_gravity" else None
    if cfg.control_mode == "constant_torque":
        u_const = command_torque(gravity_vector(observer_model, q0), plant_cfg)

    dt = 1.0 / cfg.sample_hz
    n_ticks = int(round(cfg.duration * cfg.sample_hz))
    bus = Bus()
    filt = design_lowpass(cfg.filter_cutoff_hz, cfg.sample_hz, cfg.filter_order)
    # same filter for the observer velocity: the damping credit in the torque
    # reconstruction must see the injection and the velocity at equal lag
    vfilt = design_lowpass(cfg.filter_cutoff_hz, cfg.sample_hz, cfg.filter_order)
    averager = MassAverager(cfg.smoothing_window, cfg.sample_hz)

    state = RobotState(q=q0.copy(), qd=np.zeros(dof))
    smo = None
    ekf = None
    run_ekf = cfg.control_mode == "pd_gravity"

    for k in range(n_ticks):
        t = k * dt
        try:
            y = measure(state.q, plant_cfg)
            if smo is None:
                smo = make_smo_state(y)
                if run_ekf:
                    ekf = make_ekf_state(
                        y, p0=cfg.ekf_p0, q_scale=cfg.ekf_q_scale, r_scale=cfg.ekf_r_scale
                    )

            bus.publish("true_state", t, np.concatenate([state.q, state.qd]))
            bus.publish("measured_q", t, y)
            bus.publish("smo_state", t, np.concatenate([smo.x1_hat, smo.x2_hat]))
            if run_ekf:
                bus.publish("ekf_state", t, np.concatenate([ekf.x1_hat, ekf.x2_hat]))

            # low-pass the switching term that drove the observer across the
            # previous interval; this is the equivalent injection at time t
            filt, z2_eq = equivalent_injection(filt, smo.z2)
            vfilt, x2_f = equivalent_injection(vfilt, smo.x2_hat)
            bus.publish("z2_eq", t, z2_eq)

            if cfg.speed_source == "ekf":
                qd_gate = ekf.x2_hat
            elif cfg.speed_source == "smo":
                qd_gate = smo.x2_hat
            else:
                qd_gate = state.qd
            est = gated_mass_estimate(y, qd_gate, z2_eq, observer_model, est_cfg, qd_f=x2_f)
            smoothed = averager.update(est.mass)
            bus.publish(
                "mass_estimate", t,
                [est.mass, est.joint_torque, est.pitch, 1.0 if est.gated else 0.0, smoothed],
            )

            if cfg.control_mode == "pd_gravity":
                q_des, qd_des = schedule.sample(t)
                bus.publish("trajectory_ref", t, np.concatenate([q_des, qd_des]))
                u_raw = pd_gravity_torque(
                    ekf.x1_hat, ekf.x2_hat, q_des, qd_des, observer_model, cfg.control
                )
                u = command_torque(u_raw, plant_cfg)
            else:
                u = u_const
            bus.publish("torque_cmd", t, u)

            smo = smo_step(smo, y, u, observer_model, cfg.smo, dt)
            if run_ekf:
                ekf = ekf_step(ekf, y, u, observer_model, dt)
            state = step_plant(state, u, plant_cfg)
        except Exception as exc:
            raise type(exc)(f"{exc} (at t={t:.3f} s in scenario {cfg.name!r})") from exc

    summary = _summarize(cfg, bus, est_cfg, selected_joint_name, dof)
    return RunResult(
        summary=summary, bus=bus, config=cfg,
        nominal_model=nominal, observer_model=observer_model,
    )


def _summarize(cfg, bus, est_cfg, joint_name, dof) -> dict:
    tm, m = bus.series("mass_estimate")
    tail = tm >= (cfg.duration - 2.0)
    raw_mass, smoothed = m[:, 0], m[:, 4]
    mass_final = float(np.mean(smoothed[tail]))
    mass_final_raw = float(np.mean(raw_mass[tail]))
    theta_final = float(np.mean(m[tail, 2]))
    gated_fraction = float(np.mean(m[:, 3]))

    # settling: earliest time after which the smoothed estimate stays inside
    # max(10% of final, 5 g) of the final value
    band = max(0.1 * abs(mass_final), 0.005)
    inside = np.abs(smoothed - mass_final) <= band
    settling = None
    idx = np.where(~inside)[0]
    if inside[-1]:
        settling = float(tm[idx[-1] + 1]) if idx.size else float(tm[0])

    tracking_rms = None
    if "trajectory_ref" in bus.topics():
        ty, ymat = bus.series("measured_q")
        tr, ref = bus.series("trajectory_ref")
        err = ymat - ref[:, :dof]
        tracking_rms = float(np.sqrt(np.mean(err ** 2)))

    return {
        "scenario_name": cfg.name,
        "config_sha256": scenario_hash(cfg),
        "rng_seed": int(cfg.rng_seed),
        "sample_hz": float(cfg.sample_hz),
        "duration_s": float(cfg.duration),
        "dof": int(dof),
        "control_mode": cfg.control_mode,
        "speed_source": cfg.speed_source,
        "observer_model_scale": float(cfg.observer_model_scale),
        "selected_joint": joint_name,
        "selected_joint_index": int(est_cfg.estimation_joint),
        "pitch_frame": est_cfg.pitch_frame,
        "l4_assumed": float(est_cfg.l4),
        "payload_mass_true": float(cfg.payload.mass) if cfg.payload else 0.0,
        "payload_offset_true": float(cfg.payload.offset) if cfg.payload else None,
        "mass_final": mass_final,
        "mass_final_raw": mass_final_raw,
        "mass_settling_s": settling,
        "theta_final": theta_final,
        "gated_fraction": gated_fraction,
        "tracking_rms": tracking_rms,
    }


# ---------------------------------------------------------------------------
# experiment suite


def run_parameter_sensitivity(
    cfg: ScenarioConfig, scales: Sequence[float] = (0.8, 1.0, 1.2)
) -> List[Tuple[float, dict]]:
    """Rerun the scenario with the observer/controller model scaled per entry.

    The plant keeps nominal parameters; only the estimator's belief changes.
    """
    out = []
    for s in scales:
        run = run_scenario(dataclasses.replace(cfg, observer_model_scale=float(s)))
        out.append((float(s), run.summary))
    return out


def run_l4_sensitivity(
    cfg: ScenarioConfig, true_offsets: Sequence[float] = (0.18, 0.21, 0.24)
) -> List[Tuple[float, dict]]:
    """Move the payload's true lever while the estimator keeps its assumed l4."""
    if cfg.payload is None:
        raise ScenarioError("l4 sensitivity needs a scenario with a payload")
    out = []
    for off in true_offsets:
        pl = dataclasses.replace(cfg.payload, offset=float(off))
        run = run_scenario(dataclasses.replace(cfg, payload=pl))
        out.append((float(off), run.summary))
    return out


def run_katana_replication(cfg: Optional[ScenarioConfig] = None) -> RunResult:
    """Reusability check on the bundled 5-DOF fixture: auto-selected joint,
    constant holding torque (no feedback), SMO + filter + estimator only."""
    if cfg is None:
        cfg = load_scenario(fixture_path("katana.yaml"))
    return run_scenario(cfg)


# ---------------------------------------------------------------------------
# export


def _fmt(x: float) -> str:
    return repr(float(x))


def export_logs(result: RunResult, directory: str) -> List[str]:
    """Write one CSV per topic (header t,v1..vn) plus summary.json.

    Floats are written with repr so identical runs produce byte-identical
    files; this file set is the interface the plotting tools consume.
    """
    os.makedirs(directory, exist_ok=True)
    written = []
    for topic in result.bus.topics():
        path = os.path.join(directory, f"{topic}.csv")
        rec = result.bus.records(topic)
        width = rec[0][1].shape[0]
        with open(path, "w", newline="") as fh:
            fh.write("t," + ",".join(f"v{i+1}" for i in range(width)) + "\n")
            for t, v in rec:
                fh.write(_fmt(t) + "," + ",".join(_fmt(x) for x in v) + "\n")
        written.append(path)
    spath = os.path.join(directory, "summary.json")
    with open(spath, "w") as fh:
        json.dump(result.summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    written.append(spath)
    return written


def export_sweep(rows: Sequence[Tuple[float, dict]], path: str, x_name: str) -> str:
    """Two-column CSV (x, mass_final) for sensitivity sweeps."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{x_name},mass_final\n")
        for x, summary in rows:
            fh.write(f"{_fmt(x)},{_fmt(summary['mass_final'])}\n")
    return path
