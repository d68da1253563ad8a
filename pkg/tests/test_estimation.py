"""Torque-to-mass conversion, validity gating, joint selection.

The lever-pitch oracle is plain statics computed from scratch: put a unit
mass at the assumed grasp point, take the moment of its weight about the
joint axis, and solve the estimator's own torque law backwards.
"""

import math

import numpy as np
import pytest

from graspmass.dynamics import forward_kinematics, frame_pitch, mass_matrix
from graspmass.estimation import (
    EstimationConfig,
    MassAverager,
    MassEstimate,
    SelectionError,
    SingularPitchError,
    disturbance_torque,
    estimate_mass,
    gated_mass_estimate,
    lever_pitch,
    select_estimation_joint,
)
from graspmass.model_io import outbound_direction, parse_urdf

G = 9.81


# ----------------------------------------------------------- pure algebra


def test_estimate_mass_inverts_the_torque_law():
    cfg = EstimationConfig(l4=0.21, theta_threshold=0.2)
    for m, th in [(0.25, 0.8), (0.1, -0.5), (2.0, 1.2)]:
        tau = -m * G * cfg.l4 * math.sin(th)
        assert estimate_mass(tau, th, cfg) == pytest.approx(m, rel=1e-12)


def test_estimate_mass_rejects_flat_pitch():
    cfg = EstimationConfig()
    with pytest.raises(SingularPitchError):
        estimate_mass(-0.5, 0.2, cfg)  # exactly at the threshold counts as flat
    with pytest.raises(SingularPitchError):
        estimate_mass(-0.5, -0.1, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        EstimationConfig(l4=0.0)
    with pytest.raises(ValueError):
        EstimationConfig(speed_gate=0.0)
    with pytest.raises(ValueError):
        EstimationConfig(g=-9.81)


def test_disturbance_torque_algebra(two_link, rng):
    q = rng.uniform(-1, 1, 2)
    z2 = rng.normal(size=2)
    np.testing.assert_array_equal(
        disturbance_torque(two_link, q, z2), mass_matrix(two_link, q) @ z2
    )
    # viscous credit: known damping torque at the filtered velocity is
    # returned to the model side instead of being billed as payload
    qd_f = np.array([0.3, -0.2])
    damping = np.array([j.viscous_friction for j in two_link.actuated_joints])
    np.testing.assert_allclose(
        disturbance_torque(two_link, q, z2, qd_f),
        mass_matrix(two_link, q) @ z2 - damping * qd_f,
        atol=1e-15,
    )


# ----------------------------------------------------------- lever pitch


def _pitch_from_statics(model, q, joint_index, l4):
    """Independent oracle: moment of a unit weight at the grasp point about
    the joint axis, solved back through tau = -m g l sin(theta)."""
    j = model.actuated_joints[joint_index]
    pose = forward_kinematics(model, q, j.child)
    p_joint = pose.translation
    p_mass = pose.translation + pose.rotation @ (outbound_direction(model, j.child) * l4)
    axis_w = pose.rotation @ np.asarray(j.axis)
    force = 1.0 * np.asarray(model.gravity)  # unit mass
    tau = float(np.cross(p_mass - p_joint, force) @ axis_w)
    s = -tau / (1.0 * G * l4)
    return math.asin(min(1.0, max(-1.0, s)))


def test_lever_pitch_matches_statics_oracle(arm_model, katana_model, rng):
    for model, jidx in ((arm_model, 5), (katana_model, 3)):
        for _ in range(25):
            q = rng.uniform(-1.0, 1.0, model.dof)
            want = _pitch_from_statics(model, q, jidx, 0.21)
            assert lever_pitch(model, q, jidx) == pytest.approx(want, abs=1e-12)


def test_lever_pitch_equals_frame_pitch_on_downhanging_arm(arm_model):
    # grip extends along the wrist frame's -z, so the lever angle and the
    # frame's own pitch coincide on this geometry
    for a in (-0.9, -0.3, 0.35, 0.8):
        q = np.zeros(7)
        q[0] = a
        th = lever_pitch(arm_model, q, 5)
        pose = forward_kinematics(arm_model, q, "la_wrist_pitch_link")
        assert th == pytest.approx(frame_pitch(pose), abs=1e-12)
        assert th == pytest.approx(a, abs=1e-12)


def test_lever_pitch_zero_when_hanging_straight(arm_model):
    assert lever_pitch(arm_model, np.zeros(7), 5) == pytest.approx(0.0, abs=1e-12)


def test_lever_pitch_katana_sign(katana_model):
    # the katana's home here tips the grasp forward of motor 4; the weight
    # tries to pitch the wrist down, so theta comes out negative
    q = np.array([0.0, 1.8, 0.5, 0.4, 0.0])
    th = lever_pitch(katana_model, q, 3)
    assert th < -0.2
    assert th == pytest.approx(_pitch_from_statics(katana_model, q, 3, 0.18), abs=1e-12)


def test_lever_pitch_index_validation(arm_model):
    with pytest.raises(ValueError):
        lever_pitch(arm_model, np.zeros(7), 99)


# -------------------------------------------------------------- gating


def test_gate_on_any_fast_joint(arm_model):
    cfg = EstimationConfig(estimation_joint=5)
    q = np.zeros(7)
    q[0] = 0.6  # healthy pitch
    qd = np.zeros(7)
    z2 = np.zeros(7)
    est = gated_mass_estimate(q, qd, z2, arm_model, cfg)
    assert not est.gated
    qd[2] = 0.51  # one joint over the gate is enough
    est = gated_mass_estimate(q, qd, z2, arm_model, cfg)
    assert est.gated and est.mass == 0.0


def test_gate_on_flat_pitch_still_reports_torque(arm_model):
    cfg = EstimationConfig(estimation_joint=5)
    q = np.zeros(7)  # hanging straight down: theta = 0
    z2 = np.zeros(7)
    z2[5] = -0.8
    est = gated_mass_estimate(q, np.zeros(7), z2, arm_model, cfg)
    assert est.gated and est.mass == 0.0
    assert est.pitch == pytest.approx(0.0, abs=1e-9)
    want_tau = (mass_matrix(arm_model, q) @ z2)[5]
    assert est.joint_torque == pytest.approx(want_tau, rel=1e-12)


def test_ungated_estimate_matches_pointwise_formula(arm_model):
    cfg = EstimationConfig(estimation_joint=5, l4=0.21)
    q = np.zeros(7)
    q[0] = 0.7
    th = lever_pitch(arm_model, q, 5)
    m_true = 0.3
    # construct an injection whose joint-5 torque is exactly the weight torque
    tau_want = -m_true * G * cfg.l4 * math.sin(th)
    z2 = np.linalg.solve(mass_matrix(arm_model, q), _e(7, 5) * tau_want)
    est = gated_mass_estimate(q, np.zeros(7), z2, arm_model, cfg)
    assert not est.gated
    assert est.mass == pytest.approx(m_true, rel=1e-9)
    assert isinstance(est, MassEstimate)


def _e(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def test_estimation_joint_out_of_range(arm_model):
    cfg = EstimationConfig(estimation_joint=12)
    with pytest.raises(ValueError):
        gated_mass_estimate(np.zeros(7), np.zeros(7), np.zeros(7), arm_model, cfg)


# ------------------------------------------------------- joint selection


def test_select_wrist_pitch_on_service_arm(arm_model):
    idx, child = select_estimation_joint(arm_model, np.zeros(7))
    assert idx == 5
    assert child == "la_wrist_pitch_link"


def test_select_motor4_on_katana(katana_model):
    idx, child = select_estimation_joint(
        katana_model, np.array([0.0, 1.8, 0.5, 0.4, 0.0])
    )
    assert idx == 3
    assert child == "katana_motor4_lift_link"


def test_select_rejects_all_vertical_axes():
    urdf = """
    <robot name="spinner">
      <link name="base"><inertial><mass value="1"/><origin xyz="0 0 0"/>
        <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/></inertial></link>
      <joint name="yaw" type="revolute">
        <parent link="base"/><child link="spin"/>
        <origin xyz="0 0 0.1"/><axis xyz="0 0 1"/>
        <limit lower="-3" upper="3" effort="10" velocity="5"/>
      </joint>
      <link name="spin"><inertial><mass value="0.5"/><origin xyz="0.1 0 0"/>
        <inertia ixx="0.004" ixy="0" ixz="0" iyy="0.004" iyz="0" izz="0.004"/></inertial></link>
    </robot>"""
    model = parse_urdf(urdf)
    with pytest.raises(SelectionError):
        select_estimation_joint(model, np.zeros(1))


# ------------------------------------------------------------ averaging


def test_mass_averager_window_semantics():
    avg = MassAverager(window_s=4 / 250.0, sample_hz=250.0)  # 4 samples
    assert avg.update(1.0) == pytest.approx(1.0)
    assert avg.update(1.0) == pytest.approx(1.0)
    assert avg.update(0.0) == pytest.approx(2 / 3)
    assert avg.update(0.0) == pytest.approx(0.5)
    assert avg.update(0.0) == pytest.approx(0.25)  # first 1.0 fell out
    avg.reset()
    assert avg.update(2.0) == pytest.approx(2.0)


def test_mass_averager_validation():
    with pytest.raises(ValueError):
        MassAverager(window_s=0.0)
