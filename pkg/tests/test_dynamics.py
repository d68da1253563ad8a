"""Rigid-body dynamics against independent oracles.

The 2-link oracle is derived symbolically (Euler-Lagrange on the same
geometry the URDF describes) so the recursive algorithms are checked
against closed-form mechanics, not against themselves.
"""

import math

import numpy as np
import pytest
import sympy as sp

from graspmass.dynamics import (
    forward_dynamics,
    forward_kinematics,
    frame_pitch,
    gravity_vector,
    inverse_dynamics,
    mass_matrix,
    pitch_is_degenerate,
)
from graspmass.model_io import parse_urdf

# parameters mirrored from conftest.TWO_LINK_URDF
M1, M2 = 1.7, 0.9
C1, C2 = 0.23, 0.17
L1 = 0.41
I1, I2 = 0.029, 0.011  # Iyy about each COM; planar y-rotations see only Iyy
G = 9.81


def _two_link_oracle():
    t = sp.symbols("t")
    q1f = sp.Function("q1")(t)
    q2f = sp.Function("q2")(t)
    a1, a2 = q1f, q1f + q2f
    # y-axis rotation maps (0,0,-c) to (-c sin a, 0, -c cos a)
    x1, z1 = -C1 * sp.sin(a1), -C1 * sp.cos(a1)
    x2 = -L1 * sp.sin(a1) - C2 * sp.sin(a2)
    z2 = -L1 * sp.cos(a1) - C2 * sp.cos(a2)
    ke = (
        M1 * (sp.diff(x1, t) ** 2 + sp.diff(z1, t) ** 2) / 2
        + I1 * sp.diff(a1, t) ** 2 / 2
        + M2 * (sp.diff(x2, t) ** 2 + sp.diff(z2, t) ** 2) / 2
        + I2 * sp.diff(a2, t) ** 2 / 2
    )
    pe = G * (M1 * z1 + M2 * z2)
    lag = ke - pe
    taus = [
        sp.diff(sp.diff(lag, sp.diff(qf, t)), t) - sp.diff(lag, qf)
        for qf in (q1f, q2f)
    ]
    q1, q2, qd1, qd2, qdd1, qdd2 = sp.symbols("q1 q2 qd1 qd2 qdd1 qdd2")
    subs = [
        (sp.diff(q1f, t, 2), qdd1),
        (sp.diff(q2f, t, 2), qdd2),
        (sp.diff(q1f, t), qd1),
        (sp.diff(q2f, t), qd2),
        (q1f, q1),
        (q2f, q2),
    ]
    taus = [sp.expand(expr.subs(subs)) for expr in taus]
    return sp.lambdify((q1, q2, qd1, qd2, qdd1, qdd2), taus, "numpy")


ORACLE = _two_link_oracle()


def test_two_link_closed_form_agreement(two_link, rng):
    for _ in range(50):
        q = rng.uniform(-math.pi, math.pi, 2)
        qd = rng.uniform(-3, 3, 2)
        qdd = rng.uniform(-5, 5, 2)
        want = np.array(ORACLE(q[0], q[1], qd[0], qd[1], qdd[0], qdd[1]))
        got = inverse_dynamics(two_link, q, qd, qdd)
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-8)


def test_two_link_mass_matrix_closed_form(two_link, rng):
    # M column j = ID(q, 0, e_j) - G(q)
    q = rng.uniform(-math.pi, math.pi, 2)
    grav = gravity_vector(two_link, q)
    M = mass_matrix(two_link, q)
    for j in range(2):
        e = np.zeros(2)
        e[j] = 1.0
        col = np.array(ORACLE(q[0], q[1], 0, 0, e[0], e[1])) - np.array(
            ORACLE(q[0], q[1], 0, 0, 0, 0)
        )
        np.testing.assert_allclose(M[:, j], col, rtol=1e-9, atol=1e-10)
    np.testing.assert_allclose(grav, np.array(ORACLE(q[0], q[1], 0, 0, 0, 0)), rtol=1e-9)


def test_pendulum_analytics():
    """Point-ish pendulum: G(q) = m g c sin(q), M = Iyy + m c^2."""
    urdf = """
    <robot name="pend">
      <link name="base"><inertial><mass value="1"/><origin xyz="0 0 0"/>
        <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/></inertial></link>
      <joint name="j" type="revolute">
        <parent link="base"/><child link="bob"/>
        <origin xyz="0 0 0"/><axis xyz="0 1 0"/>
        <limit lower="-10" upper="10" effort="50" velocity="20"/>
        <dynamics damping="0"/>
      </joint>
      <link name="bob"><inertial><mass value="0.6"/><origin xyz="0 0 -0.5"/>
        <inertia ixx="0.002" ixy="0" ixz="0" iyy="0.002" iyz="0" izz="0.0005"/></inertial></link>
    </robot>"""
    pend = parse_urdf(urdf)
    for q in (-1.2, -0.3, 0.0, 0.7, 2.5):
        g = gravity_vector(pend, np.array([q]))
        assert g[0] == pytest.approx(0.6 * 9.81 * 0.5 * math.sin(q), abs=1e-12)
        M = mass_matrix(pend, np.array([q]))
        assert M[0, 0] == pytest.approx(0.002 + 0.6 * 0.25, rel=1e-12)


def test_forward_kinematics_product(two_link):
    q = np.array([0.37, -0.81])

    def ry(a):
        return np.array([
            [math.cos(a), 0, math.sin(a)],
            [0, 1, 0],
            [-math.sin(a), 0, math.cos(a)],
        ])

    pose = forward_kinematics(two_link, q, "l2")
    np.testing.assert_allclose(pose.rotation, ry(q[0] + q[1]), atol=1e-12)
    np.testing.assert_allclose(
        pose.translation, ry(q[0]) @ np.array([0, 0, -L1]), atol=1e-12
    )
    base = forward_kinematics(two_link, q, "base")
    np.testing.assert_allclose(base.rotation, np.eye(3), atol=0)
    np.testing.assert_allclose(base.translation, np.zeros(3), atol=0)


def test_mass_matrix_properties(arm_model, katana_model, two_link, rng):
    for model in (arm_model, katana_model, two_link):
        n = model.dof
        for _ in range(50):
            q = rng.uniform(-1.5, 1.5, n)
            M = mass_matrix(model, q)
            assert np.abs(M - M.T).max() < 1e-10
            w = np.linalg.eigvalsh(M)
            assert w.min() > 0


def test_gravity_vector_is_zero_motion_id(arm_model, rng):
    q = rng.uniform(-1, 1, 7)
    z = np.zeros(7)
    np.testing.assert_array_equal(
        gravity_vector(arm_model, q), inverse_dynamics(arm_model, q, z, z)
    )


def test_forward_inverse_round_trip(arm_model, katana_model, rng):
    """FD then ID must reproduce the input torque; ID excludes friction so
    the damping torque is added back explicitly."""
    for model in (arm_model, katana_model):
        n = model.dof
        damping = np.array([j.viscous_friction for j in model.actuated_joints])
        for _ in range(20):
            q = rng.uniform(-1.5, 1.5, n)
            qd = rng.uniform(-2, 2, n)
            u = rng.uniform(-5, 5, n)
            qdd = forward_dynamics(model, q, qd, u)
            back = inverse_dynamics(model, q, qd, qdd) + damping * qd
            np.testing.assert_allclose(back, u, rtol=1e-6, atol=1e-9)


def test_frame_pitch_tracks_shoulder(arm_model):
    for a in (-1.1, -0.4, 0.0, 0.6, 1.3):
        q = np.zeros(7)
        q[0] = a
        pose = forward_kinematics(arm_model, q, "la_wrist_pitch_link")
        assert frame_pitch(pose) == pytest.approx(a, abs=1e-12)
        assert not pitch_is_degenerate(pose)


def test_pitch_degeneracy_flag(arm_model):
    q = np.zeros(7)
    q[0] = math.pi / 2
    pose = forward_kinematics(arm_model, q, "la_wrist_pitch_link")
    assert pitch_is_degenerate(pose)
    # value itself stays finite
    assert abs(frame_pitch(pose)) <= math.pi / 2 + 1e-9
