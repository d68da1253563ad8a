"""Compiled numerical kernels for serial-chain dynamics.

Everything here operates on the packed array form of a chain (see
dynamics.PackedChain): per-joint type codes, origin transforms, axes and
child-link inertial data. The recursions are the classic ones — a
Newton-Euler inverse-dynamics sweep and a composite-rigid-body pass for
the joint-space mass matrix — written loop-style so numba can compile
them. Set GRASPMASS_PURE_PYTHON=1 to run uncompiled (slow, for
debugging).

Conventions: frame k sits at joint k and moves with child link k. The
rotation R[k] maps child-frame vectors to parent-frame vectors. Gravity
is handled by giving the base the opposite acceleration.
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("GRASPMASS_PURE_PYTHON"):
    def njit(*args, **kwargs):  # pragma: no cover - debug path
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap
else:
    from numba import njit

JOINT_FIXED = 0
JOINT_REVOLUTE = 1

VELOCITY_BLOWUP = 1.0e3  # rad/s; beyond this the integration has diverged


@njit(cache=True)
def _rot_axis(axis, q):
    """Rodrigues rotation about a unit axis."""
    c = np.cos(q)
    s = np.sin(q)
    v = 1.0 - c
    x, y, z = axis[0], axis[1], axis[2]
    R = np.empty((3, 3))
    R[0, 0] = c + x * x * v
    R[0, 1] = x * y * v - z * s
    R[0, 2] = x * z * v + y * s
    R[1, 0] = y * x * v + z * s
    R[1, 1] = c + y * y * v
    R[1, 2] = y * z * v - x * s
    R[2, 0] = z * x * v - y * s
    R[2, 1] = z * y * v + x * s
    R[2, 2] = c + z * z * v
    return R


@njit(cache=True)
def _cross(a, b):
    out = np.empty(3)
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]
    return out


@njit(cache=True)
def _joint_rotations(jtype, qidx, R0, axis, q):
    """Parent-from-child rotation of every joint at configuration q."""
    K = jtype.shape[0]
    R = np.empty((K, 3, 3))
    for k in range(K):
        if jtype[k] == JOINT_REVOLUTE:
            R[k] = R0[k] @ _rot_axis(axis[k], q[qidx[k]])
        else:
            R[k] = R0[k].copy()
    return R


@njit(cache=True)
def fk_chain(jtype, qidx, R0, p0, axis, q):
    """World pose of every child-link frame; base frame is the identity."""
    K = jtype.shape[0]
    Rw = np.empty((K, 3, 3))
    pw = np.empty((K, 3))
    Rl = _joint_rotations(jtype, qidx, R0, axis, q)
    Rprev = np.eye(3)
    pprev = np.zeros(3)
    for k in range(K):
        pw[k] = pprev + Rprev @ p0[k]
        Rw[k] = Rprev @ Rl[k]
        Rprev = Rw[k]
        pprev = pw[k]
    return Rw, pw


@njit(cache=True)
def rnea(jtype, qidx, R0, p0, axis, mass, com, inertia, q, qd, qdd, grav):
    """Inverse dynamics: joint torques for (q, qd, qdd) including gravity.

    Viscous friction is deliberately not included; callers add B*qd.
    """
    K = jtype.shape[0]
    dof = q.shape[0]
    R = _joint_rotations(jtype, qidx, R0, axis, q)

    w = np.zeros((K, 3))
    wd = np.zeros((K, 3))
    vd = np.zeros((K, 3))
    F = np.zeros((K, 3))
    N = np.zeros((K, 3))

    wp = np.zeros(3)
    wdp = np.zeros(3)
    vdp = -grav  # accelerating base trick folds gravity into the recursion
    for k in range(K):
        if k > 0:
            wp = w[k - 1]
            wdp = wd[k - 1]
            vdp = vd[k - 1]
        RT = R[k].T
        rw = RT @ wp
        rwd = RT @ wdp
        if jtype[k] == JOINT_REVOLUTE:
            i = qidx[k]
            aq = axis[k] * qd[i]
            w[k] = rw + aq
            wd[k] = rwd + _cross(rw, aq) + axis[k] * qdd[i]
        else:
            w[k] = rw
            wd[k] = rwd
        vd[k] = RT @ (vdp + _cross(wdp, p0[k]) + _cross(wp, _cross(wp, p0[k])))
        vdc = vd[k] + _cross(wd[k], com[k]) + _cross(w[k], _cross(w[k], com[k]))
        F[k] = mass[k] * vdc
        N[k] = inertia[k] @ wd[k] + _cross(w[k], inertia[k] @ w[k])

    tau = np.zeros(dof)
    fado = np.zeros((K, 3))   # force each body passes to its parent, own frame
    nado = np.zeros((K, 3))
    for k in range(K - 1, -1, -1):
        fk = F[k].copy()
        nk = N[k] + _cross(com[k], F[k])
        if k < K - 1:
            fchild = R[k + 1] @ fado[k + 1]
            fk += fchild
            nk += R[k + 1] @ nado[k + 1] + _cross(p0[k + 1], fchild)
        fado[k] = fk
        nado[k] = nk
        if jtype[k] == JOINT_REVOLUTE:
            tau[qidx[k]] = nk @ axis[k]
    return tau


@njit(cache=True)
def crba(jtype, qidx, R0, p0, axis, mass, com, inertia, q, dof):
    """Joint-space mass matrix by composite-rigid-body accumulation.

    Spatial vectors are stacked [angular; linear]; the 6x6 motion
    transform from parent to child coordinates is X = [[E,0],[-E p^, E]]
    with E the child-from-parent rotation.
    """
    K = jtype.shape[0]
    R = _joint_rotations(jtype, qidx, R0, axis, q)

    X = np.zeros((K, 6, 6))
    Ic = np.zeros((K, 6, 6))
    for k in range(K):
        E = R[k].T
        px = p0[k, 0]
        py = p0[k, 1]
        pz = p0[k, 2]
        # skew(p)
        P = np.zeros((3, 3))
        P[0, 1] = -pz
        P[0, 2] = py
        P[1, 0] = pz
        P[1, 2] = -px
        P[2, 0] = -py
        P[2, 1] = px
        EP = E @ P
        for a in range(3):
            for b in range(3):
                X[k, a, b] = E[a, b]
                X[k, 3 + a, b] = -EP[a, b]
                X[k, 3 + a, 3 + b] = E[a, b]
        # spatial inertia of the child link about its frame origin
        m = mass[k]
        cx = com[k, 0]
        cy = com[k, 1]
        cz = com[k, 2]
        C = np.zeros((3, 3))
        C[0, 1] = -cz
        C[0, 2] = cy
        C[1, 0] = cz
        C[1, 2] = -cx
        C[2, 0] = -cy
        C[2, 1] = cx
        CCt = C @ C.T
        for a in range(3):
            for b in range(3):
                Ic[k, a, b] = inertia[k, a, b] + m * CCt[a, b]
                Ic[k, a, 3 + b] = m * C[a, b]
                Ic[k, 3 + a, b] = m * C.T[a, b]
            Ic[k, 3 + a, 3 + a] += m

    for k in range(K - 1, 0, -1):
        Ic[k - 1] += X[k].T @ (Ic[k] @ X[k])

    M = np.zeros((dof, dof))
    for i in range(K):
        if jtype[i] != JOINT_REVOLUTE:
            continue
        qi = qidx[i]
        S = np.zeros(6)
        S[0] = axis[i, 0]
        S[1] = axis[i, 1]
        S[2] = axis[i, 2]
        F6 = Ic[i] @ S
        M[qi, qi] = S @ F6
        j = i
        while j > 0:
            F6 = X[j].T @ F6
            j -= 1
            if jtype[j] == JOINT_REVOLUTE:
                qj = qidx[j]
                val = F6[0] * axis[j, 0] + F6[1] * axis[j, 1] + F6[2] * axis[j, 2]
                M[qi, qj] = val
                M[qj, qi] = val
    return M


@njit(cache=True)
def chol_solve(M, rhs):
    """Solve M x = rhs for SPD M via Cholesky (never forms an inverse)."""
    L = np.linalg.cholesky(M)  # raises LinAlgError when M is not SPD
    n = rhs.shape[0]
    y = np.zeros(n)
    for i in range(n):
        s = rhs[i]
        for j in range(i):
            s -= L[i, j] * y[j]
        y[i] = s / L[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for j in range(i + 1, n):
            s -= L[j, i] * x[j]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, q, qd, u, grav):
    """qdd = M(q)^-1 (u - bias(q,qd) - B qd), bias = Coriolis + gravity."""
    dof = q.shape[0]
    bias = rnea(jtype, qidx, R0, p0, axis, mass, com, inertia, q, qd, np.zeros(dof), grav)
    M = crba(jtype, qidx, R0, p0, axis, mass, com, inertia, q, dof)
    rhs = u - bias - damping * qd
    return chol_solve(M, rhs)


@njit(cache=True)
def ekf_state_jacobian(jtype, qidx, R0, p0, axis, mass, com, inertia, damping,
                       x1, x2, u, grav, eps):
    """Jacobian of [x1dot; x2dot] = [x2; f(x1,x2,u)] by central differences."""
    n = x1.shape[0]
    F = np.zeros((2 * n, 2 * n))
    for i in range(n):
        F[i, n + i] = 1.0
    for i in range(n):
        x1p = x1.copy()
        x1m = x1.copy()
        x1p[i] += eps
        x1m[i] -= eps
        fp = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, x1p, x2, u, grav)
        fm = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, x1m, x2, u, grav)
        for r in range(n):
            F[n + r, i] = (fp[r] - fm[r]) / (2.0 * eps)
    for i in range(n):
        x2p = x2.copy()
        x2m = x2.copy()
        x2p[i] += eps
        x2m[i] -= eps
        fp = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, x1, x2p, u, grav)
        fm = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, x1, x2m, u, grav)
        for r in range(n):
            F[n + r, n + i] = (fp[r] - fm[r]) / (2.0 * eps)
    return F


@njit(cache=True)
def rk4_plant(jtype, qidx, R0, p0, axis, mass, com, inertia, damping,
              q, qd, u, grav, h, substeps, lower, upper):
    """Integrate the chain under zero-order-hold torque u over substeps*h.

    Position limits clamp q and zero the offending joint's velocity at
    substep boundaries. Returns (q, qd, ok) with ok=0 when a velocity
    exceeds the blow-up threshold.
    """
    n = q.shape[0]
    q = q.copy()
    qd = qd.copy()
    ok = 1
    for _ in range(substeps):
        k1v = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, q, qd, u, grav)
        k1q = qd

        q2 = q + 0.5 * h * k1q
        qd2 = qd + 0.5 * h * k1v
        k2v = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, q2, qd2, u, grav)
        k2q = qd2

        q3 = q + 0.5 * h * k2q
        qd3 = qd + 0.5 * h * k2v
        k3v = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, q3, qd3, u, grav)
        k3q = qd3

        q4 = q + h * k3q
        qd4 = qd + h * k3v
        k4v = fwd_dyn(jtype, qidx, R0, p0, axis, mass, com, inertia, damping, q4, qd4, u, grav)
        k4q = qd4

        q = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        qd = qd + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)

        for i in range(n):
            if q[i] < lower[i]:
                q[i] = lower[i]
                qd[i] = 0.0
            elif q[i] > upper[i]:
                q[i] = upper[i]
                qd[i] = 0.0
            if np.abs(qd[i]) > VELOCITY_BLOWUP:
                ok = 0
        if ok == 0:
            break
    return q, qd, ok
