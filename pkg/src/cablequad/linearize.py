"""Variation-based linearization of the single quadrotor / cable model.

The error state is ordered ``[eta, dOmega, dx0, xi_1..xi_n, dv0, dw_1..dw_n]``
(dimension ``12 + 6n``) and the input variation ``[df, dM]``. ``eta`` and
``xi_i`` live in the tangent spaces at the reference attitude and link
directions; ``dOmega``, ``dw_i`` are plain differences of angular velocities.

:func:`build_lin` assembles ``A(t)``, ``B(t)`` and the constraint map
``C(t)`` block by block. :func:`finite_diff_lin` is an independent check:
it perturbs the nonlinear state along each error coordinate, evaluates the
full dynamics and differences the resulting error rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlInput, SingleState, gravity_moments, mass_coeffs
from .geom import E3, cross, expm_so3, hat, skew_part_vee


def state_dim(n):
    return 12 + 6 * n


def layout(n):
    """Slices of each error component inside the state vector."""
    xi0 = 9
    v0 = 9 + 3 * n
    w0 = 12 + 3 * n
    return {
        "eta": slice(0, 3),
        "dOmega": slice(3, 6),
        "dx0": slice(6, 9),
        "xi": [slice(xi0 + 3 * i, xi0 + 3 * i + 3) for i in range(n)],
        "dv0": slice(v0, v0 + 3),
        "dw": [slice(w0 + 3 * i, w0 + 3 * i + 3) for i in range(n)],
    }


def block_names(n):
    return (["eta", "dOmega", "dx0"] + [f"xi{i + 1}" for i in range(n)] + ["dv0"]
            + [f"dw{i + 1}" for i in range(n)])


@dataclass
class LinBlocks:
    Delta1: np.ndarray
    Delta2: np.ndarray
    alpha: np.ndarray  # (n, 3, 3)
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray  # (n, n, 3, 3)
    d: np.ndarray
    N: np.ndarray  # (3 + 3n, 3 + 3n)


@dataclass
class LinearizedSystem:
    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    blocks: LinBlocks


def mass_matrix_N(q, Mc):
    """Coefficient matrix of ``(dv0, dw_1..dw_n)`` in the linearized model.

    Row blocks: ``[M00 I, -M0j hat(q_j)]`` then
    ``[M_i0 hat(q_i), ..., M_ii I, ..., -M_ij hat(q_i) hat(q_j)]``.
    """
    n = len(q)
    Q = hat(q)
    N = np.zeros((3 + 3 * n, 3 + 3 * n))
    N[:3, :3] = Mc[0, 0] * np.eye(3)
    for j in range(n):
        N[:3, 3 + 3 * j:6 + 3 * j] = -Mc[0, j + 1] * Q[j]
    for i in range(n):
        r = slice(3 + 3 * i, 6 + 3 * i)
        N[r, :3] = Mc[i + 1, 0] * Q[i]
        for j in range(n):
            c = slice(3 + 3 * j, 6 + 3 * j)
            N[r, c] = Mc[i + 1, i + 1] * np.eye(3) if i == j else -Mc[i + 1, j + 1] * Q[i] @ Q[j]
    return N


def lin_blocks(dp, qp, cp):
    n = cp.n
    Mc = mass_coeffs(qp, cp)
    S = gravity_moments(qp, cp)
    J = qp.J
    I3 = np.eye(3)
    q, w, dw = dp.q, dp.omega, dp.domega
    Q = hat(q)
    W2 = np.sum(w**2, axis=1)
    Delta1 = np.linalg.solve(J, hat(J @ dp.Omega) - hat(dp.Omega) @ J)
    Delta2 = -dp.f * dp.R @ hat(E3)
    alpha = q[:, :, None] * (q[:, None, :] @ hat(w))
    beta = I3 - q[:, :, None] * q[:, None, :]
    dW_hat = hat(dw)
    a = np.array([Mc[0, i + 1] * (dW_hat[i] - W2[i] * I3) @ Q[i] for i in range(n)])
    b = np.array([2 * Mc[0, i + 1] * np.outer(q[i], w[i]) for i in range(n)])
    c = np.zeros((n, n, 3, 3))
    d = np.zeros((n, n, 3, 3))
    for i in range(n):
        bracket = Mc[i + 1, 0] * hat(dp.a0) + S[i] * hat(E3)
        for k in range(n):
            if k != i:
                bracket = bracket - Mc[i + 1, k + 1] * (hat(Q[k] @ dw[k]) + W2[k] * Q[k])
        c[i, i] = bracket @ (-Q[i])
        for j in range(n):
            if j != i:
                c[i, j] = Mc[i + 1, j + 1] * Q[i] @ (dW_hat[j] - W2[j] * I3) @ Q[j]
                d[i, j] = 2 * Mc[i + 1, j + 1] * Q[i] @ np.outer(q[j], w[j])
    return LinBlocks(Delta1, Delta2, alpha, beta, a, b, c, d, mass_matrix_N(q, Mc))


def build_lin(dp, qp, cp):
    """Linearized dynamics ``s' = A s + B du`` and constraint ``C s = 0`` at ``dp``."""
    n = cp.n
    L = layout(n)
    blk = lin_blocks(dp, qp, cp)
    dim = state_dim(n)
    A = np.zeros((dim, dim))
    B = np.zeros((dim, 4))
    I3 = np.eye(3)

    A[L["eta"], L["eta"]] = -hat(dp.Omega)
    A[L["eta"], L["dOmega"]] = I3
    A[L["dOmega"], L["dOmega"]] = blk.Delta1
    A[L["dx0"], L["dv0"]] = I3
    for i in range(n):
        A[L["xi"][i], L["xi"][i]] = blk.alpha[i]
        A[L["xi"][i], L["dw"][i]] = blk.beta[i]
    B[L["dOmega"], 1:] = np.linalg.inv(qp.J)

    # bottom rows: N^{-1} times the right-hand side map, by linear solve
    rhs = np.zeros((3 + 3 * n, dim))
    rhs[:3, L["eta"]] = blk.Delta2
    for j in range(n):
        rhs[:3, L["xi"][j]] = blk.a[j]
        rhs[:3, L["dw"][j]] = blk.b[j]
    for i in range(n):
        r = slice(3 + 3 * i, 6 + 3 * i)
        for j in range(n):
            rhs[r, L["xi"][j]] = blk.c[i, j]
            rhs[r, L["dw"][j]] = blk.d[i, j]
    rhs_u = np.zeros((3 + 3 * n, 4))
    rhs_u[:3, 0] = dp.R @ E3
    sol = np.linalg.solve(blk.N, np.hstack([rhs, rhs_u]))
    bottom = slice(9 + 3 * n, dim)
    A[bottom] = sol[:, :dim]
    B[bottom] = sol[:, dim:]
    return LinearizedSystem(dp.t, A, B, constraint_matrix(dp), blk)


def constraint_matrix(dp):
    """Rows ``q_i . xi_i = 0`` and ``-w_i^T hat(q_i) xi_i + q_i . dw_i = 0``."""
    n = len(dp.q)
    L = layout(n)
    C = np.zeros((2 * n, state_dim(n)))
    for i in range(n):
        C[i, L["xi"][i]] = dp.q[i]
        C[n + i, L["xi"][i]] = -dp.omega[i] @ hat(dp.q[i])
        C[n + i, L["dw"][i]] = dp.q[i]
    return C


def error_coords(actual, dp):
    """Error state of ``actual`` relative to the reference point ``dp``.

    ``eta = 0.5 vee(R_d^T R - R^T R_d)`` and ``xi_i = q_id x q_i`` agree with
    the tangent-space variations to second order; velocities enter as plain
    differences, which keeps the coordinates consistent with ``A`` to first
    order (see :func:`finite_diff_lin`).
    """
    n = actual.n
    L = layout(n)
    s = np.empty(state_dim(n))
    E = dp.R.T @ actual.R
    s[L["eta"]] = skew_part_vee(E)
    s[L["dOmega"]] = actual.Omega - dp.Omega
    s[L["dx0"]] = actual.x0 - dp.x0
    s[L["dv0"]] = actual.v0 - dp.v0
    xi = cross(dp.q, actual.q)
    dw = actual.omega - dp.omega
    for i in range(n):
        s[L["xi"][i]] = xi[i]
        s[L["dw"][i]] = dw[i]
    return s


def perturbed_state(dp, s):
    """Nonlinear state reached by moving along error coordinates ``s``.

    No projection is applied, so velocity components normal to the links are
    kept as given.
    """
    n = dp.n
    L = layout(n)
    R = dp.R @ expm_so3(s[L["eta"]])
    q = np.array([expm_so3(s[L["xi"][i]]) @ dp.q[i] for i in range(n)])
    w = np.array([dp.omega[i] + s[L["dw"][i]] for i in range(n)])
    return SingleState(dp.x0 + s[L["dx0"]], dp.v0 + s[L["dv0"]], R,
                       dp.Omega + s[L["dOmega"]], q, w)


def accel_variational(s, u, qp, cp):
    """Accelerations from the ``(dv0, dw)`` form of the model.

    Same dynamics as :func:`~cablequad.dynamics.accel_single` on tangent
    states but written with ``|w_j|^2`` and ``hat(q)`` coefficients, which
    fixes how the vector field extends to non-tangent link velocities.
    """
    n = s.n
    Mc = mass_coeffs(qp, cp)
    Sg = gravity_moments(qp, cp)
    Q = hat(s.q)
    W2 = np.sum(s.omega**2, axis=1)
    rhs = np.zeros((n + 1, 3))
    rhs[0] = (Mc[0, 1:] * W2) @ s.q + u.f * s.R @ E3 - Mc[0, 0] * qp.g * E3
    for i in range(n):
        acc = -Sg[i] * Q[i] @ E3
        for j in range(n):
            if j != i:
                acc = acc + Mc[i + 1, j + 1] * W2[j] * Q[i] @ s.q[j]
        rhs[i + 1] = acc
    sol = np.linalg.solve(mass_matrix_N(s.q, Mc), rhs.ravel())
    dOmega = np.linalg.solve(qp.J, u.M - cross(s.Omega, qp.J @ s.Omega))
    return sol[:3], sol[3:].reshape(n, 3), dOmega


def error_rates(actual, u, dp, qp, cp):
    """Time derivative of :func:`error_coords` under the nonlinear dynamics."""
    n = actual.n
    L = layout(n)
    dv0, dw, dOm = accel_variational(actual, u, qp, cp)
    E = dp.R.T @ actual.R
    Edot = -hat(dp.Omega) @ E + E @ hat(actual.Omega)
    r = np.empty(state_dim(n))
    r[L["eta"]] = skew_part_vee(Edot)
    r[L["dOmega"]] = dOm - dp.dOmega
    r[L["dx0"]] = actual.v0 - dp.v0
    r[L["dv0"]] = dv0 - dp.a0
    qd_dot = cross(dp.omega, dp.q)
    q_dot = cross(actual.omega, actual.q)
    xi_dot = cross(qd_dot, actual.q) + cross(dp.q, q_dot)
    for i in range(n):
        r[L["xi"][i]] = xi_dot[i]
        r[L["dw"][i]] = dw[i] - dp.domega[i]
    return r


def finite_diff_lin(dp, qp, cp, h=1e-5):
    """Central-difference Jacobians of the error rates at the reference."""
    if not 1e-7 <= h <= 1e-4:
        raise ValueError("perturbation h must lie in [1e-7, 1e-4]")
    n = cp.n
    dim = state_dim(n)
    u = dp.u
    A = np.empty((dim, dim))
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        rp = error_rates(perturbed_state(dp, e), u, dp, qp, cp)
        rm = error_rates(perturbed_state(dp, -e), u, dp, qp, cp)
        A[:, k] = (rp - rm) / (2 * h)
    B = np.empty((dim, 4))
    s0 = dp.state
    uv = u.as_vector()
    for k in range(4):
        e = np.zeros(4)
        e[k] = h
        up = ControlInput(uv[0] + e[0], uv[1:] + e[1:])
        um = ControlInput(uv[0] - e[0], uv[1:] - e[1:])
        B[:, k] = (error_rates(s0, up, dp, qp, cp) - error_rates(s0, um, dp, qp, cp)) / (2 * h)
    return A, B


def block_errors(X, Y, n, floor_rel=1e-6):
    """Relative Frobenius error of every 3x3 block (or 3x1 input column).

    Blocks whose reference norm is below ``floor_rel * |Y|`` are measured
    against that floor instead, so exact-zero blocks are compared in absolute
    terms at the scale of the whole matrix.
    """
    names = block_names(n)
    floor = floor_rel * np.linalg.norm(Y)
    out = {}
    ncols = X.shape[1] // 3 if X.shape[1] % 3 == 0 else None
    for bi, rn in enumerate(names):
        rs = slice(3 * bi, 3 * bi + 3)
        if ncols is None:
            col_groups = [("df", slice(0, 1)), ("dM", slice(1, 4))]
        else:
            col_groups = [(cn, slice(3 * bj, 3 * bj + 3)) for bj, cn in enumerate(names)]
        for cn, cs in col_groups:
            diff = np.linalg.norm(X[rs, cs] - Y[rs, cs])
            out[(rn, cn)] = diff / max(np.linalg.norm(Y[rs, cs]), floor)
    return out


def propagate_linear(A_of_t, s0, t0, T, dt, B_of_t=None, du=None):
    """RK4 solution of ``s' = A(t) s (+ B(t) du(t))`` sampled every ``dt``."""
    steps = int(round(T / dt))
    out = np.empty((steps + 1, len(s0)))
    out[0] = s0

    def f(t, s):
        r = A_of_t(t) @ s
        if B_of_t is not None:
            r = r + B_of_t(t) @ du(t)
        return r

    s = np.asarray(s0, dtype=float)
    for k in range(steps):
        t = t0 + k * dt
        k1 = f(t, s)
        k2 = f(t + dt / 2, s + dt / 2 * k1)
        k3 = f(t + dt / 2, s + dt / 2 * k2)
        k4 = f(t + dt, s + dt * k3)
        s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = s
    return t0 + dt * np.arange(steps + 1), out
