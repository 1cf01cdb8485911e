"""Single quadrotor carrying a point mass through an n-link cable.

Two equivalent formulations live here. The compact mass-matrix form drives
forward simulation (:func:`accel_single`, :func:`step`); the tension form is
recovered from accelerations by :func:`tensions_from_accel` and used to check
the first against Newton's laws link by link.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Union

import numpy as np

from .geom import E3, cross, hat, normalize, orthonormalize, project_tangent

G = 9.81


@dataclass(frozen=True)
class QuadParams:
    m: float = 0.85
    J: np.ndarray = field(default_factory=lambda: np.diag([0.557, 0.557, 1.05]) * 1e-2)
    g: float = G

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", J)
        if self.m <= 0:
            raise ValueError("quadrotor mass must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.min(np.linalg.eigvalsh(J)) <= 0:
            raise ValueError("inertia must be a symmetric positive definite 3x3 matrix")


@dataclass(frozen=True)
class CableParams:
    """Link masses ``m[i]`` sit at the far end of link ``i`` of length ``l[i]``."""

    m: np.ndarray
    l: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        l = np.atleast_1d(np.asarray(self.l, dtype=float))
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "l", l)
        if m.shape != l.shape or m.ndim != 1 or len(m) < 1:
            raise ValueError("need n >= 1 links with one mass and one length each")
        if np.any(m <= 0) or np.any(l <= 0):
            raise ValueError("link masses and lengths must be positive")

    @classmethod
    def uniform(cls, n, m=0.1, l=0.25):
        return cls(np.full(n, float(m)), np.full(n, float(l)))

    @property
    def n(self):
        return len(self.m)


@dataclass
class SingleState:
    x0: np.ndarray
    v0: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    q: np.ndarray  # (n, 3) link directions, quadrotor to load
    omega: np.ndarray  # (n, 3) link angular velocities

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(3)
        self.v0 = np.asarray(self.v0, dtype=float).reshape(3)
        self.R = np.asarray(self.R, dtype=float).reshape(3, 3)
        self.Omega = np.asarray(self.Omega, dtype=float).reshape(3)
        self.q = np.asarray(self.q, dtype=float).reshape(-1, 3)
        self.omega = np.asarray(self.omega, dtype=float).reshape(-1, 3)

    @property
    def n(self):
        return len(self.q)

    def copy(self):
        return SingleState(self.x0.copy(), self.v0.copy(), self.R.copy(), self.Omega.copy(),
                           self.q.copy(), self.omega.copy())

    def to_vector(self):
        return np.concatenate([self.x0, self.v0, self.R.ravel(), self.Omega,
                               self.q.ravel(), self.omega.ravel()])

    @classmethod
    def from_vector(cls, y, n):
        return cls(y[0:3], y[3:6], y[6:15].reshape(3, 3), y[15:18],
                   y[18:18 + 3 * n].reshape(n, 3), y[18 + 3 * n:18 + 6 * n].reshape(n, 3))

    def nodes(self, cp):
        """Positions ``x_0 .. x_n``; the last row is the load."""
        return np.vstack([self.x0, self.x0 + np.cumsum(cp.l[:, None] * self.q, axis=0)])

    def node_velocities(self, cp):
        qdot = cross(self.omega, self.q)
        return np.vstack([self.v0, self.v0 + np.cumsum(cp.l[:, None] * qdot, axis=0)])

    def load_position(self, cp):
        return self.x0 + cp.l @ self.q

    def manifold_errors(self):
        """Worst unit-norm, tangency and orthogonality violations."""
        return (float(np.max(np.abs(np.linalg.norm(self.q, axis=1) - 1.0))),
                float(np.max(np.abs(np.sum(self.q * self.omega, axis=1)))),
                float(np.max(np.abs(self.R.T @ self.R - np.eye(3)))))


@dataclass(frozen=True)
class ControlInput:
    f: float
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f", float(self.f))
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float).reshape(3))

    def as_vector(self):
        return np.concatenate([[self.f], self.M])


class Accelerations(NamedTuple):
    dv0: np.ndarray
    domega: np.ndarray  # (n, 3)
    dOmega: np.ndarray


@dataclass
class TensionProfile:
    Tq: np.ndarray  # (n, 3) tension vectors T_i q_i
    T: np.ndarray  # (n,) signed magnitudes


def mass_coeffs(qp, cp):
    """Inertia coupling coefficients of the compact cable model.

    ``M[0,0]`` is the total mass, ``M[0,i]`` the mass hanging below joint i
    times ``l_i`` and ``M[i,j]`` the mass below ``max(i, j)`` times
    ``l_i l_j``.
    """
    n = cp.n
    below = np.cumsum(cp.m[::-1])[::-1]  # below[i-1] = sum_{a >= i} m_a
    M = np.empty((n + 1, n + 1))
    M[0, 0] = qp.m + below[0]
    M[0, 1:] = below * cp.l
    M[1:, 0] = M[0, 1:]
    idx = np.arange(n)
    deeper = np.maximum.outer(idx, idx)
    M[1:, 1:] = below[deeper] * np.outer(cp.l, cp.l)
    return M


def gravity_moments(qp, cp):
    """``g l_i sum_{a >= i} m_a`` for each link."""
    below = np.cumsum(cp.m[::-1])[::-1]
    return qp.g * cp.l * below


_I3 = np.eye(3)


def _compact_system(s, u, qp, cp):
    n = cp.n
    Mc = mass_coeffs(qp, cp)
    q = s.q
    qdot = cross(s.omega, q)
    P = _I3 - q[:, :, None] * q[:, None, :]  # -hat(q)^2 for unit q
    Pfull = np.concatenate([_I3[None], P])
    blocks = Mc[:, None, :, None] * Pfull[:, :, None, :]
    d = np.arange(n + 1)
    blocks[d, :, d, :] = np.diag(Mc)[:, None, None] * _I3
    A = blocks.reshape(3 * n + 3, 3 * n + 3)
    rhs = np.empty((n + 1, 3))
    rhs[0] = u.f * s.R[:, 2] - Mc[0, 0] * qp.g * E3
    # hat(q)^2 e3 = q (q . e3) - e3
    qqe3 = q * q[:, 2:3] - E3
    rhs[1:] = -np.sum(qdot**2, axis=1)[:, None] * np.diag(Mc)[1:, None] * q \
        + gravity_moments(qp, cp)[:, None] * qqe3
    return A, rhs.ravel()


def accel_single(s, u, qp, cp):
    """Accelerations from the compact mass-matrix model.

    Solves for ``(x0_ddot, q_ddot_1..n)`` and converts each ``q_ddot`` to the
    tangent angular acceleration ``q x q_ddot``.
    """
    A, b = _compact_system(s, u, qp, cp)
    sol = np.linalg.solve(A, b)
    dv0 = sol[:3]
    qdd = sol[3:].reshape(-1, 3)
    domega = cross(s.q, qdd)
    JW = qp.J @ s.Omega
    dOmega = np.linalg.solve(qp.J, u.M - cross(s.Omega, JW))
    return Accelerations(dv0, domega, dOmega)


def node_accelerations(s, acc, cp):
    """Second derivatives of ``x_0 .. x_n`` from joint-space accelerations."""
    q, w = s.q, s.omega
    qdd = cross(acc.domega, q) + cross(w, cross(w, q))
    return np.vstack([acc.dv0, acc.dv0 + np.cumsum(cp.l[:, None] * qdd, axis=0)])


def tensions_from_accel(s, acc, qp, cp):
    """Link tensions implied by node accelerations, sweeping load to quadrotor."""
    n = cp.n
    xdd = node_accelerations(s, acc, cp)
    Tq = np.empty((n, 3))
    Tq[n - 1] = -cp.m[n - 1] * (xdd[n] + qp.g * E3)
    for j in range(n - 2, -1, -1):
        Tq[j] = Tq[j + 1] - cp.m[j] * (xdd[j + 1] + qp.g * E3)
    T = np.linalg.norm(Tq, axis=1) * np.sign(np.sum(Tq * s.q, axis=1))
    return TensionProfile(Tq, T)


def newton_euler_residual(s, u, acc, qp, cp):
    """Largest violation of the tension-form equations by ``acc``.

    Covers the quadrotor translational balance, alignment of every tension
    vector with its link and the attitude equation.
    """
    ten = tensions_from_accel(s, acc, qp, cp)
    r_quad = qp.m * (acc.dv0 + qp.g * E3) - u.f * s.R[:, 2] - ten.Tq[0]
    r_align = project_tangent(ten.Tq, s.q)
    r_att = qp.J @ acc.dOmega + cross(s.Omega, qp.J @ s.Omega) - u.M
    return float(max(np.linalg.norm(r_quad), np.max(np.linalg.norm(r_align, axis=1)),
                     np.linalg.norm(r_att)))


def state_derivative(s, u, qp, cp):
    acc = accel_single(s, u, qp, cp)
    return np.concatenate([s.v0, acc.dv0, (s.R @ hat(s.Omega)).ravel(), acc.dOmega,
                           cross(s.omega, s.q).ravel(), acc.domega.ravel()])


InputLike = Union[ControlInput, Callable[[float], ControlInput]]


def _input_at(u, t):
    return u(t) if callable(u) else u


def project_state(s):
    """Push a state back onto SO(3) x R^3 x (S^2)^n with tangent velocities."""
    q = normalize(s.q)
    return SingleState(s.x0, s.v0, orthonormalize(s.R), s.Omega, q, project_tangent(s.omega, q))


def step(s, u, dt, qp, cp, t=0.0):
    """One RK4 step followed by projection onto the manifold.

    ``u`` may be a fixed input or a callable of absolute time, evaluated at
    the stage times ``t``, ``t + dt/2`` and ``t + dt``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = s.n
    y = s.to_vector()

    def f(yy, tt):
        return state_derivative(SingleState.from_vector(yy, n), _input_at(u, tt), qp, cp)

    k1 = f(y, t)
    k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(y + dt * k3, t + dt)
    y_new = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return project_state(SingleState.from_vector(y_new, n))


def simulate(s, u, dt, steps, qp, cp, t0=0.0):
    """Open-loop integration; returns the list of visited states."""
    out = [s]
    for k in range(steps):
        s = step(s, u, dt, qp, cp, t=t0 + k * dt)
        out.append(s)
    return out


def energy(s, qp, cp):
    """Kinetic plus gravitational energy of quadrotor and link masses."""
    v = s.node_velocities(cp)
    x = s.nodes(cp)
    ke = 0.5 * qp.m * v[0] @ v[0] + 0.5 * np.sum(cp.m * np.sum(v[1:] ** 2, axis=1)) \
        + 0.5 * s.Omega @ qp.J @ s.Omega
    pe = qp.g * (qp.m * x[0, 2] + cp.m @ x[1:, 2])
    return float(ke + pe)


def hover_state(qp, cp, load=(0.0, 0.0, 0.0)):
    n = cp.n
    q = np.tile(-E3, (n, 1))
    x0 = np.asarray(load, dtype=float) + cp.l.sum() * E3
    return SingleState(x0, np.zeros(3), np.eye(3), np.zeros(3), q, np.zeros((n, 3)))


def hover_input(qp, cp):
    return ControlInput(mass_coeffs(qp, cp)[0, 0] * qp.g, np.zeros(3))


def check_tensions(ten, where=""):
    if np.any(ten.T < 0):
        warnings.warn(f"negative link tension {ten.T.min():.3e} N {where}".rstrip(), RuntimeWarning)


# degrees of freedom -------------------------------------------------------

def dof_single(n):
    return 6 + 2 * n


def dof_multi_point(ns):
    return 3 + 3 * len(ns) + 2 * sum(ns)


def dof_multi_rigid(ns):
    return 6 + 3 * len(ns) + 2 * sum(ns)


def underactuation(dof, quads):
    """Degrees of underactuation with four inputs per quadrotor."""
    return dof - 4 * quads

