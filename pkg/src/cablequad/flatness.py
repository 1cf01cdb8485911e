"""Differential-flatness maps for cable-suspended payloads.

From the load trajectory (plus yaw, and for the shared-load systems a choice
of internal tensions) everything else follows algebraically: each cable is
rebuilt link by link from the load upward, then the quadrotor attitude and
inputs come from the required thrust vector. All of it runs on
:class:`~cablequad.jets.Jet` arithmetic, which keeps the high-order
derivatives exact.

Every map accepts a scalar time or an array of times; arrays are processed in
chunks and give batched results.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .dynamics import Accelerations, ControlInput, SingleState, accel_single, newton_euler_residual
from .geom import E3
from .jets import Jet, angular_velocity, stack
from .multi import MultiPointState, RigidLoadState, residual_multi_point, residual_multi_rigid
from .signals import Constant, Signal, VecSignal, as_signal

EPS_T = 1e-6
EPS_F = 1e-6
CHUNK = 4096


class FlatnessSingularity(ValueError):
    """A normalization in the flatness map hit a (near) zero vector."""

    def __init__(self, what, t, link=None, cable=None):
        self.t = t
        self.link = link
        self.cable = cable
        where = []
        if cable is not None:
            where.append(f"cable {cable}")
        if link is not None:
            where.append(f"link {link}")
        loc = (" at " + ", ".join(where)) if where else ""
        super().__init__(f"{what}{loc}, t = {t:.6g} s")


class GeometryError(ValueError):
    """The attachment geometry does not determine the load wrench."""


_REF_FIELDS = ("t", "x0", "v0", "a0", "R", "Omega", "dOmega", "q", "omega", "domega",
               "f", "M", "Tq", "T", "nodes", "node_vel", "node_acc")


@dataclass
class DesiredPoint:
    """Reference state, feedforward input and tensions at one instant.

    ``nodes``, ``node_vel`` and ``node_acc`` run from the quadrotor (row 0)
    to the cable end (last row, the load for a single quadrotor).
    """

    t: float
    x0: np.ndarray
    v0: np.ndarray
    a0: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    dOmega: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    domega: np.ndarray
    f: float
    M: np.ndarray
    Tq: np.ndarray
    T: np.ndarray
    nodes: np.ndarray
    node_vel: np.ndarray
    node_acc: np.ndarray

    @property
    def n(self):
        return len(self.q)

    @property
    def state(self):
        return SingleState(self.x0, self.v0, self.R, self.Omega, self.q, self.omega)

    @property
    def u(self):
        return ControlInput(self.f, self.M)

    @property
    def acc(self):
        return Accelerations(self.a0, self.domega, self.dOmega)

    @property
    def load(self):
        return self.nodes[-1]


@dataclass
class DesiredTrajectory:
    """:class:`DesiredPoint` fields stacked along a leading time axis."""

    t: np.ndarray
    x0: np.ndarray
    v0: np.ndarray
    a0: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    dOmega: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    domega: np.ndarray
    f: np.ndarray
    M: np.ndarray
    Tq: np.ndarray
    T: np.ndarray
    nodes: np.ndarray
    node_vel: np.ndarray
    node_acc: np.ndarray

    def __len__(self):
        return len(self.t)

    def __getitem__(self, k):
        vals = {name: getattr(self, name)[k] for name in _REF_FIELDS}
        if np.ndim(vals["t"]):
            return DesiredTrajectory(**vals)
        vals["t"] = float(vals["t"])
        vals["f"] = float(vals["f"])
        return DesiredPoint(**vals)

    @classmethod
    def concat(cls, parts):
        return cls(**{name: np.concatenate([getattr(p, name) for p in parts]) for name in _REF_FIELDS})


# quadrotor ---------------------------------------------------------------

def quad_flatness(x0, yaw, thrust, qp, t=None):
    """Attitude, body rates and inputs of a quadrotor from its thrust vector.

    ``thrust`` is the jet of ``f R e3`` (order >= 2), ``yaw`` the heading jet
    (order >= 2) and ``x0`` the position jet (order >= 2). The body z axis is
    aligned with the thrust and the body x axis is the heading direction
    projected onto the plane normal to it.
    """
    thrust.require(2, "thrust vector")
    yaw.require(2, "yaw")
    tt = np.broadcast_to(np.asarray(0.0 if t is None else t, dtype=float), thrust.value.shape[:-1])
    fnorm = thrust.norm()
    _guard(fnorm.value, EPS_F, "thrust vector vanishes", tt)
    b3 = thrust / fnorm
    s, c = yaw.sincos()
    zero = Jet(np.zeros_like(c.tc))
    heading = stack([c, s, zero])
    b2 = b3.cross(heading)
    b2n = b2.norm()
    _guard(b2n.value, 1e-9, "thrust vector is horizontal along the heading", tt)
    b2 = b2 / b2n
    b1 = b2.cross(b3)
    R = stack([b1, b2, b3], axis=-1)
    W = angular_velocity(R.truncate(2))
    dW = W.d()
    Om, dOm = W.value, dW.value
    JW = np.einsum("ij,...j->...i", qp.J, Om)
    M = np.einsum("ij,...j->...i", qp.J, dOm) + np.cross(Om, JW)
    return {"x0": x0.deriv(0), "v0": x0.deriv(1), "a0": x0.deriv(2),
            "R": R.value, "Omega": Om, "dOmega": dOm, "f": fnorm.value, "M": M}


def _guard(norms, eps, what, t, link=None, cable=None):
    bad = np.asarray(norms) <= eps
    if np.any(bad):
        k = np.flatnonzero(np.ravel(bad))[0]
        raise FlatnessSingularity(what, float(np.ravel(t)[k]), link=link, cable=cable)


# cable chain ---------------------------------------------------------------

def _chain(end, Tq_last, cp, g, t, cable=None):
    """Rebuild one cable from its end point and last-link tension.

    Returns node jets ``x_0 .. x_n``, direction jets and tension jets.
    Interior node masses are ``cp.m[:-1]``.
    """
    n = cp.n
    xs = [None] * (n + 1)
    qs = [None] * n
    Tqs = [None] * n
    xs[n] = end
    Tqs[n - 1] = Tq_last
    for j in range(n - 1, -1, -1):
        tn = Tqs[j].norm()
        _guard(tn.value, EPS_T, "cable tension vanishes", t, link=j + 1, cable=cable)
        qs[j] = Tqs[j] / tn
        xs[j] = xs[j + 1] - qs[j] * cp.l[j]
        if j > 0:
            Tqs[j - 1] = Tqs[j] - (xs[j].d().d() + g * E3) * cp.m[j - 1]
    return xs, qs, Tqs


def _reference(t, xs, qs, Tqs, yaw, qp):
    x0 = xs[0]
    F = (x0.d().d() + qp.g * E3) * qp.m - Tqs[0]
    quad = quad_flatness(x0, yaw, F, qp, t)
    q = np.stack([j.deriv(0) for j in qs], axis=-2)
    dq = np.stack([j.deriv(1) for j in qs], axis=-2)
    ddq = np.stack([j.deriv(2) for j in qs], axis=-2)
    Tq = np.stack([j.deriv(0) for j in Tqs], axis=-2)
    return DesiredTrajectory(
        t=np.asarray(t, dtype=float), q=q, omega=np.cross(q, dq), domega=np.cross(q, ddq),
        Tq=Tq, T=np.linalg.norm(Tq, axis=-1),
        nodes=np.stack([x.deriv(0) for x in xs], axis=-2),
        node_vel=np.stack([x.deriv(1) for x in xs], axis=-2),
        node_acc=np.stack([x.deriv(2) for x in xs], axis=-2),
        **quad)


def required_order(n):
    """Derivatives of the load trajectory consumed for an n-link cable."""
    return 2 * n + 4


def flat_single_jets(load, yaw, qp, cp, t=0.0, force=None):
    """Single-quadrotor flatness map on pre-computed jets.

    ``load`` must carry at least ``2n + 4`` derivatives and ``yaw`` at least
    2; fewer raise :class:`~cablequad.jets.OrderError`. ``force`` is an
    optional external force jet acting on the load.
    """
    n = cp.n
    load.require(required_order(n), "load trajectory")
    yaw.require(2, "yaw")
    Tq_last = (load.d().d() + qp.g * E3) * (-cp.m[n - 1])
    if force is not None:
        Tq_last = Tq_last + force
    t = np.broadcast_to(np.asarray(t, dtype=float), load.value.shape[:-1])
    xs, qs, Tqs = _chain(load, Tq_last, cp, qp.g, t)
    return _reference(t, xs, qs, Tqs, yaw, qp)


@dataclass
class FlatOutputsSingle:
    load: VecSignal
    yaw: Signal = field(default_factory=lambda: Constant(0.0))

    def __post_init__(self):
        self.yaw = as_signal(self.yaw)


def _batched(fn, t):
    """Run ``fn(t_chunk)`` over chunks; scalar t returns a single point."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return fn(t[None])[0]
    parts = [fn(t[i:i + CHUNK]) for i in range(0, len(t), CHUNK)]
    return parts[0] if len(parts) == 1 else type(parts[0]).concat(parts)


def flat_single(fo, qp, cp, t, force=None):
    """Desired state and feedforward for a single quadrotor with cable load.

    Returns a :class:`DesiredPoint` for scalar ``t`` and a
    :class:`DesiredTrajectory` for an array.
    """
    K = required_order(cp.n)

    def run(tc):
        F = None if force is None else force.jet(tc, K - 2)
        return flat_single_jets(fo.load.jet(tc, K), fo.yaw.jet(tc, 2), qp, cp, tc, force=F)

    return _batched(run, t)


def flat_single_with_force(fo, force, qp, cp, t):
    """Flatness map with an external force signal acting on the load."""
    return flat_single(fo, qp, cp, t, force=force)


def desired_residual(dp, qp, cp):
    """Largest violation of the dynamics by a reference point.

    Checks the tension-form balances, agreement with the compact model's
    accelerations and the cable kinematics.
    """
    s = dp.state
    r_ne = newton_euler_residual(s, dp.u, dp.acc, qp, cp)
    acc = accel_single(s, dp.u, qp, cp)
    r_acc = max(np.abs(acc.dv0 - dp.a0).max(), np.abs(acc.domega - dp.domega).max(),
                np.abs(acc.dOmega - dp.dOmega).max())
    r_kin = np.abs(s.nodes(cp) - dp.nodes).max()
    return float(max(r_ne, r_acc, r_kin))


# shared point-mass load --------------------------------------------------------

@dataclass
class FlatOutputsMultiPoint:
    """Load path, last-link tensions of cables ``2..p`` and all yaws."""

    load: VecSignal
    tensions: list
    yaws: Optional[list] = None

    def yaw(self, i):
        return Constant(0.0) if self.yaws is None else as_signal(self.yaws[i])


@dataclass
class MultiReference:
    t: np.ndarray
    x_L: np.ndarray
    a_L: np.ndarray
    branches: list
    R_L: Optional[np.ndarray] = None
    Omega_L: Optional[np.ndarray] = None
    dOmega_L: Optional[np.ndarray] = None
    body_tensions: Optional[np.ndarray] = None
    wrench: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.t)

    def state(self, k):
        branches = [b[k] for b in self.branches]
        if self.R_L is None:
            return MultiPointState(self.x_L[k], self.a_L[k], branches)
        return RigidLoadState(self.x_L[k], self.a_L[k], branches,
                              R_L=self.R_L[k], Omega_L=self.Omega_L[k], dOmega_L=self.dOmega_L[k])

    @classmethod
    def concat(cls, parts):
        out = {}
        for f in fields(cls):
            vals = [getattr(p, f.name) for p in parts]
            if f.name == "branches":
                out[f.name] = [DesiredTrajectory.concat(bs) for bs in zip(*vals)]
            elif vals[0] is None:
                out[f.name] = None
            else:
                out[f.name] = np.concatenate(vals)
        return cls(**out)

    def __getitem__(self, k):
        return self.state(k)


def flat_multi_point(fo, params, t):
    """References for every quadrotor carrying a shared point mass.

    Cable 1's last-link tension is whatever the load balance leaves after
    the prescribed tensions of cables ``2..p``.
    """
    if len(fo.tensions) != params.p - 1:
        raise ValueError(f"expected {params.p - 1} prescribed tensions, got {len(fo.tensions)}")
    n_max = max(params.ns)
    K = 4 + 2 * n_max
    g = params.g

    def run(tc):
        xL = fo.load.jet(tc, K)
        others = [s.jet(tc, K - 2) for s in fo.tensions]
        T1 = (xL.d().d() + g * E3) * (-params.m_L)
        for Ti in others:
            T1 = T1 - Ti
        lasts = [T1] + others
        branches = []
        for i, (quad, cable, Tl) in enumerate(zip(params.quads, params.cables, lasts)):
            xs, qs, Tqs = _chain(xL, Tl, cable, g, tc, cable=i + 1)
            branches.append(_reference(tc, xs, qs, Tqs, fo.yaw(i).jet(tc, 2), quad))
        return MultiReference(tc, xL.deriv(0), xL.deriv(2), branches)

    out = _batched_multi(run, t)
    return out


def _batched_multi(fn, t):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return fn(t[None]).state(0)
    parts = [fn(t[i:i + CHUNK]) for i in range(0, len(t), CHUNK)]
    return parts[0] if len(parts) == 1 else MultiReference.concat(parts)


def multi_point_residuals(ref, params):
    return [residual_multi_point(ref.state(k), params) for k in range(len(ref))]


# shared rigid load ------------------------------------------------------------

@dataclass
class TensionDistribution:
    """Last-link tensions (load frame) realizing a load wrench.

    ``T = Phi^+ W + N Lam`` where ``N`` spans the kernel of ``Phi``.
    """

    Phi: np.ndarray
    Phi_pinv: np.ndarray
    N: np.ndarray
    T: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None

    def tensions(self, W, Lam=None):
        T = np.asarray(W) @ self.Phi_pinv.T
        if Lam is not None and self.N.shape[1]:
            T = T + np.asarray(Lam) @ self.N.T
        return T


def wrench_map(r):
    """``[I ... I; hat(r_1) ... hat(r_p)]``, shape 6 x 3p."""
    from .geom import hat
    r = np.asarray(r, dtype=float).reshape(-1, 3)
    return np.vstack([np.hstack([np.eye(3)] * len(r)), np.hstack(list(hat(r)))])


def distribution_matrices(r, rtol=1e-9):
    """Right pseudoinverse and orthonormal kernel basis of the wrench map."""
    Phi = wrench_map(r)
    U, sv, Vt = np.linalg.svd(Phi)
    if sv[-1] <= rtol * sv[0]:
        raise GeometryError("attachment points are degenerate (wrench map loses rank); "
                            "need p >= 3 non-collinear attachment points")
    Phi_pinv = Phi.T @ np.linalg.inv(Phi @ Phi.T)
    N = Vt[6:].T
    return Phi, Phi_pinv, N


def load_wrench(m_L, J_L, R_L, Omega_L, dOmega_L, a_L, g=9.81):
    """``-[R_L^T m_L (a_L + g e3); J_L dOmega + Omega x J_L Omega]``."""
    f = m_L * (np.asarray(a_L) + g * E3)
    JW = np.asarray(J_L) @ Omega_L
    return -np.concatenate([np.asarray(R_L).T @ f, J_L @ dOmega_L + np.cross(Omega_L, JW)])


def tension_distribution(r, R_L, Omega_L, dOmega_L, a_L, Lam, m_L, J_L, g=9.81):
    Phi, Phi_pinv, N = distribution_matrices(r)
    W = load_wrench(m_L, J_L, R_L, Omega_L, dOmega_L, a_L, g)
    td = TensionDistribution(Phi, Phi_pinv, N)
    lam = None if Lam is None else np.asarray(Lam, dtype=float)
    td.T = td.tensions(W, lam)
    td.W = W
    return td


@dataclass
class FlatOutputsRigid:
    load: VecSignal
    attitude: object  # AxisAngleRotation or anything with .jet(t, K) giving a rotation jet
    lam: Optional[list] = None  # 3p - 6 scalar signals
    yaws: Optional[list] = None

    def yaw(self, i):
        return Constant(0.0) if self.yaws is None else as_signal(self.yaws[i])


def flat_multi_rigid(fo, params, t):
    """References for quadrotors carrying a rigid load through cables."""
    p = params.p
    n_max = max(params.ns)
    K = 4 + 2 * n_max
    g = params.g
    Phi, Phi_pinv, N = distribution_matrices(params.r)
    if fo.lam is not None and len(fo.lam) != 3 * p - 6:
        raise ValueError(f"expected {3 * p - 6} internal-force signals, got {len(fo.lam)}")

    def run(tc):
        xL = fo.load.jet(tc, K)
        RL = fo.attitude.jet(tc, K)
        W_L = angular_velocity(RL)
        dW_L = W_L.d()
        aL = xL.d().d()
        JL = params.J_L
        force = RL.T.matvec((aL + g * E3) * params.m_L)
        W6 = -_concat([force, Jet(dW_L.tc @ JL.T) + W_L.cross(Jet(W_L.tc @ JL.T))])
        Tb = Jet(W6.tc @ Phi_pinv.T)
        if fo.lam is not None and N.shape[1]:
            lam = stack([as_signal(s).jet(tc, K - 2) for s in fo.lam])
            Tb = Tb + Jet(lam.tc @ N.T)
        branches = []
        for i, (quad, cable) in enumerate(zip(params.quads, params.cables)):
            Ti = RL.matvec(Tb[..., 3 * i:3 * i + 3])
            end = xL + Jet(RL.tc @ params.r[i])
            xs, qs, Tqs = _chain(end, Ti, cable, g, tc, cable=i + 1)
            branches.append(_reference(tc, xs, qs, Tqs, fo.yaw(i).jet(tc, 2), quad))
        return MultiReference(tc, xL.deriv(0), aL.deriv(0), branches, R_L=RL.deriv(0),
                              Omega_L=W_L.deriv(0), dOmega_L=dW_L.deriv(0),
                              body_tensions=Tb.deriv(0), wrench=W6.deriv(0))

    return _batched_multi(run, t)


def _concat(jets):
    K = min(j.order for j in jets)
    return Jet(np.concatenate([j.tc[:K + 1] for j in jets], axis=-1))


def multi_rigid_residuals(ref, params):
    return [residual_multi_rigid(ref.state(k), params) for k in range(len(ref))]
