"""Several quadrotors sharing one payload through multi-link cables.

Only residual evaluation is provided: given positions, accelerations, link
tensions and inputs, report how far each Newton-Euler balance is from zero.
The states are produced by the flatness maps in :mod:`cablequad.flatness`.

Cable convention: link ``j`` of cable ``i`` runs from node ``j-1`` to node
``j``; node 0 is the quadrotor and node ``n_i`` the attachment point on the
load. Only the interior nodes ``1 .. n_i - 1`` carry mass, so ``m[-1]`` of
each :class:`~cablequad.dynamics.CableParams` is not used here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CableParams, QuadParams
from .geom import E3, cross, project_tangent


@dataclass
class MultiPointParams:
    quads: list
    cables: list
    m_L: float
    g: float = 9.81

    def __post_init__(self):
        if len(self.quads) != len(self.cables) or len(self.quads) < 1:
            raise ValueError("need one cable per quadrotor and p >= 1")
        if self.m_L <= 0:
            raise ValueError("load mass must be positive")

    @property
    def p(self):
        return len(self.quads)

    @property
    def ns(self):
        return [c.n for c in self.cables]


@dataclass
class RigidLoadParams(MultiPointParams):
    J_L: np.ndarray = field(default_factory=lambda: np.eye(3))
    r: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))

    def __post_init__(self):
        super().__post_init__()
        self.J_L = np.asarray(self.J_L, dtype=float)
        self.r = np.asarray(self.r, dtype=float).reshape(-1, 3)
        if self.p < 3:
            raise ValueError("a rigid load needs p >= 3 cables")
        if len(self.r) != self.p:
            raise ValueError("one attachment offset per cable")


@dataclass
class MultiPointState:
    """Load translation plus one branch per quadrotor.

    Each branch is a :class:`~cablequad.flatness.DesiredPoint`-like record with
    ``nodes``, ``node_acc``, ``q``, ``Tq``, ``R``, ``Omega``, ``dOmega``,
    ``f`` and ``M``.
    """

    x_L: np.ndarray
    a_L: np.ndarray
    branches: list


@dataclass
class RigidLoadState(MultiPointState):
    R_L: np.ndarray = field(default_factory=lambda: np.eye(3))
    Omega_L: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dOmega_L: np.ndarray = field(default_factory=lambda: np.zeros(3))


def uniform_multi_point(p, n=5, m_link=0.1, l_link=0.25, m_L=0.5, quad=None):
    quad = quad or QuadParams()
    return MultiPointParams([quad] * p, [CableParams.uniform(n, m_link, l_link)] * p, m_L)


def uniform_rigid(p, n=5, m_link=0.1, l_link=0.25, m_L=0.5, radius=0.3,
                  J_L=(0.01, 0.01, 0.02), quad=None):
    """p cables attached on a circle of ``radius`` in the load's body x-y plane."""
    quad = quad or QuadParams()
    ang = 2 * np.pi * np.arange(p) / p
    r = radius * np.stack([np.cos(ang), np.sin(ang), np.zeros(p)], axis=1)
    return RigidLoadParams([quad] * p, [CableParams.uniform(n, m_link, l_link)] * p, m_L,
                           J_L=np.diag(J_L), r=r)


def _branch_residuals(b, quad, cable, attach, g):
    n = cable.n
    nodes = np.array(b.nodes, dtype=float)
    nodes_kin = nodes.copy()
    nodes_kin[-1] = attach
    kin = np.linalg.norm(nodes_kin[1:] - nodes_kin[:-1] - cable.l[:, None] * b.q, axis=1).max()
    interior = 0.0
    if n > 1:
        acc = np.asarray(b.node_acc)[1:n]
        lhs = cable.m[:n - 1, None] * (acc + g * E3)
        interior = np.linalg.norm(lhs + b.Tq[:n - 1] - b.Tq[1:], axis=1).max()
    quad_tr = np.linalg.norm(quad.m * (b.node_acc[0] + g * E3) - b.f * np.asarray(b.R)[:, 2] - b.Tq[0])
    quad_rot = np.linalg.norm(quad.J @ b.dOmega + cross(b.Omega, quad.J @ b.Omega) - b.M)
    align = np.linalg.norm(project_tangent(b.Tq, b.q), axis=1).max()
    T = np.sum(b.Tq * b.q, axis=1)
    if np.any(T < 0):
        warnings.warn(f"negative cable tension {T.min():.3e} N", RuntimeWarning)
    return kin, interior, quad_tr, quad_rot, align


def _collect(state, params, attach_points):
    res = {"kinematics": 0.0, "link_nodes": 0.0, "quad_translation": 0.0,
           "quad_rotation": 0.0, "tension_alignment": 0.0}
    for b, quad, cable, att in zip(state.branches, params.quads, params.cables, attach_points):
        kin, interior, qt, qr, al = _branch_residuals(b, quad, cable, att, params.g)
        res["kinematics"] = max(res["kinematics"], kin)
        res["link_nodes"] = max(res["link_nodes"], interior)
        res["quad_translation"] = max(res["quad_translation"], qt)
        res["quad_rotation"] = max(res["quad_rotation"], qr)
        res["tension_alignment"] = max(res["tension_alignment"], al)
    last = sum(np.asarray(b.Tq)[-1] for b in state.branches)
    res["load_translation"] = float(np.linalg.norm(
        params.m_L * (np.asarray(state.a_L) + params.g * E3) + last))
    return res, last


def residual_multi_point(state, params):
    """Residual norms of every balance for the shared point-mass load.

    Returns a dict keyed by balance name with an extra ``"max"`` entry.
    """
    attach = [state.x_L] * params.p
    res, _ = _collect(state, params, attach)
    res = {k: float(v) for k, v in res.items()}
    res["max"] = max(res.values())
    return res


def residual_multi_rigid(state, params):
    """As :func:`residual_multi_point`, adding the load attitude balance."""
    R_L = np.asarray(state.R_L)
    attach = [state.x_L + R_L @ r for r in params.r]
    res, _ = _collect(state, params, attach)
    moment = sum(cross(r, R_L.T @ np.asarray(b.Tq)[-1]) for r, b in zip(params.r, state.branches))
    W, JL = state.Omega_L, params.J_L
    res["load_rotation"] = float(np.linalg.norm(JL @ state.dOmega_L + cross(W, JL @ W) + moment))
    res = {k: float(v) for k, v in res.items()}
    res["max"] = max(res.values())
    return res
