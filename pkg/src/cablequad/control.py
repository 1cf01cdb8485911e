"""Finite-horizon LQR tracking on the linearized cable/quadrotor model.

The Riccati equation ``-P' = Q1 - P B Q2^{-1} B^T P + A^T P + P A`` is swept
backward from ``P(T) = P_T`` with RK4 on a uniform grid. Gains
``K = Q2^{-1} B^T P`` are stored on the same grid and interpolated linearly
at control time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dynamics import ControlInput, project_state, state_derivative, SingleState
from .flatness import flat_single
from .linearize import build_lin, error_coords, state_dim

PSD_TOL = 1e-8
GRID_TOL = 1e-9


class RiccatiBlowup(ArithmeticError):
    def __init__(self, t, min_eig):
        self.t = t
        self.min_eig = min_eig
        super().__init__(f"Riccati solution lost positive semidefiniteness at t = {t:.4f} s "
                         f"(min eigenvalue {min_eig:.3e})")


class HorizonError(ValueError):
    pass


class SimulationDivergence(ArithmeticError):
    def __init__(self, t, norm):
        self.t = t
        super().__init__(f"closed-loop state diverged at t = {t:.4f} s (|state| = {norm:.3e})")


def default_q1(n):
    """``diag(0.5 I6, 0.75 I6, I_3n, 0.75 I_3n)``, laid out along the state vector."""
    return np.diag(np.concatenate([np.full(6, 0.5), np.full(6, 0.75),
                                   np.ones(3 * n), np.full(3 * n, 0.75)]))


@dataclass
class LqrWeights:
    Q1: np.ndarray
    Q2: np.ndarray
    P_T: np.ndarray
    T: float

    def __post_init__(self):
        self.Q1 = np.asarray(self.Q1, dtype=float)
        self.Q2 = np.asarray(self.Q2, dtype=float)
        self.P_T = np.asarray(self.P_T, dtype=float)
        for name, M, strict in (("Q1", self.Q1, False), ("Q2", self.Q2, True), ("P_T", self.P_T, False)):
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
            ev = np.linalg.eigvalsh(M).min()
            if (strict and ev <= 0) or ev < -PSD_TOL:
                raise ValueError(f"{name} must be positive {'definite' if strict else 'semidefinite'}")
        if self.Q1.shape != self.P_T.shape:
            raise ValueError("Q1 and P_T must have the same shape")
        if self.T <= 0:
            raise ValueError("horizon T must be positive")

    @classmethod
    def default(cls, n, T=30.0, q2=0.2, pT=0.01):
        dim = state_dim(n)
        return cls(default_q1(n), q2 * np.eye(4), pT * np.eye(dim), T)


class LinearizationTable:
    """``A(t)``, ``B(t)`` sampled along a flat reference at a fixed step.

    The Riccati RK4 sweep needs the half-step points, so the table is built on
    a grid of ``dt_P / 2``.
    """

    def __init__(self, fo, qp, cp, T, dt_P):
        m = int(round(2 * T / dt_P))
        self.h = dt_P / 2
        self.t = np.arange(m + 1) * self.h
        ref = flat_single(fo, qp, cp, self.t)
        self.A = np.empty((m + 1, state_dim(cp.n), state_dim(cp.n)))
        self.B = np.empty((m + 1, state_dim(cp.n), 4))
        for k in range(m + 1):
            L = build_lin(ref[k], qp, cp)
            self.A[k], self.B[k] = L.A, L.B

    def __call__(self, t):
        k = int(round(t / self.h))
        if abs(k * self.h - t) > GRID_TOL or not 0 <= k < len(self.t):
            raise HorizonError(f"t = {t} is not on the linearization grid")
        return self.A[k], self.B[k]


def _riccati_rhs(P, A, B, Q1, Q2inv):
    """Forward-time derivative ``P'``."""
    PB = P @ B
    return -(Q1 - PB @ Q2inv @ PB.T + A.T @ P + P @ A)


def _lagrange3(x, Y0, Ym, Y1):
    """Quadratic through ``Y0`` at 0, ``Ym`` at 1/2, ``Y1`` at 1, evaluated at ``x``."""
    return (2 * (x - 0.5) * (x - 1)) * Y0 + (-4 * x * (x - 1)) * Ym + (2 * x * (x - 0.5)) * Y1


def riccati_backward(provider: Callable, w: LqrWeights, dt_P=0.01, check_psd=True, stiff_cap=1.0):
    """Sweep the Riccati equation from ``T`` down to 0.

    ``provider(t)`` returns ``(A, B)``; it is queried at grid points and
    midpoints. ``T`` must be a whole number of steps.

    Each grid interval takes one RK4 step when that is stable and otherwise
    splits into ``m`` substeps with ``h * rho <= 2.5 * stiff_cap``, where
    ``rho`` is the spectral radius of the linearized right-hand side. Inside a split interval
    ``A`` and ``B`` come from the quadratic through the three samples.
    """
    if dt_P <= 0:
        raise ValueError("dt_P must be positive")
    steps = int(round(w.T / dt_P))
    if abs(steps * dt_P - w.T) > 1e-9 * max(1.0, w.T):
        raise ValueError("horizon must be a whole number of Riccati steps")
    Q2inv = np.linalg.inv(w.Q2)
    t = np.arange(steps + 1) * dt_P
    P = np.empty((steps + 1,) + w.P_T.shape)
    P[-1] = w.P_T
    Pk = w.P_T.copy()
    nsub = np.ones(steps, dtype=int)
    for k in range(steps, 0, -1):
        AB1 = provider(t[k])
        ABm = provider(t[k] - dt_P / 2)
        AB0 = provider(t[k - 1])
        G = AB1[1] @ Q2inv @ AB1[1].T
        # the linearized sweep acts as X -> F^T X + X F with F = A - G P
        rho = 2 * np.abs(np.linalg.eigvals(AB1[0] - G @ Pk)).max()
        m = max(1, int(np.ceil(dt_P * rho / stiff_cap / 2.5)))
        nsub[k - 1] = m
        h = -dt_P / m
        for j in range(m):
            x = j / m  # fraction of the way from t[k] down to t[k-1]
            if m == 1:
                S1, Sm, S2 = AB1, ABm, AB0
            else:
                S1, Sm, S2 = ((_lagrange3(xx, AB1[0], ABm[0], AB0[0]),
                               _lagrange3(xx, AB1[1], ABm[1], AB0[1]))
                              for xx in (x, x + 0.5 / m, x + 1.0 / m))
            k1 = _riccati_rhs(Pk, *S1, w.Q1, Q2inv)
            k2 = _riccati_rhs(Pk + 0.5 * h * k1, *Sm, w.Q1, Q2inv)
            k3 = _riccati_rhs(Pk + 0.5 * h * k2, *Sm, w.Q1, Q2inv)
            k4 = _riccati_rhs(Pk + h * k3, *S2, w.Q1, Q2inv)
            Pk = Pk + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            Pk = 0.5 * (Pk + Pk.T)
        if not np.all(np.isfinite(Pk)):
            raise RiccatiBlowup(t[k - 1], float("nan"))
        if check_psd:
            ev = np.linalg.eigvalsh(Pk)[0]
            if ev < -PSD_TOL:
                raise RiccatiBlowup(t[k - 1], ev)
        P[k - 1] = Pk
    B_all = np.stack([provider(tk)[1] for tk in t])
    K = np.einsum("ij,kaj,kab->kib", Q2inv, B_all, P)
    return GainTable(t, P, K, nsub)


@dataclass(frozen=True)
class GainTable:
    t: np.ndarray
    P: np.ndarray
    K: np.ndarray
    substeps: Optional[np.ndarray] = None

    @property
    def T(self):
        return float(self.t[-1])

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    def gain(self, t):
        """``K(t)`` by linear interpolation between the bracketing samples."""
        if t < -GRID_TOL or t > self.T + GRID_TOL:
            raise HorizonError(f"t = {t} outside the gain horizon [0, {self.T}]")
        x = min(max(t, 0.0), self.T) / self.dt
        k = min(int(np.floor(x)), len(self.t) - 2)
        a = x - k
        if a < 1e-12:
            return self.K[k].copy()
        return (1 - a) * self.K[k] + a * self.K[k + 1]

    def save(self, path):
        path = str(path)
        if path.endswith(".json"):
            with open(path, "w") as fh:
                json.dump({"t0": 0.0, "dt": self.dt, "samples": len(self.t),
                           "shape_P": list(self.P.shape[1:]), "shape_K": list(self.K.shape[1:]),
                           "P": self.P.reshape(len(self.t), -1).tolist(),
                           "K": self.K.reshape(len(self.t), -1).tolist()}, fh)
        else:
            np.savez(path, t=self.t, P=self.P, K=self.K)

    @classmethod
    def load(cls, path):
        path = str(path)
        if path.endswith(".json"):
            with open(path) as fh:
                d = json.load(fh)
            m = d["samples"]
            t = d["t0"] + d["dt"] * np.arange(m)
            return cls(t, np.array(d["P"]).reshape([m] + d["shape_P"]),
                       np.array(d["K"]).reshape([m] + d["shape_K"]))
        with np.load(path) as z:
            return cls(z["t"], z["P"], z["K"])


def tracking_control(actual, dp, table, t):
    """``u = u_d - K(t) s`` with ``s`` the error state of ``actual``."""
    s = error_coords(actual, dp)
    du = -table.gain(t) @ s
    return ControlInput(dp.f + du[0], dp.M + du[1:]), du, s


@dataclass
class ClosedLoopLog:
    t: np.ndarray
    states: np.ndarray  # packed state vectors
    s: np.ndarray  # error states
    u: np.ndarray
    du: np.ndarray


def run_closed_loop(s0, fo, qp, cp, table, dt=1e-3, T=None, ref=None,
                    callback: Optional[Callable] = None, div_limit=1e6):
    """Simulate the tracking controller from ``s0`` over ``[0, T]``.

    The feedback ``du`` is computed once per step and held; the feedforward
    ``u_d`` is evaluated at every RK4 stage time, so an exact start follows
    the reference to integrator accuracy.
    """
    T = table.T if T is None else T
    steps = int(round(T / dt))
    n = cp.n
    if ref is None:
        ref = flat_single(fo, qp, cp, np.arange(2 * steps + 1) * (dt / 2))
    fd, Md = ref.f, ref.M
    dim = state_dim(n)
    log = ClosedLoopLog(np.arange(steps + 1) * dt, np.empty((steps + 1, 18 + 6 * n)),
                        np.empty((steps + 1, dim)), np.empty((steps + 1, 4)), np.empty((steps + 1, 4)))
    state = s0.copy()

    def f(y, j, du):
        u = ControlInput(fd[j] + du[0], Md[j] + du[1:])
        return state_derivative(SingleState.from_vector(y, n), u, qp, cp)

    for k in range(steps + 1):
        tk = k * dt
        u, du, s = tracking_control(state, ref[2 * k], table, tk)
        y = state.to_vector()
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm > div_limit:
            raise SimulationDivergence(tk, nrm)
        log.states[k], log.s[k], log.u[k], log.du[k] = y, s, u.as_vector(), du
        if callback is not None:
            callback(k, tk, state, u)
        if k == steps:
            break
        j = 2 * k
        k1 = f(y, j, du)
        k2 = f(y + 0.5 * dt * k1, j + 1, du)
        k3 = f(y + 0.5 * dt * k2, j + 1, du)
        k4 = f(y + dt * k3, j + 2, du)
        state = project_state(SingleState.from_vector(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), n))
    return log
