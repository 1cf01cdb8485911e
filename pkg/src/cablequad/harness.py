"""Experiment plumbing behind the command-line interface.

Each public function takes a :class:`~cablequad.config.RunConfig` and
returns plain data (arrays, dicts); file writing is kept in small helpers so
scripts and tests can use the same code paths as the CLI.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig, TrialConfig, attitude_signal, yaw_signal
from .control import (GainTable, LinearizationTable, LqrWeights, SimulationDivergence,
                      riccati_backward, run_closed_loop)
from .dynamics import ControlInput, SingleState, accel_single, energy, tensions_from_accel
from .flatness import (FlatOutputsMultiPoint, FlatOutputsRigid, FlatOutputsSingle,
                       desired_residual, distribution_matrices, flat_multi_point, flat_multi_rigid,
                       flat_single, multi_point_residuals, multi_rigid_residuals)
from .geom import E3, normalize, project_tangent, psi_q, psi_R, rot_axis
from .linearize import block_errors, build_lin, finite_diff_lin
from .multi import MultiPointParams, RigidLoadParams
from .signals import Constant, VecSignal, signal_from_dict, vec_signal_from_dict

CSV_FMT = "%.17g"
LIN_TOL = 1e-4
FLAT_TOL = 1e-6


def write_csv(path, columns):
    """Write a dict of equal-length columns (1-D or 2-D arrays) with 17 digits."""
    names, data = [], []
    for name, col in columns.items():
        col = np.asarray(col, dtype=float)
        if col.ndim == 1:
            names.append(name)
            data.append(col[:, None])
        else:
            col = col.reshape(len(col), -1)
            names += [f"{name}_{j}" for j in range(col.shape[1])]
            data.append(col)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.hstack(data), delimiter=",", header=",".join(names), comments="", fmt=CSV_FMT)


def read_csv(path):
    with open(path) as fh:
        names = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {n: data[:, i] for i, n in enumerate(names)}


def write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


# single quadrotor ---------------------------------------------------------------

def single_system(cfg: RunConfig):
    qp = cfg.quad.params()
    cp = cfg.cable.params()
    fo = FlatOutputsSingle(cfg.trajectory.load_signal(), yaw_signal(cfg))
    return qp, cp, fo


def time_grid(T, dt):
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"horizon {T} is not a whole number of steps of {dt}")
    return np.arange(steps + 1) * dt


def plan(cfg: RunConfig):
    """Sampled reference on the plan grid, with the dynamics residual per row."""
    qp, cp, fo = single_system(cfg)
    t = time_grid(cfg.sim.T, cfg.sim.plan_dt)
    ref = flat_single(fo, qp, cp, t)
    res = np.array([desired_residual(ref[k], qp, cp) for k in range(len(t))])
    return ref, res


def plan_columns(ref, res):
    n = ref.q.shape[1]
    cols = {"t": ref.t, "xn_d": ref.nodes[:, -1], "x0_d": ref.x0}
    for i in range(n):
        cols[f"q{i + 1}_d"] = ref.q[:, i]
    cols["R_d"] = ref.R.reshape(len(ref.t), 9)
    cols["f_d"] = ref.f
    cols["M_d"] = ref.M
    for i in range(n):
        cols[f"T{i + 1}"] = ref.T[:, i]
    cols["residual"] = res
    return cols


def weights(cfg: RunConfig, n):
    w1, w2, w3, w4 = cfg.lqr.q1_blocks
    Q1 = np.diag(np.concatenate([np.full(6, w1), np.full(6, w2), np.full(3 * n, w3),
                                 np.full(3 * n, w4)]))
    dim = 12 + 6 * n
    return LqrWeights(Q1, cfg.lqr.q2 * np.eye(4), cfg.lqr.p_T * np.eye(dim), cfg.sim.T)


def compute_gains(cfg: RunConfig):
    qp, cp, fo = single_system(cfg)
    lt = LinearizationTable(fo, qp, cp, cfg.sim.T, cfg.lqr.dt_riccati)
    return riccati_backward(lt, weights(cfg, cp.n), cfg.lqr.dt_riccati)


def initial_state(dp0, trial: TrialConfig, rng=None):
    """Reference state at ``t = 0`` displaced as described by ``trial``."""
    s = dp0.state.copy()
    offset = np.asarray(trial.offset, dtype=float)
    if trial.random_scale > 0:
        rng = rng or np.random.default_rng(0)
        offset = offset + trial.random_scale * rng.normal(size=3)
    s.x0 = s.x0 + offset
    if trial.tilt_deg:
        s.R = s.R @ rot_axis(trial.tilt_axis, np.deg2rad(trial.tilt_deg))
    if trial.deflection_deg:
        ang = np.deg2rad(trial.deflection_deg)
        signs = [(-1) ** i if trial.alternate else 1 for i in range(s.n)]
        s.q = normalize(np.array([rot_axis(trial.deflection_axis, sg * ang) @ q
                                  for sg, q in zip(signs, s.q)]))
    s.omega = project_tangent(s.omega, s.q)
    return s


@dataclass
class RunRecord:
    columns: dict
    summary: dict
    snapshots: list = field(default_factory=list)


def _stay_below(t, x, thresh):
    """First time after which ``x`` stays below ``thresh``; ``None`` if never."""
    above = np.flatnonzero(~(x < thresh))
    if len(above) == 0:
        return float(t[0])
    if above[-1] == len(x) - 1:
        return None
    return float(t[above[-1] + 1])


def run_trial(cfg: RunConfig, name, table: GainTable = None, ref=None):
    """Closed-loop run of trial ``name``; returns a :class:`RunRecord`."""
    qp, cp, fo = single_system(cfg)
    n = cp.n
    if name not in cfg.trials:
        raise KeyError(f"unknown trial {name!r}; configured: {sorted(cfg.trials)}")
    table = table if table is not None else compute_gains(cfg)
    dt, T = cfg.sim.dt, cfg.sim.T
    t_half = time_grid(T, dt / 2)
    ref = ref if ref is not None else flat_single(fo, qp, cp, t_half)
    rng = np.random.default_rng(cfg.seed)
    s0 = initial_state(ref[0], cfg.trials[name], rng)
    t0 = time.perf_counter()
    try:
        log = run_closed_loop(s0, fo, qp, cp, table, dt=dt, T=T, ref=ref)
        failure = None
    except SimulationDivergence as exc:
        log, failure = None, exc
    wall = time.perf_counter() - t0
    if failure is not None:
        return RunRecord({}, {"trial": name, "diverged": True, "time": failure.t,
                              "error": str(failure)})

    idx = np.arange(0, len(log.t), cfg.sim.record_every)
    t = log.t[idx]
    rd = ref[::2]
    states = [SingleState.from_vector(log.states[k], n) for k in idx]
    xn = np.array([s.load_position(cp) for s in states])
    xn_d = rd.nodes[idx, -1]
    err = np.linalg.norm(xn - xn_d, axis=1)
    R = np.array([s.R for s in states])
    q = np.array([s.q for s in states])
    pR = psi_R(R, rd.R[idx])
    pq = psi_q(q, rd.q[idx])
    ten = np.empty((len(idx), n))
    en = np.empty(len(idx))
    unit = tang = orth = 0.0
    for j, (k, s) in enumerate(zip(idx, states)):
        u = ControlInput(log.u[k, 0], log.u[k, 1:])
        ten[j] = tensions_from_accel(s, accel_single(s, u, qp, cp), qp, cp).T
        en[j] = energy(s, qp, cp)
        mu, mt, mo = s.manifold_errors()
        unit, tang, orth = max(unit, mu), max(tang, mt), max(orth, mo)

    cols = {"t": t, "xn": xn, "xn_d": xn_d, "dxn": err, "psi_R": pR}
    for i in range(n):
        cols[f"psi_q{i + 1}"] = pq[:, i]
    cols.update({"f": log.u[idx, 0], "M": log.u[idx, 1:], "df": log.du[idx, 0],
                 "dM": log.du[idx, 1:]})
    for i in range(n):
        cols[f"T{i + 1}"] = ten[:, i]
    cols["energy"] = en

    psi_max = np.maximum(pR, pq[:, -1])
    summary = {
        "trial": name,
        "diverged": False,
        "dt": dt,
        "horizon": T,
        "wall_time_s": wall,
        "final": {"dxn": float(err[-1]), "psi_R": float(pR[-1]), "psi_q_last": float(pq[-1, -1])},
        "max": {"dxn": float(err.max()), "psi_R": float(pR.max()), "psi_q_last": float(pq[:, -1].max())},
        "convergence_time_dxn": _stay_below(t, err, cfg.sim.converge_dist),
        "convergence_time_psi": _stay_below(t, psi_max, cfg.sim.converge_psi),
        "thresholds": {"dxn_m": cfg.sim.converge_dist, "psi": cfg.sim.converge_psi,
                       "note": "acceptance gates chosen for this package, not reference values"},
        "manifold": {"unit_norm": unit, "tangency": tang, "orthogonality": orth},
        "min_tension": float(ten.min()),
    }
    snaps = []
    for ts in cfg.sim.snapshot_times:
        j = int(np.argmin(np.abs(t - ts)))
        s = states[j]
        snaps.append({"t": float(t[j]), "nodes": s.nodes(cp).tolist(), "R": s.R.tolist(),
                      "nodes_d": rd.nodes[idx[j]].tolist(), "R_d": rd.R[idx[j]].tolist()})
    return RunRecord(cols, summary, snaps)


def save_record(rec: RunRecord, outdir, name):
    outdir = Path(outdir)
    if rec.columns:
        write_csv(outdir / f"trial_{name}.csv", rec.columns)
    write_json(outdir / f"trial_{name}.json", rec.summary)
    if rec.snapshots:
        write_json(outdir / f"trial_{name}_snapshots.json", rec.snapshots)


# oracle reports --------------------------------------------------------------

def lincheck(cfg: RunConfig, times=None, count=20, h=1e-5, tol=LIN_TOL):
    """Compare analytic ``A``, ``B`` with finite differences at sample times."""
    qp, cp, fo = single_system(cfg)
    if times is None:
        times = np.sort(np.random.default_rng(cfg.seed).uniform(0.0, cfg.sim.T, count))
    rows = []
    worst = {}
    for t in np.atleast_1d(times):
        dp = flat_single(fo, qp, cp, float(t))
        lin = build_lin(dp, qp, cp)
        A_fd, B_fd = finite_diff_lin(dp, qp, cp, h)
        ea = block_errors(lin.A, A_fd, cp.n)
        eb = block_errors(lin.B, B_fd, cp.n)
        for tag, errs in (("A", ea), ("B", eb)):
            for blk, e in errs.items():
                key = f"{tag}[{blk[0]},{blk[1]}]"
                worst[key] = max(worst.get(key, 0.0), e)
        rows.append({"t": float(t), "A_max": max(ea.values()), "B_max": max(eb.values())})
    bad = sorted((k for k, v in worst.items() if v >= tol), key=lambda k: -worst[k])
    return {"tolerance": tol, "rows": rows, "max": max(worst.values()),
            "breaches": {k: worst[k] for k in bad}, "ok": not bad}


def flatcheck(cfg: RunConfig, samples=300, tol=FLAT_TOL):
    qp, cp, fo = single_system(cfg)
    t = np.linspace(0.0, cfg.sim.T, samples)
    ref = flat_single(fo, qp, cp, t)
    res = np.array([desired_residual(ref[k], qp, cp) for k in range(samples)])
    bad = np.flatnonzero(res >= tol)
    return {"tolerance": tol, "samples": samples, "max": float(res.max()),
            "worst_t": float(t[np.argmax(res)]), "min_tension": float(ref.T.min()),
            "breach_times": t[bad].tolist(), "ok": len(bad) == 0}


# shared loads -------------------------------------------------------------------

def multi_params(cfg: RunConfig):
    mc = cfg.multi
    quads = [cfg.quad.params()] * mc.p
    cables = [cfg.cable.params()] * mc.p
    if cfg.system == "multi-point":
        return MultiPointParams(quads, cables, mc.m_L, cfg.quad.g)
    ang = 2 * np.pi * np.arange(mc.p) / mc.p
    r = mc.radius * np.stack([np.cos(ang), np.sin(ang), np.zeros(mc.p)], axis=1)
    return RigidLoadParams(quads, cables, mc.m_L, cfg.quad.g, J_L=np.diag(mc.J_L), r=r)


def default_tensions(p, m_L, g):
    """Prescribed last-link tensions for cables 2..p: equal share, splayed outward."""
    out = []
    for i in range(1, p):
        th = 2 * np.pi * i / p
        v = m_L * g / p * (-E3 - 0.5 * np.array([np.cos(th), np.sin(th), 0.0]))
        out.append(VecSignal(Constant(v[0]), Constant(v[1]), Constant(v[2])))
    return out


def multi_plan(cfg: RunConfig):
    """Plan a shared-load trajectory and report every balance residual."""
    if cfg.system not in ("multi-point", "multi-rigid"):
        raise ValueError("multi-plan needs system = 'multi-point' or 'multi-rigid'")
    params = multi_params(cfg)
    mc = cfg.multi
    t = np.linspace(0.0, cfg.sim.T, mc.samples)
    yaws = None
    load = cfg.trajectory.load_signal()
    report = {"system": cfg.system, "p": params.p, "samples": mc.samples}
    if cfg.system == "multi-point":
        tens = [vec_signal_from_dict(d) for d in mc.tensions] or default_tensions(params.p, mc.m_L, params.g)
        ref = flat_multi_point(FlatOutputsMultiPoint(load, tens, yaws), params, t)
        res = multi_point_residuals(ref, params)
    else:
        lam = [signal_from_dict(d) for d in mc.lam] or None
        ref = flat_multi_rigid(FlatOutputsRigid(load, attitude_signal(cfg), lam, yaws), params, t)
        res = multi_rigid_residuals(ref, params)
        Phi, _, _ = distribution_matrices(params.r)
        report["wrench_error"] = float(np.abs(ref.body_tensions @ Phi.T - ref.wrench).max())
    keys = [k for k in res[0] if k != "max"]
    report["residuals"] = {k: max(r[k] for r in res) for k in keys}
    report["max"] = max(r["max"] for r in res)
    report["min_tension"] = float(min(b.T.min() for b in ref.branches))
    report["ok"] = report["max"] < FLAT_TOL and report.get("wrench_error", 0.0) < 1e-10
    cols = {"t": ref.t, "x_L": ref.x_L}
    for i, b in enumerate(ref.branches):
        cols[f"x0_{i + 1}"] = b.x0
        cols[f"f_{i + 1}"] = b.f
        cols[f"M_{i + 1}"] = b.M
        cols[f"T_{i + 1}"] = b.T
    return ref, cols, report
