"""Command-line entry point: ``cablequad <subcommand> [options]``.

Exit codes: 0 success, 1 a check or convergence gate failed, 2 bad
configuration or usage, 3 numerical failure (flatness singularity, Riccati
blow-up, divergence).
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import harness
from .config import ConfigError, apply_overrides, dumps, load_config, save_config
from .control import GainTable, RiccatiBlowup
from .flatness import FlatnessSingularity, GeometryError

log = logging.getLogger("cablequad")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _common(p):
    p.add_argument("--config", help="TOML or JSON run configuration")
    p.add_argument("--out", help="output directory (default from config)")
    p.add_argument("--dt", type=float, help="simulation step [s]")
    p.add_argument("--horizon", type=float, help="horizon T [s]")
    p.add_argument("--dt-riccati", type=float, help="Riccati grid step [s]")
    p.add_argument("--seed", type=int)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config entry, e.g. --set cable.n=3")


def build_parser():
    ap = argparse.ArgumentParser(prog="cablequad",
                                 description="Quadrotor with flexible cable load: planning, LQR tracking, checks")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("plan", help="sample the flat reference to CSV")
    _common(p)

    p = sub.add_parser("gains", help="backward Riccati sweep, save the gain table")
    _common(p)
    p.add_argument("--format", choices=("npz", "json"), default="npz")

    p = sub.add_parser("simulate", help="closed-loop trials")
    _common(p)
    p.add_argument("--trial", default="all", help="trial name from the config, or 'all'")
    p.add_argument("--gains", help="precomputed gain table (.npz or .json)")
    p.add_argument("--parallel", action="store_true", help="run trials in separate processes")

    p = sub.add_parser("lincheck", help="A, B against finite differences")
    _common(p)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--tol", type=float, default=harness.LIN_TOL)

    p = sub.add_parser("flatcheck", help="dynamics residuals along the flat reference")
    _common(p)
    p.add_argument("--samples", type=int, default=300)
    p.add_argument("--tol", type=float, default=harness.FLAT_TOL)

    p = sub.add_parser("multi-plan", help="plan a shared-load trajectory and check residuals")
    _common(p)

    p = sub.add_parser("config", help="print the resolved configuration")
    _common(p)
    p.add_argument("--format", choices=("toml", "json"), default="toml")
    return ap


def resolve_config(args):
    cfg = load_config(args.config)
    return apply_overrides(cfg, dt=args.dt, horizon=args.horizon, dt_riccati=args.dt_riccati,
                           seed=args.seed, out=args.out, sets=args.set)


def _trial_worker(payload):
    cfg_dict, name, gains_path = payload
    from .config import RunConfig
    cfg = RunConfig.from_dict(cfg_dict)
    rec = harness.run_trial(cfg, name, GainTable.load(gains_path))
    return name, rec


def cmd_plan(cfg, args):
    ref, res = harness.plan(cfg)
    out = Path(cfg.out) / "plan.csv"
    harness.write_csv(out, harness.plan_columns(ref, res))
    print(f"plan: {len(ref.t)} rows -> {out}; max residual {res.max():.3e}")
    return EXIT_OK if res.max() < harness.FLAT_TOL else EXIT_CHECK


def cmd_gains(cfg, args):
    table = harness.compute_gains(cfg)
    out = Path(cfg.out) / f"gains.{args.format}"
    out.parent.mkdir(parents=True, exist_ok=True)
    table.save(out)
    ev = min(np.linalg.eigvalsh(P)[0] for P in table.P[::max(1, len(table.t) // 50)])
    print(f"gains: {len(table.t)} samples over [0, {table.T:g}] s -> {out}; "
          f"min sampled eigenvalue {ev:.3e}, |K(0)| = {np.linalg.norm(table.K[0]):.3e}")
    return EXIT_OK


def cmd_simulate(cfg, args):
    names = sorted(cfg.trials) if args.trial == "all" else [args.trial]
    for name in names:
        if name not in cfg.trials:
            raise ConfigError(f"unknown trial {name!r}; configured: {sorted(cfg.trials)}")
    outdir = Path(cfg.out)
    if args.gains:
        gains_path = Path(args.gains)
        table = GainTable.load(gains_path)
        if abs(table.T - cfg.sim.T) > 1e-9:
            raise ConfigError(f"gain table horizon {table.T} differs from configured T = {cfg.sim.T}")
    else:
        table = harness.compute_gains(cfg)
        gains_path = outdir / "gains.npz"
        outdir.mkdir(parents=True, exist_ok=True)
        table.save(gains_path)
    if args.parallel and len(names) > 1:
        with ProcessPoolExecutor() as ex:
            results = list(ex.map(_trial_worker, [(cfg.to_dict(), n, str(gains_path)) for n in names]))
    else:
        results = [(n, harness.run_trial(cfg, n, table)) for n in names]
    code = EXIT_OK
    for name, rec in results:
        harness.save_record(rec, outdir, name)
        s = rec.summary
        if s["diverged"]:
            print(f"trial {name}: DIVERGED at t = {s['time']:.3f} s")
            code = EXIT_NUMERIC
            continue
        ok = s["convergence_time_dxn"] is not None and s["convergence_time_psi"] is not None
        print(f"trial {name}: final |dxn| {s['final']['dxn']:.3e} m, psi_R {s['final']['psi_R']:.3e}, "
              f"converged(dxn) at {s['convergence_time_dxn']}, converged(psi) at "
              f"{s['convergence_time_psi']}, wall {s['wall_time_s']:.1f} s")
        if not ok and code == EXIT_OK:
            code = EXIT_CHECK
    return code


def cmd_lincheck(cfg, args):
    rep = harness.lincheck(cfg, count=args.count, tol=args.tol)
    for r in rep["rows"]:
        print(f"t = {r['t']:8.4f}  max block error A {r['A_max']:.2e}  B {r['B_max']:.2e}")
    print(f"max relative block error {rep['max']:.3e} (tolerance {rep['tolerance']:.0e})")
    for k, v in rep["breaches"].items():
        print(f"  breach {k}: {v:.3e}")
    harness.write_json(Path(cfg.out) / "lincheck.json", rep)
    return EXIT_OK if rep["ok"] else EXIT_CHECK


def cmd_flatcheck(cfg, args):
    rep = harness.flatcheck(cfg, samples=args.samples, tol=args.tol)
    print(f"flatcheck: {rep['samples']} samples, max residual {rep['max']:.3e} at t = {rep['worst_t']:.3f} s, "
          f"min tension {rep['min_tension']:.3f} N")
    for t in rep["breach_times"][:20]:
        print(f"  breach at t = {t:.4f}")
    harness.write_json(Path(cfg.out) / "flatcheck.json", rep)
    return EXIT_OK if rep["ok"] else EXIT_CHECK


def cmd_multi_plan(cfg, args):
    ref, cols, rep = harness.multi_plan(cfg)
    outdir = Path(cfg.out)
    harness.write_csv(outdir / "multi_plan.csv", cols)
    harness.write_json(outdir / "multi_plan.json", rep)
    for k, v in rep["residuals"].items():
        print(f"{k:>20s}: {v:.3e}")
    if "wrench_error" in rep:
        print(f"{'wrench_error':>20s}: {rep['wrench_error']:.3e}")
    print(f"min tension {rep['min_tension']:.3f} N")
    return EXIT_OK if rep["ok"] else EXIT_CHECK


def cmd_config(cfg, args):
    print(dumps(cfg, args.format))
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "gains": cmd_gains, "simulate": cmd_simulate, "lincheck": cmd_lincheck,
            "flatcheck": cmd_flatcheck, "multi-plan": cmd_multi_plan, "config": cmd_config}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.cmd != "config":
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            save_config(cfg, Path(cfg.out) / "config_used.toml")
        return COMMANDS[args.cmd](cfg, args)
    except (FlatnessSingularity, RiccatiBlowup, GeometryError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
