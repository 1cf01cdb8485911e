"""Run the configured closed-loop trials and write CSV/JSON records.

Example: python3 scripts/run_trials.py --out runs/trials --trials II III
"""

import argparse
from pathlib import Path

from cablequad import harness
from cablequad.config import apply_overrides, load_config
from cablequad.control import GainTable


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="runs/trials")
    ap.add_argument("--trials", nargs="*", help="trial names (default: all configured)")
    ap.add_argument("--gains", help="reuse a saved gain table")
    ap.add_argument("--dt", type=float)
    ap.add_argument("--horizon", type=float)
    args = ap.parse_args()

    cfg = apply_overrides(load_config(args.config), dt=args.dt, horizon=args.horizon, out=args.out)
    out = Path(cfg.out)
    table = GainTable.load(args.gains) if args.gains else harness.compute_gains(cfg)
    if not args.gains:
        out.mkdir(parents=True, exist_ok=True)
        table.save(out / "gains.npz")
    for name in args.trials or sorted(cfg.trials):
        rec = harness.run_trial(cfg, name, table)
        harness.save_record(rec, out, name)
        s = rec.summary
        if s["diverged"]:
            print(f"{name}: diverged at t = {s['time']:.3f}")
            continue
        print(f"{name}: final |dxn| {s['final']['dxn']:.2e} m, max {s['max']['dxn']:.2e} m, "
              f"converged {s['convergence_time_dxn']} / {s['convergence_time_psi']} s, "
              f"wall {s['wall_time_s']:.1f} s")


if __name__ == "__main__":
    main()
