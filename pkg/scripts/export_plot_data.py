"""Collect trial CSVs into compact plot-ready tables (decimated).

Reads trial_<name>.csv from a run directory and writes
plot_<name>.csv with time, load error, attitude and last-link errors, inputs.
"""

import argparse
from pathlib import Path

from cablequad import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("rundir")
    ap.add_argument("--every", type=int, default=10, help="keep every k-th row")
    args = ap.parse_args()

    rundir = Path(args.rundir)
    for path in sorted(rundir.glob("trial_*.csv")):
        cols = harness.read_csv(path)
        n = max(int(k[5:]) for k in cols if k.startswith("psi_q"))
        keep = ["t", "dxn", "psi_R", f"psi_q{n}", "f", "M_0", "M_1", "M_2"]
        out = rundir / path.name.replace("trial_", "plot_")
        harness.write_csv(out, {k: cols[k][::args.every] for k in keep})
        print(f"{path.name} -> {out.name} ({len(cols['t'][::args.every])} rows)")


if __name__ == "__main__":
    main()
