"""Analytic linearization against finite differences over a range of FD steps.

Prints the worst relative block error per step size. Central differences
trade truncation against round-off, so small steps lose digits.
"""

import argparse

import numpy as np

from cablequad import harness
from cablequad.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--count", type=int, default=5)
    ap.add_argument("--steps", type=float, nargs="*", default=[1e-4, 3e-5, 1e-5, 3e-6, 1e-6, 1e-7])
    args = ap.parse_args()

    cfg = load_config(args.config)
    times = np.sort(np.random.default_rng(cfg.seed).uniform(0.0, cfg.sim.T, args.count))
    print(f"{'h':>8s} {'max rel err':>12s}")
    for h in args.steps:
        rep = harness.lincheck(cfg, times=times, h=h)
        print(f"{h:8.0e} {rep['max']:12.3e}")


if __name__ == "__main__":
    main()
