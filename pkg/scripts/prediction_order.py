"""Nonlinear vs linearized error propagation for shrinking initial errors.

The deviation should scale quadratically: halving eps divides it by ~4.
"""

import argparse

import numpy as np

from cablequad import harness
from cablequad.config import load_config
from cablequad.dynamics import ControlInput, step
from cablequad.flatness import flat_single
from cablequad.linearize import build_lin, error_coords, perturbed_state, propagate_linear, state_dim


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--t0", type=float, default=2.0)
    ap.add_argument("--span", type=float, default=0.5)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--eps", type=float, nargs="*", default=[4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4])
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    cfg = load_config(args.config)
    qp, cp, fo = harness.single_system(cfg)
    dt, h = args.dt, args.dt / 2
    th = args.t0 + harness.time_grid(args.span, h)
    ref = flat_single(fo, qp, cp, th)
    lins = [build_lin(ref[k], qp, cp) for k in range(len(th))]
    idx = lambda t: int(round((t - args.t0) / h))  # noqa: E731

    d = np.random.default_rng(args.seed).normal(size=state_dim(cp.n))
    C = lins[0].C
    d -= np.linalg.pinv(C) @ (C @ d)
    d /= np.linalg.norm(d)
    prev = None
    for eps in args.eps:
        s = perturbed_state(ref[0], eps * d)
        for k in range(int(round(args.span / dt))):
            s = step(s, lambda t: ControlInput(ref.f[idx(t)], ref.M[idx(t)]), dt, qp, cp, t=args.t0 + k * dt)
        _, S = propagate_linear(lambda t: lins[idx(t)].A, eps * d, args.t0, args.span, dt)
        dev = np.linalg.norm(error_coords(s, ref[-1]) - S[-1])
        ratio = "" if prev is None else f"{prev / dev:8.3f}"
        print(f"eps {eps:8.1e}  deviation {dev:10.3e}  {ratio}")
        prev = dev


if __name__ == "__main__":
    main()
