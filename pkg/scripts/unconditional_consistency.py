"""Ensemble-averaged filters against the Lindblad solution.

For each reflectivity the trace distance between the averaged conditional
state and an RK4 solution of the master equation is printed next to the
5/sqrt(M) statistical bound.

    python3 scripts/unconditional_consistency.py --n-traj 2000
"""

import argparse

import numpy as np

from qtraj.ensemble import SimulationConfig, lindblad_reference, run_ensemble
from qtraj.filters import trace_distance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-traj", type=int, default=1000)
    ap.add_argument("--r2", type=float, nargs="+", default=[0.0, 0.5, 1.0])
    ap.add_argument("--kinds", nargs="+", default=["corrected", "sme"])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()

    times = (0.5, 1.0, 2.0)
    bound = 5 / np.sqrt(args.n_traj)
    print(f"bound 5/sqrt(M) = {bound:.4f}")
    for r2 in args.r2:
        for kind in args.kinds:
            cfg = SimulationConfig(r2=r2, n_traj=args.n_traj, t_final=2.0, seed=args.seed, filter_kind=kind)
            ref = lindblad_reference(cfg, times)
            s = run_ensemble(cfg, threads=args.threads)
            d = [trace_distance(s.mean_state[s.index_of(t)], rho) for t, rho in zip(times, ref)]
            print(f"r2={r2:<4} {kind:<10} " + " ".join(f"t={t}: {x:.4f}" for t, x in zip(times, d)))


if __name__ == "__main__":
    main()
