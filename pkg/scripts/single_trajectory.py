"""Photon number along single trajectories of a decaying cavity.

One trajectory each at r2 = 0 (pure homodyne), the chosen mixed value and
r2 = 1 (pure counting), all from the same Fock state.  Writes a CSV with the
three <N>(t) curves and the analytic mean, and prints the jump counts.

    python3 scripts/single_trajectory.py --r2 0.5 -o single_trajectory.csv
"""

import argparse
import csv
from dataclasses import replace

from qtraj.ensemble import SimulationConfig, analytic_mean_number, run_trajectory


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n0", type=int, default=5)
    ap.add_argument("--r2", type=float, default=0.5)
    ap.add_argument("--t-final", type=float, default=5.0)
    ap.add_argument("--index", type=int, default=0, help="trajectory index within the seed")
    ap.add_argument("--seed", type=int, default=20240917)
    ap.add_argument("-o", "--output", default="single_trajectory.csv")
    args = ap.parse_args()

    base = SimulationConfig(n0=args.n0, t_final=args.t_final, seed=args.seed, n_traj=1)
    curves = {}
    for r2 in (0.0, args.r2, 1.0):
        rec = run_trajectory(replace(base, r2=r2), args.index)
        curves[r2] = rec
        print(f"r2={r2:<5} jumps={rec.n_jumps:<3} final <N>={rec.expectations['N'][-1]:.4f}")

    times = curves[0.0].times
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"N_r2={r2}" for r2 in curves] + ["analytic_N"])
        for i, t in enumerate(times):
            row = [float(t)] + [float(rec.expectations["N"][i]) for rec in curves.values()]
            w.writerow(row + [analytic_mean_number(args.n0, base.gamma, float(t))])
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
