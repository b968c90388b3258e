"""Convergence order of the linear SSE against the normalized SSE.

Prints the expected one-step gap (weak, exact quadrature over the increments)
and the pathwise gap with dW = +-sqrt(dt), with their fitted log-log slopes.

    python3 scripts/weak_order.py
"""

import argparse

import numpy as np

from qtraj import filters
from qtraj import hilbert as h


def pathwise_gap(psi, setup, dt):
    worst = 0.0
    for dW in (np.sqrt(dt), -np.sqrt(dt)):
        a, _ = filters.sse_step(psi, setup, dt, dW=dW, dN=0)
        b = filters.sse_step_corrected_unnormalized(psi, setup, dt, dW=dW, dN=0)
        b = b / np.linalg.norm(b)
        worst = max(worst, np.max(np.abs(np.outer(a, a.conj()) - np.outer(b, b.conj()))))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=8)
    ap.add_argument("--r2", type=float, default=0.5)
    ap.add_argument("--theta", type=float, default=0.0)
    ap.add_argument("--states", type=int, default=6)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    setup = filters.cavity_setup(args.dim, 1.0, args.r2, args.theta)
    states = [h.fock_state(args.dim, min(5, args.dim - 1))]
    for _ in range(args.states - 1):
        psi = np.zeros(args.dim, dtype=complex)
        psi[: args.dim - 2] = rng.normal(size=args.dim - 2) + 1j * rng.normal(size=args.dim - 2)
        states.append(psi / np.linalg.norm(psi))

    dts = np.array([1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    weak = np.array([max(filters.paired_step_deviation(p, setup, dt) for p in states) for dt in dts])
    path = np.array([max(pathwise_gap(p, setup, dt) for p in states) for dt in dts])
    print(f"{'dt':>8} {'weak gap':>10} {'pathwise gap':>13}")
    for dt, a, b in zip(dts, weak, path):
        print(f"{dt:8.0e} {a:10.3e} {b:13.3e}")
    print(f"slopes: weak {np.polyfit(np.log(dts), np.log(weak), 1)[0]:.3f}, "
          f"pathwise {np.polyfit(np.log(dts), np.log(path), 1)[0]:.3f}")


if __name__ == "__main__":
    main()
