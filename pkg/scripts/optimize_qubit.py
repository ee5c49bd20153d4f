"""Minimize the operational bound for a qubit and print the best-so-far trace as CSV."""

import argparse
import sys

from opwork.operators import SIGMA_X, SIGMA_Z
from opwork.optimize import OptimizationConfig, minimize_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", type=float, default=1.0)
    ap.add_argument("--restarts", type=int, default=8)
    ap.add_argument("--outcomes", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--transverse", type=float, default=0.0, help="add this much sigma_x to the final Hamiltonian")
    ap.add_argument("--every", type=int, default=100, help="print every n-th trace point")
    args = ap.parse_args()

    cfg = OptimizationConfig(restarts=args.restarts, povm_outcomes=args.outcomes, seed=args.seed, jobs=args.jobs)
    res = minimize_bound(SIGMA_Z, 2 * SIGMA_Z + args.transverse * SIGMA_X, args.beta, cfg)
    print("evaluation,best_delta_F_tilde")
    for k in range(0, len(res.trace), args.every):
        print(f"{k},{res.trace[k]!r}")
    print(f"# delta_F {res.delta_F!r}  best {res.delta_F_tilde!r}  gap {res.certificate_gap:.3e}"
          f"  restart {res.best_restart}  converged {res.converged}", file=sys.stderr)


if __name__ == "__main__":
    main()
