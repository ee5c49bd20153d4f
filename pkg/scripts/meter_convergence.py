"""Meter scan on the standard qubit-meter scenario: error and variance against dt."""

import argparse
import csv
import sys

from opwork.meter import convergence_scan, loglog_slope, standard_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    ap.add_argument("--shots", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rho0, joint, mp = standard_scenario()
    rows = convergence_scan(rho0, joint, mp, args.steps, shots=args.shots, seed=args.seed)
    w = csv.writer(sys.stdout)
    w.writerow(["steps", "dt", "error", "variance", "predicted_variance"])
    for r in rows:
        w.writerow([r.steps, r.dt, r.error, r.variance, r.predicted_variance])
    dts = [r.dt for r in rows]
    print(f"# error slope {loglog_slope(dts, [r.error for r in rows]):.3f}", file=sys.stderr)
    print(f"# variance slope {loglog_slope(dts, [r.variance for r in rows]):.3f}", file=sys.stderr)


if __name__ == "__main__":
    main()
