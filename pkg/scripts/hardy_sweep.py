#!/usr/bin/env python3
"""Sweep p for a fixed Hardy problem; print J, E, F, the bound shape B and an oracle estimate as CSV."""

import argparse
import csv
import sys
import warnings

import numpy as np

from conenorm import ExpDensity, HardyProblem, OracleConfig, PowerDensity, brute_norm, hardy_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--q", type=float, default=1.0)
    ap.add_argument("--r", type=float, default=2.0)
    ap.add_argument("--p-min", type=float, default=1.0)
    ap.add_argument("--p-max", type=float, default=3.0)
    ap.add_argument("--steps", type=int, default=11)
    ap.add_argument("--samples", type=int, default=300)
    args = ap.parse_args()
    # infinite norms overflow intermediate sums; the results already carry inf
    warnings.simplefilter("ignore", RuntimeWarning)
    cfg = OracleConfig(samples=args.samples, hill_climb_steps=100, extremal_points=512)
    out = csv.writer(sys.stdout)
    out.writerow(["p", "q", "r", "regime", "J", "E", "F", "B", "oracle", "oracle_over_B"])
    for p in np.linspace(args.p_min, args.p_max, args.steps):
        prob = HardyProblem(float(p), args.q, args.r, ExpDensity(1.0), mu=PowerDensity(1.0))
        b = hardy_bounds(prob)
        oracle = brute_norm(prob.as_norm_problem(), cfg).best_ratio
        e = "" if b.e is None else f"{float(b.e):.10g}"
        f = "" if b.f is None else f"{float(b.f):.10g}"
        out.writerow([f"{p:.4g}", args.q, args.r, b.regime, f"{b.lower:.10g}", e, f, f"{b.upper_shape:.10g}",
                      f"{oracle:.10g}", f"{oracle / b.upper_shape:.6g}"])


if __name__ == "__main__":
    main()
