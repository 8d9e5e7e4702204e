#!/usr/bin/env python3
"""Check the closed-form cone norm against the brute-force oracle on a few fixed problems.

The L2 -> L1 identity row sits outside the exactness range (p > q) and is
expected to FAIL: the oracle beats the extremal reduction there.
"""

import argparse

import numpy as np

from conenorm import (ConeSpec, ExpDensity, GridConfig, HardyProblem, Identity, Kernel,
                      OracleConfig, PowerDensity, brute_norm, compare, lebesgue, restriction_norm)
from conenorm.cone import Variant
from conenorm.normcalc import NormProblem
from conenorm.oracle import truncation_drift

PROBLEMS = {
    "identity L1 -> L2(t)": NormProblem(Identity(), ConeSpec(variant=Variant.OMEGA_DOT), 1, lebesgue(), 2,
                                        PowerDensity(1.0)),
    "identity L2 -> L1(e^-t)": NormProblem(Identity(), ConeSpec(), 2, lebesgue(), 1, ExpDensity(1.0)),
    "hardy p=q=r=1.5, e^-t": HardyProblem(1.5, 1.5, 1.5, ExpDensity(1.0)).as_norm_problem(),
    "kernel exp(-|x-t|)": NormProblem(Kernel(1.0, lebesgue(), lambda x, t: np.exp(-np.abs(x - t)), cells=128),
                                      ConeSpec(), 1, PowerDensity(-0.2), 1.5, ExpDensity(1.0)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--drift", action="store_true", help="also measure truncation drift (slower)")
    args = ap.parse_args()
    grid = GridConfig()
    cfg = OracleConfig(samples=args.samples, seed=args.seed, extremal_points=512)
    print(f"{'problem':28s} {'closed':>14s} {'oracle':>14s} {'ratio':>10s}  verdict")
    for name, prob in PROBLEMS.items():
        closed = restriction_norm(prob, grid)
        oracle = brute_norm(prob, cfg, grid)
        drift = truncation_drift(prob, cfg, grid) if args.drift else None
        v = compare(closed, oracle, drift=drift)
        print(f"{name:28s} {closed.value:14.10f} {oracle.best_ratio:14.10f} {v.ratio:10.6f}  {v.status}"
              + (f"  ({'; '.join(v.notes)})" if v.notes else ""))


if __name__ == "__main__":
    main()
