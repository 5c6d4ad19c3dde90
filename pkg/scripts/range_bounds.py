"""Tabulate the estimator range bound for lossy single photons over (eta, s, m)."""

import argparse

import numpy as np

from qkpse.sources import InputStateSpec, LonEncoding, lon_range_bound, optimize_ordering

ap = argparse.ArgumentParser()
ap.add_argument("--modes", type=int, default=4)
ap.add_argument("--etas", type=float, nargs="+", default=[0.5, 0.7, 0.85, 0.95])
args = ap.parse_args()

print(f"{'eta':>5} {'s*':>6} " + " ".join(f"{'m=' + str(m):>10}" for m in range(1, args.modes + 1)))
for eta in args.etas:
    spec = InputStateSpec("single_photon", eta=eta)
    s_best, _ = optimize_ordering(LonEncoding([spec], np.eye(1)))
    row = [lon_range_bound(LonEncoding([spec] * m, np.eye(m)), s_best) for m in range(1, args.modes + 1)]
    print(f"{eta:5.2f} {s_best:6.3f} " + " ".join(f"{r:10.4g}" for r in row))
