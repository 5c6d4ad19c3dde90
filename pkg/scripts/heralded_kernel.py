"""Estimate heralded-state kernels from two-mode squeezed vacuum and compare with exact values."""

import argparse

from qkpse import estimator, gaussian, oracle

ap = argparse.ArgumentParser()
ap.add_argument("--lam", type=float, default=0.3)
ap.add_argument("--max-herald", type=int, default=2)
ap.add_argument("--epsilon", type=float, default=0.1)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

d = args.max_herald + 8
g = gaussian.two_mode_squeezed(args.lam)
for n in range(args.max_herald + 1):
    for k in range(args.max_herald + 1):
        P = oracle.projector(oracle.fock_ket(n, d))
        Q = oracle.projector(oracle.fock_ket(k, d))
        rep = estimator.algorithm2_kernel(g, g, [P], [Q], args.epsilon, 0.05, args.seed)
        print(f"|{n}> vs |{k}>: estimate {rep.value:+.4f} (bound {rep.error_bound:.3f}), exact {float(n == k):.1f}")
