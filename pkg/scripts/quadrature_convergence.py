"""Exact cylinder quadrature against Monte Carlo for the germ's L^q norm.

Prints the depth-m quadrature values with successive differences, then
chaos-game estimates with standard errors for increasing sample counts.

Usage: python3 scripts/quadrature_convergence.py [--q 2] [--seed 0] [--skewed]
"""

import argparse
import sys

import numpy as np

from fractal_lq.config import PAPER_GERM, RunConfig
from fractal_lq.funcstore import as_callable
from fractal_lq.measure import ChaosGameSampler, ProbabilityVector, exact_lq_integral, mc_lq_integral


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skewed", action="store_true", help="p proportional to 1..16 instead of uniform")
    args = ap.parse_args(argv)
    net = RunConfig().build_net()
    p = (ProbabilityVector.normalized(net, np.arange(1, 17, dtype=float)) if args.skewed
         else ProbabilityVector.uniform(net))
    f = as_callable(PAPER_GERM, 2)
    prev = None
    print(f"{'depth':>5} {'integral':>18} {'change':>10}")
    for m in range(1, 6):
        v = exact_lq_integral(f, args.q, p, m)
        print(f"{m:>5} {v:>18.12f} {'' if prev is None else f'{abs(v - prev):.2e}':>10}")
        prev = v
    print(f"{'N':>8} {'estimate':>12} {'SE':>10} {'z vs depth 5':>12}")
    for n in (10**3, 10**4, 10**5, 10**6):
        est, se = mc_lq_integral(f, args.q, ChaosGameSampler(net, p, args.seed), n)
        print(f"{n:>8} {est:>12.8f} {se:>10.2e} {abs(est - prev) / se:>12.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
