"""Partial-sum errors of the germ in the fractal Haar system.

Prints N -> ||g - sum_{n<=N} b_n F(h_n)||_2 for several scaling factors next to
the Haar truncation error of F^-1(g) and the operator-norm bound.

Usage: python3 scripts/schauder_table.py [--depth 4] [--alphas 0,0.1,0.3,0.45]
"""

import argparse
import sys

from fractal_lq import analysis as an
from fractal_lq.config import PAPER_GERM, RunConfig
from fractal_lq.funcstore import as_callable


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--depth", type=int, default=4, help="Haar depth D")
    ap.add_argument("--alphas", default="0,0.1,0.3,0.45")
    ap.add_argument("--identity", action="store_true", help="use L = Id instead of the multiplier")
    args = ap.parse_args(argv)
    rc = RunConfig(base="identity") if args.identity else RunConfig()
    base = rc.fractal_config()
    g = as_callable(PAPER_GERM, 2)
    status = 0
    for a in (float(v) for v in args.alphas.split(",")):
        cfg = base.with_alpha(a)
        try:
            table = an.schauder_experiment(g, cfg, depth=args.depth)
        except ValueError as err:
            print(f"alpha={a:g}: skipped ({err})")
            continue
        ok = table.errors[-1] <= table.norm_bound * table.truncation_error + 1e-6
        status |= 0 if ok else 1
        print(f"alpha={a:g}  truncation {table.truncation_error:.6e}  bound factor {table.norm_bound:.4f}"
              f"  {'ok' if ok else 'VIOLATED'}")
        for row in table.rows():
            print("   ", row)
    return status


if __name__ == "__main__":
    sys.exit(main())
