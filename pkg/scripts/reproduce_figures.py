"""Render the four example surfaces and print their roughness.

Usage: python3 scripts/reproduce_figures.py [--out DIR] [--size 257]
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from fractal_lq.cli import cmd_render
from fractal_lq.config import RunConfig


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    ap.add_argument("--size", type=int, default=257, help="image side; size - 1 must be divisible by 4")
    ap.add_argument("--config", help="run configuration (defaults: the worked example)")
    args = ap.parse_args(argv)
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    rc = replace(rc, render_size=args.size)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    code = cmd_render(rc, out)
    if code == 0:
        meta = json.loads((out / "render.json").read_text())
        print(f"{'alpha':>6} {'min':>10} {'max':>10} {'roughness':>10} {'sweeps':>6}")
        for im in meta["images"]:
            g = im["gray"]
            print(f"{im['alpha']:>6g} {g['min']:>10.5f} {g['max']:>10.5f} {im['roughness']:>10.5f} {im['iterations']:>6d}")
    return code


if __name__ == "__main__":
    sys.exit(main())
