"""Command-line front end: ``fractal-lq fif|render|verify|measure``.

Exit codes: 0 success (skipped checks count as success), 1 failed check or
non-convergence, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis as an
from .config import ConfigError, RunConfig
from .expr import ExprError
from .funcstore import FunctionError, as_callable, save_csv
from .measure import (
    ChaosGameSampler,
    MeasureError,
    cylinder_masses,
    exact_lq_integral,
    invariance_residual,
    mc_lq_integral,
    worker_count,
)
from .net import NetError
from .rb import FixedPointError, fractal_operator

USER_ERRORS = (ConfigError, ExprError, NetError, FunctionError, MeasureError)


class UsageError(ValueError):
    pass


# output formats


def gray_levels(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Linear map of ``[min, max]`` onto ``0..255`` (a flat surface maps to 0)."""
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        g = np.rint((values - lo) * (255.0 / (hi - lo)))
    else:
        g = np.zeros_like(values)
    return np.clip(g, 0, 255).astype(np.uint8), lo, hi


def image_rows(values: np.ndarray) -> np.ndarray:
    """Grid values ``v[i, j]`` (x along axis 0) as image rows: top row is max y."""
    return values.T[::-1]


def write_pgm(path, values: np.ndarray) -> dict:
    """8-bit binary PGM (P5) heightmap of a 2-D grid; returns the gray mapping."""
    gray, lo, hi = gray_levels(image_rows(values))
    height, width = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(gray).tobytes())
    return {"min": lo, "max": hi, "width": width, "height": height,
            "orientation": "row 0 = max y, column 0 = min x"}


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    return np.frombuffer(parts[4][: width * height], dtype=np.uint8).reshape(height, width)


def write_json(path, record: dict) -> None:
    Path(path).write_text(json.dumps(an._jsonable(record), indent=2, sort_keys=True) + "\n")


# commands


def cmd_fif(rc: RunConfig, out: Path) -> int:
    cfg = rc.fractal_config()
    try:
        res = fractal_operator(cfg.germ, cfg)
    except FixedPointError as err:
        print(f"fif: {err}", file=sys.stderr)
        write_json(out / "fif.json", {
            "converged": False, "iterations": err.iterations,
            "displacement": err.displacement, "residual": err.residual,
            "config_hash": rc.digest(),
        })
        return 1
    save_csv(res.h, out / "fif.csv")
    meta = {
        "converged": True,
        **res.as_dict(),
        "alpha": rc.scaling,
        "a": cfg.a,
        "q": cfg.q,
        "s": cfg.s,
        "quadrature": cfg.quadrature.describe(),
        "config_hash": rc.digest(),
        "net_hash": cfg.net.digest(),
        "roughness": an.roughness_report(res.h),
    }
    if cfg.net.dim == 2:
        meta["image"] = write_pgm(out / "fif.pgm", res.h.values)
    write_json(out / "fif.json", meta)
    print(f"fif: {res.iterations} sweeps, residual {res.residual:.3g} -> {out / 'fif.csv'}")
    return 0


def render_subdivisions(rc: RunConfig, net) -> int:
    size = rc.render_size
    counts = set(net.counts)
    if len(counts) != 1 or (size - 1) % counts.pop():
        raise ConfigError(f"render size {size} needs the same cell count on both axes dividing {size - 1}")
    return (size - 1) // net.counts[0]


def cmd_render(rc: RunConfig, out: Path) -> int:
    net = rc.build_net()
    if net.dim != 2:
        raise ConfigError("render needs a 2-D net")
    s = render_subdivisions(rc, net)
    base = rc.fractal_config(alpha=repr(rc.render_alphas[0]), s=s)
    images = []
    for alpha in rc.render_alphas:
        cfg = base.with_alpha(repr(float(alpha)))
        try:
            res = fractal_operator(base.germ, cfg)
        except FixedPointError as err:
            print(f"render: alpha={alpha}: {err}", file=sys.stderr)
            return 1
        name = f"fis_alpha_{alpha:g}.pgm"
        gray = write_pgm(out / name, res.h.values)
        images.append({
            "file": name, "alpha": float(alpha), "gray": gray,
            "roughness": an.roughness_report(res.h), **res.as_dict(),
        })
    write_json(out / "render.json", {
        "images": images, "s": s, "config_hash": rc.digest(), "net_hash": net.digest(),
        "normalization": "per image: [min, max] -> [0, 255]",
    })
    for im in images:
        print(f"render: {im['file']}  roughness {im['roughness']:.6g}")
    return 0


# verify suites: name -> callable(cfg, rc) -> list of checks


def _suite_measure(cfg, rc):
    p = cfg.p
    _, masses = cylinder_masses(p, cfg.depth)
    total = math.fsum(masses)
    x = lambda pts: pts[:, 0]  # noqa: E731
    res = [invariance_residual(x, p, d) for d in range(1, cfg.depth + 1)]
    return [
        an.BoundCheck("measure.mass_total", abs(total - 1.0), 1e-10, rel=0.0, abs=0.0),
        an.BoundCheck("measure.invariance_x", res[-1], res[0], rel=0.0, abs=1e-12,
                      details={"residuals": res}),
    ]


def _suite_residuals(cfg, rc):
    return an.check_residuals(cfg, germ_spec=rc.germ_spec(cfg.net))


def _suite_schauder(cfg, rc):
    return an.check_schauder(as_callable(rc.germ, cfg.net.dim), cfg, depth=rc.depth)


SUITES = {
    "measure": _suite_measure,
    "perturbation": lambda cfg, rc: [an.check_perturbation(cfg)],
    "contraction": lambda cfg, rc: [an.check_contraction(cfg, seed=rc.seed)],
    "operator_norm": lambda cfg, rc: [an.estimate_operator_norm(cfg, rc.trials, rc.seed)],
    "lower_bound": lambda cfg, rc: [an.check_lower_bound(cfg, seed=rc.seed)],
    "inverse": lambda cfg, rc: an.check_inverse(cfg, seed=rc.seed),
    "fixed_points": lambda cfg, rc: an.check_fixed_points(cfg, seed=rc.seed),
    "norm_floor": lambda cfg, rc: [an.check_norm_floor(cfg, seed=rc.seed)],
    "convexity": lambda cfg, rc: [an.check_convexity(cfg, seed=rc.seed)],
    "lipschitz": lambda cfg, rc: [an.check_relative_lipschitz(cfg, seed=rc.seed)],
    "residuals": _suite_residuals,
    "schauder": _suite_schauder,
}


def parse_suites(text: str | None) -> list[str]:
    if not text or text == "all":
        return list(SUITES)
    names = [n.strip() for n in text.split(",") if n.strip()]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {', '.join(unknown)}; choose from {', '.join(SUITES)}")
    return names


def run_suite(name: str, cfg, rc: RunConfig) -> list[an.BoundCheck]:
    """Run one suite; a failing suite is re-run at doubled ``s`` before it counts."""
    t = time.perf_counter()
    try:
        checks = SUITES[name](cfg, rc)
    except FixedPointError as err:
        checks = [an.BoundCheck(name, math.nan, math.nan, status=an.FAIL, reason=str(err))]
    if any(c.status == an.FAIL for c in checks):
        fine = rc.fractal_config(alpha=rc.scaling, s=2 * cfg.s)
        try:
            retry = SUITES[name](fine, replace(rc, s=2 * cfg.s))
        except FixedPointError as err:
            retry = [an.BoundCheck(name, math.nan, math.nan, status=an.FAIL, reason=str(err))]
        for c in retry:
            c.details = {**c.details, "rerun_s": fine.s}
        checks = retry
    for c in checks:
        c.seed = rc.seed if c.seed is None else c.seed
        c.runtime = c.runtime or (time.perf_counter() - t)
    return checks


def cmd_verify(rc: RunConfig, out: Path, suites: list[str]) -> int:
    cfg = rc.fractal_config()
    report = an.VerificationReport(config_hash=rc.digest(), quadrature=cfg.quadrature.describe())
    workers = min(worker_count(), len(suites))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(lambda n: run_suite(n, cfg, rc), suites))
    else:
        results = [run_suite(n, cfg, rc) for n in suites]
    for checks in results:
        report.add(checks)
    (out / "report.json").write_text(report.to_json() + "\n")
    table = report.table()
    (out / "report.txt").write_text(table + "\n")
    print(table)
    return report.exit_code


def cmd_measure(rc: RunConfig, out: Path, what: str, n: int | None) -> int:
    net = rc.build_net()
    p = rc.build_p(net)
    if what == "masses":
        addresses, masses = cylinder_masses(p, rc.depth)
        with open(out / "masses.csv", "w", newline="\n", encoding="utf-8") as fh:
            fh.write("address,mass\n")
            for addr, m in zip(addresses, masses):
                fh.write(".".join(str(j) for J in addr for j in J) + f",{m:.17g}\n")
        print(f"measure: {len(masses)} cylinder masses, total {math.fsum(masses):.17g}")
        return 0
    if what == "sample":
        count = n if n is not None else 1000
        pts = ChaosGameSampler(net, p, rc.seed).samples(count)
        with open(out / "samples.csv", "w", newline="\n", encoding="utf-8") as fh:
            fh.write(",".join(f"x_{k}" for k in range(1, net.dim + 1)) + "\n")
            for x in pts:
                fh.write(",".join(f"{c:.17g}" for c in x) + "\n")
        print(f"measure: {count} chaos-game samples (seed {rc.seed})")
        return 0
    # norm
    f = rc.build_germ(net) if rc.germ.strip() == "nodes" else as_callable(rc.germ, net.dim)
    record = {"q": rc.q, "config_hash": rc.digest()}
    exact = exact_lq_integral(f, rc.q, p, rc.depth)
    record["exact"] = {"depth": rc.depth, "integral": exact, "norm": exact ** (1 / rc.q)}
    line = f"measure: exact(depth={rc.depth}) ||f||_q = {exact ** (1 / rc.q):.12g}"
    if rc.quadrature == "mc":
        est, se = mc_lq_integral(f, rc.q, ChaosGameSampler(net, p, rc.seed), rc.mc_n)
        z = abs(est - exact) / se if se > 0 else (0.0 if est == exact else math.inf)
        record["mc"] = {"n": rc.mc_n, "seed": rc.seed, "integral": est, "se": se,
                        "norm": est ** (1 / rc.q), "z_vs_exact": z}
        line += f"; mc(n={rc.mc_n}) integral {est:.8g} +- {se:.2g} ({z:.2f} SE from exact)"
    write_json(out / "norm.json", record)
    print(line)
    return 0


# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (defaults: the worked example)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--depth", type=int, help="quadrature depth m")
    common.add_argument("--mc", type=int, metavar="N", help="use N chaos-game samples")
    common.add_argument("--q", type=float, help="Lebesgue exponent q >= 1")
    common.add_argument("--alpha", metavar="EXPR", help="scaling function (constant or expression)")
    common.add_argument("--suite", metavar="NAMES", help="comma-separated verify suites (default all)")

    parser = argparse.ArgumentParser(
        prog="fractal-lq", description="Fractal interpolation functions on boxes and their L^q theory."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fif", parents=[common], help="compute f^alpha and write CSV, metadata and PGM")
    sub.add_parser("render", parents=[common], help="write the four example heightmaps")
    sub.add_parser("verify", parents=[common], help="run numerical checks and write a report")
    m = sub.add_parser("measure", parents=[common], help="invariant-measure utilities")
    m.add_argument("what", choices=("masses", "sample", "norm"))
    m.add_argument("-n", type=int, help="number of samples for 'sample'")
    return parser


def resolve_config(args) -> RunConfig:
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    if args.q is not None and args.q < 1:
        raise ConfigError("q must be >= 1")
    rc = rc.override(
        seed=args.seed, depth=args.depth, q=args.q, scaling=args.alpha, out=args.out,
    )
    if args.mc is not None:
        rc = replace(rc, quadrature="mc", mc_n=args.mc)
    if rc.depth < 1:
        raise ConfigError("depth must be >= 1")
    return rc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = resolve_config(args)
        suites = parse_suites(args.suite)
        out = Path(rc.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "fif":
            return cmd_fif(rc, out)
        if args.command == "render":
            return cmd_render(rc, out)
        if args.command == "verify":
            return cmd_verify(rc, out, suites)
        return cmd_measure(rc, out, args.what, args.n)
    except (UsageError, *USER_ERRORS) as err:
        print(f"fractal-lq: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"fractal-lq: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
