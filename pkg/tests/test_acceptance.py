"""Acceptance criteria on the worked example (germ, multiplier base, 5x5 knots).

Each test prints one ``[criterion N] PASS|FAIL`` line; the lines are repeated
in the pytest terminal summary.  Run directly with ``python3 tests/test_acceptance.py``.
"""

import json
import math

import numpy as np
import pytest

from fractal_lq import analysis as an
from fractal_lq import cli
from fractal_lq.config import PAPER_ALPHAS, PAPER_GERM, RunConfig
from fractal_lq.funcstore import BaseOperator, as_callable, discretize
from fractal_lq.measure import (
    ChaosGameSampler,
    ProbabilityVector,
    cylinder_masses,
    invariance_residual,
)
from fractal_lq.net import build_net, flat_cell_index, locate_cells
from fractal_lq.rb import apply_T_alpha, fractal_operator

RESULTS: list[str] = []
N_MC = 10**6


def report(n: int, title: str, ok: bool, detail: str = "") -> None:
    line = f"[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def rc():
    return RunConfig()


@pytest.fixture(scope="module")
def cfgs(rc):
    base = rc.fractal_config()
    return {a: base.with_alpha(a) for a in PAPER_ALPHAS}


def test_c01_measure_sanity(rc):
    net = rc.build_net()
    uniform = ProbabilityVector.uniform(net)
    skewed = ProbabilityVector.normalized(net, np.arange(1, 17, dtype=float))
    total = math.fsum(cylinder_masses(uniform, 4)[1])
    total_skew = math.fsum(cylinder_masses(skewed, 4)[1])
    worst = 0.0
    for seed, p in ((1, uniform), (2, skewed)):
        pts = ChaosGameSampler(net, p, seed).samples(N_MC)
        freq = np.bincount(flat_cell_index(net, locate_cells(net, pts)), minlength=16) / N_MC
        z = np.abs(freq - p.flat) / np.sqrt(p.flat * (1 - p.flat) / N_MC)
        worst = max(worst, float(z.max()))
    ok = abs(total - 1) <= 1e-10 and abs(total_skew - 1) <= 1e-10 and worst <= 3
    report(1, "measure sanity", ok,
           f"|sum-1| = {abs(total - 1):.1e}/{abs(total_skew - 1):.1e}, max |z| = {worst:.2f} <= 3")


def test_c02_hutchinson_invariance(rc):
    net = rc.build_net()
    p = ProbabilityVector.uniform(net)
    phis = {"1": lambda x: np.ones(len(x)), "x": lambda x: x[:, 0], "germ": as_callable(PAPER_GERM, 2)}
    res = {k: [invariance_residual(f, p, m) for m in (1, 2, 3, 4)] for k, f in phis.items()}
    nonincreasing = all(all(b <= a + 1e-15 for a, b in zip(r, r[1:])) for r in res.values())
    germ_strict = all(b < a for a, b in zip(res["germ"], res["germ"][1:]))
    small = build_net([[0, 0.5, 1], [0, 0.5, 1]])
    x6 = invariance_residual(lambda x: x[:, 0], ProbabilityVector.uniform(small), 6)
    ok = nonincreasing and germ_strict and max(res["x"]) < 1e-10 and x6 < 1e-10
    report(2, "Hutchinson invariance", ok,
           f"germ {['%.1e' % r for r in res['germ']]}, x max {max(res['x']):.1e}, x at m=6 {x6:.1e}")


def test_c03_identity_case(cfgs):
    cfg = cfgs[0.3].with_alpha(0.0)
    h = fractal_operator(cfg.germ, cfg).h
    err = cfg.norm(h - cfg.germ)
    ok = err == 0.0 and np.array_equal(h.values, cfg.germ.values)
    report(3, "alpha = 0 gives F(f) = f exactly", ok, f"||F(f)-f|| = {err}")


def test_c04_contraction(cfgs):
    checks = [an.check_contraction(cfgs[a], pairs=20, seed=0) for a in PAPER_ALPHAS]
    ok = all(c.measured <= c.bound + 0.01 for c in checks)
    report(4, "contraction ratio <= a + 0.01", ok,
           ", ".join(f"a={c.bound:g}: {c.measured:.4f}" for c in checks))


def test_c05_perturbation(cfgs):
    checks = [an.check_perturbation(cfgs[a]) for a in PAPER_ALPHAS]
    ok = all(c.measured <= c.bound * 1.01 + 1e-8 for c in checks)
    report(5, "perturbation bound", ok,
           ", ".join(f"{c.measured:.4f} <= {c.bound:.4f}" for c in checks))


def test_c06_operator_norm(cfgs):
    c = an.estimate_operator_norm(cfgs[0.3], trials=50, seed=0)
    ok = abs(c.bound - 1.4286) < 1e-4 and c.measured <= 1.4286 * 1.01
    report(6, "operator-norm bound at a = 0.3", ok, f"max ||F f|| = {c.measured:.4f} <= {c.bound:.4f}")


def test_c07_lower_bound_and_inverse(cfgs):
    lb = an.check_lower_bound(cfgs[0.3])
    rt, ratio = an.check_inverse(cfgs[0.3])
    factor_ok = abs(lb.details["factor"] - 3.25) < 1e-12
    skipped = all(
        c.status == an.SKIPPED
        for a in (0.7, 0.9)
        for c in [an.check_lower_bound(cfgs[a]), *an.check_inverse(cfgs[a])]
    )
    ok = factor_ok and lb.measured <= lb.bound * 1.01 and rt.measured <= 1e-6 and ratio.passed and skipped
    report(7, "lower bound and inverse", ok,
           f"||f|| {lb.measured:.4f} <= 3.25 ||f^a|| = {lb.bound:.4f}, roundtrip {rt.measured:.1e}, "
           f"a=0.7/0.9 skipped: {skipped}")


def test_c08_fixed_points_and_norm_floor(cfgs):
    ident = cfgs[0.9].with_base(BaseOperator.identity())
    err = ident.norm(fractal_operator(ident.germ, ident).h - ident.germ)
    floor = an.check_norm_floor(cfgs[0.9], trials=10, seed=0)
    ok = err < 1e-8 and floor.measured >= 1 - 1e-6
    report(8, "fixed points and norm floor with L = Id", ok,
           f"||f^a-f|| = {err:.1e}, norm estimate {floor.measured:.8f}")


def test_c09_convexity(cfgs):
    c = an.check_convexity(cfgs[0.3], trials=100, seed=0)
    ok = c.details["min_slack"] >= -1e-8
    report(9, "convexity of T(alpha)", ok, f"min slack {c.details['min_slack']:.3e} over 100 triples")


def test_c10_relative_lipschitz(cfgs):
    c = an.check_relative_lipschitz(cfgs[0.5], pairs=20, seed=0)
    ok = c.measured <= c.bound * 1.01
    report(10, "relative Lipschitz at a = 0.5", ok, f"worst {c.measured:.4f} <= {c.bound:.4f}")


def test_c11_residuals_and_nodes(cfgs):
    lines, ok = [], True
    for a in PAPER_ALPHAS:
        checks = an.check_residuals(cfgs[a], germ_spec=PAPER_GERM)
        ok = ok and all(c.passed for c in checks)
        lines.append(f"a={a:g}: res {max(c.measured for c in checks[:2]):.1e}, node {checks[2].measured:.1e}")
    report(11, "self-referential residual and knot interpolation", ok, "; ".join(lines))


def test_c12_schauder(cfgs):
    g = as_callable(PAPER_GERM, 2)
    table = an.schauder_experiment(g, cfgs[0.3], depth=4)
    final = table.errors[-1]
    ok = table.eventually_decreasing() and final <= 1.43 * table.truncation_error + 1e-6
    report(12, "Schauder partial sums", ok,
           f"errors {['%.4f' % e for e in table.errors]}, final {final:.4f} <= "
           f"1.43 x {table.truncation_error:.4f}")


def test_c13_render(tmp_path, rc):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = [cli.main(["render", "--out", str(a)]), cli.main(["render", "--out", str(b)])]
    meta = json.loads((a / "render.json").read_text())
    identical = all((a / p.name).read_bytes() == (b / p.name).read_bytes() for p in a.iterdir())
    germ = discretize(PAPER_GERM, rc.build_net(), 64)
    knots = np.arange(0, 257, 64)
    worst = 0
    for im in meta["images"]:
        img = cli.read_pgm(a / im["file"])
        lo, hi = im["gray"]["min"], im["gray"]["max"]
        expected = np.rint((cli.image_rows(germ.values) - lo) * 255 / (hi - lo))
        diff = np.abs(img.astype(int) - expected)[np.ix_(knots, knots)]
        worst = max(worst, int(diff.max()))
        assert img.shape == (257, 257)
    ok = codes == [0, 0] and len(meta["images"]) == 4 and identical and worst <= 1
    report(13, "figure reproduction", ok,
           f"4 x 257x257 PGM, byte-identical {identical}, knot gray error {worst}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
