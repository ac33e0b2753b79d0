import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fractal_lq.config import PAPER_GERM, PAPER_MULTIPLIER
from fractal_lq.funcstore import (
    BaseOperator,
    FunctionError,
    GridFunction,
    ScalingFunction,
    apply_base,
    as_callable,
    default_subdivisions,
    discretize,
    ess_sup,
    grid_axes,
    linear_combine,
    load_csv,
    save_csv,
)
from fractal_lq.measure import ChaosGameSampler, ProbabilityVector
from fractal_lq.net import build_net

GERM_11 = 2 * math.sin(1 / math.sqrt(3))


def test_default_subdivisions():
    assert default_subdivisions(2) == 16 and default_subdivisions(3) == 4


def test_grid_contains_knots(paper_net):
    for ax, part in zip(grid_axes(paper_net, 16), paper_net.partitions):
        assert len(ax) == 65
        assert set(part.knots) <= set(ax.tolist())


def test_discretize_germ(germ):
    assert germ.shape == (65, 65)
    assert germ.values[32, 32] == 0.0
    assert germ.values[-1, -1] == pytest.approx(GERM_11, rel=1e-15)
    assert germ((1.0, 1.0)) == pytest.approx(GERM_11, rel=1e-15)


def test_discretize_constant(paper_net):
    for s in (1, 3, 8):
        assert np.all(discretize("1", paper_net, s).values == 1.0)


def test_discretize_non_finite(paper_net):
    with pytest.raises(FunctionError):
        discretize("1/x", paper_net, 16)


def test_eval_at_nodes_is_exact(germ):
    nodes = germ.nodes()
    assert np.array_equal(germ(nodes), germ.values.ravel())


def test_eval_reproduces_bilinear(paper_net):
    f = discretize("x + 2*y + 3*x*y", paper_net, 4)
    pts = np.random.default_rng(0).uniform(-1, 1, size=(500, 2))
    np.testing.assert_allclose(f(pts), pts[:, 0] + 2 * pts[:, 1] + 3 * pts[:, 0] * pts[:, 1], atol=1e-12)


def test_eval_outside_domain(germ):
    with pytest.raises(FunctionError):
        germ((1.5, 0.0))


def test_grid_refinement_is_second_order(paper_net):
    p = np.array([0.25 + 1 / 64, 0.25 + 1 / 96])
    exact = as_callable(PAPER_GERM, 2)(p)
    errs = [abs(discretize(PAPER_GERM, paper_net, s)(p) - exact) for s in (16, 32, 64)]
    assert errs[1] < errs[0] and errs[2] < errs[1]
    d16_32 = abs(discretize(PAPER_GERM, paper_net, 16)(p) - discretize(PAPER_GERM, paper_net, 32)(p))
    richardson = 4 * abs(discretize(PAPER_GERM, paper_net, 32)(p) - discretize(PAPER_GERM, paper_net, 64)(p))
    assert d16_32 < 4 * richardson


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.integers(0, 63), st.floats(0, 1))
def test_linear_between_adjacent_nodes(x0, y, i, t):
    net = build_net([[-1, -0.5, 0, 0.5, 1]] * 2)
    f = discretize(PAPER_GERM, net, 16)
    ax = grid_axes(net, 16)[0]
    a, b = ax[i], ax[i + 1]
    pa, pb = f((a, y)), f((b, y))
    mid = f((a + t * (b - a), y))
    assert mid == pytest.approx(pa + t * (pb - pa), abs=1e-12)


def test_apply_base_examples(paper_net, paper_base, germ):
    assert np.array_equal(apply_base(BaseOperator.identity(), germ).values, germ.values)
    Lf = apply_base(paper_base, germ)
    assert Lf((1.0, 1.0)) == pytest.approx(GERM_11, rel=1e-15)
    f = discretize("1 + x + y", paper_net, 16)
    assert apply_base(paper_base, f)((0.5, 0.0)) == 0.0


def test_base_linearity(paper_base, germ, paper_net):
    g = discretize("cos(x*y)", paper_net, 16)
    lhs = paper_base.apply(linear_combine([2.0, -3.0], [germ, g])).values
    rhs = linear_combine([2.0, -3.0], [paper_base.apply(germ), paper_base.apply(g)]).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-14)


def test_corner_condition_enforced(paper_net, paper_base):
    corners = np.array(paper_net.corners())
    assert np.all(np.abs(paper_base.multiplier_at(corners) - 1) <= 1e-9)
    with pytest.raises(FunctionError):
        BaseOperator.multiply("1 + x*y", paper_net)


def test_ess_sup_examples(paper_net):
    sampler = ChaosGameSampler(paper_net, ProbabilityVector.uniform(paper_net), seed=0)
    assert ess_sup("0.3", paper_net) == pytest.approx(0.3)
    assert ess_sup(PAPER_MULTIPLIER, paper_net, 16, sampler, 1000) == 2.0
    assert ess_sup(f"1 - {PAPER_MULTIPLIER}", paper_net, 16, sampler, 1000) == 1.0


def test_base_estimates(paper_net, paper_base):
    assert paper_base.estimates(paper_net, 16) == (2.0, 1.0)
    assert BaseOperator.identity().estimates(paper_net, 16) == (1.0, 0.0)


def test_scaling_function(paper_net):
    a = ScalingFunction.build("0.3", paper_net, 16)
    assert a.constant == 0.3 and a.sup == 0.3
    b = ScalingFunction.build("0.5*sin(x*y)", paper_net, 16)
    assert 0 < b.sup <= 0.5 * math.sin(1) + 1e-15
    for bad in ("1.5", "-1", "1.2*cos(x)", "x/0"):
        with pytest.raises(FunctionError):
            ScalingFunction.build(bad, paper_net, 16)


def test_linear_combine_examples(germ, paper_net):
    assert np.all(linear_combine([1, -1], [germ, germ]).values == 0)
    np.testing.assert_array_equal(linear_combine([0.5, 0.5], [germ, germ]).values, germ.values)
    assert linear_combine([2.0], [germ])((1.0, 1.0)) == pytest.approx(2 * GERM_11, rel=1e-15)
    with pytest.raises(FunctionError):
        linear_combine([1, 1], [germ, discretize("1", paper_net, 8)])


def test_values_are_read_only(germ):
    with pytest.raises(ValueError):
        germ.values[0, 0] = 1.0


def test_csv_round_trip(tmp_path, germ):
    path = tmp_path / "germ.csv"
    save_csv(germ, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# net-hash=") and "dims=65x65" in lines[0] and "s=16" in lines[0]
    assert len(lines) == 1 + 4225
    back = load_csv(path)
    assert np.array_equal(back.values, germ.values)
    assert back.net == germ.net and back.s == 16
    assert b"\r" not in path.read_bytes()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False), min_size=25, max_size=25))
def test_csv_round_trip_bit_identical(tmp_path_factory, vals):
    net = build_net([[0, 1, 3], [-2, 0.5, 1]])
    gf = GridFunction(net, 2, vals)
    path = tmp_path_factory.mktemp("csv") / "f.csv"
    save_csv(gf, path)
    assert np.array_equal(load_csv(path, net).values, gf.values)


def test_csv_header_mismatch(tmp_path, germ, paper_net):
    path = tmp_path / "germ.csv"
    save_csv(germ, path)
    text = path.read_text().splitlines()
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join([text[0].replace("dims=65x65", "dims=64x65")] + text[1:]) + "\n")
    with pytest.raises(FunctionError):
        load_csv(bad)
    other = build_net([[-1, 0, 1], [-1, 0, 1]])
    with pytest.raises(FunctionError):
        load_csv(path, other)
    (tmp_path / "junk.csv").write_text("nope\n")
    with pytest.raises(FunctionError):
        load_csv(tmp_path / "junk.csv")
