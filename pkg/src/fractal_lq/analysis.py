"""Numerical checks of the bounds satisfied by the alpha-fractal operator.

Every check reduces to an inequality between two computed reals and is
recorded as a :class:`BoundCheck`.  Norms use exact cylinder quadrature
against the invariant measure unless stated otherwise.
"""

from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .funcstore import (
    BaseOperator,
    FunctionError,
    GridFunction,
    ScalingFunction,
    as_callable,
    discretize,
    grid_axes,
    grid_nodes,
)
from .rb import (
    FractalConfig,
    apply_T_alpha,
    fractal_operator,
    fractal_perturbation,
    inverse_fractal_operator,
    inverse_perturbation,
    self_residual,
)

REL_SLACK = 0.01
ABS_SLACK = 1e-8

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"


@dataclass
class BoundCheck:
    """``measured <= bound * (1 + rel) + abs`` (or ``>=`` with the slack reversed)."""

    name: str
    measured: float
    bound: float
    rel: float = REL_SLACK
    abs: float = ABS_SLACK
    direction: str = "<="
    status: str = ""
    reason: str = ""
    details: dict = field(default_factory=dict)
    seed: int | None = None
    runtime: float = 0.0
    config_hash: str = ""
    quadrature: str = ""

    def __post_init__(self):
        if not self.status:
            self.status = PASS if self.holds() else FAIL

    def holds(self) -> bool:
        if self.direction == "<=":
            return self.measured <= self.bound * (1 + self.rel) + self.abs
        return self.measured >= self.bound * (1 - self.rel) - self.abs

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @classmethod
    def skipped(cls, name: str, reason: str, **kw) -> "BoundCheck":
        return cls(name, math.nan, math.nan, status=SKIPPED, reason=reason, **kw)

    def line(self) -> str:
        if self.status == SKIPPED:
            return f"{self.name:<34} SKIPPED  {self.reason}"
        op = self.direction
        return (
            f"{self.name:<34} {self.status:<7}  {self.measured:.6g} {op} {self.bound:.6g}"
            f"  (rel {self.rel:g}, abs {self.abs:g})"
        )


@dataclass
class VerificationReport:
    checks: list[BoundCheck] = field(default_factory=list)
    config_hash: str = ""
    quadrature: str = ""

    def add(self, check: BoundCheck | Sequence[BoundCheck]):
        items = [check] if isinstance(check, BoundCheck) else list(check)
        for c in items:
            c.config_hash = c.config_hash or self.config_hash
            c.quadrature = c.quadrature or self.quadrature
            self.checks.append(c)

    @property
    def status(self) -> str:
        return FAIL if any(c.status == FAIL for c in self.checks) else PASS

    @property
    def exit_code(self) -> int:
        return 0 if self.status == PASS else 1

    def to_dict(self) -> dict:
        checks = sorted(self.checks, key=lambda c: c.name)
        return {
            "status": self.status,
            "config_hash": self.config_hash,
            "quadrature": self.quadrature,
            "checks": [_jsonable(asdict(c)) for c in checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        lines = [c.line() for c in sorted(self.checks, key=lambda c: c.name)]
        lines.append(f"overall: {self.status}")
        return "\n".join(lines)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _worst(name: str, pairs: Sequence[tuple[float, float]], rel=REL_SLACK, abs_=ABS_SLACK, **kw) -> BoundCheck:
    """Check ``lhs <= rhs`` for every pair and report the tightest one."""
    margins = [lhs - (rhs * (1 + rel) + abs_) for lhs, rhs in pairs]
    k = int(np.argmax(margins))
    details = kw.pop("details", {})
    details.setdefault("pairs", [list(p) for p in pairs])
    return BoundCheck(name, pairs[k][0], pairs[k][1], rel=rel, abs=abs_, details=details, **kw)


# random and analytic test functions


def smooth_noise(net, s: int, rng: np.random.Generator, passes: int = 2) -> GridFunction:
    """Uniform noise on the evaluation grid smoothed by ``[1, 2, 1] / 4`` passes."""
    shape = tuple(len(a) for a in grid_axes(net, s))
    v = rng.uniform(-1.0, 1.0, size=shape)
    for _ in range(passes):
        for k in range(v.ndim):
            pad = [(0, 0)] * v.ndim
            pad[k] = (1, 1)
            w = np.pad(v, pad, mode="edge")
            lo = [slice(None)] * v.ndim
            mid = [slice(None)] * v.ndim
            hi = [slice(None)] * v.ndim
            lo[k], mid[k], hi[k] = slice(0, -2), slice(1, -1), slice(2, None)
            v = 0.25 * w[tuple(lo)] + 0.5 * w[tuple(mid)] + 0.25 * w[tuple(hi)]
    return GridFunction(net, s, v)


def knot_noise(net, s: int, rng: np.random.Generator) -> GridFunction:
    """Uniform noise at the knot nodes, interpolated multilinearly onto the grid."""
    coarse = GridFunction(net, 1, rng.uniform(-1.0, 1.0, size=tuple(c + 1 for c in net.counts)))
    return discretize(coarse, net, s)


def analytic_corpus(dim: int) -> list[str]:
    y = "x2" if dim >= 2 else "x1"
    return [
        f"(x1^2+{y}^2)*sin(1/sqrt(1+x1^2+{y}^2))",
        f"sin(pi*x1)*cos(pi*{y})",
        f"exp(x1*{y})",
        f"x1^2 - {y} + 0.5",
        f"abs(x1 + {y})",
    ]


def germ_corpus(net, s: int, seed: int = 0, n_random: int = 5) -> list[GridFunction]:
    rng = np.random.default_rng(seed)
    fs = [discretize(e, net, s) for e in analytic_corpus(net.dim)]
    fs += [knot_noise(net, s, rng) for _ in range(n_random)]
    return fs


def _normalized(f: GridFunction, cfg: FractalConfig) -> GridFunction:
    return f * (1.0 / cfg.norm(f))


# individual checks


def check_perturbation(cfg: FractalConfig, f: GridFunction | None = None) -> BoundCheck:
    f = cfg.germ if f is None else f
    t = time.perf_counter()
    fa = fractal_operator(f, cfg).h
    measured = cfg.norm(fa - f)
    bound = cfg.a / (1 - cfg.a) * cfg.norm(f - cfg.base.apply(f))
    return BoundCheck(
        f"perturbation[a={cfg.a:g}]", measured, bound, runtime=time.perf_counter() - t
    )


def check_contraction(cfg: FractalConfig, pairs: int = 20, seed: int = 0, f: GridFunction | None = None) -> BoundCheck:
    """Empirical Lipschitz ratio of ``T^alpha`` against ``a + 0.01``."""
    f = cfg.germ if f is None else f
    rng = np.random.default_rng(seed)
    t = time.perf_counter()
    ratios = []
    for i in range(pairs):
        make = knot_noise if i % 2 == 0 else smooth_noise
        g1, g2 = make(cfg.net, cfg.s, rng), make(cfg.net, cfg.s, rng)
        num = cfg.norm(apply_T_alpha(g1, cfg, f) - apply_T_alpha(g2, cfg, f))
        ratios.append(num / cfg.norm(g1 - g2))
    return BoundCheck(
        f"contraction[a={cfg.a:g}]", max(ratios), cfg.a, rel=0.0, abs=0.01,
        details={"ratios": ratios}, seed=seed, runtime=time.perf_counter() - t,
    )


def operator_norm_trials(cfg: FractalConfig, trials: int, seed: int = 0) -> list[float]:
    """Running maximum of ``||F f||`` over random unit-norm smoothed-noise functions."""
    rng = np.random.default_rng(seed)
    best, running = -math.inf, []
    for _ in range(trials):
        f = _normalized(smooth_noise(cfg.net, cfg.s, rng), cfg)
        best = max(best, cfg.norm(fractal_operator(f, cfg).h))
        running.append(best)
    return running


def estimate_operator_norm(cfg: FractalConfig, trials: int = 50, seed: int = 0) -> BoundCheck:
    t = time.perf_counter()
    _, gap = cfg.base.estimates(cfg.net, cfg.s)
    running = operator_norm_trials(cfg, trials, seed)
    bound = 1 + cfg.a * gap / (1 - cfg.a)
    return BoundCheck(
        f"operator_norm[a={cfg.a:g}]", running[-1], bound,
        details={"running_max": running, "id_minus_L": gap}, seed=seed,
        runtime=time.perf_counter() - t,
    )


def check_lower_bound(cfg: FractalConfig, corpus: Sequence[GridFunction] | None = None, seed: int = 0) -> BoundCheck:
    name = f"lower_bound[a={cfg.a:g}]"
    norm_L, _ = cfg.base.estimates(cfg.net, cfg.s)
    if cfg.a * norm_L >= 1:
        return BoundCheck.skipped(name, f"a*||L|| = {cfg.a * norm_L:.4g} >= 1")
    t = time.perf_counter()
    corpus = germ_corpus(cfg.net, cfg.s, seed) if corpus is None else corpus
    factor = (1 + cfg.a) / (1 - cfg.a * norm_L)
    pairs = [(cfg.norm(f), factor * cfg.norm(fractal_operator(f, cfg).h)) for f in corpus]
    return _worst(name, pairs, seed=seed, runtime=time.perf_counter() - t, details={"factor": factor})


def check_inverse(cfg: FractalConfig, corpus: Sequence[GridFunction] | None = None, seed: int = 0) -> list[BoundCheck]:
    """Round trip ``F^-1(F f) = f`` and the inverse-norm ratio on a corpus."""
    norm_L, gap = cfg.base.estimates(cfg.net, cfg.s)
    if cfg.a >= 1 / (1 + gap):
        reason = f"a = {cfg.a:g} >= 1/(1+||Id-L||) = {1 / (1 + gap):.4g}"
        return [
            BoundCheck.skipped(f"inverse.roundtrip[a={cfg.a:g}]", reason),
            BoundCheck.skipped(f"inverse.ratio[a={cfg.a:g}]", reason),
        ]
    t = time.perf_counter()
    corpus = germ_corpus(cfg.net, cfg.s, seed) if corpus is None else corpus
    factor = (1 + cfg.a) / (1 - cfg.a * norm_L)
    errors, ratios = [], []
    for f in corpus:
        h = fractal_operator(f, cfg).h
        back = inverse_fractal_operator(h, cfg)
        errors.append(cfg.norm(back - f))
        ratios.append((cfg.norm(back), factor * cfg.norm(h)))
    runtime = time.perf_counter() - t
    return [
        BoundCheck(
            f"inverse.roundtrip[a={cfg.a:g}]", max(errors), cfg.eps_inv, rel=0.0, abs=0.0,
            details={"errors": errors}, seed=seed, runtime=runtime,
        ),
        _worst(f"inverse.ratio[a={cfg.a:g}]", ratios, seed=seed, runtime=runtime,
               details={"factor": factor}),
    ]


def check_fixed_points(cfg: FractalConfig, corpus: Sequence[GridFunction] | None = None, seed: int = 0) -> list[BoundCheck]:
    """Fixed points of ``L`` are fixed by ``F`` and germs moved by ``L`` are moved by ``F``."""
    if cfg.a == 0:
        reason = "a = 0"
        return [BoundCheck.skipped("fixed_points.identity", reason),
                BoundCheck.skipped("fixed_points.moved", reason)]
    t = time.perf_counter()
    corpus = germ_corpus(cfg.net, cfg.s, seed) if corpus is None else corpus
    ident = cfg.with_base(BaseOperator.identity())
    errs = [ident.norm(fractal_operator(f, ident).h - f) for f in corpus]
    out = [BoundCheck(f"fixed_points.identity[a={cfg.a:g}]", max(errs), 1e-8, rel=0.0, abs=0.0,
                      details={"errors": errs}, seed=seed, runtime=time.perf_counter() - t)]
    if cfg.base.is_identity:
        out.append(BoundCheck.skipped("fixed_points.moved", "base operator is the identity"))
        return out
    f = cfg.germ if cfg.germ is not None else corpus[0]
    gap = cfg.norm(f - cfg.base.apply(f))
    if gap <= 1e-8:
        out.append(BoundCheck.skipped("fixed_points.moved", "germ is a fixed point of L"))
        return out
    moved = cfg.norm(fractal_operator(f, cfg).h - f)
    # f^a - f = alpha (f^a - Lf) o Theta^-1 vanishes only if f^a = Lf a.e.
    out.append(BoundCheck(f"fixed_points.moved[a={cfg.a:g}]", moved, 1e-12, rel=0.0, abs=0.0,
                          direction=">=", details={"f_minus_Lf": gap}))
    return out


def check_norm_floor(cfg: FractalConfig, trials: int = 10, seed: int = 0) -> BoundCheck:
    """With ``L = Id`` (eigenvalue 1) the operator-norm estimate is at least one."""
    ident = cfg.with_base(BaseOperator.identity())
    running = operator_norm_trials(ident, trials, seed)
    return BoundCheck(f"norm_floor[a={cfg.a:g}]", running[-1], 1.0, rel=0.0, abs=1e-6,
                      direction=">=", details={"running_max": running}, seed=seed)


def random_scaling(rng: np.random.Generator, dim: int) -> str:
    """A constant or a smooth expression with sup norm below one."""
    y = "x2" if dim >= 2 else "x1"
    if rng.random() < 0.5:
        return repr(float(rng.uniform(-0.95, 0.95)))
    c0 = float(rng.uniform(-0.5, 0.5))
    c1 = float(rng.uniform(-1, 1)) * (0.95 - abs(c0))
    w1, w2 = (float(w) for w in rng.uniform(0.5, 4.0, size=2))
    return f"{c0!r} + {c1!r}*sin({w1!r}*x1)*cos({w2!r}*{y})"


def convexity_value(cfg: FractalConfig, alpha_spec, f: GridFunction) -> float:
    """``||T^alpha(0)||_q``."""
    c = cfg.with_alpha(alpha_spec)
    zero = f * 0.0
    return c.norm(apply_T_alpha(zero, c, f))


def check_convexity(cfg: FractalConfig, f: GridFunction | None = None, trials: int = 100, seed: int = 0) -> BoundCheck:
    f = cfg.germ if f is None else f
    rng = np.random.default_rng(seed)
    t = time.perf_counter()
    margins, records = [], []
    for _ in range(trials):
        while True:
            a1, a2 = random_scaling(rng, cfg.net.dim), random_scaling(rng, cfg.net.dim)
            try:
                t1, t2 = convexity_value(cfg, a1, f), convexity_value(cfg, a2, f)
                break
            except FunctionError:  # sup norm >= 1: draw again
                continue
        c = float(rng.uniform(0, 1))
        mix = f"{c!r}*({a1}) + {1 - c!r}*({a2})"
        lhs = convexity_value(cfg, mix, f)
        rhs = c * t1 + (1 - c) * t2
        margins.append(rhs - lhs)
        records.append((a1, a2, c))
    k = int(np.argmin(margins))
    # measured = -slack so the check reads "-slack <= 0"
    return BoundCheck("convexity", -margins[k], 0.0, rel=0.0, abs=1e-8,
                      details={"min_slack": margins[k], "worst": records[k]}, seed=seed,
                      runtime=time.perf_counter() - t)


def check_relative_lipschitz(cfg: FractalConfig, pairs: int = 20, seed: int = 0) -> BoundCheck:
    rng = np.random.default_rng(seed)
    t = time.perf_counter()
    a = cfg.a
    analytic = [discretize(e, cfg.net, cfg.s) for e in analytic_corpus(cfg.net.dim)]
    records = []
    for i in range(pairs):
        f1 = knot_noise(cfg.net, cfg.s, rng) if i % 2 else analytic[i // 2 % len(analytic)]
        f2 = knot_noise(cfg.net, cfg.s, rng)
        lhs = cfg.norm(fractal_operator(f1, cfg).h - fractal_operator(f2, cfg).h)
        rhs = cfg.norm(f1 - f2) / (1 - a) + a / (1 - a) * cfg.norm(
            cfg.base.apply(f1) - cfg.base.apply(f2)
        )
        records.append((lhs, rhs))
    return _worst(f"relative_lipschitz[a={a:g}]", records, seed=seed, runtime=time.perf_counter() - t)


def knot_node_errors(h: GridFunction, f: GridFunction) -> np.ndarray:
    nodes = np.array(f.net.knot_nodes())
    return np.abs(h(nodes) - f(nodes))


def check_residuals(cfg: FractalConfig, f: GridFunction | None = None, germ_spec=None) -> list[BoundCheck]:
    """Self-referential residual at depths m and m+1, and interpolation at knot nodes.

    The knot-node allowance is ``10 eps_fix`` plus a Richardson estimate of the
    discretisation error from a run at ``2 s`` (needs ``germ_spec``).
    """
    f = cfg.germ if f is None else f
    res = fractal_operator(f, cfg)
    T = lambda g: apply_T_alpha(g, cfg, f)  # noqa: E731
    out = [
        BoundCheck(f"residual.depth{d}[a={cfg.a:g}]", self_residual(res.h, T, cfg, d), cfg.eps_res,
                   rel=0.0, abs=0.0)
        for d in (cfg.depth, cfg.depth + 1)
    ]
    err = knot_node_errors(res.h, f)
    allowance = 0.0
    if germ_spec is not None:
        fine = replace(cfg, s=2 * cfg.s, germ=None)
        f2 = discretize(germ_spec, cfg.net, fine.s)
        h2 = fractal_operator(f2, fine).h
        nodes = np.array(cfg.net.knot_nodes())
        allowance = 4.0 / 3.0 * float(np.max(np.abs(res.h(nodes) - h2(nodes))))
    out.append(BoundCheck(f"knot_interpolation[a={cfg.a:g}]", float(err.max()),
                          10 * cfg.eps_fix + allowance, rel=0.0, abs=0.0,
                          details={"errors": err.tolist(), "h2_allowance": allowance}))
    return out


# Schauder experiment


def _unit_coords(net, pts: np.ndarray) -> np.ndarray:
    return (pts - net.lower) / (net.upper - net.lower)


def haar_index(dim: int, depth: int) -> list[tuple[int, tuple[int, ...], tuple[int, ...]]]:
    """Tensor Haar system ordered by level: ``(level, cube, type)`` triples.

    Level 0 starts with the constant (type all zeros); every level ``l`` adds
    ``2**dim - 1`` wavelets on each of the ``2**(dim*l)`` dyadic cubes, so the
    first ``2**(dim*l)`` members span the functions constant on level-``l`` cubes.
    """
    out = [(0, (0,) * dim, (0,) * dim)]
    types = [e for e in itertools.product((0, 1), repeat=dim) if any(e)]
    for level in range(depth):
        for cube in itertools.product(range(2**level), repeat=dim):
            for e in types:
                out.append((level, cube, e))
    return out


def haar_eval(net, member, pts: np.ndarray) -> np.ndarray:
    """Haar function orthonormal for the normalized Lebesgue measure on the box."""
    level, cube, types = member
    u = _unit_coords(net, np.atleast_2d(pts))
    scale = 2**level
    val = np.full(len(u), float(scale) ** (net.dim / 2))
    for k in range(net.dim):
        t = u[:, k] * scale
        idx = np.clip(np.floor(t), 0, scale - 1)
        val = val * (idx == cube[k])
        if types[k]:
            val = val * np.where(t - idx < 0.5, 1.0, -1.0)
    return val


@dataclass
class SchauderTable:
    counts: list[int]
    errors: list[float]
    truncation_error: float
    norm_bound: float
    check: BoundCheck

    def eventually_decreasing(self, tail: int = 3) -> bool:
        e = self.errors[-tail:]
        return all(b < a for a, b in zip(e, e[1:]))

    def rows(self) -> list[str]:
        return [f"{n:>6d}  {e:.6e}" for n, e in zip(self.counts, self.errors)]


def _uniform_knots(net) -> bool:
    return all(np.allclose(np.diff(p.knots), p.width / p.count, rtol=1e-12, atol=0)
               for p in net.partitions)


def schauder_experiment(g, cfg: FractalConfig, depth: int = 4) -> SchauderTable:
    """Partial sums of ``g`` in the fractal Haar system ``F(h_n)``.

    Coefficients are the Haar coefficients of ``F^-1(g)``, taken as ``g`` plus
    a grid-resolved correction; ``F(h_n)`` is ``h_n`` plus its grid-resolved
    fractal perturbation.  Errors are
    reported at ``N = 2**(dim*l)`` for ``l = 0..depth``.
    """
    net = cfg.net
    if cfg.q != 2:
        raise ValueError("the Schauder experiment uses q = 2")
    if not (_uniform_knots(net) and cfg.p.is_uniform()):
        raise ValueError("the Schauder experiment needs uniform knots and uniform p")
    _, gap = cfg.base.estimates(net, cfg.s)
    if cfg.a >= 1 / (1 + gap):
        raise ValueError(f"a = {cfg.a:g} must be below 1/(1+||Id-L||) = {1 / (1 + gap):.4g}")
    from .measure import quadrature_nodes

    g_fn = as_callable(g, net.dim)
    pts, w = next(quadrature_nodes(cfg.p, cfg.depth, block=net.n_cells**cfg.depth))
    g_pts = np.asarray(g_fn(pts), dtype=float)
    # F^-1(g) = g + eta with eta grid-resolved, so alpha = 0 gives plain Haar sums of g
    u_pts = g_pts + inverse_perturbation(g_fn, cfg)(pts)

    members = haar_index(net.dim, depth)
    checkpoints = {2 ** (net.dim * l) for l in range(depth + 1)}
    approx = np.zeros(len(pts))
    delta_sum = np.zeros(len(grid_nodes(net, cfg.s)))
    shape = tuple(len(a) for a in grid_axes(net, cfg.s))
    counts, errors = [], []
    for n, member in enumerate(members, start=1):
        h_pts = haar_eval(net, member, pts)
        b = float(np.sum(w * u_pts * h_pts))
        approx += b * h_pts
        if cfg.a != 0 and b != 0.0:
            h_fn = lambda x, m=member: haar_eval(net, m, x)  # noqa: E731
            delta_sum += b * fractal_perturbation(h_fn, cfg).values.ravel()
        if n in checkpoints:
            partial = approx + GridFunction(net, cfg.s, delta_sum.reshape(shape))(pts)
            counts.append(n)
            errors.append(math.sqrt(float(np.sum(w * (g_pts - partial) ** 2))))
    trunc = math.sqrt(float(np.sum(w * (u_pts - approx) ** 2)))
    norm_bound = 1 + cfg.a * gap / (1 - cfg.a)
    check = BoundCheck(f"schauder[a={cfg.a:g},D={depth}]", errors[-1], norm_bound * trunc,
                       rel=0.0, abs=1e-6,
                       details={"counts": counts, "errors": errors, "truncation": trunc})
    return SchauderTable(counts, errors, trunc, norm_bound, check)


def check_schauder(g, cfg: FractalConfig, depth: int = 4, factor: float | None = None) -> list[BoundCheck]:
    """Final-error bound and the eventual decrease of the error table."""
    name = f"schauder[a={cfg.a:g},D={depth}]"
    try:
        table = schauder_experiment(g, cfg, depth)
    except ValueError as err:
        return [BoundCheck.skipped(name, str(err))]
    factor = table.norm_bound if factor is None else factor
    final = BoundCheck(name, table.errors[-1], factor * table.truncation_error, rel=0.0, abs=1e-6,
                       details=table.check.details)
    tail = table.errors[-3:]
    rises = max(b - a for a, b in zip(tail, tail[1:]))
    decreasing = BoundCheck(f"schauder.decreasing[a={cfg.a:g}]", rises, 0.0, rel=0.0, abs=0.0,
                            details={"errors": table.errors})
    if rises == 0:
        decreasing.status = FAIL
    return [final, decreasing]


def roughness_report(gf: GridFunction) -> float:
    """Mean absolute second difference over the grid, averaged over axes.

    Spacing-weighted so affine functions give exactly zero on non-uniform grids.
    """
    v = gf.values
    total = []
    for k, ax in enumerate(gf.axes):
        if len(ax) < 3:
            continue
        hl = np.diff(ax)[:-1]
        hr = np.diff(ax)[1:]
        shape = [1] * v.ndim
        shape[k] = -1
        hl, hr = hl.reshape(shape), hr.reshape(shape)
        lo = np.take(v, range(0, len(ax) - 2), axis=k)
        mid = np.take(v, range(1, len(ax) - 1), axis=k)
        hi = np.take(v, range(2, len(ax)), axis=k)
        d2 = (hl * hi - (hl + hr) * mid + hr * lo) / (0.5 * (hl + hr))
        total.append(float(np.mean(np.abs(d2))))
    return float(np.mean(total)) if total else 0.0
