"""Read-Bajraktarevic operators on grid functions and their fixed points.

For a grid node ``y`` in cell ``J`` the operators only need ``Theta_J^{-1}(y)``,
so the per-node preimages and the interpolation stencil that reads a grid
function there are computed once per ``(net, s)`` and reused by every sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from .funcstore import (
    BaseOperator,
    FunctionError,
    GridFunction,
    ScalingFunction,
    default_subdivisions,
    discretize,
    grid_axes,
    grid_nodes,
    multilinear_stencil,
)
from .measure import ProbabilityVector, Quadrature, lq_norm, quadrature_nodes
from .net import Net, flat_cell_index, locate_cells


class FixedPointError(RuntimeError):
    def __init__(self, message, iterations=None, displacement=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.displacement = displacement
        self.residual = residual


@dataclass(frozen=True)
class SelfMap:
    """Cell of every grid node, its preimage, and the stencil reading values there."""

    cells: np.ndarray
    preimages: np.ndarray
    idx: np.ndarray
    weights: np.ndarray

    def pull(self, values: np.ndarray) -> np.ndarray:
        """Values of the grid function ``values`` at every node's preimage (flat)."""
        return (np.asarray(values).ravel()[self.idx] * self.weights).sum(axis=1)


@lru_cache(maxsize=32)
def self_map(net: Net, s: int) -> SelfMap:
    nodes = grid_nodes(net, s)
    cells = flat_cell_index(net, locate_cells(net, nodes))
    slopes, offsets = net.affine_table()
    pre = (nodes - offsets[cells]) / slopes[cells]
    pre = np.clip(pre, net.lower, net.upper)
    idx, w = multilinear_stencil(grid_axes(net, s), pre)
    return SelfMap(cells, pre, idx, w)


@dataclass(frozen=True)
class FractalConfig:
    """Everything a fixed-point computation needs.

    ``germ``/``base`` drive the alpha-fractal operator; ``cell_functions``
    (multi-index -> callable on point arrays) drives the general operator.
    """

    net: Net
    alpha: ScalingFunction
    q: float = 2.0
    germ: GridFunction | None = None
    base: BaseOperator = field(default_factory=BaseOperator.identity)
    cell_functions: Mapping[tuple[int, ...], Callable] | None = None
    s: int | None = None
    p: ProbabilityVector | None = None
    depth: int = 4
    eps_fix: float = 1e-10
    eps_res: float = 1e-6
    eps_inv: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if self.s is None:
            object.__setattr__(self, "s", self.alpha.s)
        if self.p is None:
            object.__setattr__(self, "p", ProbabilityVector.uniform(self.net))
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if min(self.eps_fix, self.eps_res, self.eps_inv) <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive and max_iter at least 1")
        if self.alpha.sup >= 1:
            raise ValueError("scaling function must have sup norm < 1")
        if self.alpha.net != self.net or self.alpha.s != self.s:
            object.__setattr__(self, "alpha", rescale(self.alpha, self.net, self.s))
        if self.germ is not None and (self.germ.net != self.net or self.germ.s != self.s):
            raise ValueError("germ lives on a different grid")
        self.base.check_corners(self.net)

    @property
    def a(self) -> float:
        return self.alpha.sup

    @property
    def quadrature(self) -> Quadrature:
        return Quadrature.exact(self.depth)

    def with_alpha(self, spec) -> "FractalConfig":
        return replace(self, alpha=ScalingFunction.build(spec, self.net, self.s))

    def with_base(self, base: BaseOperator) -> "FractalConfig":
        return replace(self, base=base)

    def norm(self, f: Callable, depth: int | None = None) -> float:
        depth = depth or self.depth
        if isinstance(f, GridFunction) and f.net == self.net and f.s == self.s:
            weights, idx, w = _grid_quadrature(self.net, self.s, depth, self.p.flat.tobytes())
            vals = (f.values.ravel()[idx] * w).sum(axis=1)
            return math.fsum(weights * np.abs(vals) ** self.q) ** (1.0 / self.q)
        return lq_norm(f, self.q, self.p, Quadrature.exact(depth))

    def alpha_nodes(self) -> np.ndarray:
        return _alpha_nodes(self.alpha)


@lru_cache(maxsize=16)
def _grid_quadrature(net: Net, s: int, depth: int, p_key: bytes):
    """Quadrature weights plus the stencil reading grid values at the nodes."""
    p = ProbabilityVector(net, np.frombuffer(p_key))
    blocks = list(quadrature_nodes(p, depth))
    pts = np.concatenate([b[0] for b in blocks])
    weights = np.concatenate([b[1] for b in blocks])
    idx, w = multilinear_stencil(grid_axes(net, s), pts)
    return weights, idx, w


def rescale(alpha: ScalingFunction, net: Net, s: int) -> ScalingFunction:
    return ScalingFunction(net, s, alpha.text, alpha.constant, alpha.func, alpha.sup)


@lru_cache(maxsize=64)
def _alpha_nodes(alpha: ScalingFunction) -> np.ndarray:
    vals = alpha.node_values()
    vals.flags.writeable = False
    return vals


@dataclass
class FifResult:
    h: GridFunction
    iterations: int
    displacement: float
    residual: float
    depth: int
    iteration_bound: int | None = None

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "displacement": self.displacement,
            "residual": self.residual,
            "depth": self.depth,
            "iteration_bound": self.iteration_bound,
        }


def _finite(values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise FunctionError("RB operator produced a non-finite value")
    return values


def apply_T_general(g: GridFunction, cfg: FractalConfig) -> GridFunction:
    """``(Tg)(y) = alpha(y) g(Theta_J^-1 y) + q_J(Theta_J^-1 y)`` on every node."""
    if cfg.cell_functions is None:
        raise ValueError("config has no per-cell functions")
    sm = self_map(cfg.net, cfg.s)
    vals = cfg.alpha_nodes() * sm.pull(g.values)
    cells = cfg.net.cells()
    for c in np.unique(sm.cells):
        mask = sm.cells == c
        qj = cfg.cell_functions[cells[c]]
        vals[mask] += np.asarray(qj(sm.preimages[mask]), dtype=float)
    return GridFunction(cfg.net, cfg.s, _finite(vals))


def _alpha_sweep(g_vals, f_vals, Lf_vals, alpha, sm):
    return f_vals.ravel() + alpha * sm.pull(g_vals - Lf_vals)


def apply_T_alpha(g: GridFunction, cfg: FractalConfig, f: GridFunction | None = None) -> GridFunction:
    """``(T g)(y) = f(y) + alpha(y) (g - Lf)(Theta_J^-1 y)`` on every node."""
    f = cfg.germ if f is None else f
    if f is None:
        raise ValueError("no germ function given")
    Lf = cfg.base.apply(f)
    sm = self_map(cfg.net, cfg.s)
    vals = _alpha_sweep(g.values, f.values, Lf.values, cfg.alpha_nodes(), sm)
    return GridFunction(cfg.net, cfg.s, _finite(vals))


def iteration_bound(a: float, eps: float, d0: float) -> int:
    """Sweeps a contraction with ratio ``a`` needs to get from ``d0`` below ``eps``."""
    if a <= 0 or d0 <= eps:
        return 1
    return math.ceil(math.log(eps * (1 - a) / d0) / math.log(a))


def _picard(step, start: np.ndarray, a: float, eps: float, max_iter: int):
    g = start
    bound = None
    limit = max_iter
    k = disp = 0
    while k < limit:
        new = _finite(step(g))
        k += 1
        disp = float(np.max(np.abs(new - g)))
        g = new
        if k == 1:
            bound = iteration_bound(a, eps, disp)
            limit = max(max_iter, bound + 1)
        if disp < eps:
            break
    return g, k, disp, bound


def picard_fixed_point(cfg: FractalConfig, T: Callable, start: GridFunction | None = None) -> FifResult:
    """Iterate ``T`` from ``start`` (germ or zero) until the sup displacement on
    the grid drops below ``eps_fix``, then check the L^q self-referential residual.

    The sweep budget is raised to the contraction bound implied by the first
    displacement when that exceeds ``max_iter``.
    """
    if start is None:
        start = cfg.germ if cfg.germ is not None else GridFunction(
            cfg.net, cfg.s, np.zeros(tuple(len(a) for a in grid_axes(cfg.net, cfg.s)))
        )
    shape = start.shape

    def step(vals):
        return T(GridFunction(cfg.net, cfg.s, vals.reshape(shape))).values

    vals, k, disp, bound = _picard(step, start.values, cfg.a, cfg.eps_fix, cfg.max_iter)
    h = GridFunction(cfg.net, cfg.s, vals)
    residual = self_residual(h, T, cfg)
    if disp >= cfg.eps_fix or residual > cfg.eps_res:
        raise FixedPointError(
            f"no fixed point after {k} sweeps: displacement {disp:.3g}, residual {residual:.3g}",
            k, disp, residual,
        )
    return FifResult(h, k, disp, residual, cfg.depth, bound)


def self_residual(h: GridFunction, T: Callable, cfg: FractalConfig, depth: int | None = None) -> float:
    """``||T h - h||_q`` by exact quadrature."""
    diff = T(h) - h
    return cfg.norm(diff, depth)


def general_fif(cfg: FractalConfig) -> FifResult:
    """Fixed point of the general operator with per-cell functions, from zero."""
    return picard_fixed_point(cfg, lambda g: apply_T_general(g, cfg))


def fractal_operator(f: GridFunction, cfg: FractalConfig) -> FifResult:
    """``f -> f^alpha``: the fixed point of :func:`apply_T_alpha` with germ ``f``."""
    if not (f.net == cfg.net and f.s == cfg.s):
        raise ValueError("germ lives on a different grid")
    cfg.base.check_corners(cfg.net)
    Lf = cfg.base.apply(f)
    sm = self_map(cfg.net, cfg.s)
    alpha = cfg.alpha_nodes()
    fv, Lv = f.values.ravel(), Lf.values.ravel()
    shape = f.shape

    def step(g):
        return _alpha_sweep(g, fv, Lv, alpha, sm)

    vals, k, disp, bound = _picard(step, fv, cfg.a, cfg.eps_fix, cfg.max_iter)
    h = GridFunction(cfg.net, cfg.s, vals.reshape(shape))
    residual = self_residual(h, lambda g: apply_T_alpha(g, cfg, f), cfg)
    if disp >= cfg.eps_fix or residual > cfg.eps_res:
        raise FixedPointError(
            f"no fixed point after {k} sweeps: displacement {disp:.3g}, residual {residual:.3g}",
            k, disp, residual,
        )
    return FifResult(h, k, disp, residual, cfg.depth, bound)


def inverse_fractal_operator(h: GridFunction, cfg: FractalConfig) -> GridFunction:
    """Solve ``F(f) = h`` by iterating ``f <- h - alpha (h - L f) o Theta^-1``.

    The iteration contracts with ratio ``a * ||L||`` and so needs that below one.
    """
    norm_L, _ = cfg.base.estimates(cfg.net, cfg.s)
    ratio = cfg.a * norm_L
    if ratio >= 1:
        raise ValueError(f"inverse needs a*||L|| < 1, got {ratio:.4g}")
    sm = self_map(cfg.net, cfg.s)
    alpha = cfg.alpha_nodes()
    hv = h.values.ravel()
    mult = cfg.base.multiplier_at(grid_nodes(cfg.net, cfg.s))

    def step(f):
        return hv - alpha * sm.pull(hv - mult * f)

    vals, k, disp, _ = _picard(step, hv, ratio, cfg.eps_fix, cfg.max_iter)
    f = GridFunction(cfg.net, cfg.s, vals.reshape(h.shape))
    err = cfg.norm(fractal_operator(f, cfg).h - h)
    if err > cfg.eps_inv:
        raise FixedPointError(f"inverse did not converge: ||F(f) - h|| = {err:.3g}", k, disp, err)
    return f


def fractal_perturbation(f: Callable, cfg: FractalConfig) -> GridFunction:
    """Grid function ``delta`` with ``F(f) = f + delta`` for a callable ``f``.

    ``delta`` solves ``delta = alpha (delta + f - L f) o Theta^-1``; only the
    fractal part is discretised, ``f`` itself stays exact.
    """
    sm = self_map(cfg.net, cfg.s)
    alpha = cfg.alpha_nodes()
    pre = sm.preimages
    gap = np.asarray(f(pre), dtype=float) - np.asarray(cfg.base.apply_callable(f)(pre), dtype=float)
    source = alpha * gap
    shape = tuple(len(a) for a in grid_axes(cfg.net, cfg.s))

    def step(d):
        return alpha * sm.pull(d) + source

    vals, k, disp, _ = _picard(step, np.zeros(source.shape), cfg.a, cfg.eps_fix, cfg.max_iter)
    if disp >= cfg.eps_fix:
        raise FixedPointError(f"perturbation did not converge after {k} sweeps", k, disp)
    return GridFunction(cfg.net, cfg.s, vals.reshape(shape))


def inverse_perturbation(h: Callable, cfg: FractalConfig) -> GridFunction:
    """Grid function ``eta`` with ``F^-1(h) = h + eta`` for a callable ``h``.

    ``eta`` solves ``eta = alpha (L eta - (h - L h)) o Theta^-1``, a contraction
    with ratio ``a * ||L||``; ``h`` itself stays exact.
    """
    norm_L, _ = cfg.base.estimates(cfg.net, cfg.s)
    ratio = cfg.a * norm_L
    if ratio >= 1:
        raise ValueError(f"inverse needs a*||L|| < 1, got {ratio:.4g}")
    sm = self_map(cfg.net, cfg.s)
    alpha = cfg.alpha_nodes()
    pre = sm.preimages
    gap = np.asarray(h(pre), dtype=float) - np.asarray(cfg.base.apply_callable(h)(pre), dtype=float)
    source = -alpha * gap
    mult = alpha * cfg.base.multiplier_at(pre)
    shape = tuple(len(a) for a in grid_axes(cfg.net, cfg.s))

    def step(e):
        return mult * sm.pull(e) + source

    vals, k, disp, _ = _picard(step, np.zeros(source.shape), ratio, cfg.eps_fix, cfg.max_iter)
    if disp >= cfg.eps_fix:
        raise FixedPointError(f"inverse perturbation did not converge after {k} sweeps", k, disp)
    return GridFunction(cfg.net, cfg.s, vals.reshape(shape))


def make_config(net: Net, alpha, base: BaseOperator | None = None, germ=None, s: int | None = None, **kw) -> FractalConfig:
    """Convenience constructor accepting expression specs."""
    s = default_subdivisions(net.dim) if s is None else s
    alpha = alpha if isinstance(alpha, ScalingFunction) else ScalingFunction.build(alpha, net, s)
    if germ is not None and not isinstance(germ, GridFunction):
        germ = discretize(germ, net, s)
    return FractalConfig(net, alpha, germ=germ, base=base or BaseOperator.identity(), s=s, **kw)
