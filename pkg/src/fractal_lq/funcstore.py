"""Concrete function representations on a net.

A :class:`GridFunction` stores values on a tensor grid that refines every knot
interval into ``s`` equal pieces (so knots are always grid nodes) and evaluates
between nodes by multilinear interpolation.  Expressions from :mod:`expr` are
wrapped by :class:`ExprFunction`.  Base operators and scaling functions live
here too because both are evaluated node-wise on the same grid.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .net import TOL, Net, NetError, build_net

DEFAULT_S_2D = 16
DEFAULT_S_ND = 4


class FunctionError(ValueError):
    pass


def default_subdivisions(dim: int) -> int:
    return DEFAULT_S_2D if dim <= 2 else DEFAULT_S_ND


@lru_cache(maxsize=64)
def grid_axes(net: Net, s: int) -> tuple[np.ndarray, ...]:
    """Per-axis evaluation grids with ``s`` equal pieces per knot interval."""
    if s < 1:
        raise FunctionError("subdivisions must be >= 1")
    axes = []
    for p in net.partitions:
        pieces = [np.linspace(a, b, s + 1)[:-1] for a, b in zip(p.knots[:-1], p.knots[1:])]
        ax = np.concatenate(pieces + [np.array([p.knots[-1]])])
        ax.flags.writeable = False
        axes.append(ax)
    return tuple(axes)


@lru_cache(maxsize=64)
def grid_nodes(net: Net, s: int) -> np.ndarray:
    """All grid nodes, shape ``(M, dim)``, in row-major order."""
    axes = grid_axes(net, s)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    nodes.flags.writeable = False
    return nodes


def multilinear_stencil(axes: Sequence[np.ndarray], points: np.ndarray):
    """Flat corner indices and weights for multilinear interpolation.

    Returns ``(idx, w)`` each of shape ``(m, 2**dim)`` such that the
    interpolated value is ``(values.ravel()[idx] * w).sum(axis=1)``.  At a grid
    node the weight of that node is exactly one and all others exactly zero.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    shape = tuple(len(a) for a in axes)
    lo_idx, frac = [], []
    for k, ax in enumerate(axes):
        t = pts[:, k]
        if np.any(t < ax[0] - TOL) or np.any(t > ax[-1] + TOL):
            raise FunctionError("evaluation point outside the domain")
        i = np.clip(np.searchsorted(ax, t, side="right") - 1, 0, len(ax) - 2)
        u = (t - ax[i]) / (ax[i + 1] - ax[i])
        lo_idx.append(i)
        frac.append(np.clip(u, 0.0, 1.0))
    corners = list(itertools.product((0, 1), repeat=len(axes)))
    idx = np.empty((len(pts), len(corners)), dtype=np.int64)
    w = np.empty((len(pts), len(corners)))
    for c, bits in enumerate(corners):
        multi = tuple(i + b for i, b in zip(lo_idx, bits))
        idx[:, c] = np.ravel_multi_index(multi, shape)
        wc = np.ones(len(pts))
        for u, b in zip(frac, bits):
            wc = wc * (u if b else 1.0 - u)
        w[:, c] = wc
    return idx, w


class GridFunction:
    """Values on the refined grid of ``net``; immutable."""

    def __init__(self, net: Net, s: int, values):
        self.net = net
        self.s = int(s)
        self.axes = grid_axes(net, self.s)
        shape = tuple(len(a) for a in self.axes)
        vals = np.array(values, dtype=float).reshape(shape)
        if not np.all(np.isfinite(vals)):
            raise FunctionError("grid function values must be finite")
        vals.flags.writeable = False
        self.values = vals

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def nodes(self) -> np.ndarray:
        return grid_nodes(self.net, self.s)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.net == other.net and self.s == other.s

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        idx, w = multilinear_stencil(self.axes, np.atleast_2d(pts))
        out = (self.values.ravel()[idx] * w).sum(axis=1)
        return float(out[0]) if single else out

    def __add__(self, other):
        return linear_combine([1.0, 1.0], [self, other])

    def __sub__(self, other):
        return linear_combine([1.0, -1.0], [self, other])

    def __mul__(self, c: float):
        return GridFunction(self.net, self.s, float(c) * self.values)

    __rmul__ = __mul__

    def __repr__(self):
        return f"GridFunction(shape={self.shape}, s={self.s}, net={self.net.digest()})"


class ExprFunction:
    """A parsed expression callable on ``(m, dim)`` point arrays."""

    def __init__(self, source, dim: int):
        self.ast = ex.parse(source) if isinstance(source, str) else source
        self.text = ex.to_text(self.ast)
        self.dim = dim
        if ex.max_variable(self.ast) > dim:
            raise FunctionError(f"{self.text} uses more than {dim} variables")

    def __call__(self, points):
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = ex.evaluate(self.ast, [pts[:, k] for k in range(pts.shape[1])])
        out = np.broadcast_to(np.asarray(out, dtype=float), (len(pts),))
        return float(out[0]) if single else out.copy()

    def __repr__(self):
        return f"ExprFunction({self.text!r})"


def as_callable(spec, dim: int) -> Callable:
    if isinstance(spec, (str, ex.Num, ex.Const, ex.Var, ex.Neg, ex.BinOp, ex.Call)):
        return ExprFunction(spec, dim)
    if isinstance(spec, (int, float)):
        return ExprFunction(ex.Num(float(spec)) if spec >= 0 else ex.Neg(ex.Num(-float(spec))), dim)
    if callable(spec):
        return spec
    raise FunctionError(f"cannot interpret {spec!r} as a function")


def node_data_function(net: Net, data=None) -> GridFunction:
    """Multilinear interpolant of node data on the knot grid (``s = 1``)."""
    data = net.node_data if data is None else data
    if data is None:
        raise FunctionError("net carries no node data")
    shape = tuple(c + 1 for c in net.counts)
    vals = np.empty(shape)
    for idx in np.ndindex(*shape):
        vals[idx] = data[idx]
    return GridFunction(net, 1, vals)


def discretize(spec, net: Net, s: int | None = None) -> GridFunction:
    """Sample ``spec`` at every grid node.

    ``spec`` is an expression (text or AST), a number, a callable on point
    arrays, a :class:`GridFunction`, or the string ``"nodes"`` for the net's
    node data.
    """
    s = default_subdivisions(net.dim) if s is None else s
    if isinstance(spec, str) and spec == "nodes" or isinstance(spec, dict):
        spec = node_data_function(net, None if isinstance(spec, str) else spec)
    f = as_callable(spec, net.dim)
    values = np.asarray(f(grid_nodes(net, s)), dtype=float)
    if not np.all(np.isfinite(values)):
        raise FunctionError(f"{spec!r} is not finite at every grid node")
    return GridFunction(net, s, values)


def linear_combine(coeffs: Sequence[float], fs: Sequence[GridFunction]) -> GridFunction:
    if len(coeffs) != len(fs) or not fs:
        raise FunctionError("need one coefficient per function")
    first = fs[0]
    total = np.zeros(first.shape)
    for c, f in zip(coeffs, fs):
        if not f.same_grid(first):
            raise FunctionError("grid functions live on different grids")
        total = total + float(c) * f.values
    return GridFunction(first.net, first.s, total)


def ess_sup(fspec, net: Net, s: int | None = None, sampler=None, probes: int = 0) -> float:
    """Lower-bound estimate of ``ess sup |f|``.

    Maximum of ``|f|`` over all grid nodes and ``probes`` chaos-game points
    drawn from ``sampler`` (typical points of the invariant measure).
    """
    s = default_subdivisions(net.dim) if s is None else s
    f = fspec if isinstance(fspec, GridFunction) else as_callable(fspec, net.dim)
    vals = [np.abs(np.asarray(f(grid_nodes(net, s)), dtype=float))]
    if sampler is not None and probes > 0:
        vals.append(np.abs(np.asarray(f(sampler.samples(probes)), dtype=float)))
    vals = np.concatenate(vals)
    if not np.all(np.isfinite(vals)):
        raise FunctionError("non-finite value while estimating the sup norm")
    return float(vals.max())


def _default_sampler(net: Net):
    from .measure import ChaosGameSampler, ProbabilityVector

    return ChaosGameSampler(net, ProbabilityVector.uniform(net), seed=0)


@dataclass(frozen=True)
class ScalingFunction:
    """Vertical scaling field; constant or an expression.

    ``sup`` is the estimate of ``||alpha||_inf`` and must be below one.
    """

    net: Net
    s: int
    text: str
    constant: float | None
    func: Callable = field(repr=False, compare=False)
    sup: float = 0.0

    @classmethod
    def build(cls, spec, net: Net, s: int | None = None, probes: int = 10_000, sampler=None):
        s = default_subdivisions(net.dim) if s is None else s
        constant = None
        if isinstance(spec, (int, float)):
            constant = float(spec)
        elif isinstance(spec, str):
            try:
                constant = float(spec)
            except ValueError:
                pass
        func = as_callable(constant if constant is not None else spec, net.dim)
        text = getattr(func, "text", repr(spec))
        if constant is not None:
            if not np.isfinite(constant):
                raise FunctionError("scaling constant must be finite")
            sup = abs(constant)
        else:
            sampler = sampler if sampler is not None else _default_sampler(net)
            sup = ess_sup(func, net, s, sampler, probes)
        if sup >= 1.0:
            raise FunctionError(f"scaling function {text} has sup norm {sup:.6g} >= 1")
        return cls(net, s, text, constant, func, sup)

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.constant is not None:
            return np.full(len(pts), self.constant)
        vals = np.asarray(self.func(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise FunctionError(f"scaling function {self.text} is not finite")
        return vals

    def node_values(self) -> np.ndarray:
        return self.at(grid_nodes(self.net, self.s))


class BaseOperator:
    """Bounded linear operator that fixes values at the domain corners.

    Two variants: the identity, and multiplication by a function ``m`` with
    ``m = 1`` at every corner.
    """

    def __init__(self, multiplier=None, label: str | None = None):
        self.multiplier = multiplier
        self.label = label or ("identity" if multiplier is None else repr(multiplier))
        self._estimates: dict = {}

    @classmethod
    def identity(cls) -> "BaseOperator":
        return cls()

    @classmethod
    def multiply(cls, spec, net: Net) -> "BaseOperator":
        m = spec if isinstance(spec, GridFunction) else as_callable(spec, net.dim)
        label = getattr(m, "text", None)
        op = cls(m, label=label)
        op.check_corners(net)
        return op

    @property
    def is_identity(self) -> bool:
        return self.multiplier is None

    def check_corners(self, net: Net, tol: float = 1e-9):
        if self.is_identity:
            return
        corners = np.array(net.corners())
        m = np.asarray(self.multiplier(corners), dtype=float)
        if not np.all(np.abs(m - 1.0) <= tol):
            raise FunctionError(
                f"base operator {self.label} must equal 1 at every domain corner, got {m}"
            )

    def multiplier_at(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.is_identity:
            return np.ones(len(pts))
        return np.asarray(self.multiplier(pts), dtype=float)

    def apply(self, f: GridFunction) -> GridFunction:
        if self.is_identity:
            return GridFunction(f.net, f.s, f.values)
        m = self.multiplier_at(f.nodes()).reshape(f.shape)
        return GridFunction(f.net, f.s, m * f.values)

    def apply_callable(self, f: Callable) -> Callable:
        if self.is_identity:
            return f
        return lambda pts: self.multiplier_at(pts) * np.asarray(f(pts), dtype=float)

    def estimates(self, net: Net, s: int | None = None, probes: int = 10_000):
        """``(||L||, ||Id - L||)`` as sup estimates of ``|m|`` and ``|1 - m|``."""
        s = default_subdivisions(net.dim) if s is None else s
        key = (net, s, probes)
        if key not in self._estimates:
            if self.is_identity:
                self._estimates[key] = (1.0, 0.0)
            else:
                sampler = _default_sampler(net)
                norm = ess_sup(self.multiplier, net, s, sampler, probes)
                gap = ess_sup(lambda p: 1.0 - self.multiplier_at(p), net, s, sampler, probes)
                self._estimates[key] = (norm, gap)
        return self._estimates[key]

    def __repr__(self):
        return f"BaseOperator({self.label})"


def apply_base(L: BaseOperator, f: GridFunction) -> GridFunction:
    return L.apply(f)


_HEADER = re.compile(r"#\s*net-hash=(\w+),\s*dims=([\dx]+),\s*s=(\d+)\s*$")


def save_csv(gf: GridFunction, path) -> None:
    dims = "x".join(str(n) for n in gf.shape)
    nodes = gf.nodes()
    vals = gf.values.ravel()
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(f"# net-hash={gf.net.digest()}, dims={dims}, s={gf.s}\n")
        for x, v in zip(nodes, vals):
            fh.write(",".join(f"{c:.17g}" for c in x) + f",{v:.17g}\n")


def load_csv(path, net: Net | None = None) -> GridFunction:
    """Inverse of :func:`save_csv`.  Without ``net`` the knots are recovered
    as every ``s``-th grid coordinate."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        m = _HEADER.match(header.strip())
        if m is None:
            raise FunctionError(f"bad header line: {header.strip()!r}")
        digest, dims, s = m.group(1), tuple(int(d) for d in m.group(2).split("x")), int(m.group(3))
        try:
            rows = np.array(
                [[float(v) for v in line.split(",")] for line in fh if line.strip()],
                dtype=float,
            )
        except ValueError as err:
            raise FunctionError(f"malformed data row: {err}") from None
    n = len(dims)
    if rows.ndim != 2 or rows.shape != (int(np.prod(dims)), n + 1):
        raise FunctionError(f"expected {int(np.prod(dims))} rows of {n + 1} fields")
    axes = []
    for k in range(n):
        stride = int(np.prod(dims[k + 1:]))
        axes.append(rows[::stride, k][: dims[k]])
    if net is None:
        try:
            net = build_net([ax[::s] for ax in axes])
        except NetError as err:
            raise FunctionError(f"cannot rebuild net: {err}") from None
    if net.digest() != digest:
        raise FunctionError("file was written for a different net")
    expected = grid_axes(net, s)
    if any(len(a) != len(b) or not np.array_equal(a, b) for a, b in zip(axes, expected)):
        raise FunctionError("grid coordinates do not match the net")
    return GridFunction(net, s, rows[:, n].reshape(dims))
