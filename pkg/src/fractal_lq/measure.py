"""The invariant (Hutchinson) measure of the product IFS ``{Theta_J}``.

Under the just-touching assumption (cells meet only on faces) the depth-``m``
cylinder cell ``Theta_{J_1} o ... o Theta_{J_m}(I^n)`` carries mass
``p_{J_1} * ... * p_{J_m}``.  Deterministic quadrature puts that mass at the
image of the domain centre; the chaos game gives Monte Carlo estimates.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import accumulate
from typing import Callable, Iterator, Sequence

import numpy as np

from .net import Net

ADDRESS_CAP = 10**7
BLOCK = 2**18
DEFAULT_BURN_IN = 100


class MeasureError(ValueError):
    pass


def worker_count() -> int:
    """Worker cap from ``FRACTAL_LQ_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("FRACTAL_LQ_THREADS", "1")))
    except ValueError:
        return 1


class ProbabilityVector:
    """Strictly positive weights over the cells of a net, summing to one."""

    def __init__(self, net: Net, weights):
        w = np.asarray(weights, dtype=float).reshape(net.counts)
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise MeasureError("probabilities must be finite and strictly positive")
        if abs(math.fsum(w.ravel()) - 1.0) > 1e-12:
            raise MeasureError(f"probabilities sum to {math.fsum(w.ravel())!r}, not 1")
        self.net = net
        self.weights = w
        self.weights.flags.writeable = False

    @classmethod
    def uniform(cls, net: Net) -> "ProbabilityVector":
        return cls(net, np.full(net.counts, 1.0 / net.n_cells))

    @classmethod
    def normalized(cls, net: Net, raw) -> "ProbabilityVector":
        raw = np.asarray(raw, dtype=float)
        return cls(net, raw / raw.sum())

    @property
    def flat(self) -> np.ndarray:
        return self.weights.ravel()

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.flat, self.flat[0], rtol=0, atol=1e-15))

    def __getitem__(self, J) -> float:
        return float(self.weights[tuple(j - 1 for j in J)])

    def __repr__(self):
        return f"ProbabilityVector({self.flat.tolist()})"


def cell_mass(p: ProbabilityVector, address: Sequence[Sequence[int]]) -> float:
    """Mass of the cylinder cell with the given address (outermost map first)."""
    mass = 1.0
    for J in address:
        mass *= p[J]
    return mass


def cylinder_masses(p: ProbabilityVector, depth: int) -> tuple[list, np.ndarray]:
    """All depth-``depth`` addresses (row-major, outermost first) and their masses."""
    cells = p.net.cells()
    count = len(cells) ** depth
    if count > ADDRESS_CAP:
        raise MeasureError(f"{count} addresses exceed the cap of {ADDRESS_CAP}")
    masses = np.ones(1)
    for _ in range(depth):
        masses = np.outer(masses, p.flat).ravel()
    addresses = [list(a) for a in _product(cells, depth)]
    return addresses, masses


def _product(cells, depth):
    if depth == 0:
        yield ()
        return
    for head in _product(cells, depth - 1):
        for J in cells:
            yield head + (J,)


def quadrature_nodes(
    p: ProbabilityVector, depth: int, cap: int = ADDRESS_CAP, block: int = BLOCK
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(points, weights)`` blocks covering every depth-``depth`` address.

    Points are images of the domain centre, i.e. centres of the cylinder cells.
    """
    net = p.net
    n_cells = net.n_cells
    if depth < 0:
        raise MeasureError("depth must be non-negative")
    if n_cells**depth > cap:
        raise MeasureError(f"{n_cells}**{depth} addresses exceed the cap of {cap}")
    slopes, offsets = net.affine_table()
    pw = p.flat

    def full(m):
        pts = net.center[None, :]
        w = np.ones(1)
        for _ in range(m):
            pts = (slopes[:, None, :] * pts[None] + offsets[:, None, :]).reshape(-1, net.dim)
            w = (pw[:, None] * w[None]).ravel()
        return pts, w

    def split(m):
        if n_cells**m <= block:
            yield full(m)
            return
        for c in range(n_cells):
            for pts, w in split(m - 1):
                yield slopes[c] * pts + offsets[c], pw[c] * w

    yield from split(depth)


def integrate(f: Callable, p: ProbabilityVector, depth: int, cap: int = ADDRESS_CAP) -> float:
    """Deterministic depth-``depth`` quadrature of ``f`` against the invariant measure."""

    def part(block):
        pts, w = block
        vals = np.asarray(f(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise MeasureError("integrand is not finite at a quadrature node")
        return math.fsum(w * vals)

    blocks = quadrature_nodes(p, depth, cap)
    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(part, blocks))
    else:
        parts = [part(b) for b in blocks]
    return math.fsum(parts)


def exact_lq_integral(f: Callable, q: float, p: ProbabilityVector, depth: int, cap: int = ADDRESS_CAP) -> float:
    if depth < 1:
        raise MeasureError("exact quadrature needs depth >= 1")
    return integrate(lambda pts: np.abs(np.asarray(f(pts), dtype=float)) ** q, p, depth, cap)


class ChaosGameSampler:
    """Seeded chaos game for ``mu_p``.

    Starts at the domain centre, applies ``Theta_J`` with ``J ~ p`` each step
    and discards the first ``burn_in`` points on the first draw.  Later calls
    continue the same chain.
    """

    def __init__(self, net: Net, p: ProbabilityVector, seed: int = 0, burn_in: int = DEFAULT_BURN_IN):
        if p.net != net:
            raise MeasureError("probability vector belongs to a different net")
        self.net = net
        self.p = p
        self.seed = int(seed)
        self.burn_in = int(burn_in)
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self.point = net.center.copy()
        self._burned = False
        self._slopes, self._offsets = net.affine_table()

    def samples(self, count: int) -> np.ndarray:
        if count < 1:
            raise MeasureError("need at least one sample")
        skip = 0 if self._burned else self.burn_in
        choice = self.rng.choice(self.net.n_cells, size=skip + count, p=self.p.flat)
        out = np.empty((count, self.net.dim))
        for k in range(self.net.dim):
            a = self._slopes[choice, k].tolist()
            b = self._offsets[choice, k].tolist()
            chain = accumulate(zip(a, b), lambda x, ab: ab[0] * x + ab[1], initial=float(self.point[k]))
            xs = np.fromiter(chain, dtype=float, count=skip + count + 1)
            out[:, k] = xs[skip + 1:]
        self.point = out[-1].copy()
        self._burned = True
        return out


def chaos_samples(sampler: ChaosGameSampler, count: int) -> np.ndarray:
    return sampler.samples(count)


def mc_lq_integral(f: Callable, q: float, sampler: ChaosGameSampler, count: int) -> tuple[float, float]:
    """Sample mean of ``|f|^q`` over chaos-game points and its standard error.

    The standard error is ``std / sqrt(count)``; it ignores the (weak)
    autocorrelation of the chain.
    """
    if count < 2:
        raise MeasureError("need at least two samples for a standard error")
    vals = np.abs(np.asarray(f(sampler.samples(count)), dtype=float)) ** q
    if not np.all(np.isfinite(vals)):
        raise MeasureError("integrand is not finite at a sample point")
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(count))


@dataclass(frozen=True)
class Quadrature:
    """Either exact depth-``depth`` quadrature or ``n`` chaos-game samples."""

    kind: str = "exact"
    depth: int = 4
    n: int = 10**6
    seed: int = 0

    @classmethod
    def exact(cls, depth: int = 4) -> "Quadrature":
        return cls("exact", depth=depth)

    @classmethod
    def mc(cls, n: int, seed: int = 0) -> "Quadrature":
        return cls("mc", n=n, seed=seed)

    def lq_integral(self, f: Callable, q: float, p: ProbabilityVector) -> float:
        if self.kind == "exact":
            return exact_lq_integral(f, q, p, self.depth)
        if self.kind == "mc":
            return mc_lq_integral(f, q, ChaosGameSampler(p.net, p, self.seed), self.n)[0]
        raise MeasureError(f"unknown quadrature kind {self.kind!r}")

    def describe(self) -> str:
        return f"exact(depth={self.depth})" if self.kind == "exact" else f"mc(n={self.n}, seed={self.seed})"


def lq_norm(f: Callable, q: float, p: ProbabilityVector, method: Quadrature = Quadrature()) -> float:
    if q < 1:
        raise MeasureError("q must be >= 1")
    return method.lq_integral(f, q, p) ** (1.0 / q)


def invariance_residual(phi: Callable, p: ProbabilityVector, depth: int) -> float:
    """``|int phi dmu - sum_J p_J int phi o Theta_J dmu|`` at quadrature depth ``depth``."""
    net = p.net
    slopes, offsets = net.affine_table()
    lhs = integrate(phi, p, depth)
    terms = []
    for c, pj in enumerate(p.flat):
        a, b = slopes[c], offsets[c]
        terms.append(pj * integrate(lambda pts, a=a, b=b: phi(a * pts + b), p, depth))
    return abs(lhs - math.fsum(terms))
