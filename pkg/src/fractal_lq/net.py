"""Interpolation nets on hyperrectangles and the affine cell maps of the product IFS.

Each axis k carries knots ``y[k][0] < ... < y[k][N_k]``.  Cell ``j`` of an axis
(1-based, as everywhere in this package) is the interval ``[y[j-1], y[j]]`` and
is the image of the whole axis under the affine map ``v_j(t) = a_j t + b_j``.
Odd cells preserve orientation, even cells reverse it, so neighbouring maps
agree at the shared knot after inversion.

The product map ``Theta_J`` of a multi-index ``J = (j_1, ..., j_n)`` applies the
axis maps coordinate-wise.  Cells are assumed to overlap only on faces.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

TOL = 1e-12


class NetError(ValueError):
    pass


@dataclass(frozen=True)
class AxisPartition:
    knots: tuple[float, ...]

    def __post_init__(self):
        if len(self.knots) < 2:
            raise NetError("an axis partition needs at least two knots")
        diffs = np.diff(np.asarray(self.knots, dtype=float))
        if not np.all(diffs > 0):
            raise NetError(f"knots must be strictly increasing: {self.knots}")

    @property
    def count(self) -> int:
        """Number of cells N_k."""
        return len(self.knots) - 1

    @property
    def lo(self) -> float:
        return self.knots[0]

    @property
    def hi(self) -> float:
        return self.knots[-1]

    @property
    def width(self) -> float:
        return self.knots[-1] - self.knots[0]


@dataclass(frozen=True)
class AxisMap:
    axis: int
    cell: int
    slope: float
    offset: float

    def __call__(self, t):
        return self.slope * t + self.offset

    def inverse(self, t):
        return (t - self.offset) / self.slope


@dataclass(frozen=True)
class Net:
    partitions: tuple[AxisPartition, ...]
    node_data: Mapping[tuple[int, ...], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.partitions:
            raise NetError("a net needs at least one axis")
        if self.node_data is not None:
            expected = int(np.prod([p.count + 1 for p in self.partitions]))
            if len(self.node_data) != expected:
                raise NetError(
                    f"node data has {len(self.node_data)} entries, expected {expected}"
                )
            for key in self.node_data:
                if len(key) != self.dim or any(
                    not 0 <= k <= p.count for k, p in zip(key, self.partitions)
                ):
                    raise NetError(f"node index {key} outside the net")

    @property
    def dim(self) -> int:
        return len(self.partitions)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(p.count for p in self.partitions)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lo for p in self.partitions])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.hi for p in self.partitions])

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def corners(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*[(p.lo, p.hi) for p in self.partitions]))

    def cells(self) -> list[tuple[int, ...]]:
        """All multi-indices in row-major order."""
        return list(itertools.product(*[range(1, c + 1) for c in self.counts]))

    def knot_nodes(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*[p.knots for p in self.partitions]))

    def digest(self) -> str:
        text = ";".join(",".join(repr(float(k)) for k in p.knots) for p in self.partitions)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @cached_property
    def _maps(self) -> tuple[tuple[AxisMap, ...], ...]:
        return tuple(
            tuple(axis_map(p, j, axis=k) for j in range(1, p.count + 1))
            for k, p in enumerate(self.partitions)
        )

    def axis_maps(self) -> tuple[tuple[AxisMap, ...], ...]:
        return self._maps

    def affine_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Slopes and offsets shaped ``(n_cells, dim)``, rows in :meth:`cells` order."""
        maps = self.axis_maps()
        cells = self.cells()
        slopes = np.array([[maps[k][J[k] - 1].slope for k in range(self.dim)] for J in cells])
        offsets = np.array([[maps[k][J[k] - 1].offset for k in range(self.dim)] for J in cells])
        return slopes, offsets

    def contains(self, point, tol: float = TOL) -> bool:
        x = np.asarray(point, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))


def build_net(partitions: Sequence[Sequence[float]], node_data=None) -> Net:
    """Validate knot sequences (one per axis) and optional node values.

    ``node_data`` may be a mapping from full multi-indices ``(j_1, ..., j_n)``
    with ``0 <= j_k <= N_k`` to values, or an array shaped ``(N_1+1, ..., N_n+1)``.
    """
    parts = tuple(AxisPartition(tuple(float(k) for k in knots)) for knots in partitions)
    if node_data is not None and not isinstance(node_data, Mapping):
        arr = np.asarray(node_data, dtype=float)
        shape = tuple(p.count + 1 for p in parts)
        if arr.shape != shape:
            raise NetError(f"node data shape {arr.shape} does not match {shape}")
        node_data = {idx: float(arr[idx]) for idx in np.ndindex(*shape)}
    elif node_data is not None:
        node_data = {tuple(int(i) for i in k): float(v) for k, v in node_data.items()}
    return Net(parts, node_data)


def tau(j: int, endpoint_is_last: bool) -> int:
    """Index of the knot that cell ``j``'s map sends the first (or last) knot to.

    ``endpoint_is_last`` selects the endpoint ``N`` instead of ``0``.
    """
    odd = j % 2 == 1
    if endpoint_is_last:
        return j if odd else j - 1
    return j - 1 if odd else j


def axis_map(partition: AxisPartition, j: int, axis: int = 0) -> AxisMap:
    """Affine map of the whole axis onto cell ``j``, fixed by its two endpoint images."""
    if not 1 <= j <= partition.count:
        raise NetError(f"cell index {j} outside 1..{partition.count}")
    y = partition.knots
    y0, yN = y[0], y[-1]
    # images of y0 and yN
    u, w = y[tau(j, False)], y[tau(j, True)]
    slope = (w - u) / (yN - y0)
    offset = u - slope * y0
    return AxisMap(axis, j, slope, offset)


def _check_index(net: Net, J) -> tuple[int, ...]:
    J = tuple(int(j) for j in J)
    if len(J) != net.dim or any(not 1 <= j <= c for j, c in zip(J, net.counts)):
        raise NetError(f"multi-index {J} invalid for counts {net.counts}")
    return J


def cell_bounds(net: Net, J) -> tuple[np.ndarray, np.ndarray]:
    J = _check_index(net, J)
    lo = np.array([p.knots[j - 1] for p, j in zip(net.partitions, J)])
    hi = np.array([p.knots[j] for p, j in zip(net.partitions, J)])
    return lo, hi


def cell_map_apply(net: Net, J, point) -> np.ndarray:
    """Image of ``point`` under ``Theta_J``."""
    J = _check_index(net, J)
    x = np.asarray(point, dtype=float)
    if not net.contains(x):
        raise NetError(f"point {x} outside the domain")
    maps = net.axis_maps()
    return np.array([maps[k][J[k] - 1](x[k]) for k in range(net.dim)])


def cell_map_inverse(net: Net, J, point) -> np.ndarray:
    J = _check_index(net, J)
    x = np.asarray(point, dtype=float)
    lo, hi = cell_bounds(net, J)
    if np.any(x < lo - TOL) or np.any(x > hi + TOL):
        raise NetError(f"point {x} outside cell {J}")
    maps = net.axis_maps()
    out = np.array([maps[k][J[k] - 1].inverse(x[k]) for k in range(net.dim)])
    return np.clip(out, net.lower, net.upper)


def locate_axis(knots: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Half-open cell lookup along one axis; the last knot belongs to cell N."""
    idx = np.searchsorted(knots, t, side="right")
    return np.clip(idx, 1, len(knots) - 1)


def locate_cell(net: Net, point) -> tuple[int, ...]:
    x = np.asarray(point, dtype=float)
    if x.shape != (net.dim,) or not net.contains(x):
        raise NetError(f"point {x} outside the domain")
    return tuple(
        int(locate_axis(np.asarray(p.knots), np.array([x[k]]))[0])
        for k, p in enumerate(net.partitions)
    )


def locate_cells(net: Net, points: np.ndarray) -> np.ndarray:
    """Vectorised :func:`locate_cell`; returns an ``(m, dim)`` integer array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cols = [
        locate_axis(np.asarray(p.knots), pts[:, k]) for k, p in enumerate(net.partitions)
    ]
    return np.stack(cols, axis=1)


def flat_cell_index(net: Net, J: np.ndarray) -> np.ndarray:
    """Row-major position of 1-based multi-indices in :meth:`Net.cells`."""
    J = np.atleast_2d(J) - 1
    return np.ravel_multi_index(tuple(J.T), net.counts)


def read_knots_csv(path) -> list[list[float]]:
    """One row per axis, comma separated."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    return [[float(v) for v in row if v.strip()] for row in rows]


def read_node_data_csv(path, dim: int) -> dict[tuple[int, ...], float]:
    """Rows ``j_1,...,j_n,value``."""
    data = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != dim + 1:
                raise NetError(f"node data row {row} should have {dim + 1} fields")
            data[tuple(int(v) for v in row[:dim])] = float(row[dim])
    return data


def load_net_csv(knots_path, node_data_path=None) -> Net:
    knots = read_knots_csv(knots_path)
    nodes = read_node_data_csv(node_data_path, len(knots)) if node_data_path else None
    return build_net(knots, nodes)
