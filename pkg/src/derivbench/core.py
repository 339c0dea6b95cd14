"""Uniform grids, sampled fields, and the error metric shared by all methods.

A ``Grid`` is a 1-D or 2-D rectilinear lattice with exactly uniform node
spacing; a ``Field`` holds one finite float64 value per node in row-major
order (time axis first for 2-D data).  Both are immutable after
construction, so they can be shared freely between threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Axis naming convention used in CSV headers and derivative labels:
# axis 0 is time, axis 1 is space.
AXIS_NAMES = ("t", "x")

MAX_DIMS = 2


@dataclass(frozen=True)
class Axis:
    """One grid axis: `n` uniformly spaced nodes from `start` to `stop`."""

    start: float
    stop: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ValueError("axis bounds must be finite")
        if self.n < 3:
            raise ValueError(f"axis needs at least 3 nodes, got {self.n}")
        if not self.stop > self.start:
            raise ValueError(f"axis requires stop > start, got [{self.start}, {self.stop}]")

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.n - 1)

    def nodes(self) -> np.ndarray:
        # Exactly start + i*step, matching the constructor contract.
        return self.start + self.step * np.arange(self.n)


@dataclass(frozen=True)
class Grid:
    axes: tuple[Axis, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.axes) <= MAX_DIMS:
            raise ValueError(f"grids must have 1..{MAX_DIMS} axes, got {len(self.axes)}")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.n for ax in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays of shape `self.shape`, one per axis."""
        return tuple(np.meshgrid(*(ax.nodes() for ax in self.axes), indexing="ij"))

    def axis_names(self) -> tuple[str, ...]:
        return AXIS_NAMES[: self.ndim]


def make_uniform_grid(extents: Sequence[tuple[float, float, int]]) -> Grid:
    """Build a uniform grid from (start, stop, n) triples, one per axis."""
    return Grid(tuple(Axis(float(a), float(b), int(n)) for a, b, n in extents))


@dataclass(frozen=True)
class Field:
    """Finite float64 samples over a grid, row-major node order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.size != self.grid.size:
            raise ValueError(
                f"value count {vals.size} does not match grid size {self.grid.size}"
            )
        vals = vals.reshape(self.grid.shape).copy()
        if not np.all(np.isfinite(vals)):
            bad = np.unravel_index(int(np.argmin(np.isfinite(vals))), self.grid.shape)
            raise ValueError(f"non-finite value at node index {bad}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


def sample_function(grid: Grid, f: Callable[..., float]) -> Field:
    """Evaluate `f` on every grid node.

    `f` receives one coordinate argument per axis.  Vectorized (numpy-aware)
    callables are evaluated in one shot; plain scalar callables are looped.
    A non-finite output raises with the offending node's coordinates.
    """
    coords = grid.coords()
    try:
        values = np.asarray(f(*coords), dtype=np.float64)
        if values.shape != grid.shape:
            values = np.broadcast_to(values, grid.shape).copy()
    except (TypeError, ValueError):
        values = np.empty(grid.shape, dtype=np.float64)
        it = np.nditer(coords[0], flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            values[idx] = f(*(c[idx] for c in coords))

    finite = np.isfinite(values)
    if not finite.all():
        idx = np.unravel_index(int(np.argmin(finite)), grid.shape)
        where = ", ".join(
            f"{name}={coords[d][idx]!r}" for d, name in enumerate(grid.axis_names())
        )
        raise ValueError(f"function returned non-finite value at node ({where})")
    return Field(grid, values)


def mse(a: Field, b: Field) -> float:
    """Mean squared pointwise difference of two fields on one grid."""
    if a.grid != b.grid:
        raise ValueError("mse requires fields on the same grid")
    diff = a.values - b.values
    return float(np.mean(diff * diff))


def masked_mse(estimate: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    """MSE restricted to mask-true nodes (used for derivative quality)."""
    if not mask.any():
        raise ValueError("mask selects no nodes")
    diff = estimate[mask] - truth[mask]
    return float(np.mean(diff * diff))


def write_field_csv(field: Field, path) -> None:
    """One header row naming the axes, then coordinate columns + value.

    Floats are written with 17 significant digits so the round trip is exact.
    """
    coords = field.grid.coords()
    names = field.grid.axis_names()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["value"])
        flat_coords = [c.reshape(-1) for c in coords]
        for i, v in enumerate(field.flat):
            writer.writerow([f"{c[i]:.17g}" for c in flat_coords] + [f"{v:.17g}"])


def read_field_csv(path) -> Field:
    """Inverse of :func:`write_field_csv`; validates grid uniformity."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader if row]
    ndim = len(header) - 1
    if ndim < 1 or header[-1] != "value":
        raise ValueError(f"malformed field CSV header: {header}")
    data = np.asarray(rows, dtype=np.float64)
    axes = []
    for d in range(ndim):
        nodes = np.unique(data[:, d])
        if len(nodes) < 3:
            raise ValueError(f"axis {header[d]} has fewer than 3 distinct nodes")
        steps = np.diff(nodes)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError(f"axis {header[d]} is not uniform")
        axes.append(Axis(float(nodes[0]), float(nodes[-1]), len(nodes)))
    grid = Grid(tuple(axes))
    if data.shape[0] != grid.size:
        raise ValueError("row count does not match grid size")
    # Rows may arrive in any order; sort into row-major node order.
    order = np.lexsort(tuple(data[:, d] for d in reversed(range(ndim))))
    return Field(grid, data[order, -1])
