"""Quadrature grids on box domains and on the unit time period."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Composite quadrature nodes and weights on a 1D or 2D box.

    ``nodes`` has shape (n, dim). For 2D grids the nodes are ordered with the
    first axis varying slowest (``np.meshgrid(..., indexing="ij")``).
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    bounds: tuple[tuple[float, float], ...]
    shape: tuple[int, ...]
    rule: str = "midpoint"

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.bounds]))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (m if self.rule == "midpoint" else m - 1)
                     for (a, b), m in zip(self.bounds, self.shape))

    @property
    def x(self) -> np.ndarray:
        """First coordinate of every node (convenient in 1D)."""
        return self.nodes[:, 0]


@dataclass(frozen=True)
class TimeGrid:
    steps: int
    knots: np.ndarray = field(repr=False)

    @property
    def dt(self) -> float:
        return 1.0 / self.steps


def build_time_grid(steps: int) -> TimeGrid:
    if steps < 4:
        raise ValueError(f"time grid needs at least 4 steps, got {steps}")
    return TimeGrid(steps=int(steps), knots=np.linspace(0.0, 1.0, steps + 1))


def _axis_rule(a: float, b: float, m: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    if rule == "midpoint":
        h = (b - a) / m
        return a + h * (np.arange(m) + 0.5), np.full(m, h)
    if rule == "trapezoid":
        h = (b - a) / (m - 1)
        w = np.full(m, h)
        w[0] = w[-1] = h / 2
        return np.linspace(a, b, m), w
    raise ValueError(f"unknown quadrature rule {rule!r}")


def build_spatial_grid(bounds: Sequence[Sequence[float]] | Sequence[float],
                       n_per_axis: int | Sequence[int],
                       rule: str = "midpoint") -> SpatialGrid:
    """Tensor-product composite rule on a box.

    ``bounds`` is ``(a, b)`` for an interval or ``((a1, b1), (a2, b2))`` for a
    rectangle.
    """
    if np.ndim(bounds) == 1:
        bounds = [bounds]
    box = tuple((float(a), float(b)) for a, b in bounds)
    dim = len(box)
    if dim not in (1, 2):
        raise ValueError("only 1D and 2D boxes are supported")
    if any(b - a <= 0 for a, b in box):
        raise ValueError(f"degenerate box {box}: zero or negative volume")
    shape = (int(n_per_axis),) * dim if np.ndim(n_per_axis) == 0 else tuple(int(m) for m in n_per_axis)
    if len(shape) != dim:
        raise ValueError("n_per_axis does not match the box dimension")
    if min(shape) < 2:
        raise ValueError("need at least 2 nodes per axis")

    axes = [_axis_rule(a, b, m, rule) for (a, b), m in zip(box, shape)]
    if dim == 1:
        nodes = axes[0][0][:, None]
        weights = axes[0][1].copy()
    else:
        X, Y = np.meshgrid(axes[0][0], axes[1][0], indexing="ij")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        weights = np.outer(axes[0][1], axes[1][1]).ravel()
    return SpatialGrid(dim=dim, nodes=nodes, weights=weights, bounds=box, shape=shape, rule=rule)


def quadrature(samples, grid: SpatialGrid) -> float:
    """Weighted sum of per-node samples."""
    f = np.asarray(samples, dtype=float)
    if f.shape[0] != grid.n:
        raise ValueError(f"expected {grid.n} samples, got {f.shape[0]}")
    return float(grid.weights @ f)


def subgrid(grid: SpatialGrid, bounds: Sequence[Sequence[float]] | Sequence[float]) -> np.ndarray:
    """Indices of the nodes of ``grid`` lying inside a smaller box."""
    if np.ndim(bounds) == 1:
        bounds = [bounds]
    mask = np.ones(grid.n, dtype=bool)
    for d, (a, b) in enumerate(bounds):
        mask &= (grid.nodes[:, d] >= a) & (grid.nodes[:, d] <= b)
    return np.flatnonzero(mask)
