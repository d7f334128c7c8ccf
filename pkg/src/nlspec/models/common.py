"""Shared helpers for the application models."""

from __future__ import annotations

import numpy as np

from ..fields import _callable_from_spec
from ..grid import SpatialGrid

SUB = 4  # reaction stages sit on quarter steps


class PeriodicTable:
    """A scalar coefficient tabulated on quarter steps of one period, looked up by time."""

    def __init__(self, source, grid: SpatialGrid, steps: int):
        fn = _callable_from_spec(source, grid.dim)
        self.m = SUB * steps
        self.values = np.stack([np.broadcast_to(np.asarray(fn(grid.nodes, j / self.m))[:, 0, 0], (grid.n,))
                                for j in range(self.m)]).astype(float)

    def __call__(self, t: float) -> np.ndarray:
        return self.values[int(round(t * self.m)) % self.m]

    def knots(self, steps: int) -> np.ndarray:
        """Values at t = k / steps, k = 0 .. steps (closed period)."""
        idx = (np.arange(steps + 1) * (self.m // steps)) % self.m
        return self.values[idx]


def pairing(u: np.ndarray, v: np.ndarray, weights: np.ndarray) -> float:
    """<u, v> = sum_i int u_i v_i dx for per-node states of shape (n, l)."""
    return float(np.einsum("n,ni,ni->", weights, u, v))
