"""Local (diffusive) time-periodic Dirichlet eigenproblem used as the small-range reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import KernelSet, MatrixField, kernel_second_moment
from .floquet import PeriodicSystem, SpectralResult, spectral_bound_system
from .grid import SpatialGrid, TimeGrid
from .operator import OperatorSpec


def effective_diffusivity(kernels: KernelSet, d_field: MatrixField | np.ndarray | float,
                          dim: int | None = None) -> MatrixField | np.ndarray:
    """d_r,i = d_i m2_i / (2N), with m2 the second moment of each kernel as given."""
    if isinstance(d_field, MatrixField):
        steps = d_field.steps
        times = np.arange(steps + 1) / steps if kernels.time_dependent else [0.0]
        m2 = kernel_second_moment(kernels, times)  # (l, T)
        N = d_field.grid.dim
        d = d_field.diagonal()  # (T, n, l)
        factor = (m2.T[:, None, :] if kernels.time_dependent else m2[:, 0][None, None, :]) / (2 * N)
        dr = d * factor
        vals = np.zeros_like(d_field.values)
        idx = np.arange(d_field.l)
        vals[..., idx, idx] = dr
        fn = None
        if d_field.fn is not None and not kernels.time_dependent:
            f0 = m2[:, 0] / (2 * N)

            def fn(points, t):
                v = d_field.at_points(points, t)
                out = np.zeros_like(v)
                out[..., idx, idx] = np.diagonal(v, axis1=-2, axis2=-1) * f0
                return out
        return MatrixField(vals, d_field.grid, fn, "Dr")
    N = dim or kernels[0].dim
    m2 = kernel_second_moment(kernels)[:, 0]
    return np.asarray(d_field, dtype=float) * m2 / (2 * N)


def interior_grid(bounds, n_per_axis) -> SpatialGrid:
    """Uniform interior nodes a + i h, i = 1..n, h = (b - a)/(n + 1) (boundary values are zero)."""
    if np.ndim(bounds) == 1:
        bounds = [bounds]
    box = tuple((float(a), float(b)) for a, b in bounds)
    shape = (int(n_per_axis),) * len(box) if np.ndim(n_per_axis) == 0 else tuple(int(m) for m in n_per_axis)
    if min(shape) < 10:
        raise ValueError("local problems need at least 10 interior nodes per axis")
    axes = [a + (b - a) / (m + 1) * np.arange(1, m + 1) for (a, b), m in zip(box, shape)]
    hs = [(b - a) / (m + 1) for (a, b), m in zip(box, shape)]
    if len(box) == 1:
        nodes = axes[0][:, None]
        weights = np.full(shape[0], hs[0])
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.column_stack([X.ravel(), Y.ravel()])
        weights = np.full(nodes.shape[0], hs[0] * hs[1])
    return SpatialGrid(len(box), nodes, weights, box, shape, "interior")


def dirichlet_laplacian(grid: SpatialGrid) -> np.ndarray:
    """3-point (1D) or 5-point (2D) Laplacian on interior nodes with zero boundary values."""
    def lap1(m, h):
        return (np.diag(np.full(m - 1, 1.0), -1) - 2 * np.eye(m) + np.diag(np.full(m - 1, 1.0), 1)) / h ** 2

    hs = [(b - a) / (m + 1) for (a, b), m in zip(grid.bounds, grid.shape)]
    if grid.dim == 1:
        return lap1(grid.shape[0], hs[0])
    L1, L2 = lap1(grid.shape[0], hs[0]), lap1(grid.shape[1], hs[1])
    return np.kron(L1, np.eye(grid.shape[1])) + np.kron(np.eye(grid.shape[0]), L2)


@dataclass(eq=False)
class LocalProblem:
    D_r: MatrixField
    A: MatrixField
    tau: float
    grid: SpatialGrid
    time_grid: TimeGrid

    @property
    def l(self) -> int:
        return self.A.l

    def system(self) -> PeriodicSystem:
        n, l = self.grid.n, self.l
        lap = dirichlet_laplacian(self.grid)
        auto = self.D_r.time_constant and self.A.time_constant

        def G(t):
            d = np.diagonal(self.D_r.at(t), axis1=-2, axis2=-1)
            a = self.A.at(t)
            out = np.zeros((n * l, n * l))
            for i in range(l):
                rows = slice(i * n, (i + 1) * n)
                out[rows, rows] = d[:, i][:, None] * lap
                for j in range(l):
                    cols = slice(j * n, (j + 1) * n)
                    out[rows, cols][np.diag_indices(n)] += a[:, i, j]
            return out

        return PeriodicSystem(n * l, G, self.tau, self.time_grid.steps, auto, np.tile(self.grid.weights, l),
                              "local")


def local_principal_eigen(problem: LocalProblem, stepper: str = "cf4") -> SpectralResult:
    """lambda_local = tau ln r(V_r(1, 0)) with Dirichlet finite differences."""
    res = spectral_bound_system(problem.system(), problem.grid.n, problem.l, stepper, with_adjoint=False)
    res.is_principal_eigenvalue = bool(res.converged and res.eigenfunction.min() > 0)
    res.reason = "local Dirichlet problem"
    return res


def resample(field: MatrixField, grid: SpatialGrid, role: str | None = None) -> MatrixField:
    """The same field on another grid (exact when the field is analytic, interpolated otherwise)."""
    steps = field.steps
    vals = np.stack([field.at_points(grid.nodes, k / steps) for k in range(steps + 1)])
    fn = None
    if field.fn is not None:
        fn = field.fn
    return MatrixField(vals, grid, fn, role or field.role)


def local_problem_from_spec(spec: OperatorSpec, n_interior: int | None = None) -> LocalProblem:
    """Local limit of a scaled operator (m = 2): diffusivity from the base kernels and rates."""
    if not spec.scaled:
        raise ValueError("local limits are defined for scaled operators")
    grid = interior_grid(spec.grid.bounds, n_interior or spec.grid.shape)
    base = KernelSet(spec.kernels.kernels, 1.0)
    rates = resample(spec.rates, grid, "d")
    A = resample(spec.A, grid, "A")
    return LocalProblem(effective_diffusivity(base, rates), A, spec.tau, grid, spec.time_grid)
