"""Coefficient fields, dispersal kernels and structural condition checks."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .expr import Expression, parse_expression
from .grid import SpatialGrid, TimeGrid

ZERO_TOL = 1e-14
PERIODICITY_TOL = 1e-10


# ---------------------------------------------------------------------------
# matrix-valued fields


def _as_matrix_batch(value, m: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 2:
        arr = np.broadcast_to(arr, (m,) + arr.shape)
    if arr.ndim == 1:  # (m,) scalar field
        arr = arr.reshape(m, 1, 1)
    return np.ascontiguousarray(np.broadcast_to(arr, (m,) + arr.shape[-2:]), dtype=float)


@dataclass(frozen=True, eq=False)
class MatrixField:
    """An l x l matrix per (node, time knot), 1-periodic in time.

    ``values`` has shape (steps + 1, n, l, l) and includes the knot t = 1.
    When ``fn`` is set (an analytic ``fn(points, t) -> (m, l, l)``) off-knot
    times and off-grid points are evaluated exactly; tabulated fields are
    interpolated linearly in time, which keeps entrywise orderings between
    fields intact at every intermediate time.
    """

    values: np.ndarray
    grid: SpatialGrid
    fn: Callable[[np.ndarray, float], np.ndarray] | None = None
    role: str = "A"

    @property
    def l(self) -> int:
        return self.values.shape[-1]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @cached_property
    def time_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    def at(self, t: float) -> np.ndarray:
        t = float(t) % 1.0
        s = t * self.steps
        k = int(np.floor(s))
        frac = s - k
        if frac < 1e-13:
            return self.values[k]
        if frac > 1.0 - 1e-13:
            return self.values[(k + 1) % (self.steps + 1)]
        if self.fn is not None:
            return _as_matrix_batch(self.fn(self.grid.nodes, t), self.n)
        return (1.0 - frac) * self.values[k] + frac * self.values[k + 1]

    def at_points(self, points: np.ndarray, t: float) -> np.ndarray:
        """Evaluate at arbitrary points; outside the box the nearest boundary value is used."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([a for a, _ in self.grid.bounds])
        hi = np.array([b for _, b in self.grid.bounds])
        pts = np.clip(pts, lo, hi)
        if self.fn is not None:
            return _as_matrix_batch(self.fn(pts, float(t) % 1.0), pts.shape[0])
        frame = self.at(t)
        out = np.empty((pts.shape[0], self.l, self.l))
        if self.grid.dim == 1:
            xs = self.grid.x
            for i in range(self.l):
                for j in range(self.l):
                    out[:, i, j] = np.interp(pts[:, 0], xs, frame[:, i, j])
            return out
        from scipy.interpolate import RegularGridInterpolator

        ax = [np.unique(self.grid.nodes[:, d]) for d in range(2)]
        cube = frame.reshape(self.grid.shape + (self.l, self.l))
        interp = RegularGridInterpolator(ax, cube, bounds_error=False, fill_value=None)
        inside = np.clip(pts, [a[0] for a in ax], [a[-1] for a in ax])
        return interp(inside)

    def tabulated(self) -> "MatrixField":
        return MatrixField(self.values, self.grid, None, self.role)

    def replace(self, values: np.ndarray, fn=None, role: str | None = None) -> "MatrixField":
        return MatrixField(np.asarray(values, dtype=float), self.grid, fn, role or self.role)

    def diagonal(self) -> np.ndarray:
        return np.diagonal(self.values, axis1=-2, axis2=-1)

    def sup_distance(self, other: "MatrixField") -> float:
        return float(np.max(np.abs(self.values - other.values)))


def _callable_from_spec(spec, dim: int) -> Callable[[np.ndarray, float], np.ndarray]:
    """Turn a constant, a nested list of expressions, or a callable into fn(points, t)."""
    if callable(spec) and not isinstance(spec, Expression):
        return spec
    arr = np.asarray(spec, dtype=object)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = np.diag(arr) if arr.dtype != object else _diag_object(arr)
    exprs = [[e if isinstance(e, Expression) else parse_expression(e) for e in row] for row in arr]
    l = len(exprs)

    def fn(points: np.ndarray, t: float) -> np.ndarray:
        m = points.shape[0]
        env = {"t": np.full(m, t), "x": points[:, 0]}
        if dim == 2:
            env.update(x1=points[:, 0], x2=points[:, 1])
        out = np.empty((m, l, l))
        for i in range(l):
            for j in range(l):
                out[:, i, j] = np.broadcast_to(exprs[i][j](**env), (m,))
        return out

    return fn


def _diag_object(arr: np.ndarray) -> np.ndarray:
    out = np.full((arr.size, arr.size), "0", dtype=object)
    for i, v in enumerate(arr):
        out[i, i] = v
    return out


def sample_field(analytic_spec, spatial_grid: SpatialGrid, time_grid: TimeGrid,
                 role: str = "A", check_periodic: bool = True) -> MatrixField:
    """Tabulate an analytic matrix field at every node and knot.

    ``analytic_spec`` is a constant matrix, a nested list of expression
    strings, or a callable ``fn(points, t) -> (m, l, l)``.
    """
    fn = _callable_from_spec(analytic_spec, spatial_grid.dim)
    n = spatial_grid.n
    frames = [_as_matrix_batch(fn(spatial_grid.nodes, float(t)), n) for t in time_grid.knots]
    values = np.stack(frames)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{role}-field has non-finite samples")
    if check_periodic:
        gap = float(np.max(np.abs(values[0] - values[-1])))
        if gap > PERIODICITY_TOL:
            raise ValueError(f"{role}-field is not 1-periodic in t: |f(x,0) - f(x,1)| = {gap:.3e}")
    values[-1] = values[0]
    constant = bool(np.all(values == values[0]))
    return MatrixField(values, spatial_grid, None if constant else fn, role)


def constant_field(matrix, spatial_grid: SpatialGrid, time_grid: TimeGrid, role: str = "A") -> MatrixField:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    values = np.broadcast_to(m, (time_grid.steps + 1, spatial_grid.n) + m.shape).copy()
    return MatrixField(values, spatial_grid, None, role)


def diagonal_field(rates: MatrixField | np.ndarray, role: str = "D0") -> np.ndarray:
    """(steps+1, n, l, l) diagonal matrices from a diagonal field or per-species values."""
    v = rates.diagonal() if isinstance(rates, MatrixField) else np.asarray(rates)
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


# ---------------------------------------------------------------------------
# kernels


class Kernel:
    """Nonnegative dispersal kernel k(x, y, t)."""

    name = "kernel"
    convolution = False
    mass_normalized = False
    time_dependent = False
    symmetric = False
    radius: float | None = None
    radial = False

    def __call__(self, x: np.ndarray, y: np.ndarray, t: float, sigma: float = 1.0) -> np.ndarray:
        raise NotImplementedError


class ConvolutionKernel(Kernel):
    """k(x, y, t) = sigma^-N g((x - y) / sigma, t) for a profile g(z, t)."""

    convolution = True

    def __init__(self, profile: Callable[[np.ndarray, float], np.ndarray], dim: int, *,
                 radius: float | None, name: str, mass_normalized: bool,
                 symmetric: bool = True, radial: bool = False, time_dependent: bool = False):
        self.profile = profile
        self.dim = dim
        self.radius = radius
        self.name = name
        self.mass_normalized = mass_normalized
        self.symmetric = symmetric
        self.radial = radial
        self.time_dependent = time_dependent

    def __call__(self, x, y, t, sigma=1.0):
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        z = (x[:, None, :] - y[None, :, :]) / sigma
        return self.profile(z, float(t)) / sigma ** self.dim

    def __repr__(self) -> str:
        return f"ConvolutionKernel({self.name}, dim={self.dim})"


class GeneralKernel(Kernel):
    """Arbitrary k(x, y, t) given as a callable on node arrays."""

    def __init__(self, fn: Callable[[np.ndarray, np.ndarray, float], np.ndarray], *, name: str,
                 symmetric: bool = False, time_dependent: bool = False):
        self.fn = fn
        self.name = name
        self.symmetric = symmetric
        self.time_dependent = time_dependent

    def __call__(self, x, y, t, sigma=1.0):
        if sigma != 1.0:
            raise ValueError(f"kernel {self.name!r} is not of convolution form; cannot rescale")
        return np.asarray(self.fn(np.atleast_2d(x), np.atleast_2d(y), float(t)), dtype=float)

    def __repr__(self) -> str:
        return f"GeneralKernel({self.name})"


class TabulatedKernel(Kernel):
    """Kernel known only on a fixed node set (oracle tests)."""

    def __init__(self, values: np.ndarray, nodes: np.ndarray, name: str = "tabulated"):
        self.values = np.asarray(values, dtype=float)
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        self.name = name
        self.symmetric = bool(np.allclose(self.values, self.values.T, rtol=0, atol=1e-14))

    def __call__(self, x, y, t, sigma=1.0):
        if sigma != 1.0:
            raise ValueError("tabulated kernels cannot be rescaled")
        x = np.atleast_2d(x)
        y = np.atleast_2d(y)
        if x.shape == self.nodes.shape and np.array_equal(x, self.nodes) and np.array_equal(y, self.nodes):
            return self.values
        raise ValueError("tabulated kernel evaluated off its node set")


def _norm(z: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(z * z, axis=-1))


def _box(r: np.ndarray) -> np.ndarray:
    # the jump takes its mid value, so nodes sitting exactly on the support edge count half
    return np.where(np.abs(r - 1.0) <= 1e-9, 0.5, (r < 1.0).astype(float))


def uniform_kernel(dim: int = 1) -> ConvolutionKernel:
    c = 0.5 if dim == 1 else 1.0 / np.pi
    return ConvolutionKernel(lambda z, t: c * _box(_norm(z)), dim, radius=1.0, name="uniform",
                             mass_normalized=True, radial=True)


def triangular_kernel(dim: int = 1) -> ConvolutionKernel:
    c = 1.0 if dim == 1 else 3.0 / np.pi
    return ConvolutionKernel(lambda z, t: c * np.maximum(1.0 - _norm(z), 0.0), dim, radius=1.0,
                             name="triangular", mass_normalized=True, radial=True)


def gaussian_kernel(dim: int = 1, cutoff: float = 3.0) -> ConvolutionKernel:
    from scipy.special import erf, gammainc

    if dim == 1:
        c = 1.0 / (np.sqrt(2 * np.pi) * erf(cutoff / np.sqrt(2)))
    else:
        c = 1.0 / (2 * np.pi * gammainc(1.0, cutoff ** 2 / 2))
    return ConvolutionKernel(lambda z, t: c * np.exp(-0.5 * np.sum(z * z, axis=-1)) * (_norm(z) <= cutoff),
                             dim, radius=cutoff, name="gaussian", mass_normalized=True, radial=True)


def constant_kernel(value: float = 1.0, dim: int = 1) -> ConvolutionKernel:
    """k = value everywhere (unbounded support, not mass normalized)."""
    return ConvolutionKernel(lambda z, t: np.full(z.shape[:-1], float(value)), dim, radius=None,
                             name=f"constant({value:g})", mass_normalized=False, radial=True)


def separable_kernel(f: Callable | str, g: Callable | str, name: str = "separable") -> GeneralKernel:
    """Rank-one kernel k(x, y) = f(x) g(y) on the first coordinate."""
    fe = parse_expression(f) if isinstance(f, (str, int, float)) else f
    ge = parse_expression(g) if isinstance(g, (str, int, float)) else g

    def fx(pts):
        v = fe(x=pts[:, 0]) if isinstance(fe, Expression) else fe(pts[:, 0])
        return np.broadcast_to(np.asarray(v, dtype=float), (pts.shape[0],))

    def gy(pts):
        v = ge(x=pts[:, 0], y=pts[:, 0]) if isinstance(ge, Expression) else ge(pts[:, 0])
        return np.broadcast_to(np.asarray(v, dtype=float), (pts.shape[0],))

    sym = isinstance(fe, Expression) and isinstance(ge, Expression) and \
        fe.source.replace("y", "x") == ge.source.replace("y", "x")
    return GeneralKernel(lambda x, y, t: np.outer(fx(x), gy(y)), name=name, symmetric=sym)


def expression_kernel(source: str, dim: int = 1, radius: float | None = None,
                      mass_normalized: bool = False) -> Kernel:
    """Kernel from an expression; in terms of z (displacement) it is a convolution kernel."""
    e = parse_expression(source)
    td = "t" in e.names
    if set(e.names) <= {"z", "z1", "z2", "r", "t"}:
        def profile(z, t):
            env = {"t": t, "r": _norm(z), "z": z[..., 0]}
            if dim == 2:
                env.update(z1=z[..., 0], z2=z[..., 1])
            return np.broadcast_to(np.asarray(e(**env), dtype=float), z.shape[:-1])

        return ConvolutionKernel(profile, dim, radius=radius, name=source, mass_normalized=mass_normalized,
                                 symmetric=False, time_dependent=td)

    def fn(x, y, t):
        env = {"t": t, "x": x[:, None, 0], "y": y[None, :, 0]}
        if dim == 2:
            env.update(x1=x[:, None, 0], x2=x[:, None, 1], y1=y[None, :, 0], y2=y[None, :, 1])
        return np.broadcast_to(np.asarray(e(**env), dtype=float), (x.shape[0], y.shape[0]))

    return GeneralKernel(fn, name=source, time_dependent=td)


@dataclass(frozen=True, eq=False)
class KernelSet:
    """One kernel per species plus a common dispersal range sigma."""

    kernels: tuple[Kernel, ...]
    sigma: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def l(self) -> int:
        return len(self.kernels)

    def __getitem__(self, i: int) -> Kernel:
        return self.kernels[i]

    @property
    def convolution_form(self) -> bool:
        return all(k.convolution for k in self.kernels)

    @property
    def mass_normalized(self) -> bool:
        return all(k.mass_normalized for k in self.kernels)

    @property
    def time_dependent(self) -> bool:
        return any(k.time_dependent for k in self.kernels)

    def evaluate(self, i: int, x, y, t: float) -> np.ndarray:
        return self.kernels[i](x, y, t, self.sigma)

    def weighted_matrix(self, i: int, grid: SpatialGrid, t: float) -> np.ndarray:
        """Collocation matrix K[a, b] = k_i(x_a, y_b, t) w_b."""
        return self.evaluate(i, grid.nodes, grid.nodes, t) * grid.weights[None, :]


def kernel_set(kernels: Sequence[Kernel] | Kernel, l: int = 1, sigma: float = 1.0) -> KernelSet:
    if isinstance(kernels, Kernel):
        kernels = [kernels] * l
    return KernelSet(tuple(kernels), sigma)


def rescale_kernel(kernels: KernelSet, sigma: float) -> KernelSet:
    """k_sigma(z) = sigma^-N k(z / sigma); composes multiplicatively."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not kernels.convolution_form:
        raise ValueError("only convolution-form kernels can be rescaled")
    return KernelSet(kernels.kernels, kernels.sigma * sigma)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _piecewise_gauss(breaks: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        xs.append(0.5 * (b - a) * _GL_X + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * _GL_W)
    return np.concatenate(xs), np.concatenate(ws)


def kernel_moment(kernel: Kernel, power: int, t: float = 0.0) -> float:
    """int_{R^N} k(z, t) |z|^power dz for a base (sigma = 1) convolution kernel.

    Integrates over a box 1.5x the support, split at the support edge and at
    the origin so that kinks and jumps of the profile sit on panel boundaries.
    Raises if more than a negligible fraction of the mass lives outside the
    declared support.
    """
    if not kernel.convolution:
        raise ValueError(f"moments need a convolution kernel, got {kernel!r}")
    R = kernel.radius
    if R is None:
        raise ValueError(f"kernel {kernel.name!r} has unbounded support; moments undefined")
    dim = kernel.dim
    if dim == 1 or kernel.radial:
        r, w = _piecewise_gauss([0.0, R / 2, R, 1.25 * R, 1.5 * R])
        if dim == 1:
            zpos = np.column_stack([r])
            vals = kernel.profile(zpos, t) + kernel.profile(-zpos, t)
            jac = np.ones_like(r)
        else:
            vals = kernel.profile(np.column_stack([r, np.zeros_like(r)]), t)
            jac = 2 * np.pi * r
        dens = vals * jac
        tail = np.sum(w * dens * (r > R))
        total = np.sum(w * dens * r ** power)
    else:
        s, ws = _piecewise_gauss([-1.5 * R, -R, 0.0, R, 1.5 * R])
        Z1, Z2 = np.meshgrid(s, s, indexing="ij")
        z = np.stack([Z1, Z2], axis=-1)
        dens = kernel.profile(z, t) * np.outer(ws, ws)
        rr = np.sqrt(Z1 ** 2 + Z2 ** 2)
        tail = np.sum(dens * (np.maximum(np.abs(Z1), np.abs(Z2)) > R))
        total = np.sum(dens * rr ** power)
    if abs(tail) > 1e-10:
        raise ValueError(f"kernel {kernel.name!r} has mass {tail:.3e} outside its declared support")
    return float(total)


def kernel_mass(kernels: KernelSet, times: Sequence[float] = (0.0,)) -> np.ndarray:
    """int_{R^N} k_{i,sigma}(z, t) dz per species and time; invariant under sigma."""
    return np.array([[kernel_moment(k, 0, t) for t in times] for k in kernels.kernels])


def kernel_second_moment(kernels: KernelSet, times: Sequence[float] = (0.0,)) -> np.ndarray:
    """m2_i(t) = int k_{i,sigma}(z, t) |z|^2 dz, shape (l, len(times))."""
    base = np.array([[kernel_moment(k, 2, t) for t in times] for k in kernels.kernels])
    return kernels.sigma ** 2 * base


# ---------------------------------------------------------------------------
# structural conditions


def irreducible(matrices: np.ndarray, tol: float = ZERO_TOL) -> np.ndarray:
    """Irreducibility of each l x l matrix in a batch, by reachability on the off-diagonal pattern."""
    mats = np.asarray(matrices, dtype=float)
    l = mats.shape[-1]
    if l == 1:
        return np.ones(mats.shape[:-2], dtype=bool)
    pattern = (np.abs(mats) >= tol).astype(np.int64)
    reach = np.minimum(pattern + np.eye(l, dtype=np.int64), 1)
    for _ in range(int(np.ceil(np.log2(l))) + 1):
        reach = np.minimum(reach @ reach, 1)
    return np.all(reach > 0, axis=(-2, -1))


@dataclass(frozen=True)
class StructureReport:
    H1: bool
    H2: bool
    H2_tilde: bool
    H3: bool
    H1_tilde: bool
    H3_tilde: bool
    D_condition: bool
    F1: bool
    F2: bool
    D_irreducible: bool
    A_irreducible: bool

    def as_dict(self) -> dict[str, bool]:
        return dict(self.__dict__)


def _kernel_diagonal_positive(kernels: KernelSet, grid: SpatialGrid, times) -> bool:
    for i in range(kernels.l):
        for t in times:
            kxx = np.array([kernels.evaluate(i, grid.nodes[a:a + 1], grid.nodes[a:a + 1], t)[0, 0]
                            for a in range(grid.n)]) if isinstance(kernels[i], GeneralKernel) else \
                np.diagonal(kernels.evaluate(i, grid.nodes, grid.nodes, t))
            if np.any(kxx <= 0):
                return False
    return True


def _kernel_symmetric(kernels: KernelSet, grid: SpatialGrid, times) -> bool:
    if any(k is not kernels.kernels[0] for k in kernels.kernels):
        return False
    for t in times:
        K = kernels.evaluate(0, grid.nodes, grid.nodes, t)
        if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max())):
            return False
    return True


def check_structure(D: MatrixField | None, A: MatrixField, D0: MatrixField | None = None,
                    C: np.ndarray | None = None, kernels: KernelSet | None = None,
                    kernel_times: Sequence[float] | None = None) -> StructureReport:
    """Decide the structural hypotheses (cooperativity, irreducibility) on the sampled data.

    ``D`` is the full inflow matrix; in the rate-scaled form pass ``D0``
    (diagonal outflow) and the constant coupling ``C`` so that D = C D0.
    """
    grid = A.grid
    off = ~np.eye(A.l, dtype=bool)
    A_vals = A.values
    H2 = bool(np.all(A_vals[..., off] >= 0)) if A.l > 1 else True

    Dv = D.values if D is not None else None
    if Dv is None and D0 is not None and C is not None:
        Dv = np.asarray(C) @ D0.values
    if Dv is not None:
        diag = np.diagonal(Dv, axis1=-2, axis2=-1)
        H1 = bool(np.all(Dv >= 0) and np.all(diag > 0))
        D_irr = bool(np.all(irreducible(Dv)))
    else:
        H1, D_irr = False, False
    A_irr = bool(np.all(irreducible(np.where(off, A_vals, 0.0))))

    H1t = False
    D_cond = False
    F1 = False
    if D0 is not None and C is not None:
        Cm = np.asarray(C, dtype=float)
        recon = Cm @ D0.values
        scale = max(1.0, float(np.abs(recon).max()))
        D0_diag_only = bool(np.all(D0.values[..., off] == 0)) if A.l > 1 else True
        H1t = bool(H1 and np.all(Cm >= 0) and D0_diag_only and
                   (Dv is None or np.max(np.abs(recon - Dv)) <= 1e-12 * scale))
        D_cond = H1t and np.allclose(Cm, np.eye(Cm.shape[0]), rtol=0, atol=0)
    if Dv is not None:
        const = bool(np.all(Dv == Dv[0, 0]))
        sym = bool(np.allclose(Dv[0, 0], Dv[0, 0].T, rtol=0, atol=1e-14))
        d0_match = True
        if D0 is not None:
            d0_match = bool(np.all(D0.values == D0.values[0, 0])) and \
                np.allclose(np.diag(Dv[0, 0]), np.diag(D0.values[0, 0]), rtol=0, atol=1e-14)
        F1 = H1 and const and sym and d0_match

    H3 = H3t = F2 = False
    if kernels is not None:
        times = list(kernel_times) if kernel_times is not None else \
            ([0.0, 0.25, 0.5, 0.75] if kernels.time_dependent else [0.0])
        H3 = _kernel_diagonal_positive(kernels, grid, times)
        if kernels.convolution_form and kernels.mass_normalized:
            try:
                masses = kernel_mass(kernels, times)
                H3t = H3 and bool(np.all(np.abs(masses - 1.0) <= 1e-8))
            except ValueError:
                H3t = False
        D_cond = D_cond and H3t
        A_sym = bool(np.allclose(A_vals, np.swapaxes(A_vals, -1, -2), rtol=0, atol=1e-14))
        F2 = _kernel_symmetric(kernels, grid, times) and A_sym

    return StructureReport(H1=H1, H2=H2, H2_tilde=H2 and (D_irr or A_irr), H3=H3, H1_tilde=H1t,
                           H3_tilde=H3t, D_condition=D_cond, F1=F1, F2=F2,
                           D_irreducible=D_irr, A_irreducible=A_irr)
