"""Discrete nonlocal dispersal operators.

A state at a frozen time is stored species-major: the flat index of species
``i`` at node ``a`` is ``i * n + a``. ``apply_spatial`` takes and returns the
per-node layout ``(n, l)``; ``assemble_dense`` returns the matrix acting on the
flat layout.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .fields import KernelSet, MatrixField, check_structure, rescale_kernel
from .grid import SpatialGrid, TimeGrid

DENSE_CAP = 4000
BC_MODES = ("raw", "scaled", "dirichlet", "neumann")


class PreconditionError(ValueError):
    """An operation was called outside the regime where it is defined."""


def combine_fields(fields: list[MatrixField], op: Callable[..., np.ndarray], role: str) -> MatrixField:
    """Pointwise combination of fields; keeps exact off-knot evaluation when any input has it."""
    values = op(*[f.values for f in fields])
    fn = None
    if any(f.fn is not None for f in fields):
        def fn(points, t):
            return op(*[f.at_points(points, t) for f in fields])
    return MatrixField(values, fields[0].grid, fn, role)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """L[u] = -tau u_t + D(x,t) P[u] + B(x,t) u on a box, 1-periodic in t.

    ``bc_mode == "raw"``: D and B = A are taken as given.
    ``bc_mode in {"scaled", "dirichlet"}``: D = C D0, B = A - D0 with
    D0 = sigma^-m diag(d_i) and sigma-rescaled kernels. ``dirichlet`` is the
    scaled form with C = I.
    ``bc_mode == "neumann"``: a raw operator whose diagonal of A already holds
    the Neumann outflow (see ``build_bc_variant``).
    """

    grid: SpatialGrid
    time_grid: TimeGrid
    kernels: KernelSet
    A: MatrixField
    D: MatrixField | None = None
    rates: MatrixField | None = None
    C: np.ndarray | None = None
    tau: float = 1.0
    sigma: float = 1.0
    m: float = 0.0
    bc_mode: str = "raw"
    name: str = ""

    def __post_init__(self):
        if self.bc_mode not in BC_MODES:
            raise ValueError(f"unknown bc_mode {self.bc_mode!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.scaled:
            if self.rates is None:
                raise ValueError("scaled operators need dispersal rates")
            if self.C is None:
                object.__setattr__(self, "C", np.eye(self.l))
            object.__setattr__(self, "C", np.asarray(self.C, dtype=float))
            if self.bc_mode == "dirichlet" and not np.array_equal(self.C, np.eye(self.l)):
                raise ValueError("dirichlet mode requires C = identity")
        elif self.D is None:
            raise ValueError("raw operators need the inflow matrix D")
        if self.kernels.l != self.l:
            raise ValueError(f"{self.kernels.l} kernels for {self.l} species")

    # -- structure -----------------------------------------------------------

    @property
    def l(self) -> int:
        return self.A.l

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def size(self) -> int:
        return self.n * self.l

    @property
    def scaled(self) -> bool:
        return self.bc_mode in ("scaled", "dirichlet")

    def replace(self, **changes) -> "OperatorSpec":
        return dataclasses.replace(self, **changes)

    @cached_property
    def effective_kernels(self) -> KernelSet:
        return rescale_kernel(self.kernels, self.sigma) if self.scaled else self.kernels

    @cached_property
    def D0(self) -> MatrixField | None:
        """Outflow sigma^-m diag(d_i) (scaled modes only)."""
        if not self.scaled:
            return None
        scale = self.sigma ** (-self.m)
        return combine_fields([self.rates], lambda r: scale * _diag_part(r), "D0")

    @cached_property
    def inflow(self) -> MatrixField:
        if not self.scaled:
            return self.D
        C = self.C
        return combine_fields([self.D0], lambda d0: C @ d0, "D")

    @cached_property
    def reaction(self) -> MatrixField:
        """B = A - D0 in scaled modes, A otherwise."""
        if not self.scaled:
            return self.A
        return combine_fields([self.A, self.D0], lambda a, d0: a - d0, "A")

    @cached_property
    def autonomous(self) -> bool:
        return (self.inflow.time_constant and self.reaction.time_constant
                and not self.effective_kernels.time_dependent)

    def structure(self):
        if self.scaled:
            return check_structure(None, self.A, self.D0, self.C, self.effective_kernels)
        return check_structure(self.D, self.A, None, None, self.effective_kernels)

    # -- kernel matrices -------------------------------------------------------

    @cached_property
    def _static_kernel_mats(self) -> dict[int, np.ndarray]:
        return {}

    def kernel_matrices(self, t: float) -> list[np.ndarray]:
        ks = self.effective_kernels
        if ks.time_dependent:
            return [ks.weighted_matrix(i, self.grid, t) for i in range(self.l)]
        cache = self._static_kernel_mats
        out = []
        for i in range(self.l):
            key = id(ks[i])
            if key not in cache:
                cache[key] = ks.weighted_matrix(i, self.grid, 0.0)
            out.append(cache[key])
        return out


def _diag_part(v: np.ndarray) -> np.ndarray:
    d = np.diagonal(v, axis1=-2, axis2=-1)
    out = np.zeros_like(v)
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = d
    return out


# -- application and assembly ------------------------------------------------


def _check_state(spec: OperatorSpec, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1 and spec.l == 1 and u.shape[0] == spec.n:
        u = u[:, None]
    if u.shape != (spec.n, spec.l):
        raise ValueError(f"state shape {u.shape} does not match (n, l) = {(spec.n, spec.l)}")
    return u


def apply_spatial(spec: OperatorSpec, u: np.ndarray, t: float) -> np.ndarray:
    """(D P + B) u at a frozen time; u has shape (n, l)."""
    u = _check_state(spec, u)
    Ks = spec.kernel_matrices(t)
    P = np.column_stack([Ks[j] @ u[:, j] for j in range(spec.l)])
    Dm = spec.inflow.at(t)
    Bm = spec.reaction.at(t)
    return np.einsum("nij,nj->ni", Dm, P) + np.einsum("nij,nj->ni", Bm, u)


def assemble_dense(spec: OperatorSpec, t: float, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense G(t) on the species-major flat layout, with G u = apply_spatial(u) exactly."""
    n, l = spec.n, spec.l
    if n * l > cap:
        raise PreconditionError(f"dense assembly of size {n * l} exceeds cap {cap}")
    Ks = spec.kernel_matrices(t)
    Dm = spec.inflow.at(t)
    Bm = spec.reaction.at(t)
    G = np.zeros((n * l, n * l))
    for i in range(l):
        rows = slice(i * n, (i + 1) * n)
        for j in range(l):
            cols = slice(j * n, (j + 1) * n)
            d = Dm[:, i, j]
            if np.any(d != 0):
                G[rows, cols] = d[:, None] * Ks[j]
            G[rows, cols][np.diag_indices(n)] += Bm[:, i, j]
    return G


def flatten_state(u: np.ndarray) -> np.ndarray:
    """(n, l) -> species-major flat vector."""
    return np.asarray(u).T.reshape(-1)


def unflatten_state(v: np.ndarray, n: int, l: int) -> np.ndarray:
    return np.asarray(v).reshape(l, n).T


# -- resolvent of N = -tau d/dt + B ---------------------------------------------


def _periodic_interpolant(phi: np.ndarray) -> CubicSpline:
    steps = phi.shape[0]
    t = np.linspace(0.0, 1.0, steps + 1)
    closed = np.concatenate([phi, phi[:1]], axis=0)
    return CubicSpline(t, closed, axis=0, bc_type="periodic")


def resolvent_N(spec: OperatorSpec, alpha: float, phi: np.ndarray, margin: float = 1e-6,
                lambda_max: float | None = None) -> np.ndarray:
    """psi = (alpha I - N)^{-1} phi, i.e. the 1-periodic solution of tau psi' = (B - alpha) psi + phi.

    ``phi`` and the result have shape (steps, n, l) on the knots t_0 .. t_{steps-1}.
    Each node is a small periodic linear ODE solved by integrating the
    fundamental matrix together with a particular solution (RK4), then
    closing the period with (I - Phi(1)) psi(0) = psi_p(1).
    """
    from .floquet import lambda_A_profile

    steps, n, l = spec.time_grid.steps, spec.n, spec.l
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (steps, n, l):
        raise ValueError(f"phi must have shape {(steps, n, l)}, got {phi.shape}")
    if lambda_max is None:
        lambda_max = float(np.max(lambda_A_profile(spec.reaction, spec.tau).values))
    if alpha <= lambda_max + margin:
        raise PreconditionError(f"alpha = {alpha:.6g} must exceed max lambda_A = {lambda_max:.6g} + {margin:g}")

    tau = spec.tau
    h = 1.0 / steps
    rhs_phi = _periodic_interpolant(phi)
    eye = np.eye(l)

    def f(t, X):
        Bt = spec.reaction.at(t) - alpha * eye
        out = Bt @ X
        out[:, :, l] += rhs_phi(t)
        return out / tau

    X = np.zeros((n, l, l + 1))
    X[:, :, :l] = eye
    hist = np.empty((steps + 1, n, l, l + 1))
    hist[0] = X
    for k in range(steps):
        t = k * h
        k1 = f(t, X)
        k2 = f(t + h / 2, X + h / 2 * k1)
        k3 = f(t + h / 2, X + h / 2 * k2)
        k4 = f(t + h, X + h * k3)
        X = X + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        hist[k + 1] = X
    Phi1 = X[:, :, :l]
    psi0 = np.linalg.solve(eye - Phi1, X[:, :, l][..., None])[..., 0]
    psi = np.einsum("knij,nj->kni", hist[:steps, :, :, :l], psi0) + hist[:steps, :, :, l]
    return psi


def periodic_derivative(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Fourth-order central difference d/dt on a uniform periodic grid of one period."""
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    h = 1.0 / v.shape[0]
    d = (-np.roll(v, -2, 0) + 8 * np.roll(v, -1, 0) - 8 * np.roll(v, 1, 0) + np.roll(v, 2, 0)) / (12 * h)
    return np.moveaxis(d, 0, axis)


def apply_N_shifted(spec: OperatorSpec, alpha: float, psi: np.ndarray) -> np.ndarray:
    """(alpha I - N) psi on knot samples, with d/dt by periodic differences."""
    knots = spec.time_grid.knots[:-1]
    B = np.stack([spec.reaction.at(t) for t in knots])
    return alpha * psi + spec.tau * periodic_derivative(psi) - np.einsum("knij,knj->kni", B, psi)


def apply_M(spec: OperatorSpec, phi: np.ndarray) -> np.ndarray:
    """M[phi] = D P[phi] at every knot; phi has shape (steps, n, l)."""
    knots = spec.time_grid.knots[:-1]
    out = np.empty_like(phi)
    for k, t in enumerate(knots):
        Ks = spec.kernel_matrices(t)
        P = np.column_stack([Ks[j] @ phi[k, :, j] for j in range(spec.l)])
        out[k] = np.einsum("nij,nj->ni", spec.inflow.at(t), P)
    return out


# -- boundary-condition variants ------------------------------------------------


def build_bc_variant(spec: OperatorSpec, mode: str) -> OperatorSpec:
    """Weakly coupled raw operator with the outflow of a Dirichlet or Neumann problem.

    ``spec.A`` plays the role of the local reaction a~; the returned operator
    has a_ii = -d_ii + a~_ii (dirichlet) or a_ii = -d_ii int_Omega k_i(y, x, t) dy + a~_ii
    (neumann).
    """
    if mode not in ("dirichlet", "neumann"):
        raise ValueError(f"unknown boundary mode {mode!r}")
    if spec.scaled:
        raise PreconditionError("build_bc_variant expects a raw operator")
    D = spec.D
    off = ~np.eye(spec.l, dtype=bool)
    if spec.l > 1 and np.any(D.values[..., off] != 0):
        raise PreconditionError("boundary variants are defined for weakly coupled (diagonal D) operators only")
    ks = spec.effective_kernels
    if not ks.mass_normalized:
        raise PreconditionError("boundary variants require mass-normalized kernels")
    grid = spec.grid

    def outflow_mass(points: np.ndarray, t: float) -> np.ndarray:
        # int_Omega k_i(y, x, t) dy for x in points, shape (m, l)
        return np.column_stack([(grid.weights[:, None] * ks.evaluate(i, grid.nodes, points, t)).sum(axis=0)
                                for i in range(spec.l)])

    idx = np.arange(spec.l)
    if mode == "dirichlet":
        def op(a, d):
            out = a.copy()
            out[..., idx, idx] = a[..., idx, idx] - d[..., idx, idx]
            return out

        A_new = combine_fields([spec.A, D], op, "A")
    else:
        knots = spec.time_grid.knots
        mass = np.stack([outflow_mass(grid.nodes, t) for t in knots])
        values = spec.A.values.copy()
        values[..., idx, idx] -= D.values[..., idx, idx] * mass
        fn = None
        if spec.A.fn is not None or D.fn is not None or ks.time_dependent:
            def fn(points, t):
                a = spec.A.at_points(points, t).copy()
                d = D.at_points(points, t)
                a[..., idx, idx] -= d[..., idx, idx] * outflow_mass(points, t)
                return a
        A_new = MatrixField(values, grid, fn, "A")
    # the dirichlet variant is a plain raw operator; "dirichlet" as a mode means the scaled form
    return spec.replace(A=A_new, bc_mode="raw" if mode == "dirichlet" else "neumann")


# -- nested domains ------------------------------------------------------------


def restrict_to_subdomain(spec: OperatorSpec, bounds) -> tuple[OperatorSpec, float]:
    """The same operator on the nodes of ``spec`` inside a smaller box, plus the removed measure.

    Nodes and weights are inherited, so the discrete problem on the sub-box is
    the principal sub-block of the original one (exactly nested domains).
    """
    from .grid import subgrid

    g = spec.grid
    idx = subgrid(g, bounds)
    if idx.size < 2:
        raise ValueError("sub-domain holds fewer than 2 nodes")
    nodes = g.nodes[idx]
    axes = [np.unique(nodes[:, d]) for d in range(g.dim)]
    shape = tuple(a.size for a in axes)
    if int(np.prod(shape)) != idx.size:
        raise ValueError("sub-domain must be a box of grid nodes")
    h = g.spacing
    box = tuple((float(a[0] - h[d] / 2), float(a[-1] + h[d] / 2)) if g.rule == "midpoint" else
                (float(a[0]), float(a[-1])) for d, a in enumerate(axes))
    sub = SpatialGrid(g.dim, nodes, g.weights[idx], box, shape, g.rule)

    def cut(f: MatrixField | None) -> MatrixField | None:
        return None if f is None else MatrixField(f.values[:, idx], sub, f.fn, f.role)

    out = dataclasses.replace(spec, grid=sub, A=cut(spec.A), D=cut(spec.D), rates=cut(spec.rates))
    removed = float(g.weights.sum() - sub.weights.sum())
    return out, removed
