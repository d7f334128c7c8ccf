"""Smooth lower and upper approximations of the coefficient matrix A.

Level k mollifies every entry with a space-time bump of width eps_k, builds
an entrywise sandwich A_-^k <= A <= A_+^k that keeps the off-diagonal part
nonnegative, and finally shifts the lower matrix by beta_k(x) I so that its
frozen Floquet exponent has a flat maximum (which guarantees a principal
eigenvalue for the lower operator).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .fields import MatrixField
from .floquet import contact_exponent, lambda_A_profile, spectral_bound
from .grid import SpatialGrid
from .operator import OperatorSpec

log = logging.getLogger(__name__)

GAMMA_HALVINGS = 20


# ---------------------------------------------------------------------------
# bumps and cutoffs


def _bump(r2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r2, dtype=float)
    inside = r2 < 1.0
    out[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    return out


def _bump_mass(dim: int) -> float:
    if dim == 1:
        return quad(lambda s: math.exp(1.0 / (s * s - 1.0)), -1, 1)[0]
    return 2 * math.pi * quad(lambda r: r * math.exp(1.0 / (r * r - 1.0)), 0, 1)[0]


def chi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    with np.errstate(over="ignore"):  # tiny s: exp(-inf) = 0 is the right value
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def zeta(s):
    """Smooth step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    a, b = chi(s), chi(1.0 - s)
    return np.where(s <= 0, 0.0, np.where(s >= 1, 1.0, a / np.where(a + b > 0, a + b, 1.0)))


def smooth_positive_part(s):
    """Phi(s) = s zeta(s): zero for s <= 0, the identity for s >= 1, and below s in between."""
    s = np.asarray(s, dtype=float)
    return s * zeta(s)


@dataclass(frozen=True)
class MollifierSpec:
    epsilon: float
    C1: float
    C2: float
    dim: int = 1
    nq: int = 24

    @classmethod
    def make(cls, epsilon: float, dim: int = 1, nq: int | None = None) -> "MollifierSpec":
        if not 0 < epsilon < 1.0 / 3.0:
            raise ValueError(f"mollifier width must lie in (0, 1/3), got {epsilon}")
        return cls(epsilon, 1.0 / _bump_mass(1), 1.0 / _bump_mass(dim), dim, nq or (24 if dim == 1 else 12))

    def time_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Offsets s_q and weights for psi_eps; the weights sum to one exactly."""
        z, w = np.polynomial.legendre.leggauss(self.nq)
        wt = w * _bump(z * z)
        return self.epsilon * z, wt / wt.sum()

    def space_rule(self) -> tuple[np.ndarray, np.ndarray]:
        z, w = np.polynomial.legendre.leggauss(self.nq)
        if self.dim == 1:
            wt = w * _bump(z * z)
            return self.epsilon * z[:, None], wt / wt.sum()
        Z1, Z2 = np.meshgrid(z, z, indexing="ij")
        W = np.outer(w, w) * _bump(Z1 ** 2 + Z2 ** 2)
        keep = W.ravel() > 0
        pts = np.column_stack([Z1.ravel(), Z2.ravel()])[keep]
        wt = W.ravel()[keep]
        return self.epsilon * pts, wt / wt.sum()


def _interp_matrix_1d(xs: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Linear interpolation from nodes xs to points p, constant beyond the end nodes."""
    p = np.clip(p, xs[0], xs[-1])
    j = np.clip(np.searchsorted(xs, p, side="right") - 1, 0, xs.size - 2)
    f = (p - xs[j]) / (xs[j + 1] - xs[j])
    out = np.zeros((p.size, xs.size))
    r = np.arange(p.size)
    out[r, j] = 1.0 - f
    out[r, j + 1] += f
    return out


def _space_operator(grid: SpatialGrid, spec: MollifierSpec) -> np.ndarray:
    """S with (S f)(x_a) = sum_p w_p f~(x_a + z_p), f~ the piecewise-linear extension of node data."""
    offsets, wts = spec.space_rule()
    if grid.dim == 1:
        xs = grid.x
        S = np.zeros((grid.n, grid.n))
        for z, w in zip(offsets[:, 0], wts):
            S += w * _interp_matrix_1d(xs, xs + z)
        return S
    ax = [np.unique(grid.nodes[:, d]) for d in range(2)]
    S = np.zeros((grid.n, grid.n))
    for (z1, z2), w in zip(offsets, wts):
        S += w * np.kron(_interp_matrix_1d(ax[0], ax[0] + z1), _interp_matrix_1d(ax[1], ax[1] + z2))
    return S


def _time_average(field: MatrixField, spec: MollifierSpec) -> np.ndarray:
    offsets, wts = spec.time_rule()
    steps = field.steps
    knots = np.arange(steps + 1) / steps
    out = np.zeros_like(field.values)
    if field.time_constant:
        return field.values.copy()
    for s, w in zip(offsets, wts):
        for k, t in enumerate(knots):
            out[k] += w * field.at(t - s)
    out[-1] = out[0]
    return out


def mollify_periodic(field: MatrixField, epsilon: float) -> tuple[MatrixField, np.ndarray]:
    """Space-time mollification b = phi_eps * psi_eps * a with constant extension outside the box.

    Returns the tabulated result and delta_ij = max |b_ij - a_ij| over the samples.
    """
    spec = MollifierSpec.make(epsilon, field.grid.dim)
    T = _time_average(field, spec)
    S = _space_operator(field.grid, spec)
    b = np.einsum("ab,kbij->kaij", S, T)
    if field.time_constant:
        b[:] = b[0]
    b[-1] = b[0]
    delta = np.max(np.abs(b - field.values), axis=(0, 1))
    return MatrixField(b, field.grid, None, field.role), delta


# ---------------------------------------------------------------------------
# sandwich construction


@dataclass
class ApproxLevel:
    k: int
    epsilon: float
    delta: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    eta: float
    A_minus: MatrixField
    A_plus: MatrixField
    A_tilde_minus: MatrixField | None = None
    beta: np.ndarray | None = None
    radius: float | None = None
    depth: float | None = None
    thm14_flag: bool | None = None


@dataclass
class ApproxSequence:
    A: MatrixField
    levels: list[ApproxLevel] = field(default_factory=list)

    @property
    def epsilons(self) -> list[float]:
        return [lv.epsilon for lv in self.levels]


def _off_diagonal_lower(c: MatrixField, i: int, j: int, delta_ij: float, eps: float):
    """u = mollified c_ij with gamma halved until ||u - c|| <= delta."""
    entry = c.replace(c.values[..., i:i + 1, j:j + 1])
    gamma = eps
    u = None
    for _ in range(GAMMA_HALVINGS):
        u, err = mollify_periodic(entry, gamma)
        if err[0, 0] <= delta_ij + 1e-14:
            break
        gamma /= 2
    else:
        log.warning("gamma halving cap reached for entry (%d, %d); ||u - c|| = %.3e > delta = %.3e",
                    i, j, err[0, 0], delta_ij)
    return u.values[..., 0, 0], gamma


def lower_upper_sequences(A: MatrixField, n_levels: int = 4, eps0: float = 0.1) -> ApproxSequence:
    """Entrywise smooth sandwich A_-^k <= A <= A_+^k with eps_k = eps0 2^-k (no flattening)."""
    l = A.l
    seq = ApproxSequence(A)
    for k in range(n_levels):
        eps = eps0 * 2.0 ** (-k)
        b, delta = mollify_periodic(A, eps)
        eta = float(delta.max())
        lower = np.empty_like(A.values)
        gammas = np.zeros((l, l))
        alphas = np.zeros((l, l))
        for i in range(l):
            lower[..., i, i] = b.values[..., i, i] - delta[i, i]
            for j in range(l):
                if i == j:
                    continue
                cv = np.maximum(b.values[..., i, j] - 2 * delta[i, j], 0.0)
                cfield = A.replace(np.broadcast_to(cv[..., None, None], cv.shape + (l, l)).copy())
                u, gammas[i, j] = _off_diagonal_lower(cfield, 0, 0, delta[i, j], eps)
                alpha = float(max(np.max(u - cv), 0.0))
                v = u - alpha
                w = eta * smooth_positive_part(v / eta) if eta > 0 else np.maximum(v, 0.0)
                lower[..., i, j] = w
                alphas[i, j] = alpha
        upper = b.values + delta
        lower[-1] = lower[0]
        seq.levels.append(ApproxLevel(k, eps, delta, gammas, alphas, eta,
                                      A.replace(lower), A.replace(upper)))
    return seq


@dataclass
class FlattenResult:
    A_tilde: MatrixField
    beta: np.ndarray
    x_star: int
    radius: float
    depth: float
    lam_before: np.ndarray
    lam_after: np.ndarray


def cutoff(dist: np.ndarray, r: float) -> np.ndarray:
    """Smooth rho with rho = 1 for dist <= r/2 and rho = 0 for dist >= r."""
    return 1.0 - zeta((dist - r / 2) / (r / 2))


def flatten_at_max(A_minus: MatrixField, eps: float, r: float, tau: float = 1.0,
                   reaction: MatrixField | None = None, shrink: bool = True) -> FlattenResult:
    """Shift A_- by beta(x) I so its frozen Floquet exponent becomes

        lam_-(x) = (max lam - eps) rho(x) + (lam(x) - 2 eps)(1 - rho(x)),

    flat on the ball |x - x*| <= r/2 around the first grid maximiser.

    ``reaction`` is the matrix whose exponent is flattened when it differs from
    A_- (scaled operators use A_- - D0). The ball radius is halved while lam
    drops more than eps inside it.
    """
    base = reaction if reaction is not None else A_minus
    lam = lambda_A_profile(base, tau).values
    grid = A_minus.grid
    x_star = int(np.argmax(lam))
    top = float(lam[x_star])
    dist = np.sqrt(np.sum((grid.nodes - grid.nodes[x_star]) ** 2, axis=1))
    while shrink and np.any(lam[dist < r] < top - eps - 1e-14) and r > 1e-12:
        r /= 2
    rho = cutoff(dist, r)
    lam_flat = (top - eps) * rho + (lam - 2 * eps) * (1 - rho)
    beta = lam_flat - lam
    idx = np.arange(A_minus.l)
    vals = A_minus.values.copy()
    vals[..., idx, idx] += beta[None, :, None]
    return FlattenResult(A_minus.replace(vals), beta, x_star, r, eps, lam, lam_flat)


def flattening_depth(lam: np.ndarray, grid: SpatialGrid, r: float, eps: float, floor: float = 1e-3) -> float:
    """Smallest admissible flattening depth for radius r: the drop of lam over the ball, kept within [floor eps, eps]."""
    x_star = int(np.argmax(lam))
    dist = np.sqrt(np.sum((grid.nodes - grid.nodes[x_star]) ** 2, axis=1))
    drop = float(lam[x_star] - lam[dist < r].min())
    return float(min(eps, max(drop, floor * eps)))


# ---------------------------------------------------------------------------
# sandwich of principal spectrum points


@dataclass
class SandwichRow:
    k: int
    epsilon: float
    delta_max: float
    depth: float
    radius: float
    s_lower: float
    s_mid: float
    s_upper: float
    gap: float
    beta_sup: float
    coef_gap: float
    thm14_flag: bool
    ok: bool

    def csv(self) -> tuple:
        return (self.k, self.s_lower, self.s_mid, self.s_upper, self.gap)


@dataclass
class SandwichTable:
    rows: list[SandwichRow]
    sequence: ApproxSequence
    lower_results: list = field(default_factory=list, repr=False)
    upper_results: list = field(default_factory=list, repr=False)
    mid_result: object = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def gaps(self) -> list[float]:
        return [r.gap for r in self.rows]

    @property
    def gaps_shrinking(self) -> bool:
        g = self.gaps
        return all(b < a for a, b in zip(g[:-1], g[1:]))


def sandwich_check(spec: OperatorSpec, n_levels: int = 4, eps0: float = 0.1, tol: float = 1e-7,
                   depth: str = "adaptive", stepper: str = "cf4") -> SandwichTable:
    """s(L(A~_-^k)) <= s(L(A)) <= s(L(A_+^k)) per level.

    All three operators use tabulated coefficients so that their time
    interpolation is the same. ``depth="eps"`` flattens by eps_k exactly;
    ``"adaptive"`` uses the smallest admissible depth for r_k = max(eps_k, 4.5h).
    """
    A = spec.A.tabulated()
    base = spec.replace(A=A)
    mid = spectral_bound(base, stepper=stepper)
    seq = lower_upper_sequences(A, n_levels, eps0)
    rows, lows, ups = [], [], []
    for lv in seq.levels:
        lower_spec = base.replace(A=lv.A_minus)
        react = lower_spec.reaction if spec.scaled else None
        # the flat plateau (radius r/2) must hold a few grid nodes to be visible on the grid
        r = max(lv.epsilon, 4.5 * min(spec.grid.spacing))
        if depth == "adaptive":
            lam = lambda_A_profile(react if react is not None else lv.A_minus, spec.tau).values
            e = flattening_depth(lam, spec.grid, r, lv.epsilon)
        else:
            e = lv.epsilon
        fl = flatten_at_max(lv.A_minus, e, r, spec.tau, reaction=react)
        lv.A_tilde_minus, lv.beta, lv.radius, lv.depth = fl.A_tilde, fl.beta, fl.radius, e
        lv.thm14_flag = contact_exponent(fl.lam_after, spec.grid.nodes, spec.grid.dim).flag
        lo = spectral_bound(base.replace(A=fl.A_tilde), stepper=stepper)
        up = spectral_bound(base.replace(A=lv.A_plus), stepper=stepper)
        lows.append(lo)
        ups.append(up)
        ok = lo.s <= mid.s + tol and mid.s <= up.s + tol
        coef_gap = float(np.max(lv.A_plus.values - fl.A_tilde.values))
        rows.append(SandwichRow(lv.k, lv.epsilon, float(lv.delta.max()), e, fl.radius, lo.s, mid.s, up.s,
                                up.s - lo.s, float(np.max(np.abs(fl.beta))), coef_gap, bool(lv.thm14_flag), ok))
    return SandwichTable(rows, seq, lows, ups, mid)
