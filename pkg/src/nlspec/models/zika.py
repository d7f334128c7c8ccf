"""Vector-host Zika model with nonlocal dispersal of hosts and vectors.

State order is (H_i, V_u, V_i): infected hosts, uninfected vectors,
infected vectors. Dispersal is d_j sigma^-m (K_sigma[u] - u) restricted to
the domain.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..fields import Kernel, MatrixField, _callable_from_spec, kernel_set, sample_field, uniform_kernel
from ..floquet import spectral_bound
from ..grid import build_spatial_grid, build_time_grid
from ..operator import OperatorSpec
from .common import PeriodicTable
from .integrate import SemilinearSolver, Trajectory

NEAR_CRITICAL = 1e-3
ATTRACTOR_TOL = 1e-7


@dataclass
class ZikaParams:
    """Coefficients are constants or expression strings in x and t."""

    H_u: object = 1.0
    rho: object = 0.5
    sigma1: object = 2.0
    sigma2: object = 2.0
    beta: object = 1.0
    mu: object = 1.0
    d1: object = 0.1
    d2: object = 0.1
    k1: Kernel = field(default_factory=uniform_kernel)
    k2: Kernel = field(default_factory=uniform_kernel)
    sigma: float = 0.2
    m: float = 0.0
    tau: float = 1.0
    bounds: tuple = (0.0, 1.0)
    n: int = 40
    steps: int = 40
    name: str = "zika"

    def describe(self) -> dict:
        d = asdict(self)
        d["k1"], d["k2"] = self.k1.name, self.k2.name
        return {k: (v if isinstance(v, (int, float, str, tuple)) else str(v)) for k, v in d.items()}


class ZikaModel:
    """Discretized model: grids, tabulated coefficients and the linear specs."""

    def __init__(self, p: ZikaParams):
        self.p = p
        self.grid = build_spatial_grid(p.bounds, p.n)
        self.tgrid = build_time_grid(p.steps)
        tab = lambda src: PeriodicTable(src, self.grid, p.steps)
        self.H_u = tab(p.H_u)
        self.rho, self.s1, self.s2 = tab(p.rho), tab(p.sigma1), tab(p.sigma2)
        self.beta, self.mu = tab(p.beta), tab(p.mu)
        for name, t in (("H_u", self.H_u), ("rho", self.rho), ("sigma1", self.s1), ("sigma2", self.s2),
                        ("beta", self.beta), ("mu", self.mu)):
            if np.any(t.values <= 0):
                raise ValueError(f"Zika parameter {name} must be positive")

    # -- fields -------------------------------------------------------------

    def _fn(self, src):
        return _callable_from_spec(src, self.grid.dim)

    def _rates(self, sources) -> MatrixField:
        fns = [self._fn(s) for s in sources]

        def fn(points, t):
            out = np.zeros((points.shape[0], len(fns), len(fns)))
            for i, f in enumerate(fns):
                out[:, i, i] = f(points, t)[:, 0, 0]
            return out

        return sample_field(fn, self.grid, self.tgrid, "d")

    def _spec(self, A: MatrixField, rates: MatrixField, kernels, name: str) -> OperatorSpec:
        p = self.p
        return OperatorSpec(self.grid, self.tgrid, kernel_set(kernels, sigma=1.0), A, rates=rates,
                            sigma=p.sigma, m=p.m, tau=p.tau, bc_mode="dirichlet", name=name)

    def full_linear_spec(self) -> OperatorSpec:
        """Linear part of the 3-species system; the remaining terms are quadratic."""
        p = self.p
        f = {k: self._fn(getattr(p, k)) for k in ("rho", "sigma1", "H_u", "beta")}

        def A(points, t):
            g = lambda k: f[k](points, t)[:, 0, 0]
            out = np.zeros((points.shape[0], 3, 3))
            out[:, 0, 0] = -g("rho")
            out[:, 0, 2] = g("sigma1") * g("H_u")
            out[:, 1, 1] = out[:, 1, 2] = g("beta")
            return out

        return self._spec(sample_field(A, self.grid, self.tgrid), self._rates([p.d1, p.d2, p.d2]),
                          [p.k1, p.k2, p.k2], f"{p.name}:full")

    def reaction(self, t: float, U: np.ndarray) -> np.ndarray:
        Hi, Vu, Vi = U[:, 0], U[:, 1], U[:, 2]
        V = Vu + Vi
        inf = self.s2(t) * Vu * Hi
        mu = self.mu(t)
        return np.column_stack([np.zeros_like(Hi), -inf - mu * V * Vu, inf - mu * V * Vi])

    def L0_spec(self) -> OperatorSpec:
        p = self.p
        A = sample_field(p.beta, self.grid, self.tgrid)
        return self._spec(A, self._rates([p.d2]), [p.k2], f"{p.name}:L0")

    def L1_spec(self, V_star: np.ndarray) -> OperatorSpec:
        """Linearization of the (H_i, V_i) subsystem at (0, V_*); V_* given at the knots (steps + 1, n)."""
        p = self.p
        st = p.steps
        vals = np.zeros((st + 1, self.grid.n, 2, 2))
        vals[..., 0, 0] = -self.rho.knots(st)
        vals[..., 0, 1] = self.s1.knots(st) * self.H_u.knots(st)
        vals[..., 1, 0] = self.s2.knots(st) * V_star
        vals[..., 1, 1] = -self.mu.knots(st) * V_star
        vals[-1] = vals[0]
        A = MatrixField(vals, self.grid, None, "A")
        return self._spec(A, self._rates([p.d1, p.d2]), [p.k1, p.k2], f"{p.name}:L1")

    # -- periodic states ------------------------------------------------------

    def vector_equilibrium(self, tol: float = ATTRACTOR_TOL, max_periods: int = 500) -> tuple[np.ndarray, float]:
        """Positive periodic V_* of the logistic vector equation at the knots, and its residual."""
        mu = self.mu
        solver = SemilinearSolver(self.L0_spec(), lambda t, V: -mu(t)[:, None] * V * V)
        V0 = np.max(self.beta.values / self.mu.values) * np.ones((self.grid.n, 1))
        traj = solver.run_to_periodic(V0, tol, max_periods)
        return traj.last_period()[:, :, 0], traj.periodic_residual

    def infected_equilibrium(self, V_star: np.ndarray, tol: float = ATTRACTOR_TOL,
                             max_periods: int = 500) -> tuple[np.ndarray, float]:
        """Positive periodic (H_i*, V_i*) of the reduced system at the knots, shape (steps + 1, n, 2)."""
        s2 = self.s2
        f = lambda t, U: np.column_stack([np.zeros(U.shape[0]), -s2(t) * U[:, 1] * U[:, 0]])
        solver = SemilinearSolver(self.L1_spec(V_star), f)
        # the linear part of L1 already carries -mu V_* V_i and +sigma2 V_* H_i
        U0 = np.column_stack([np.ones(self.grid.n), V_star[0]])
        traj = solver.run_to_periodic(U0, tol, max_periods)
        return traj.last_period(), traj.periodic_residual


def integrate_zika(p: ZikaParams | ZikaModel, u0: np.ndarray, T: float) -> Trajectory:
    model = p if isinstance(p, ZikaModel) else ZikaModel(p)
    return SemilinearSolver(model.full_linear_spec(), model.reaction).run(u0, T)


@dataclass
class ZikaThresholds:
    s_L0: float
    s_L1: float | None
    V_star: np.ndarray | None = field(default=None, repr=False)
    V_star_residual: float | None = None
    note: str = ""

    def summary(self) -> dict:
        out = {"s_L0": self.s_L0, "s_L1": self.s_L1, "V_star_residual": self.V_star_residual, "note": self.note}
        if self.V_star is not None:
            out["V_star_min"] = float(self.V_star.min())
            out["V_star_max"] = float(self.V_star.max())
        return out


def zika_thresholds(p: ZikaParams | ZikaModel) -> ZikaThresholds:
    model = p if isinstance(p, ZikaModel) else ZikaModel(p)
    L0 = model.L0_spec()
    rep = L0.structure()
    if not (rep.H1_tilde and rep.H3_tilde):
        raise ValueError(f"structural checks failed for L0: {rep}")
    s0 = spectral_bound(L0, with_adjoint=False).s
    if s0 <= 0:
        return ZikaThresholds(s0, None, note="s(L0) <= 0: V_* undefined, s(L1) not applicable")
    V_star, vres = model.vector_equilibrium()
    s1 = spectral_bound(model.L1_spec(V_star), with_adjoint=False).s
    return ZikaThresholds(s0, s1, V_star, vres)


@dataclass
class ZikaClassification:
    verdict: str
    thresholds: ZikaThresholds
    evidence: dict
    trajectory: Trajectory | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {"verdict": self.verdict, **self.thresholds.summary(), **self.evidence}


def _verdict(th: ZikaThresholds) -> str:
    if abs(th.s_L0) <= NEAR_CRITICAL:
        return "inconclusive (near-critical)"
    if th.s_L0 < 0:
        return "extinction"
    if abs(th.s_L1) <= NEAR_CRITICAL:
        return "inconclusive (near-critical)"
    return "endemic" if th.s_L1 > 0 else "vector_only"


def default_initial(model: ZikaModel) -> np.ndarray:
    x = model.grid.nodes[:, 0]
    a, b = model.p.bounds
    bump = 0.5 + 0.5 * np.cos(np.pi * (x - a) / (b - a))
    return np.column_stack([0.2 * bump, 0.5 + 0 * x, 0.1 * bump])


def classify_zika(p: ZikaParams | ZikaModel, u0: np.ndarray | None = None, T: int = 200) -> ZikaClassification:
    """Verdict from the threshold signs plus long-time evidence over the final simulated period."""
    model = p if isinstance(p, ZikaModel) else ZikaModel(p)
    th = zika_thresholds(model)
    verdict = _verdict(th)
    u0 = default_initial(model) if u0 is None else np.asarray(u0, dtype=float)
    traj = integrate_zika(model, u0, T)
    last = traj.last_period()
    ev: dict = {"periods": T, "periodic_residual": traj.periodic_residual, "clipped": traj.clipped}
    if verdict == "endemic":
        HV, res = model.infected_equilibrium(th.V_star)
        target = np.stack([HV[..., 0], th.V_star - HV[..., 1], HV[..., 1]], axis=-1)
        ev["attractor_residual"] = res
        ev["distance"] = float(np.max(np.abs(last - target)))
        ev["H_i_star_max"] = float(HV[..., 0].max())
        ev["V_i_star_max"] = float(HV[..., 1].max())
    elif verdict == "vector_only":
        ev["distance"] = float(np.max(np.abs(last[..., [0, 2]])))
        ev["V_u_distance"] = float(np.max(np.abs(last[..., 1] - th.V_star)))
    elif verdict == "extinction":
        ev["distance"] = float(model.grid.weights @ traj.final.sum(axis=1))
    return ZikaClassification(verdict, th, ev, traj)
