"""Multi-genotype stem cell regeneration model with strongly coupled nonlocal proliferation.

tau Q_i' = sum_j c_ij beta_j int k_j(x, y, t) Q_j(y) dy - Q_i (beta_i + kappa_i Q_i^n)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fields import _callable_from_spec, constant_kernel, kernel_set, sample_field
from ..floquet import SpectralResult, spectral_bound
from ..grid import build_spatial_grid, build_time_grid
from ..operator import OperatorSpec, PreconditionError
from .common import PeriodicTable, pairing
from .integrate import BlowupError, SemilinearSolver, Trajectory

NEUTRAL_TOL = 1e-8
NEAR_CRITICAL = 1e-3


@dataclass
class StemCellParams:
    """``beta`` and ``kappa`` hold one constant or expression per genotype."""

    c: list = field(default_factory=lambda: [[1.0]])
    beta: list = field(default_factory=lambda: [1.0])
    kappa: list = field(default_factory=lambda: [2.0])
    kernels: list = field(default_factory=lambda: [constant_kernel(1.0)])
    n_exp: float = 0.0
    shift: float = 0.0
    tau: float = 1.0
    bounds: tuple = (0.0, 1.0)
    n: int = 50
    steps: int = 50
    name: str = "stemcell"

    @property
    def l(self) -> int:
        return len(self.beta)

    def describe(self) -> dict:
        return {"c": np.asarray(self.c, dtype=float).tolist(), "beta": [str(b) for b in self.beta],
                "kappa": [str(k) for k in self.kappa], "kernels": [k.name for k in self.kernels],
                "n_exp": self.n_exp, "shift": self.shift, "tau": self.tau, "bounds": list(self.bounds),
                "n": self.n, "steps": self.steps, "name": self.name}


class StemCellModel:
    def __init__(self, p: StemCellParams):
        if 0 < p.n_exp <= 1 or p.n_exp < 0:
            raise PreconditionError(f"removal exponent n = {p.n_exp} is outside {{0}} U (1, inf)")
        C = np.asarray(p.c, dtype=float)
        l = p.l
        if C.shape != (l, l) or np.any(C < 0):
            raise ValueError("c must be a nonnegative l x l matrix")
        if len(p.kappa) != l or len(p.kernels) != l:
            raise ValueError("beta, kappa and kernels need one entry per genotype")
        self.p, self.C = p, C
        self.grid = build_spatial_grid(p.bounds, p.n)
        self.tgrid = build_time_grid(p.steps)
        self.kappa = [PeriodicTable(k, self.grid, p.steps) for k in p.kappa]
        betas = [PeriodicTable(b, self.grid, p.steps) for b in p.beta]
        if any(np.any(t.values <= 0) for t in self.kappa + betas):
            raise ValueError("beta and kappa must be positive")

    def linear_spec(self) -> OperatorSpec:
        """L_n: D = (c_ij beta_j), B = -(beta + kappa) for n = 0 and -beta for n > 1, plus the preset shift."""
        p, C, l = self.p, self.C, self.p.l
        bf = [_callable_from_spec(b, 1) for b in p.beta]
        kf = [_callable_from_spec(k, 1) for k in p.kappa]

        def betas(points, t):
            return np.column_stack([f(points, t)[:, 0, 0] for f in bf])

        def D(points, t):
            return C[None, :, :] * betas(points, t)[:, None, :]

        def A(points, t):
            b = betas(points, t)
            if p.n_exp == 0:
                b = b + np.column_stack([f(points, t)[:, 0, 0] for f in kf])
            out = np.zeros((points.shape[0], l, l))
            idx = np.arange(l)
            out[:, idx, idx] = -b + p.shift
            return out

        return OperatorSpec(self.grid, self.tgrid, kernel_set(list(p.kernels)),
                            sample_field(A, self.grid, self.tgrid), D=sample_field(D, self.grid, self.tgrid, "D"),
                            tau=p.tau, bc_mode="raw", name=p.name)

    def reaction(self):
        if self.p.n_exp == 0:
            return None
        ne, kap = self.p.n_exp, self.kappa
        return lambda t, Q: -np.column_stack([k(t) for k in kap]) * Q ** (ne + 1)

    def solver(self) -> SemilinearSolver:
        return SemilinearSolver(self.linear_spec(), self.reaction())


def integrate_stemcell(p: StemCellParams | StemCellModel, Q0: np.ndarray, T: float) -> Trajectory:
    model = p if isinstance(p, StemCellModel) else StemCellModel(p)
    return model.solver().run(Q0, T)


@dataclass
class StemCellClassification:
    verdict: str
    s: float
    evidence: dict
    spectral: SpectralResult | None = field(default=None, repr=False)
    trajectory: Trajectory | None = field(default=None, repr=False)

    def summary(self) -> dict:
        return {"verdict": self.verdict, "s": self.s, **self.evidence}


def _integer_norms(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(0, len(traj.times), traj.steps)
    return traj.times[idx], traj.norms()[idx]


def attractor(p: StemCellParams | StemCellModel, Q0: np.ndarray, tol: float = 1e-6,
              max_periods: int = 500) -> Trajectory:
    """Long-time periodic state from Q0 (Cauchy criterion on whole periods)."""
    model = p if isinstance(p, StemCellModel) else StemCellModel(p)
    return model.solver().run_to_periodic(Q0, tol, max_periods)


def classify_stemcell(p: StemCellParams | StemCellModel, Q0: np.ndarray | None = None,
                      T: int = 60) -> StemCellClassification:
    model = p if isinstance(p, StemCellModel) else StemCellModel(p)
    spec = model.linear_spec()
    res = spectral_bound(spec, with_adjoint=True)
    s = res.s
    n, l = spec.n, spec.l
    Q0 = np.ones((n, l)) if Q0 is None else np.asarray(Q0, dtype=float).reshape(n, l)
    ev: dict = {"periods": T}
    if model.p.n_exp == 0:
        if abs(s) <= NEUTRAL_TOL and res.is_principal_eigenvalue:
            verdict = "neutral"
        elif abs(s) <= NEAR_CRITICAL:
            return StemCellClassification("inconclusive (near-critical)", s, ev, res)
        else:
            verdict = "growth" if s > 0 else "decay"
        try:
            traj = model.solver().run(Q0, T)
        except BlowupError as exc:
            ev["blowup"] = str(exc)
            return StemCellClassification(verdict, s, ev, res)
        tk, nk = _integer_norms(traj)
        half = len(tk) // 2
        ev["rate"] = float((np.log(nk[-1]) - np.log(nk[half])) / (tk[-1] - tk[half]))
        ev["predicted_rate"] = s / model.p.tau
        if verdict == "neutral":
            w = model.grid.weights
            phi0, psi0 = res.eigenfunction[0], res.adjoint_eigenfunction[0]
            c = pairing(Q0, psi0, w) / pairing(phi0, psi0, w)
            ev["c"] = c
            ev["distance"] = float(np.max(np.abs(traj.final - c * phi0)))
        else:
            ev["final_norm"] = float(nk[-1])
        return StemCellClassification(verdict, s, ev, res, traj)
    if abs(s) <= NEAR_CRITICAL:
        return StemCellClassification("inconclusive (near-critical)", s, ev, res)
    if s > 0:
        traj = attractor(model, Q0)
        ev.update(periods=float(traj.times[-1]), periodic_residual=traj.periodic_residual,
                  attractor_min=float(traj.last_period().min()))
        return StemCellClassification("persistence", s, ev, res, traj)
    traj = model.solver().run(Q0, T)
    ev["final_norm"] = float(traj.norms()[-1])
    return StemCellClassification("extinction", s, ev, res, traj)
