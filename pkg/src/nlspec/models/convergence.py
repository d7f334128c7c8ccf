"""Nonlocal to local convergence of the initial value problem (m = 2, sigma -> 0)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..asymptotics import _resolution_ok
from ..fields import Kernel, kernel_set, sample_field, uniform_kernel
from ..floquet import build_period_map
from ..grid import build_spatial_grid, build_time_grid
from ..local_limit import local_problem_from_spec
from ..operator import OperatorSpec, flatten_state
from .integrate import SemilinearSolver, Trajectory


@dataclass
class LinearScalarModel:
    """tau u' = d sigma^-2 (K_sigma[u] - u) + a u on a box with zero data outside."""

    a: object = 0.0
    d: object = 6.0
    kernel: Kernel = field(default_factory=uniform_kernel)
    u0: str = "sin(pi*x)"
    tau: float = 1.0
    bounds: tuple = (0.0, 1.0)
    n: int = 200
    local_n: int = 199
    steps: int = 400

    def spec(self, sigma: float, n: int | None = None) -> OperatorSpec:
        g = build_spatial_grid(self.bounds, n or self.n)
        tg = build_time_grid(self.steps)
        return OperatorSpec(g, tg, kernel_set(self.kernel), sample_field(self.a, g, tg),
                            rates=sample_field(self.d, g, tg, "d"), sigma=sigma, m=2.0, tau=self.tau,
                            bc_mode="dirichlet", name="linear-scalar")

    def initial(self, nodes: np.ndarray) -> np.ndarray:
        from ..expr import parse_expression

        e = parse_expression(self.u0)
        v = np.broadcast_to(np.asarray(e(x=nodes[:, 0], t=0.0), dtype=float), (nodes.shape[0],))
        return np.maximum(v, 0.0)


def _local_trajectory(model: LinearScalarModel, spec: OperatorSpec, T: float) -> tuple[np.ndarray, np.ndarray]:
    lp = local_problem_from_spec(spec, model.local_n)
    pm = build_period_map(lp.system())
    K = int(round(T * model.steps))
    u = model.initial(lp.grid.nodes)
    out = np.empty((K + 1, u.size))
    out[0] = u
    for k in range(K):
        u = pm.propagator(k % model.steps) @ u
        out[k + 1] = u
    return lp.grid.nodes[:, 0], out


@dataclass
class ConvergenceTable:
    sigmas: list
    errors: list
    refused: list
    exponent: float | None
    strictly_decreasing: bool
    T: float

    def summary(self) -> dict:
        return {"sigmas": self.sigmas, "errors": self.errors, "refused": self.refused,
                "exponent": self.exponent, "strictly_decreasing": self.strictly_decreasing, "T": self.T}

    def rows(self) -> list[tuple]:
        return list(zip(self.sigmas, self.errors))


def ivp_error(model: LinearScalarModel, sigma: float, T: float, n: int | None = None) -> float:
    """sup over the time knots in [0, T] of max_x |u_sigma - u_local|, local values interpolated (zero at the ends)."""
    spec = model.spec(sigma, n)
    traj: Trajectory = SemilinearSolver(spec).run(model.initial(spec.grid.nodes)[:, None], T)
    xl, ul = _local_trajectory(model, spec, T)
    a, b = model.bounds
    xs = np.concatenate([[a], xl, [b]])
    x = spec.grid.nodes[:, 0]
    err = 0.0
    for k in range(ul.shape[0]):
        loc = np.interp(x, xs, np.concatenate([[0.0], ul[k], [0.0]]))
        err = max(err, float(np.max(np.abs(traj.states[k, :, 0] - loc))))
    return err


def nonlocal_to_local_ivp_error(model: LinearScalarModel, sigma_list, T: float = 0.1) -> ConvergenceTable:
    sig, err, refused = [], [], []
    for s in sigma_list:
        ok, why = _resolution_ok(model.spec(float(s)), float(s))
        if not ok:
            refused.append({"value": float(s), "reason": why})
            continue
        sig.append(float(s))
        err.append(ivp_error(model, float(s), T))
    exponent = None
    pos = [(s, e) for s, e in zip(sig, err) if e > 0]
    if len(pos) >= 2:
        exponent = float(np.polyfit(np.log([p[0] for p in pos]), np.log([p[1] for p in pos]), 1)[0])
    order = np.argsort(sig)[::-1]
    es = [err[i] for i in order]
    dec = bool(len(es) >= 2 and all(b < a for a, b in zip(es[:-1], es[1:])))
    return ConvergenceTable(sig, err, refused, exponent, dec, T)
