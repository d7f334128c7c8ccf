"""Parameter sweeps in dispersal rate, dispersal range and frequency, with their predicted limits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import MatrixField
from .floquet import frozen_time_bound, lambda_A_profile, spectral_bound
from .local_limit import local_principal_eigen, local_problem_from_spec
from .operator import OperatorSpec

log = logging.getLogger(__name__)

MONOTONE_TOL = 1e-7


@dataclass
class SweepResult:
    param: str
    values: list[float]
    s: list[float]
    residuals: list[float]
    iters: list[int]
    target: float | None
    provenance: str
    violations: int = 0
    extrapolated: float | None = None
    refused: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def errors(self) -> list[float]:
        if self.target is None:
            return []
        return [abs(s - self.target) for s in self.s]

    def rows(self) -> list[tuple]:
        return [(p, s, r, it) for p, s, r, it in zip(self.values, self.s, self.residuals, self.iters)]

    def summary(self) -> dict:
        gap = None if self.target is None or not self.s else abs(self.s[-1] - self.target)
        return {"param": self.param, "values": self.values, "s": self.s, "target": self.target,
                "provenance": self.provenance, "gap": gap, "violations": self.violations,
                "extrapolated": self.extrapolated, "refused": self.refused, **self.extra}


def extrapolate(s: Sequence[float]) -> float | None:
    """Geometric (Richardson-type) tail estimate from the last three values."""
    if len(s) < 2:
        return s[-1] if s else None
    if len(s) < 3:
        return s[-1]
    e1, e2 = s[-2] - s[-3], s[-1] - s[-2]
    if e1 == 0 or e2 == 0:
        return s[-1]
    r = e2 / e1
    if 0 < r < 1:
        return s[-1] + e2 * r / (1 - r)
    return s[-1]


def _scale_field(f: MatrixField, c: float) -> MatrixField:
    fn = None
    if f.fn is not None:
        base = f.fn
        fn = lambda p, t: c * np.asarray(base(p, t))
    return MatrixField(c * f.values, f.grid, fn, f.role)


def with_rate_scale(spec: OperatorSpec, scale: float) -> OperatorSpec:
    """Multiply the dispersal rates (D0, hence D = C D0) or the raw inflow D by ``scale``."""
    if spec.scaled:
        return spec.replace(rates=_scale_field(spec.rates, scale))
    return spec.replace(D=_scale_field(spec.D, scale))


def _run(spec: OperatorSpec, stepper: str, precomputed: dict | None = None, key: float | None = None):
    if precomputed is not None and key in precomputed:
        return precomputed[key]
    res = spectral_bound(spec, stepper=stepper, with_adjoint=False)
    return res.s, res.residual, res.power_iters


def rate_point(base: OperatorSpec, scale: float, stepper: str = "cf4"):
    """(s, residual, iterations) at one rate multiplier."""
    return _run(with_rate_scale(base, scale), stepper)


def range_point(base: OperatorSpec, sigma: float, m: float, stepper: str = "cf4"):
    return _run(base.replace(m=m, sigma=sigma), stepper)


def _tau_spec(base: OperatorSpec, tau: float, d_of_tau) -> OperatorSpec:
    spec = base.replace(tau=tau)
    if d_of_tau is not None:
        rates = d_of_tau(tau)
        spec = spec.replace(rates=rates) if spec.scaled else spec.replace(D=rates)
    return spec


def frequency_point(base: OperatorSpec, tau: float, d_of_tau=None, stepper: str = "cf4"):
    return _run(_tau_spec(base, tau, d_of_tau), stepper)


def sweep_dispersal_rate(base: OperatorSpec, scales: Sequence[float], stepper: str = "cf4",
                         precomputed: dict | None = None) -> SweepResult:
    """s at each rate multiplier; small scales approach max lambda_A, large Dirichlet scales diverge to -inf."""
    scales = [float(c) for c in scales]
    target = lambda_A_profile(base.A, base.tau).max
    out = SweepResult("rate_scale", [], [], [], [], target, "rate -> 0: max_x lambda_A(x)")
    for c in scales:
        try:
            s, r, it = _run(with_rate_scale(base, c), stepper, precomputed, c)
        except Exception as exc:  # per-point refusal, never fatal for the sweep
            out.refused.append({"value": c, "reason": str(exc)})
            continue
        out.values.append(c)
        out.s.append(s)
        out.residuals.append(r)
        out.iters.append(it)
    order = np.argsort(out.values)
    s_sorted = np.array(out.s)[order]
    if base.bc_mode == "dirichlet" and len(s_sorted) > 1:
        big = [s for v, s in sorted(zip(out.values, out.s)) if v >= 1]
        out.extra["large_scale_monotone_decrease"] = bool(all(b < a for a, b in zip(big[:-1], big[1:])))
    small = [(v, s) for v, s in zip(out.values, out.s) if v < 1]
    if small:
        v0, s0 = min(small)
        out.extra["small_scale_gap"] = abs(s0 - target)
    out.violations = 0
    return out


def _resolution_ok(spec: OperatorSpec, sigma: float) -> tuple[bool, str]:
    radius = max((k.radius or math.inf) for k in spec.kernels.kernels)
    h = min(spec.grid.spacing)
    if sigma * radius < 2 * h:
        return False, (f"kernel support {sigma * radius:.3g} is below two grid cells ({2 * h:.3g}); "
                       f"use at least {int(math.ceil(2 * max(b - a for a, b in spec.grid.bounds) / (sigma * radius)))} "
                       "nodes per axis")
    return True, ""


def sweep_dispersal_range(base: OperatorSpec, sigmas: Sequence[float], m: float, branch: str | None = None,
                          local_n: int = 100, stepper: str = "cf4", precomputed: dict | None = None) -> SweepResult:
    """s(sigma) together with the limit predicted for sigma -> 0 or sigma -> infinity."""
    sigmas = [float(x) for x in sigmas]
    if branch is None:
        branch = "small" if sigmas[-1] < sigmas[0] else "large"
    spec0 = base.replace(m=m)
    if branch == "small":
        if m == 2:
            lp = local_problem_from_spec(spec0, local_n)
            target = local_principal_eigen(lp).s
            prov = "sigma -> 0, m = 2: lambda_local"
        else:
            target = lambda_A_profile(spec0.A, spec0.tau).max
            prov = "sigma -> 0, m in [0, 2): max_x lambda_A(x)"
    else:
        if m == 0:
            A0 = spec0.replace(sigma=1.0).reaction
            target = lambda_A_profile(A0, spec0.tau).max
            prov = "sigma -> inf, m = 0: max_x lambda_{A0}(x), A0 = A - D0"
        else:
            target = lambda_A_profile(spec0.A, spec0.tau).max
            prov = "sigma -> inf, m > 0: max_x lambda_A(x)"
    out = SweepResult("sigma", [], [], [], [], target, prov)
    for sg in sigmas:
        ok, why = _resolution_ok(spec0, sg)
        if not ok:
            out.refused.append({"value": sg, "reason": why})
            continue
        s, r, it = _run(spec0.replace(sigma=sg), stepper, precomputed, sg)
        out.values.append(sg)
        out.s.append(s)
        out.residuals.append(r)
        out.iters.append(it)
    err = out.errors
    out.violations = sum(1 for a, b in zip(err[:-1], err[1:]) if b >= a)
    out.extrapolated = extrapolate(out.s)
    out.extra["errors"] = err
    return out


def space_time_kernel_average(spec: OperatorSpec) -> np.ndarray:
    """(1/|Omega|) int_0^1 int_Omega int_Omega k_i(x - y, t) dy dx dt per species."""
    ks = spec.effective_kernels
    steps = spec.time_grid.steps
    times = spec.time_grid.knots[:-1] if ks.time_dependent else [0.0]
    w = spec.grid.weights
    out = []
    for i in range(spec.l):
        vals = [w @ ks.weighted_matrix(i, spec.grid, t).sum(axis=1) for t in times]
        out.append(float(np.mean(vals)) / spec.grid.volume)
    return np.array(out)


def large_tau_lower_bound(spec: OperatorSpec) -> float:
    """min_i { h_i (kbar_i - 1) + mean of a_ii over space-time }, h_i the outflow rates."""
    Kbar = space_time_kernel_average(spec)
    w = spec.grid.weights
    steps = spec.time_grid.steps
    A = spec.A.values[:steps]
    abar = np.einsum("n,kni->i", w, np.diagonal(A, axis1=-2, axis2=-1)) / (steps * spec.grid.volume)
    if spec.scaled:
        h = np.diagonal(spec.D0.values[0, 0])
    else:
        h = np.diagonal(spec.D.values[0, 0])
    return float(np.min(h * (Kbar - 1.0) + abar))


def frozen_bound_average(spec: OperatorSpec, points: int = 41) -> float:
    """Composite trapezoid over one period of the frozen-time bounds (the end points coincide)."""
    ts = np.linspace(0.0, 1.0, points)
    vals = np.array([frozen_time_bound(spec, t) for t in ts[:-1]])
    return float(np.mean(vals))


def sweep_frequency(base: OperatorSpec, taus: Sequence[float],
                    d_of_tau: Callable[[float], MatrixField] | None = None,
                    stepper: str = "cf4", quadrature_points: int = 41,
                    precomputed: dict | None = None) -> SweepResult:
    """s(tau) with monotonicity count, the tau -> 0 frozen average and the tau -> inf lower bound."""
    taus = sorted(float(t) for t in taus)
    avg = frozen_bound_average(base, quadrature_points)
    out = SweepResult("tau", [], [], [], [], avg, "tau -> 0: int_0^1 s(N1(t)) dt")
    for tau in taus:
        s, r, it = _run(_tau_spec(base, tau, d_of_tau), stepper, precomputed, tau)
        out.values.append(tau)
        out.s.append(s)
        out.residuals.append(r)
        out.iters.append(it)
    out.violations = sum(1 for a, b in zip(out.s[:-1], out.s[1:]) if b - a > MONOTONE_TOL)
    lb = large_tau_lower_bound(_tau_spec(base, taus[-1], d_of_tau))
    out.extra.update({
        "frozen_average": avg,
        "small_tau_gap": abs(out.s[0] - avg),
        "large_tau_lower_bound": lb,
        "large_tau_respects_bound": bool(out.s[-1] >= lb - MONOTONE_TOL),
    })
    out.extrapolated = extrapolate(out.s)
    return out
