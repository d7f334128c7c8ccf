"""Sup-inf / inf-sup certificates for the generalized principal eigenvalues."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .floquet import SpectralResult, spectral_bound
from .operator import OperatorSpec, apply_spatial, periodic_derivative


@dataclass
class VariationalCertificate:
    lower_bound: float
    upper_bound: float
    argmin: tuple
    argmax: tuple
    truncation: float
    ratios: np.ndarray = field(repr=False)


def _derivative_truncation(phi: np.ndarray) -> float:
    """Size of the fourth-order time-difference error h^4 |f^(5)| / 30, with f^(5) from fifth differences."""
    h = 1.0 / phi.shape[0]
    d5 = phi.copy()
    for _ in range(5):
        d5 = np.roll(d5, -1, 0) - d5
    return float(np.max(np.abs(d5)) / (30.0 * h))


def operator_on_samples(spec: OperatorSpec, phi: np.ndarray) -> np.ndarray:
    """L[phi] at every knot, with d/dt by periodic fourth-order differences; phi has shape (steps, n, l)."""
    steps = spec.time_grid.steps
    knots = spec.time_grid.knots[:-1]
    dphi = periodic_derivative(phi)
    out = np.empty_like(phi)
    for k in range(steps):
        out[k] = -spec.tau * dphi[k] + apply_spatial(spec, phi[k], knots[k])
    return out


def rayleigh_bounds(spec: OperatorSpec, phi: np.ndarray) -> VariationalCertificate:
    """inf and sup over (knot, node, species) of L_i[phi] / phi_i for a strictly positive periodic phi."""
    phi = np.asarray(phi, dtype=float)
    steps = spec.time_grid.steps
    if phi.ndim == 2:
        phi = np.broadcast_to(phi, (steps,) + phi.shape).copy()
    if phi.shape != (steps, spec.n, spec.l):
        raise ValueError(f"test function must have shape {(steps, spec.n, spec.l)}, got {phi.shape}")
    if not np.all(phi > 0):
        raise ValueError("test function must be strictly positive")
    ratios = operator_on_samples(spec, phi) / phi
    imin = np.unravel_index(int(np.argmin(ratios)), ratios.shape)
    imax = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    return VariationalCertificate(float(ratios[imin]), float(ratios[imax]), tuple(int(i) for i in imin),
                                  tuple(int(i) for i in imax), _derivative_truncation(phi), ratios)


@dataclass
class CertificationReport:
    s: float
    lambda_p_est: float
    lambda_p_prime_est: float
    max_gap: float
    tol: float
    certified: bool
    route: str
    trace: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"s": self.s, "lambda_p_est": self.lambda_p_est, "lambda_p_prime_est": self.lambda_p_prime_est,
                "max_gap": self.max_gap, "tol": self.tol, "certified": self.certified, "route": self.route,
                "trace": self.trace}


def certify_equality(spec: OperatorSpec, tol: float = 1e-6, route: str = "auto", n_levels: int = 4,
                     result: SpectralResult | None = None) -> CertificationReport:
    """Check s(L) = lambda_p(L) = lambda_p'(L) with discrete certificates.

    ``route="direct"`` uses the principal eigenfunction of L itself;
    ``route="levels"`` uses eigenfunctions of the flattened lower and the
    upper approximations (lower certificate from A~_-^k, upper from A_+^k)
    and keeps the best level. ``"auto"`` picks direct when the eigenfunction
    is a strictly positive principal one.
    """
    res = result or spectral_bound(spec)
    if route == "auto":
        route = "direct" if res.is_principal_eigenvalue and res.eigenfunction.min() > 0 else "levels"
    if route == "direct":
        cert = rayleigh_bounds(spec, res.eigenfunction)
        lp, lpp = cert.lower_bound, cert.upper_bound
        trace = [{"level": None, "lower": lp, "upper": lpp}]
        s = res.s
    elif route == "levels":
        from .approximation import sandwich_check

        table = sandwich_check(spec, n_levels)
        base = spec.replace(A=spec.A.tabulated())
        s = table.mid_result.s
        lp, lpp = -np.inf, np.inf
        trace = []
        for row, lo, up in zip(table.rows, table.lower_results, table.upper_results):
            lo_c = rayleigh_bounds(base, lo.eigenfunction).lower_bound
            up_c = rayleigh_bounds(base, up.eigenfunction).upper_bound
            trace.append({"level": row.k, "epsilon": row.epsilon, "lower": lo_c, "upper": up_c,
                          "s_lower": row.s_lower, "s_upper": row.s_upper})
            lp, lpp = max(lp, lo_c), min(lpp, up_c)
    else:
        raise ValueError(f"unknown route {route!r}")
    gap = float(max(abs(lp - s), abs(lpp - s)))
    return CertificationReport(float(s), float(lp), float(lpp), gap, tol, gap <= tol, route, trace)
