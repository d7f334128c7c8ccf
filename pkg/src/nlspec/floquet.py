"""Period maps, principal spectrum points and existence diagnostics.

Every linear time-periodic problem is reduced to a ``PeriodicSystem``
tau u' = G(t) u on a flat state vector. The period map V(1, 0) is built as a
dense product of one-step propagators with a running log-scale so that very
large or very small Floquet multipliers never overflow.

Default one-step propagator is the fourth-order commutator-free exponential
rule (two Gauss points, two matrix exponentials). It is exact for
time-independent generators and for scalar time-dependent shifts, and it
keeps the propagator nonnegative whenever the off-diagonal part of G does not
change sign, which is what Perron iteration needs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .fields import MatrixField, irreducible
from .operator import (OperatorSpec, apply_M, assemble_dense, flatten_state, periodic_derivative,
                       resolvent_N, unflatten_state, PreconditionError)

log = logging.getLogger(__name__)

_SQ3 = math.sqrt(3.0)
GAUSS_C = (0.5 - _SQ3 / 6, 0.5 + _SQ3 / 6)
CF4_A = (0.25 + _SQ3 / 6, 0.25 - _SQ3 / 6)
STEPPERS = ("cf4", "cn", "rk4")
PROPAGATOR_CACHE_BYTES = 256 * 2 ** 20


class StiffnessError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# generic periodic systems


@dataclass(eq=False)
class PeriodicSystem:
    """tau u' = G(t) u, 1-periodic, on R^size.

    ``weights`` are the quadrature weights of the inner product on the flat
    state (used for adjoints).
    """

    size: int
    G: Callable[[float], np.ndarray]
    tau: float
    steps: int
    autonomous: bool
    weights: np.ndarray
    name: str = ""


def system_from_spec(spec: OperatorSpec, cap: int = 4000) -> PeriodicSystem:
    if spec.size > cap:
        raise PreconditionError(f"state size {spec.size} exceeds dense cap {cap}")
    w = np.tile(spec.grid.weights, spec.l)
    return PeriodicSystem(spec.size, lambda t: assemble_dense(spec, t, cap), spec.tau,
                          spec.time_grid.steps, spec.autonomous, w, spec.name)


def _expm_log(X: np.ndarray) -> tuple[np.ndarray, float]:
    """exp(X) = e^c E with max|E| = 1, by scaling and squaring with renormalisation."""
    norm = float(np.max(np.sum(np.abs(X), axis=1))) if X.size else 0.0
    J = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 1.0 else 0
    E = expm(X / 2.0 ** J)
    c = 0.0
    for _ in range(J):
        m = float(np.max(np.abs(E)))
        E /= m
        c = 2.0 * (c + math.log(m))
        E = E @ E
    m = float(np.max(np.abs(E)))
    return E / m, c + math.log(m)


def _step_propagator(system: PeriodicSystem, k: int, stepper: str) -> np.ndarray:
    h = 1.0 / system.steps
    t0 = k * h
    s = h / system.tau
    if system.autonomous:
        return expm(s * system.G(t0))
    if stepper == "cf4":
        G1 = system.G(t0 + GAUSS_C[0] * h)
        G2 = system.G(t0 + GAUSS_C[1] * h)
        first = expm(s * (CF4_A[0] * G1 + CF4_A[1] * G2))
        second = expm(s * (CF4_A[1] * G1 + CF4_A[0] * G2))
        return second @ first
    if stepper == "cn":
        G = system.G(t0 + h / 2)
        I = np.eye(system.size)
        return np.linalg.solve(I - 0.5 * s * G, I + 0.5 * s * G)
    if stepper == "rk4":
        Ga, Gb, Gc = system.G(t0), system.G(t0 + h / 2), system.G(t0 + h)
        I = np.eye(system.size)
        k1 = s * Ga
        k2 = s * Gb @ (I + 0.5 * k1)
        k3 = s * Gb @ (I + 0.5 * k2)
        k4 = s * Gc @ (I + k3)
        return I + (k1 + 2 * k2 + 2 * k3 + k4) / 6
    raise ValueError(f"unknown stepper {stepper!r}; choose from {STEPPERS}")


@dataclass(eq=False)
class PeriodMap:
    """Dense V(1, 0) = exp(log_scale) * monodromy, plus the per-step propagators when they fit in memory."""

    system: PeriodicSystem
    stepper: str
    monodromy: np.ndarray
    log_scale: float
    clip: float = 0.0
    _props: list | None = field(default=None, repr=False)

    def propagator(self, k: int) -> np.ndarray:
        if self.system.autonomous:
            return self._props[0]
        if self._props is not None:
            return self._props[k]
        return self._clip(_step_propagator(self.system, k, self.stepper))

    def _clip(self, P: np.ndarray) -> np.ndarray:
        neg = P < 0
        if np.any(neg):
            mag = float(-P[neg].min())
            self.clip = max(self.clip, mag)
            P = np.where(neg, 0.0, P)
        return P

    def apply(self, v: np.ndarray) -> np.ndarray:
        return math.exp(self.log_scale) * (self.monodromy @ v)

    def trajectory(self, v: np.ndarray, log_rho: float) -> np.ndarray:
        """Samples of e^{-log_rho t} V(t, 0) v at t_0 .. t_{steps-1}."""
        steps = self.system.steps
        out = np.empty((steps, v.size))
        if self.system.autonomous:
            out[:] = v
            return out
        decay = math.exp(-log_rho / steps)
        u = v.astype(float).copy()
        for k in range(steps):
            out[k] = u
            u = decay * (self.propagator(k) @ u)
        return out

    def adjoint_trajectory(self, y: np.ndarray, log_rho: float) -> np.ndarray:
        """Samples of e^{-log_rho (1 - t)} V(1, t)^T y at t_0 .. t_{steps-1} (y at t = 1)."""
        steps = self.system.steps
        out = np.empty((steps, y.size))
        if self.system.autonomous:
            out[:] = y
            return out
        decay = math.exp(-log_rho / steps)
        u = y.astype(float).copy()
        for k in range(steps - 1, -1, -1):
            u = decay * (self.propagator(k).T @ u)
            out[k] = u
        return out


def build_period_map(system: PeriodicSystem, stepper: str = "cf4",
                     cache_bytes: int = PROPAGATOR_CACHE_BYTES) -> PeriodMap:
    if stepper not in STEPPERS:
        raise ValueError(f"unknown stepper {stepper!r}; choose from {STEPPERS}")
    n = system.size
    if system.autonomous:
        G = system.G(0.0)
        M, c = _expm_log(G / system.tau)
        pm = PeriodMap(system, stepper, M, c)
        pm._props = [pm._clip(expm(G / (system.tau * system.steps)))]
        pm.monodromy = pm._clip(M)
        return pm
    keep = system.steps * n * n * 8 <= cache_bytes
    pm = PeriodMap(system, stepper, np.eye(n), 0.0)
    props = [] if keep else None
    M = np.eye(n)
    c = 0.0
    for k in range(system.steps):
        P = pm._clip(_step_propagator(system, k, stepper))
        if not np.all(np.isfinite(P)):
            raise StiffnessError(f"non-finite propagator at step {k}; reduce the step or use stepper='cf4'")
        if props is not None:
            props.append(P)
        M = P @ M
        m = float(np.max(np.abs(M)))
        if not np.isfinite(m) or m == 0.0:
            raise StiffnessError(f"period map degenerated at step {k} (norm {m})")
        M /= m
        c += math.log(m)
    pm.monodromy, pm.log_scale, pm._props = M, c, props
    if pm.clip > 0:
        log.info("clipped negative propagator entries of magnitude up to %.3e", pm.clip)
    return pm


# ---------------------------------------------------------------------------
# Perron iteration


@dataclass
class PerronResult:
    rho: float
    vector: np.ndarray
    iterations: int
    converged: bool
    gap_estimate: float
    cw_lower: float
    cw_upper: float


def perron_iteration(M: np.ndarray, tol: float = 1e-10, max_iter: int = 5000,
                     square_after: int = 50, start: np.ndarray | None = None) -> PerronResult:
    """Power iteration on a nonnegative matrix from the all-ones vector.

    When plain iteration stalls for ``square_after`` steps the iteration
    matrix is squared (power iteration on M^(2^j) has the same Perron vector
    and a squared ratio |lambda_2 / lambda_1|).
    """
    n = M.shape[0]
    v = np.ones(n) if start is None else np.asarray(start, dtype=float).copy()
    v /= np.max(np.abs(v))
    B = M
    power = 1
    rho_prev = None
    deltas = []
    it = 0
    converged = False
    since_square = 0
    while it < max_iter:
        w = M @ v
        rho = float(np.max(np.abs(w)))
        if rho == 0.0:
            return PerronResult(0.0, v, it, True, 0.0, 0.0, 0.0)
        if rho_prev is not None:
            d = abs(rho - rho_prev)
            deltas.append(d / power)
            # the vector must settle too: a periodic trajectory built from it may not jump at t = 1
            if d <= tol * rho and np.max(np.abs(w / rho - v)) <= tol:
                converged = True
                break
        rho_prev = rho
        Bv = B @ v if power > 1 else w
        v = Bv / np.max(np.abs(Bv))
        it += 1
        since_square += 1
        if since_square >= square_after and power < 2 ** 30:
            B = B @ B
            B = B / np.max(np.abs(B))
            power *= 2
            since_square = 0
    w = M @ v
    rho = float(np.max(np.abs(w)))
    v = w / rho
    pos = v > 0
    ratios = (M @ v)[pos] / v[pos]
    cw_lo, cw_hi = (float(ratios.min()), float(ratios.max())) if ratios.size else (0.0, 0.0)
    gap = _gap_from_history(deltas)
    return PerronResult(rho, v, it, converged, gap, cw_lo, cw_hi)


def _gap_from_history(deltas: list[float]) -> float:
    d = [x for x in deltas if x > 0]
    if len(d) < 3:
        return 0.0
    ratios = [b / a for a, b in zip(d[:-1], d[1:]) if a > 0]
    tail = ratios[-min(5, len(ratios)):]
    return float(min(1.0, np.median(tail)))


# ---------------------------------------------------------------------------
# lambda_A profiles


@dataclass
class LambdaAProfile:
    values: np.ndarray            # (n,)
    eigenfunction: np.ndarray     # (steps, n, l), max over (t, i) = 1 per node
    adjoint: np.ndarray           # (steps, n, l)
    residual: float

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.values))


def _batched_expm(X: np.ndarray) -> np.ndarray:
    if X.shape[-1] == 1:
        return np.exp(X)
    return expm(X)


def lambda_A_profile(A: MatrixField, tau: float = 1.0, substeps: int = 1,
                     eigenfunctions: bool = True) -> LambdaAProfile:
    """Per-node principal Floquet exponent of tau v' = A(x, t) v.

    With ``eigenfunctions`` the periodic Perron solution and its adjoint are
    propagated through the period as well (both normalised to max 1 per node).
    """
    n, l, steps = A.n, A.l, A.steps * substeps
    h = 1.0 / steps
    s = h / tau
    const = A.time_constant
    props = []
    if const:
        P = _batched_expm(A.values[0] * s)
    Phi = np.array(np.broadcast_to(np.eye(l), (n, l, l)))
    logc = np.zeros(n)
    for k in range(steps):
        if not const:
            t0 = k * h
            A1 = A.at(t0 + GAUSS_C[0] * h)
            A2 = A.at(t0 + GAUSS_C[1] * h)
            P = _batched_expm(s * (CF4_A[1] * A1 + CF4_A[0] * A2)) @ _batched_expm(s * (CF4_A[0] * A1 + CF4_A[1] * A2))
            P = np.maximum(P, 0.0)
            props.append(P)
        Phi = P @ Phi
        m = np.max(np.abs(Phi), axis=(1, 2))
        Phi = Phi / m[:, None, None]
        logc = logc + np.log(m)
    # Perron data of the l x l monodromies
    w, V = np.linalg.eig(Phi)
    idx = np.argmax(w.real, axis=1)
    rho = w.real[np.arange(n), idx]
    lam = tau * (np.log(rho) + logc)
    if not eigenfunctions:
        empty = np.zeros((0, n, l))
        return LambdaAProfile(lam, empty, empty, math.nan)
    vec = np.abs(V.real[np.arange(n), :, idx])
    wl, U = np.linalg.eig(np.swapaxes(Phi, 1, 2))
    yvec = np.abs(U.real[np.arange(n), :, np.argmax(wl.real, axis=1)])
    step = (lambda k: P) if const else (lambda k: props[k])

    def sweep(u0, order, transpose):
        # per-node renormalised propagation; returns samples and their log scales
        out = np.empty((steps, n, l))
        logs = np.zeros((steps, n))
        u, lg = u0.copy(), np.zeros(n)
        for k in order:
            if not transpose:
                out[k], logs[k] = u, lg
            Pk = step(k)
            u = np.einsum("nji,nj->ni", Pk, u) if transpose else np.einsum("nij,nj->ni", Pk, u)
            mx = np.max(np.abs(u), axis=1)
            u = u / mx[:, None]
            lg = lg + np.log(mx)
            if transpose:
                out[k], logs[k] = u, lg
        return out, logs

    tk = np.arange(steps) * h
    fw, fl = sweep(vec, range(steps), False)
    expo = fl - np.outer(tk, lam) / tau
    phi = fw * np.exp(expo - expo.max(axis=0))[:, :, None]
    bw, bl = sweep(yvec, range(steps - 1, -1, -1), True)
    expo = bl - np.outer(1 - tk, lam) / tau
    psi = bw * np.exp(expo - expo.max(axis=0))[:, :, None]
    sub = slice(0, steps, substeps)
    phi, psi = phi[sub], psi[sub]
    phi = phi / np.max(phi, axis=(0, 2))[None, :, None]
    psi = psi / np.max(psi, axis=(0, 2))[None, :, None]
    knots = tk[sub]
    Ak = np.stack([A.at(t) for t in knots])
    res = -tau * periodic_derivative(phi) + np.einsum("knij,knj->kni", Ak, phi) - lam[None, :, None] * phi
    return LambdaAProfile(lam, phi, psi, float(np.max(np.abs(res))))


# ---------------------------------------------------------------------------
# spectral bound


@dataclass
class SpectralResult:
    s: float
    rho: float
    log_rho: float
    eigenfunction: np.ndarray            # (steps, n, l)
    adjoint_eigenfunction: np.ndarray | None
    power_iters: int
    converged: bool
    residual: float
    gap_estimate: float
    cw_lower: float
    cw_upper: float
    s_N: float | None = None
    is_principal_eigenvalue: bool = False
    reason: str = ""
    clip: float = 0.0
    stepper: str = "cf4"

    def summary(self) -> dict:
        return {
            "s": self.s, "rho": self.rho, "log_rho": self.log_rho, "power_iters": self.power_iters,
            "converged": self.converged, "residual": self.residual, "gap_estimate": self.gap_estimate,
            "cw_lower": self.cw_lower, "cw_upper": self.cw_upper, "s_N": self.s_N,
            "is_principal_eigenvalue": self.is_principal_eigenvalue, "reason": self.reason,
            "eigenfunction_min": float(self.eigenfunction.min()),
        }


def _trajectory_residual(system: PeriodicSystem, traj: np.ndarray, s: float, adjoint: bool = False) -> float:
    """max |(-tau d/dt + G) phi - s phi| (or the adjoint form tau d/dt + G^*)."""
    steps = system.steps
    dphi = periodic_derivative(traj)
    worst = 0.0
    w = system.weights
    for k in range(steps):
        G = system.G(k / steps)
        if adjoint:
            Gu = (G.T @ (w * traj[k])) / w
            r = system.tau * dphi[k] + Gu - s * traj[k]
        else:
            r = -system.tau * dphi[k] + G @ traj[k] - s * traj[k]
        worst = max(worst, float(np.max(np.abs(r))))
        if system.autonomous:
            break
    return worst


def period_map_apply(spec: OperatorSpec | PeriodicSystem, v0: np.ndarray, stepper: str = "cf4") -> np.ndarray:
    """V(1, 0) v0 for a state given per node (n, l) or flat."""
    system = spec if isinstance(spec, PeriodicSystem) else system_from_spec(spec)
    v = np.asarray(v0, dtype=float)
    shaped = v.ndim == 2
    flat = flatten_state(v) if shaped else v
    if not np.all(np.isfinite(flat)):
        raise ValueError("initial vector must be finite")
    pm = build_period_map(system, stepper)
    if pm.log_scale > math.log(1e12) + math.log(max(1.0, system.size)) and stepper != "cf4":
        raise StiffnessError(f"period map norm e^{pm.log_scale:.1f} suggests a stiffness blowup")
    out = pm.apply(flat)
    if not np.all(np.isfinite(out)):
        raise StiffnessError("period map overflowed; use spectral_bound for log-scale results")
    if shaped:
        n = v.shape[0]
        return unflatten_state(out, n, v.shape[1])
    return out


def _spectral_core(system: PeriodicSystem, stepper: str, tol: float, max_iter: int, adjoint: bool):
    pm = build_period_map(system, stepper)
    M = pm.monodromy.T if adjoint else pm.monodromy
    pr = perron_iteration(M, tol=tol, max_iter=max_iter)
    log_rho = pm.log_scale + math.log(pr.rho)
    return pm, pr, log_rho


def _finish(system, pm, pr, log_rho, n, l, adjoint_vec, stepper):
    s = system.tau * log_rho
    traj = pm.trajectory(pr.vector, log_rho)
    traj = traj / np.max(traj)
    res = _trajectory_residual(system, traj, s)
    adj = None
    if adjoint_vec is not None:
        at = pm.adjoint_trajectory(adjoint_vec, log_rho) / system.weights[None, :]
        adj = at / np.max(at)
    to_state = lambda tr: np.stack([unflatten_state(row, n, l) for row in tr])
    rho = math.exp(log_rho) if log_rho < 700 else math.inf
    return SpectralResult(
        s=s, rho=rho, log_rho=log_rho, eigenfunction=to_state(traj),
        adjoint_eigenfunction=None if adj is None else to_state(adj), power_iters=pr.iterations,
        converged=pr.converged, residual=res, gap_estimate=pr.gap_estimate,
        cw_lower=system.tau * (pm.log_scale + math.log(pr.cw_lower)) if pr.cw_lower > 0 else -math.inf,
        cw_upper=system.tau * (pm.log_scale + math.log(pr.cw_upper)) if pr.cw_upper > 0 else -math.inf,
        clip=pm.clip, stepper=stepper)


def spectral_bound_system(system: PeriodicSystem, n: int, l: int, stepper: str = "cf4", tol: float = 1e-10,
                          max_iter: int = 5000, with_adjoint: bool = True) -> SpectralResult:
    pm, pr, log_rho = _spectral_core(system, stepper, tol, max_iter, adjoint=False)
    y = None
    if with_adjoint:
        py = perron_iteration(pm.monodromy.T, tol=tol, max_iter=max_iter)
        y = py.vector
    return _finish(system, pm, pr, log_rho, n, l, y, stepper)


def spectral_bound(spec: OperatorSpec, stepper: str = "cf4", tol: float = 1e-10, max_iter: int = 5000,
                   with_adjoint: bool = True) -> SpectralResult:
    """s(L) = tau ln r(V(1, 0)) by power iteration on the discrete period map."""
    system = system_from_spec(spec)
    res = spectral_bound_system(system, spec.n, spec.l, stepper, tol, max_iter, with_adjoint)
    res.s_N = lambda_A_profile(spec.reaction, spec.tau, eigenfunctions=False).max
    crit_i = res.s > res.s_N + 1e-7
    _verdict(spec, res, crit_i, False)
    return res


def _verdict(spec: OperatorSpec, res: SpectralResult, crit_i: bool, crit_ii: bool) -> None:
    reasons = []
    ok = crit_i or crit_ii
    if not ok:
        reasons.append("neither s > s(N) nor r(F_alpha) >= 1 established")
    if res.residual > 1e-6:
        ok = False
        reasons.append(f"eigen residual {res.residual:.2e} > 1e-6")
    if spec.structure().H2_tilde and res.eigenfunction.min() <= 0:
        ok = False
        reasons.append("eigenfunction not strictly positive")
    res.is_principal_eigenvalue = bool(ok)
    if ok:
        res.reason = "criterion (i) s > s(N)" if crit_i else "criterion (ii) r(F_alpha) >= 1"
    else:
        res.reason = "spectrum point only: " + "; ".join(reasons)


def adjoint_spectral_bound(spec: OperatorSpec, stepper: str = "cf4", tol: float = 1e-10,
                           max_iter: int = 5000) -> SpectralResult:
    """Principal spectrum point of the adjoint problem tau u' + G(t)^* u, with its eigenfunction.

    The discrete adjoint is taken with respect to the quadrature inner product,
    so its period map is W^-1 V^T W; the returned ``eigenfunction`` is psi and
    ``adjoint_eigenfunction`` the primal phi.
    """
    system = system_from_spec(spec)
    pm, pr, log_rho = _spectral_core(system, stepper, tol, max_iter, adjoint=True)
    primal = perron_iteration(pm.monodromy, tol=tol, max_iter=max_iter)
    s = system.tau * log_rho
    adj = pm.adjoint_trajectory(pr.vector, log_rho) / system.weights[None, :]
    adj = adj / np.max(adj)
    traj = pm.trajectory(primal.vector, log_rho)
    traj = traj / np.max(traj)
    res = _trajectory_residual(system, adj, s, adjoint=True)
    n, l = spec.n, spec.l
    to_state = lambda tr: np.stack([unflatten_state(row, n, l) for row in tr])
    out = SpectralResult(s=s, rho=math.exp(log_rho) if log_rho < 700 else math.inf, log_rho=log_rho,
                         eigenfunction=to_state(adj), adjoint_eigenfunction=to_state(traj),
                         power_iters=pr.iterations, converged=pr.converged, residual=res,
                         gap_estimate=pr.gap_estimate, cw_lower=-math.inf, cw_upper=math.inf,
                         clip=pm.clip, stepper=stepper)
    out.s_N = lambda_A_profile(spec.reaction, spec.tau, eigenfunctions=False).max
    _verdict(spec, out, out.s > out.s_N + 1e-7, False)
    return out


def dense_monodromy_s(spec: OperatorSpec | PeriodicSystem, stepper: str = "cf4") -> float:
    """Independent route: step the identity through one period, then take the dense eigenvalues."""
    system = spec if isinstance(spec, PeriodicSystem) else system_from_spec(spec)
    h = 1.0 / system.steps
    X = np.eye(system.size)
    c = 0.0
    for k in range(system.steps):
        X = _step_propagator(system, k, stepper) @ X
        m = np.abs(X).max()
        X /= m
        c += math.log(m)
    ev = np.linalg.eigvals(X)
    return system.tau * (c + math.log(float(np.max(np.abs(ev)))))


def domain_perturbation_constant(spec: OperatorSpec, result: SpectralResult | None = None) -> float:
    """C with s(Omega) - s(Omega_1) <= C |Omega minus Omega_1| for every sub-domain Omega_1.

    C = dbar kbar / min phi, where phi is the principal eigenfunction scaled so
    that max over (x, t) of sum_i phi_i is 1, dbar bounds the inflow entries and
    kbar the kernel values on the grid.
    """
    res = result or spectral_bound(spec, with_adjoint=False)
    phi = res.eigenfunction / np.max(res.eigenfunction.sum(axis=-1))
    lo = float(phi.min())
    if lo <= 0:
        return math.inf
    dbar = float(np.max(np.abs(spec.inflow.values)))
    ks = spec.effective_kernels
    times = spec.time_grid.knots[:-1] if ks.time_dependent else [0.0]
    kbar = max(float(np.max(ks.evaluate(i, spec.grid.nodes, spec.grid.nodes, t)))
               for i in range(spec.l) for t in times)
    return dbar * kbar / lo


# ---------------------------------------------------------------------------
# existence diagnostics


@dataclass
class ContactFit:
    exponent: float
    flat: bool
    flag: bool
    n_points: int


def contact_exponent(values: np.ndarray, nodes: np.ndarray, dim: int | None = None,
                     flat_tol: float = 1e-9, window: float = 0.25) -> ContactFit:
    """Fit max(lam) - lam(x) ~ c dist(x, argmax)^p near the maximum; flag non-integrability when p >= dim.

    A maximum attained on three or more nodes counts as a flat (positive
    measure) argmax and is flagged directly.
    """
    lam = np.asarray(values, dtype=float)
    pts = np.atleast_2d(np.asarray(nodes, dtype=float))
    if pts.shape[0] != lam.size:
        pts = pts.T
    dim = dim or pts.shape[1]
    top = lam.max()
    tol = flat_tol * max(1.0, abs(top))
    at_max = np.flatnonzero(top - lam <= tol)
    if at_max.size >= 3:
        return ContactFit(math.inf, True, True, int(at_max.size))
    center = pts[at_max].mean(axis=0)
    dist = np.sqrt(np.sum((pts - center) ** 2, axis=1))
    gap = top - lam
    spacing = np.sort(np.unique(np.round(dist, 14)))
    h = spacing[1] if spacing.size > 1 else 1.0
    span = dist.max()
    sel = (gap > tol) & (dist >= 2 * h) & (dist <= window * span)
    if sel.sum() < 3:
        sel = (gap > tol) & (dist > 0)
    if sel.sum() < 2:
        return ContactFit(math.nan, False, False, int(sel.sum()))
    p = float(np.polyfit(np.log(dist[sel]), np.log(gap[sel]), 1)[0])
    return ContactFit(p, False, bool(p >= dim - 1e-9), int(sel.sum()))


@dataclass
class ExistenceReport:
    s: float
    s_N: float
    criterion_i: bool
    criterion_ii: bool
    alpha_witness: float | None
    r_F_witness: float | None
    r_F_scan: list
    thm14_flag: bool
    contact_exponent: float
    flat_max: bool
    gap_estimate: float
    simplicity: bool
    is_principal_eigenvalue: bool
    reason: str
    consistency: bool

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in (
            "s", "s_N", "criterion_i", "criterion_ii", "alpha_witness", "r_F_witness", "thm14_flag",
            "contact_exponent", "flat_max", "gap_estimate", "simplicity", "is_principal_eigenvalue", "reason",
            "consistency")}


def r_F_alpha(spec: OperatorSpec, alpha: float, lambda_max: float, tol: float = 1e-8,
              max_iter: int = 300) -> float:
    """Spectral radius of the positive operator M (alpha I - N)^-1 by power iteration on knot samples."""
    steps = spec.time_grid.steps
    phi = np.ones((steps, spec.n, spec.l))
    r_prev = None
    r = 0.0
    for _ in range(max_iter):
        psi = resolvent_N(spec, alpha, phi, lambda_max=lambda_max)
        out = np.maximum(apply_M(spec, psi), 0.0)
        r = float(out.max())
        if r == 0.0:
            return 0.0
        phi = out / r
        if r_prev is not None and abs(r - r_prev) <= tol * r:
            break
        r_prev = r
    return r


def existence_criteria(spec: OperatorSpec, result: SpectralResult | None = None, alpha_range: float | None = None,
                       n_alpha: int = 11, simplicity_delta: float = 1e-3) -> ExistenceReport:
    """Evidence for the existence of a principal eigenvalue (continuum criteria on the discrete model)."""
    res = result or spectral_bound(spec)
    prof = lambda_A_profile(spec.reaction, spec.tau, eigenfunctions=False)
    s_N = prof.max
    crit_i = bool(res.s > s_N + 1e-7)
    rng = alpha_range if alpha_range is not None else max(1.0, abs(res.s - s_N), abs(s_N))
    scan = []
    crit_ii = False
    witness = r_w = None
    for off in rng * np.geomspace(1e-5, 1.0, n_alpha):
        alpha = s_N + float(off)
        r = r_F_alpha(spec, alpha, s_N)
        scan.append((alpha, r))
        if r >= 1.0:
            crit_ii, witness, r_w = True, alpha, r
            break
    fit = contact_exponent(prof.values, spec.grid.nodes, spec.grid.dim)
    _verdict(spec, res, crit_i, crit_ii)
    simple = res.gap_estimate < 1 - simplicity_delta
    consistency = (not crit_i) or res.is_principal_eigenvalue
    return ExistenceReport(s=res.s, s_N=s_N, criterion_i=crit_i, criterion_ii=crit_ii, alpha_witness=witness,
                           r_F_witness=r_w, r_F_scan=scan, thm14_flag=fit.flag, contact_exponent=fit.exponent,
                           flat_max=fit.flat, gap_estimate=res.gap_estimate, simplicity=bool(simple),
                           is_principal_eigenvalue=res.is_principal_eigenvalue, reason=res.reason,
                           consistency=bool(consistency))


# ---------------------------------------------------------------------------
# frozen-time bound


def spectral_abscissa_metzler(G: np.ndarray, shift: float | None = None, tol: float = 1e-13,
                              max_squarings: int = 60) -> float:
    """Spectral abscissa of a Metzler matrix by power iteration on G + cI (with repeated squaring)."""
    c = float(np.max(np.sum(np.abs(G), axis=1))) if shift is None else float(shift)
    B = G + c * np.eye(G.shape[0])
    if np.any(B < -1e-12 * max(1.0, c)):
        raise ValueError("shift too small: G + cI has negative entries")
    B = np.maximum(B, 0.0)
    scale = float(np.max(np.abs(B))) or 1.0
    Bn = B / scale
    P = Bn.copy()
    v = np.ones(G.shape[0])
    rho_prev = None
    for _ in range(max_squarings):
        v = P @ np.ones(G.shape[0])
        if not np.any(v > 0):
            break
        v = v / v.max()
        rho = float(np.max(Bn @ v))
        if rho_prev is not None and abs(rho - rho_prev) <= tol * max(rho, 1e-300):
            break
        rho_prev = rho
        P = P @ P
        P /= np.max(np.abs(P))
    w = Bn @ v
    rho = float(np.max(w) / np.max(v)) if np.max(v) > 0 else 0.0
    return rho * scale - c


def frozen_time_bound(spec: OperatorSpec, t: float, shift: float | None = None) -> float:
    """s of the frozen generator D(., t) P + B(., t): spectral abscissa of G(t)."""
    return spectral_abscissa_metzler(assemble_dense(spec, t), shift)


def is_irreducible_generator(G: np.ndarray) -> bool:
    off = G - np.diag(np.diag(G))
    return bool(irreducible(off[None])[0])
