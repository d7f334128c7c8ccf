"""Semilinear periodic integrator: tau u' = G(t) u + f(t, u).

The linear part is advanced with the cached one-step propagators of the
period map, the pointwise reaction with RK4 half steps on either side
(reaction / linear / reaction splitting).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..floquet import PeriodMap, build_period_map, system_from_spec
from ..operator import OperatorSpec, flatten_state, unflatten_state

log = logging.getLogger(__name__)

BLOWUP = 1e12
UNDERSHOOT = 1e-13

Reaction = Callable[[float, np.ndarray], np.ndarray]


class BlowupError(RuntimeError):
    """The state norm passed the blowup guard."""


@dataclass
class Trajectory:
    """States at t = k / steps for k = 0 .. K; ``states`` has shape (K + 1, n, l)."""

    times: np.ndarray
    states: np.ndarray
    steps: int
    clipped: float = 0.0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def periods(self) -> float:
        return (len(self.times) - 1) / self.steps

    def last_period(self) -> np.ndarray:
        return self.states[-self.steps - 1:]

    @property
    def periodic_residual(self) -> float:
        """sup over the last period of |u(t + 1) - u(t)|."""
        s = self.steps
        if len(self.states) < 2 * s + 1:
            return math.inf
        return float(np.max(np.abs(self.states[-s - 1:] - self.states[-2 * s - 1:-s])))

    def norms(self) -> np.ndarray:
        return np.max(np.abs(self.states), axis=(1, 2))


def _rk4(f: Reaction, t: float, u: np.ndarray, dt: float, tau: float) -> np.ndarray:
    k1 = f(t, u)
    k2 = f(t + dt / 2, u + dt / (2 * tau) * k1)
    k3 = f(t + dt / 2, u + dt / (2 * tau) * k2)
    k4 = f(t + dt, u + dt / tau * k3)
    return u + dt / (6 * tau) * (k1 + 2 * k2 + 2 * k3 + k4)


class SemilinearSolver:
    """Reusable integrator for one linear spec; propagators are computed once."""

    def __init__(self, spec: OperatorSpec, reaction: Reaction | None = None, stepper: str = "cf4"):
        self.spec = spec
        self.reaction = reaction
        self.pm: PeriodMap = build_period_map(system_from_spec(spec), stepper)
        self.steps = spec.time_grid.steps

    def run(self, u0: np.ndarray, periods: float, t0: float = 0.0) -> Trajectory:
        spec, steps = self.spec, self.steps
        n, l = spec.n, spec.l
        u = np.asarray(u0, dtype=float).reshape(n, l).copy()
        if np.any(u < 0):
            raise ValueError("initial data must be nonnegative")
        K = int(round(periods * steps))
        h = 1.0 / steps
        k0 = int(round(t0 * steps))
        out = np.empty((K + 1, n, l))
        out[0] = u
        clipped = 0.0
        for k in range(K):
            t = (k0 + k) * h
            if self.reaction is not None:
                u = _rk4(self.reaction, t, u, h / 2, spec.tau)
            v = self.pm.propagator((k0 + k) % steps) @ flatten_state(u)
            u = unflatten_state(v, n, l)
            if self.reaction is not None:
                u = _rk4(self.reaction, t + h / 2, u, h / 2, spec.tau)
            neg = u < 0
            if np.any(neg):
                mag = float(-u[neg].min())
                clipped = max(clipped, mag)
                u = np.where(neg, 0.0, u)
            norm = float(np.max(np.abs(u)))
            if not np.isfinite(norm) or norm > BLOWUP:
                raise BlowupError(f"state norm {norm:.3e} exceeded {BLOWUP:g} at t = {t + h:.4g}")
            out[k + 1] = u
        if clipped > UNDERSHOOT:
            log.info("clipped negative undershoot of magnitude up to %.3e", clipped)
        times = (k0 + np.arange(K + 1)) * h
        return Trajectory(times, out, steps, clipped)

    def run_to_periodic(self, u0: np.ndarray, tol: float = 1e-7, max_periods: int = 500,
                        chunk: int = 10) -> Trajectory:
        """Integrate whole periods until the period-to-period sup distance is at most ``tol``."""
        u = np.asarray(u0, dtype=float)
        done = 0
        while True:
            p = min(chunk, max_periods - done)
            traj = self.run(u, p)
            traj.times = traj.times + done
            done += p
            if traj.periodic_residual <= tol or done >= max_periods:
                return traj
            u = traj.final


def integrate_system(spec: OperatorSpec, reaction: Reaction | None, u0: np.ndarray, T: float,
                     stepper: str = "cf4") -> Trajectory:
    """Trajectory of tau u' = (D P + B) u + f(t, u) on [0, T]."""
    return SemilinearSolver(spec, reaction, stepper).run(u0, T)
