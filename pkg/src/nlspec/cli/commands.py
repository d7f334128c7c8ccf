"""One function per CLI command: config in, (results, csv table, exit status) out."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..approximation import sandwich_check
from ..asymptotics import (_resolution_ok, frequency_point, range_point, rate_point, sweep_dispersal_range,
                           sweep_dispersal_rate, sweep_frequency)
from ..floquet import existence_criteria, spectral_bound
from ..local_limit import local_principal_eigen, local_problem_from_spec
from ..models import (STEMCELL_PRESETS, ZIKA_PRESETS, LinearScalarModel, attractor, classify_stemcell,
                      classify_zika, nonlocal_to_local_ivp_error, stemcell_preset, zika_preset)
from ..models.stemcell import StemCellModel
from ..variational import certify_equality
from .config import ConfigError, RunConfig, emit_config, parse_config
from .scenarios import build_kernel, build_spec, resolve_scenario

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 1, 2

DEFAULT_VALUES = {
    "sweep-rate": [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3],
    "sweep-range": [0.2, 0.1, 0.05],
    "sweep-freq": [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 20.0, 100.0, 1000.0],
    "convergence": [0.2, 0.1, 0.05],
}


@dataclass
class Outcome:
    results: dict
    header: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    status: int = EXIT_OK


def spec_of(cfg: RunConfig):
    spec = build_spec(resolve_scenario(cfg.scenario), cfg.n, cfg.steps)
    if cfg.tau is not None:
        spec = spec.replace(tau=cfg.tau)
    if cfg.sigma is not None:
        spec = spec.replace(sigma=cfg.sigma)
    return spec


def _scenario_name(cfg: RunConfig) -> str:
    return cfg.scenario if isinstance(cfg.scenario, str) else cfg.scenario.name


def _eigen_rows(spec, phi: np.ndarray) -> list:
    x = spec.grid.nodes
    return [(a, *x[a], i, phi[a, i]) for a in range(spec.n) for i in range(spec.l)]


def _eigen_header(spec) -> list:
    return ["node"] + (["x"] if spec.grid.dim == 1 else ["x1", "x2"]) + ["species", "value"]


# -- operator commands ------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig) -> Outcome:
    spec = spec_of(cfg)
    res = spectral_bound(spec, stepper=cfg.stepper, tol=cfg.tol)
    out = {"scenario": _scenario_name(cfg), **res.summary(), "clip": res.clip,
           "structure": spec.structure().as_dict()}
    return Outcome(out, _eigen_header(spec), _eigen_rows(spec, res.eigenfunction[0]))


def cmd_existence(cfg: RunConfig) -> Outcome:
    spec = spec_of(cfg)
    rep = existence_criteria(spec, spectral_bound(spec, stepper=cfg.stepper, tol=cfg.tol))
    rows = [(a, r) for a, r in rep.r_F_scan]
    return Outcome({"scenario": _scenario_name(cfg), **rep.summary()}, ["alpha", "r_F"], rows)


def cmd_approx(cfg: RunConfig) -> Outcome:
    spec = spec_of(cfg)
    table = sandwich_check(spec, cfg.levels, cfg.eps0, stepper=cfg.stepper)
    rows = [(r.k, r.epsilon, r.delta_max, r.depth, r.radius, r.s_lower, r.s_mid, r.s_upper, r.gap, r.beta_sup,
             r.thm14_flag, r.ok) for r in table.rows]
    out = {"scenario": _scenario_name(cfg), "s": table.mid_result.s, "gaps": table.gaps,
           "gaps_shrinking": table.gaps_shrinking, "ok": table.ok, "final_gap": table.gaps[-1]}
    header = ["k", "epsilon", "delta_max", "depth", "radius", "s_lower", "s", "s_upper", "gap", "beta_sup",
              "proxy_flag", "ok"]
    return Outcome(out, header, rows, EXIT_OK if table.ok and table.gaps_shrinking else EXIT_FAIL)


def cmd_certify(cfg: RunConfig) -> Outcome:
    spec = spec_of(cfg)
    rep = certify_equality(spec, tol=cfg.cert_tol, route=cfg.route, n_levels=cfg.levels)
    rows = [(t.get("level"), t["lower"], t["upper"]) for t in rep.trace]
    out = {"scenario": _scenario_name(cfg), **rep.summary()}
    return Outcome(out, ["level", "lower", "upper"], rows, EXIT_OK if rep.certified else EXIT_FAIL)


def cmd_local_eigen(cfg: RunConfig) -> Outcome:
    spec = spec_of(cfg)
    if not spec.scaled:
        raise ConfigError("local-eigen needs a scaled or dirichlet scenario")
    lp = local_problem_from_spec(spec, cfg.local_n)
    res = local_principal_eigen(lp, cfg.stepper)
    x = lp.grid.nodes
    rows = [(a, *x[a], i, res.eigenfunction[0, a, i]) for a in range(lp.grid.n) for i in range(lp.l)]
    return Outcome({"scenario": _scenario_name(cfg), "local_n": cfg.local_n, **res.summary()},
                   _eigen_header(spec), rows)


# -- sweeps -------------------------------------------------------------------------


def _sweep_worker(cfg_json: str, value: float):
    """Rebuilds the spec in the worker (specs hold closures and do not pickle)."""
    cfg = parse_config(cfg_json)
    spec = spec_of(cfg)
    if cfg.command == "sweep-rate":
        return value, rate_point(spec, value, cfg.stepper)
    if cfg.command == "sweep-range":
        m = spec.m if cfg.m is None else cfg.m
        if not _resolution_ok(spec, value)[0]:
            return value, None
        return value, range_point(spec, value, m, cfg.stepper)
    return value, frequency_point(spec, value, None, cfg.stepper)


def _precompute(cfg: RunConfig, values) -> dict | None:
    if cfg.workers <= 1 or len(values) < 2:
        return None
    text = emit_config(cfg)
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        done = list(pool.map(_sweep_worker, [text] * len(values), values))
    return {v: r for v, r in done if r is not None}


def _sweep_outcome(cfg: RunConfig, res) -> Outcome:
    target = res.target
    rows = [(p, s, r, it, target, None if target is None else abs(s - target)) for p, s, r, it in res.rows()]
    out = {"scenario": _scenario_name(cfg), **res.summary()}
    return Outcome(out, [res.param, "s", "residual", "iterations", "target", "error"], rows)


def cmd_sweep_rate(cfg: RunConfig) -> Outcome:
    values = cfg.values or DEFAULT_VALUES["sweep-rate"]
    spec = spec_of(cfg)
    return _sweep_outcome(cfg, sweep_dispersal_rate(spec, values, cfg.stepper, _precompute(cfg, values)))


def cmd_sweep_range(cfg: RunConfig) -> Outcome:
    values = cfg.values or DEFAULT_VALUES["sweep-range"]
    spec = spec_of(cfg)
    m = spec.m if cfg.m is None else cfg.m
    if not spec.scaled:
        raise ConfigError("sweep-range needs a scaled or dirichlet scenario")
    res = sweep_dispersal_range(spec, values, m, cfg.branch, cfg.local_n, cfg.stepper, _precompute(cfg, values))
    return _sweep_outcome(cfg, res)


def cmd_sweep_freq(cfg: RunConfig) -> Outcome:
    values = cfg.values or DEFAULT_VALUES["sweep-freq"]
    spec = spec_of(cfg)
    return _sweep_outcome(cfg, sweep_frequency(spec, values, None, cfg.stepper,
                                               precomputed=_precompute(cfg, values)))


# -- models -------------------------------------------------------------------------


def _trajectory_rows(traj, thin: int) -> list:
    last = traj.last_period()
    times = traj.times[-last.shape[0]:]
    return [(times[k], a, i, last[k, a, i]) for k in range(0, last.shape[0], thin)
            for a in range(last.shape[1]) for i in range(last.shape[2])]


def cmd_zika(cfg: RunConfig) -> Outcome:
    name = _scenario_name(cfg)
    if name not in ZIKA_PRESETS:
        raise ConfigError(f"zika needs one of {list(ZIKA_PRESETS)}, got {name!r}")
    p = zika_preset(name)
    c = classify_zika(p, T=cfg.periods or 200)
    out = {"scenario": name, "params": p.describe(), **c.summary()}
    status = EXIT_FAIL if c.verdict.startswith("inconclusive") else EXIT_OK
    return Outcome(out, ["t", "node", "species", "value"], _trajectory_rows(c.trajectory, cfg.thin), status)


def cmd_stemcell(cfg: RunConfig) -> Outcome:
    name = _scenario_name(cfg)
    if name not in STEMCELL_PRESETS:
        raise ConfigError(f"stemcell needs one of {list(STEMCELL_PRESETS)}, got {name!r}")
    p = stemcell_preset(name)
    model = StemCellModel(p)
    x = model.grid.nodes[:, 0]
    Q0 = np.column_stack([1.0 + 0.5 * np.sin(3 * x)] * p.l)
    c = classify_stemcell(model, Q0, cfg.periods or 60)
    out = {"scenario": name, "params": p.describe(), **c.summary()}
    if c.verdict == "persistence":
        other = attractor(model, 0.05 * np.ones_like(Q0)).last_period()
        out["independence_distance"] = float(np.max(np.abs(other - c.trajectory.last_period())))
    status = EXIT_FAIL if c.verdict.startswith("inconclusive") else EXIT_OK
    rows = _trajectory_rows(c.trajectory, cfg.thin) if c.trajectory is not None else []
    return Outcome(out, ["t", "node", "species", "value"], rows, status)


def cmd_convergence(cfg: RunConfig) -> Outcome:
    inline = resolve_scenario(cfg.scenario)
    if inline.bc_mode not in ("scaled", "dirichlet") or len(inline.kernels) != 1:
        raise ConfigError("convergence needs a scalar scaled or dirichlet scenario")
    model = LinearScalarModel(a=inline.A, d=inline.rates, kernel=build_kernel(inline.kernels[0], 1),
                              tau=inline.tau, bounds=tuple(inline.bounds), n=cfg.n, local_n=cfg.n - 1,
                              steps=cfg.steps)
    table = nonlocal_to_local_ivp_error(model, cfg.values or DEFAULT_VALUES["convergence"], cfg.horizon)
    return Outcome({"scenario": _scenario_name(cfg), **table.summary()}, ["sigma", "error"], table.rows(),
                   EXIT_OK)


COMMANDS = {
    "spectrum": cmd_spectrum, "existence": cmd_existence, "approx": cmd_approx, "certify": cmd_certify,
    "sweep-rate": cmd_sweep_rate, "sweep-range": cmd_sweep_range, "sweep-freq": cmd_sweep_freq,
    "local-eigen": cmd_local_eigen, "zika": cmd_zika, "stemcell": cmd_stemcell, "convergence": cmd_convergence,
}
