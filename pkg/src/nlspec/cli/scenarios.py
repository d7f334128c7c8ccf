"""Built-in operator scenarios and the inline-spec builder."""

from __future__ import annotations

from ..fields import (constant_kernel, expression_kernel, gaussian_kernel, kernel_set, sample_field,
                      separable_kernel, triangular_kernel, uniform_kernel)
from ..grid import build_spatial_grid, build_time_grid
from ..models.presets import STEMCELL_PRESETS, ZIKA_PRESETS
from ..operator import OperatorSpec
from .config import ConfigError, InlineSpec, KernelConfig

_K1 = [{"type": "constant", "value": 1.0}]
_UNI = [{"type": "uniform"}]

SCENARIOS: dict[str, dict] = {
    # scalar, k = 1 on [0, 1], d = 1, a = 0: s = 1
    "SCEN-A": dict(kernels=_K1, D=1.0, A=0.0, name="SCEN-A"),
    # rank-one kernel (1 + x)(1 + y): s = int (1 + x)^2 = 7/3
    "SCEN-B": dict(kernels=[{"type": "separable", "f": "1+x", "g": "1+x"}], D=1.0, A=0.0, name="SCEN-B"),
    # SCEN-A plus a zero-mean time-only reaction: s unchanged
    "SCEN-C": dict(kernels=_K1, D=1.0, A="sin(2*pi*t)", name="SCEN-C"),
    # 2 x 2 constant system: s = 1 + 1
    "SCEN-D": dict(kernels=_K1 * 2, D=[[1.0, 0.0], [0.0, 1.0]], A=[[0.0, 1.0], [1.0, 0.0]], name="SCEN-D"),
    # scaled Dirichlet, m = 2: local limit -pi^2
    "SCEN-E": dict(kernels=_UNI, rates=6.0, A=0.0, sigma=0.1, m=2.0, bc_mode="dirichlet", name="SCEN-E"),
    # Dirichlet scalar for the rate and range sweeps
    "SCEN-F": dict(kernels=_UNI, rates=1.0, A="4-(x-0.5)**2", sigma=0.5, m=0.0, bc_mode="dirichlet",
                   name="SCEN-F"),
    # Lipschitz, non-smooth in x: the approximation sandwich test case
    "LIP-1": dict(kernels=_UNI, D=1.0, A="1 - 0.1*abs(x-0.5) + 0.5*sin(2*pi*t)", sigma=0.2, name="LIP-1"),
    # symmetric 2 x 2 Dirichlet system for the frequency sweep
    "SYM-2": dict(kernels=_UNI * 2, rates=[1.0, 1.0], A=[["x*sin(2*pi*t)", "0.5"], ["0.5", "-x*cos(2*pi*t)"]],
                  sigma=0.3, m=0.0, bc_mode="dirichlet", name="SYM-2"),
}

# resolutions used when a scenario is run by the acceptance suite at its own scale
SCENARIO_RESOLUTION = {"LIP-1": (200, 100), "SYM-2": (50, 400)}

MODEL_PRESETS = ZIKA_PRESETS + STEMCELL_PRESETS


def build_kernel(k: KernelConfig, dim: int):
    if k.type == "uniform":
        return uniform_kernel(dim)
    if k.type == "triangular":
        return triangular_kernel(dim)
    if k.type == "gaussian":
        return gaussian_kernel(dim, k.cutoff)
    if k.type == "constant":
        return constant_kernel(k.value, dim)
    if k.type == "separable":
        if k.f is None or k.g is None:
            raise ConfigError("separable kernels need f and g")
        return separable_kernel(k.f, k.g)
    if k.expr is None:
        raise ConfigError("expression kernels need expr")
    return expression_kernel(k.expr, dim, k.radius, k.mass_normalized)


def resolve_scenario(scenario) -> InlineSpec:
    if isinstance(scenario, InlineSpec):
        return scenario
    if scenario in SCENARIOS:
        return InlineSpec.model_validate(SCENARIOS[scenario])
    if scenario in MODEL_PRESETS:
        raise ConfigError(f"scenario {scenario!r} is a model preset; use the zika or stemcell command")
    raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)} or give an inline spec")


def build_spec(inline: InlineSpec, n: int, steps: int) -> OperatorSpec:
    """OperatorSpec from a validated inline description."""
    try:
        bounds = inline.bounds
        grid = build_spatial_grid(bounds, n, inline.rule)
        tg = build_time_grid(steps)
        kernels = kernel_set([build_kernel(k, grid.dim) for k in inline.kernels],
                             sigma=1.0 if inline.bc_mode in ("scaled", "dirichlet") else inline.sigma)
        A = sample_field(inline.A, grid, tg, "A")
        scaled = inline.bc_mode in ("scaled", "dirichlet")
        if scaled:
            if inline.rates is None:
                raise ConfigError(f"scenario.rates required for bc_mode {inline.bc_mode!r}")
            return OperatorSpec(grid, tg, kernels, A, rates=sample_field(inline.rates, grid, tg, "d"), C=inline.C,
                                tau=inline.tau, sigma=inline.sigma, m=inline.m, bc_mode=inline.bc_mode,
                                name=inline.name)
        if inline.D is None:
            raise ConfigError(f"scenario.D required for bc_mode {inline.bc_mode!r}")
        return OperatorSpec(grid, tg, kernels, A, D=sample_field(inline.D, grid, tg, "D"), tau=inline.tau,
                            bc_mode=inline.bc_mode, name=inline.name)
    except ConfigError:
        raise
    except (ValueError, TypeError, SyntaxError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def scenario_spec(name: str, n: int | None = None, steps: int | None = None) -> OperatorSpec:
    """Convenience: a named scenario at the given (or its customary) resolution."""
    dn, ds = SCENARIO_RESOLUTION.get(name, (200, 400))
    return build_spec(resolve_scenario(name), n or dn, steps or ds)
