"""Run configuration: strict JSON schema with documented defaults."""

from __future__ import annotations

import json
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, ValidationError

COMMANDS = ("spectrum", "existence", "approx", "certify", "sweep-rate", "sweep-range", "sweep-freq",
            "local-eigen", "zika", "stemcell", "convergence")

Scalar = Union[float, str]
Coeff = Union[Scalar, list[Scalar], list[list[Scalar]]]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True)


class KernelConfig(_Strict):
    type: Literal["uniform", "triangular", "gaussian", "constant", "expression", "separable"]
    value: float = 1.0
    expr: Optional[str] = None
    f: Optional[str] = None
    g: Optional[str] = None
    radius: Optional[float] = None
    mass_normalized: bool = False
    cutoff: float = 3.0


class InlineSpec(_Strict):
    """An operator -tau d/dt + D P + B on a box; expressions are in x (or x1, x2) and t."""

    bounds: list = [0.0, 1.0]
    rule: Literal["midpoint", "trapezoid"] = "midpoint"
    kernels: list[KernelConfig]
    A: Coeff
    D: Optional[Coeff] = None
    rates: Optional[Coeff] = None
    C: Optional[list[list[float]]] = None
    tau: float = 1.0
    sigma: float = 1.0
    m: float = 0.0
    bc_mode: Literal["raw", "scaled", "dirichlet", "neumann"] = "raw"
    name: str = "inline"


class RunConfig(_Strict):
    command: Literal[COMMANDS]
    scenario: Union[str, InlineSpec]
    n: int = 200
    steps: int = 400
    stepper: Literal["cf4", "cn", "rk4"] = "cf4"
    tol: float = 1e-10
    cert_tol: float = 1e-6
    route: Literal["auto", "direct", "levels"] = "auto"
    levels: int = 4
    eps0: float = 0.1
    values: Optional[list[float]] = None
    m: Optional[float] = None
    branch: Optional[Literal["small", "large"]] = None
    tau: Optional[float] = None
    sigma: Optional[float] = None
    local_n: int = 100
    periods: Optional[int] = None
    horizon: float = 0.1
    thin: int = 1
    out: Optional[str] = None
    workers: int = 1


_BRANCHES = {"str", "float", "InlineSpec", "list[union[float,str]]", "list[list[union[float,str]]]"}


def _format_errors(exc: ValidationError) -> str:
    lines = []
    errs = exc.errors()
    for e in errs:
        if len(errs) > 1 and e["type"] == "string_type" and e["loc"] == ("scenario", "str"):
            continue  # an inline scenario was given; the preset-name branch is noise
        path = ".".join(str(p) for p in e["loc"] if str(p) not in _BRANCHES)
        if e["type"] == "missing":
            lines.append(f"{path} required")
        elif e["type"] == "extra_forbidden":
            lines.append(f"unknown key {path!r}")
        else:
            lines.append(f"{path}: {e['msg']}")
    # union branches repeat the same problem; keep first occurrences
    return "; ".join(dict.fromkeys(lines))


def parse_config(text: str | dict) -> RunConfig:
    try:
        data = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    for key in ("n", "steps", "levels", "local_n", "workers", "thin"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key}: must be positive")
    return cfg


def emit_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
