"""Named model presets for the three Zika regimes and the stem cell cases."""

from __future__ import annotations

import dataclasses

from ..fields import constant_kernel, uniform_kernel
from ..floquet import spectral_bound
from .stemcell import StemCellModel, StemCellParams
from .zika import ZikaParams

_ZIKA_BASE = dict(beta="1+0.5*sin(2*pi*t)", H_u="1+0.5*cos(pi*x)")


def zika_preset(name: str) -> ZikaParams:
    if name == "Z-(i)":
        # endemic; finer time step keeps the splitting bias of the attractor comparison below 1e-3
        return ZikaParams(**_ZIKA_BASE, steps=320, name=name)
    if name == "Z-(ii)":
        return ZikaParams(**{**_ZIKA_BASE, "sigma1": 0.3, "sigma2": 0.3}, name=name)
    if name == "Z-(iii)":
        return ZikaParams(**{**_ZIKA_BASE, "beta": "0.01*(1+0.5*sin(2*pi*t))", "d2": 3.0}, name=name)
    raise KeyError(f"unknown Zika preset {name!r}")


def _neutral_base() -> StemCellParams:
    return StemCellParams(c=[[0.9, 0.3], [0.2, 0.8]], beta=["1+0.3*sin(2*pi*t)", "1.2+0.2*x"],
                          kappa=[0.5, "0.4+0.2*cos(2*pi*t)"], kernels=[uniform_kernel(), uniform_kernel()],
                          n=40, steps=100, name="S-n0-neutral")


def stemcell_preset(name: str) -> StemCellParams:
    if name == "S-n0-decay":
        return StemCellParams(name=name)
    if name == "S-n0-neutral":
        # s = 0 never occurs naturally; shift the reaction by the computed s
        base = _neutral_base()
        s = spectral_bound(StemCellModel(base).linear_spec(), with_adjoint=False).s
        return dataclasses.replace(base, shift=-s)
    if name == "S-n2-persist":
        return StemCellParams(c=[[1.0, 0.5], [0.5, 1.0]], beta=["1+0.3*sin(2*pi*t)", "1+0.2*x"],
                              kappa=[1.0, "1+0.5*sin(2*pi*t)"], kernels=[constant_kernel(1.0)] * 2,
                              n_exp=2.0, n=40, steps=40, name=name)
    raise KeyError(f"unknown stem cell preset {name!r}")


ZIKA_PRESETS = ("Z-(i)", "Z-(ii)", "Z-(iii)")
STEMCELL_PRESETS = ("S-n0-decay", "S-n0-neutral", "S-n2-persist")
