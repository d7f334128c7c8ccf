from __future__ import annotations

import numpy as np
import pytest

from conftest import inline
from nlspec.asymptotics import (extrapolate, large_tau_lower_bound, space_time_kernel_average, sweep_dispersal_range,
                                sweep_dispersal_rate, sweep_frequency, with_rate_scale)
from nlspec.cli.scenarios import scenario_spec


def test_extrapolate_geometric():
    s = [1 + 0.5 ** k for k in range(5)]
    assert extrapolate(s) == pytest.approx(1.0, abs=1e-12)
    assert extrapolate([2.0]) == 2.0 and extrapolate([]) is None


def test_rate_scale_multiplies_rates():
    spec = scenario_spec("SCEN-F", n=20, steps=8)
    assert np.allclose(with_rate_scale(spec, 3.0).D0.values, 3.0 * spec.D0.values)


def test_rate_sweep_limits():
    res = sweep_dispersal_rate(scenario_spec("SCEN-F", n=60, steps=8), [1e-3, 1.0, 1e3])
    assert res.extra["small_scale_gap"] <= 0.05
    assert res.s[-1] < -100
    assert res.extra["large_scale_monotone_decrease"]


def test_range_sweep_refuses_underresolved_points():
    spec = scenario_spec("SCEN-E", n=40, steps=8)
    res = sweep_dispersal_range(spec, [0.2, 0.01], 2.0, local_n=60)
    assert res.values == [0.2]
    assert res.refused and "nodes" in res.refused[0]["reason"]


def test_range_sweep_large_branch_m0():
    spec = inline(n=40, steps=8, kernels=[{"type": "uniform"}], rates=1.0, A="1-x", sigma=1.0, m=0.0,
                  bc_mode="dirichlet")
    res = sweep_dispersal_range(spec, [5.0, 50.0, 500.0], 0.0)
    # sigma -> inf with m = 0: the dispersal term vanishes and A - D0 remains
    assert res.target == pytest.approx(1 - spec.grid.x.min() - 1.0)
    assert res.errors[-1] < 0.01


def test_kernel_average_constant_kernel():
    spec = inline(n=20, steps=8, kernels=[{"type": "constant"}], D=1.0, A=0.0, bounds=[0.0, 2.0])
    assert space_time_kernel_average(spec)[0] == pytest.approx(2.0)


def test_frequency_sweep_small():
    spec = scenario_spec("SYM-2", n=20, steps=200)
    res = sweep_frequency(spec, [0.05, 1.0, 20.0, 1000.0])
    assert res.violations == 0
    assert res.extra["large_tau_respects_bound"]
    assert res.s[-1] >= large_tau_lower_bound(spec) - 1e-7
