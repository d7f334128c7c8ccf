from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import inline
from nlspec.approximation import (cutoff, flatten_at_max, lower_upper_sequences, mollify_periodic, sandwich_check,
                                  smooth_positive_part, zeta)
from nlspec.floquet import lambda_A_profile


@given(s=st.floats(-5, 5))
def test_zeta_and_positive_part(s):
    z = float(zeta(np.array([s]))[0])
    assert 0.0 <= z <= 1.0
    if s <= 0:
        assert z == 0.0
    if s >= 1:
        assert z == 1.0
    p = float(smooth_positive_part(np.array([s]))[0])
    assert 0.0 <= p <= max(s, 0.0) + 1e-15


def test_zeta_monotone_and_cutoff():
    s = np.linspace(-0.5, 1.5, 2001)
    assert np.all(np.diff(zeta(s)) >= 0)
    rho = cutoff(np.array([0.0, 0.25, 0.5, 0.75, 1.0]), 1.0)
    assert rho[0] == 1.0 and rho[2] == 1.0 and rho[-1] == 0.0 and 0 < rho[3] < 1


def test_mollify_constant_is_exact():
    spec = inline(n=30, steps=20, kernels=[{"type": "uniform"}], D=1.0, A=2.5)
    b, delta = mollify_periodic(spec.A, 0.1)
    assert np.allclose(b.values, 2.5) and delta.max() < 1e-14


def test_mollify_error_shrinks_with_width():
    spec = inline(n=100, steps=40, kernels=[{"type": "uniform"}], D=1.0, A="abs(x-0.5) + sin(2*pi*t)")
    d = [mollify_periodic(spec.A, e)[1].max() for e in (0.1, 0.05, 0.025)]
    assert d[0] > d[1] > d[2]
    with pytest.raises(ValueError):
        mollify_periodic(spec.A, 0.5)


def test_sequences_bracket_entrywise():
    spec = inline(n=40, steps=20, kernels=[{"type": "uniform"}] * 2, D=[[1.0, 0.0], [0.0, 1.0]],
                  A=[["abs(x-0.3)", "0.5+0.5*sin(2*pi*t)"], ["abs(x-0.6)", "-x"]])
    seq = lower_upper_sequences(spec.A, 3, 0.1)
    assert seq.epsilons == [0.1, 0.05, 0.025]
    off = ~np.eye(2, dtype=bool)
    for lv in seq.levels:
        assert np.all(lv.A_minus.values <= spec.A.values + 1e-12)
        assert np.all(lv.A_plus.values >= spec.A.values - 1e-12)
        assert np.all(lv.A_minus.values[..., off] >= 0)
    widths = [np.max(lv.A_plus.values - lv.A_minus.values) for lv in seq.levels]
    assert widths[0] > widths[-1]


def test_flatten_makes_plateau():
    spec = inline(n=100, steps=16, kernels=[{"type": "uniform"}], D=1.0, A="1 - (x-0.4)**2")
    fl = flatten_at_max(spec.A, 0.01, 0.1)
    lam = lambda_A_profile(fl.A_tilde, 1.0).values
    assert np.allclose(lam, fl.lam_after, atol=1e-10)
    top = lam.max()
    near = np.abs(spec.grid.x - spec.grid.x[fl.x_star]) <= fl.radius / 2
    assert np.all(np.abs(lam[near] - top) < 1e-12)
    assert np.all(lam <= fl.lam_before + 1e-12)


def test_sandwich_small():
    spec = inline(n=60, steps=16, kernels=[{"type": "uniform"}], D=1.0, A="1 - abs(x-0.5)", sigma=0.2)
    table = sandwich_check(spec, 3, 0.1)
    assert table.ok and table.gaps_shrinking
    for r in table.rows:
        assert r.s_lower <= r.s_mid + 1e-7 <= r.s_upper + 2e-7
