from __future__ import annotations

import numpy as np
import pytest

from conftest import inline
from nlspec.cli.scenarios import scenario_spec
from nlspec.floquet import spectral_bound
from nlspec.variational import certify_equality, rayleigh_bounds


def test_constant_test_function_on_constant_kernel():
    spec = inline(n=20, steps=8, kernels=[{"type": "constant"}], D=1.0, A=0.0)
    cert = rayleigh_bounds(spec, np.ones((20, 1)))
    assert cert.lower_bound == pytest.approx(1.0) and cert.upper_bound == pytest.approx(1.0)


def test_any_positive_function_brackets_s(rng):
    spec = inline(n=30, steps=64, kernels=[{"type": "uniform"}], D=1.0, A="x + 0.5*sin(2*pi*t)", sigma=0.3)
    s = spectral_bound(spec).s
    for _ in range(5):
        phi = rng.uniform(0.5, 2.0, (30, 1))
        cert = rayleigh_bounds(spec, phi)
        assert cert.lower_bound <= s + 1e-9 <= cert.upper_bound + 2e-9


def test_eigenfunction_gives_tight_bounds():
    spec = inline(n=30, steps=128, kernels=[{"type": "uniform"}], D=1.0, A="x + 0.5*sin(2*pi*t)", sigma=0.3)
    res = spectral_bound(spec)
    cert = rayleigh_bounds(spec, res.eigenfunction)
    assert cert.upper_bound - cert.lower_bound < 1e-5


def test_rejects_nonpositive_and_bad_shape():
    spec = inline(n=10, steps=8, kernels=[{"type": "uniform"}], D=1.0, A=0.0)
    with pytest.raises(ValueError, match="positive"):
        rayleigh_bounds(spec, np.zeros((10, 1)))
    with pytest.raises(ValueError, match="shape"):
        rayleigh_bounds(spec, np.ones((3, 10, 1)))


def test_certify_direct_on_closed_form_case():
    rep = certify_equality(scenario_spec("SCEN-D", n=50, steps=16))
    assert rep.route == "direct" and rep.certified
    assert rep.s == pytest.approx(2.0, abs=1e-9)
    assert rep.max_gap <= 1e-6
