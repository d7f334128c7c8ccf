from __future__ import annotations

import numpy as np
import pytest

from conftest import inline, random_spec
from nlspec.operator import (PreconditionError, apply_N_shifted, apply_spatial, assemble_dense, build_bc_variant,
                             flatten_state, periodic_derivative, resolvent_N, unflatten_state)


def test_flatten_is_species_major():
    u = np.arange(6.0).reshape(3, 2)
    v = flatten_state(u)
    assert list(v) == [0, 2, 4, 1, 3, 5]
    assert np.array_equal(unflatten_state(v, 3, 2), u)


def test_dense_matches_matrix_free(rng):
    spec = random_spec(rng, 15, 3)
    u = rng.uniform(-1, 1, (15, 3))
    for t in (0.0, 0.37):
        G = assemble_dense(spec, t)
        assert np.allclose(G @ flatten_state(u), flatten_state(apply_spatial(spec, u, t)), atol=1e-12)


def test_scaled_mode_subtracts_outflow():
    spec = inline(n=20, steps=8, kernels=[{"type": "uniform"}], rates=2.0, A=1.0, sigma=0.5, m=2.0,
                  bc_mode="dirichlet")
    # D0 = sigma^-m d = 8, B = A - D0
    assert np.allclose(spec.D0.values, 8.0)
    assert np.allclose(spec.reaction.values, -7.0)
    u = np.ones((20, 1))
    out = apply_spatial(spec, u, 0.0)
    K = spec.kernel_matrices(0.0)[0]
    assert np.allclose(out[:, 0], 8.0 * K.sum(axis=1) - 7.0)


def test_constant_kernel_gives_integral():
    spec = inline(n=50, steps=8, kernels=[{"type": "constant", "value": 1.0}], D=1.0, A=0.0)
    out = apply_spatial(spec, np.ones((50, 1)), 0.0)
    assert np.allclose(out, 1.0)


def test_bc_variants():
    spec = inline(n=30, steps=8, kernels=[{"type": "uniform"}], D=2.0, A=0.5, sigma=0.2)
    dirich = build_bc_variant(spec, "dirichlet")
    assert np.allclose(dirich.A.values, 0.5 - 2.0)
    neu = build_bc_variant(spec, "neumann")
    # Neumann preserves constants when A~ = 0
    neu0 = build_bc_variant(spec.replace(A=spec.A.replace(np.zeros_like(spec.A.values))), "neumann")
    assert np.allclose(apply_spatial(neu0, np.ones((30, 1)), 0.0), 0.0, atol=1e-12)
    assert np.all(neu.A.values >= dirich.A.values - 1e-14)
    with pytest.raises(ValueError):
        build_bc_variant(spec, "robin")


def test_bc_variant_needs_weak_coupling():
    spec = inline(n=10, steps=8, kernels=[{"type": "uniform"}] * 2, D=[[1.0, 0.5], [0.0, 1.0]],
                  A=[[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(PreconditionError):
        build_bc_variant(spec, "dirichlet")


def test_periodic_derivative_fourth_order():
    errs = []
    for steps in (20, 40):
        t = np.arange(steps) / steps
        errs.append(np.max(np.abs(periodic_derivative(np.sin(2 * np.pi * t)) - 2 * np.pi * np.cos(2 * np.pi * t))))
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.05)


def test_resolvent_inverts_shifted_N():
    spec = inline(n=8, steps=64, kernels=[{"type": "uniform"}], D=1.0, A="x + 0.5*sin(2*pi*t)", sigma=0.3)
    phi = 1.0 + 0.3 * np.cos(2 * np.pi * np.arange(64) / 64)[:, None, None] * np.ones((64, 8, 1))
    psi = resolvent_N(spec, 2.0, phi)
    assert np.all(psi > 0)
    back = apply_N_shifted(spec, 2.0, psi)
    assert np.max(np.abs(back - phi)) < 1e-4


def test_resolvent_precondition():
    spec = inline(n=8, steps=16, kernels=[{"type": "uniform"}], D=1.0, A="x", sigma=0.3)
    with pytest.raises(PreconditionError):
        resolvent_N(spec, 0.5, np.ones((16, 8, 1)))


def test_raw_spec_needs_D():
    from nlspec.cli.config import ConfigError

    with pytest.raises(ConfigError, match="D required"):
        inline(kernels=[{"type": "uniform"}], A=0.0)
