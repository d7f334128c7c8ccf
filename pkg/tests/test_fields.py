from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlspec.expr import ExpressionError, parse_expression
from nlspec.fields import (check_structure, constant_field, constant_kernel, expression_kernel, gaussian_kernel,
                           irreducible, kernel_mass, kernel_moment, kernel_second_moment, kernel_set, rescale_kernel,
                           sample_field, separable_kernel, triangular_kernel, uniform_kernel)
from nlspec.grid import build_spatial_grid, build_time_grid


@pytest.fixture
def grid():
    return build_spatial_grid((0.0, 1.0), 20)


@pytest.fixture
def tg():
    return build_time_grid(10)


def test_sample_expression_field(grid, tg):
    f = sample_field([["x + sin(2*pi*t)", "1"], ["0", "-x"]], grid, tg)
    assert f.values.shape == (11, 20, 2, 2)
    assert np.allclose(f.values[0, :, 0, 0], grid.x)
    # off-knot evaluation is exact for analytic fields
    assert np.allclose(f.at(0.125)[:, 0, 0], grid.x + np.sin(2 * np.pi * 0.125))
    assert not f.time_constant


def test_tabulated_is_linear_between_knots(grid, tg):
    f = sample_field("sin(2*pi*t)", grid, tg).tabulated()
    mid = f.at(0.05)
    assert np.allclose(mid, 0.5 * (f.values[0] + f.values[1]))


def test_nonperiodic_field_rejected(grid, tg):
    with pytest.raises(ValueError, match="periodic"):
        sample_field("t", grid, tg)


def test_nonfinite_field_rejected(grid, tg):
    with pytest.raises(ValueError, match="non-finite"):
        sample_field("1/(x-x)", grid, tg)


def test_vector_spec_is_diagonal(grid, tg):
    f = sample_field([1.0, 2.0], grid, tg, "d")
    assert np.allclose(f.values[0, 0], np.diag([1.0, 2.0]))


def test_expression_whitelist():
    assert parse_expression("2*x + t")(x=np.array([1.0]), t=np.array([0.5]))[0] == 2.5
    for bad in ("__import__('os')", "x.real", "open('f')", "[1]"):
        with pytest.raises(ExpressionError):
            parse_expression(bad)


@pytest.mark.parametrize("kernel,m2", [(uniform_kernel(1), 1 / 3), (triangular_kernel(1), 1 / 6),
                                       (gaussian_kernel(1, 6.0), 1.0)])
def test_kernel_moments_1d(kernel, m2):
    assert kernel_moment(kernel, 0) == pytest.approx(1.0, abs=1e-8)
    assert kernel_moment(kernel, 2) == pytest.approx(m2, rel=1e-6)


def test_kernel_moments_2d():
    # uniform disc of radius 1: int |z|^2 = 1/2
    assert kernel_moment(uniform_kernel(2), 0) == pytest.approx(1.0, abs=1e-10)
    assert kernel_moment(uniform_kernel(2), 2) == pytest.approx(0.5, rel=1e-8)


def test_unbounded_support_has_no_moment():
    with pytest.raises(ValueError):
        kernel_moment(constant_kernel(1.0), 2)


@given(sigma=st.floats(0.05, 5.0))
@settings(max_examples=25, deadline=None)
def test_rescaling_preserves_mass_and_scales_second_moment(sigma):
    ks = kernel_set(triangular_kernel(1))
    ks_s = rescale_kernel(ks, sigma)
    assert kernel_mass(ks_s)[0, 0] == pytest.approx(1.0, abs=1e-8)
    assert kernel_second_moment(ks_s)[0, 0] == pytest.approx(sigma ** 2 / 6, rel=1e-6)


def test_rescale_composes():
    ks = rescale_kernel(rescale_kernel(kernel_set(uniform_kernel(1)), 0.5), 0.4)
    assert ks.sigma == pytest.approx(0.2)
    with pytest.raises(ValueError):
        rescale_kernel(kernel_set(separable_kernel("1+x", "1+x")), 0.5)


def test_uniform_kernel_edge_value():
    z = np.array([[0.0], [0.999], [1.0], [1.001]])
    vals = uniform_kernel(1).profile(z, 0.0)
    assert list(vals) == [0.5, 0.5, 0.25, 0.0]


def test_separable_and_expression_kernels(grid):
    k = separable_kernel("1+x", "1+x")
    K = k(grid.nodes, grid.nodes, 0.0, 1.0)
    assert np.allclose(K, np.outer(1 + grid.x, 1 + grid.x))
    e = expression_kernel("exp(-abs(z))", 1, radius=None)
    assert e.convolution
    g = expression_kernel("x*y + 1", 1)
    assert np.allclose(g(grid.nodes, grid.nodes, 0.0, 1.0), np.outer(grid.x, grid.x) + 1)


def test_irreducible():
    assert irreducible(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not irreducible(np.array([[1.0, 1.0], [0.0, 1.0]]))
    cyc = np.roll(np.eye(4), 1, axis=1)
    assert irreducible(cyc)


def test_structure_report(grid, tg):
    A = sample_field([[0.0, 1.0], [1.0, "x"]], grid, tg)
    D = constant_field(np.eye(2), grid, tg, "D")
    ks = kernel_set(uniform_kernel(1), 2, sigma=0.3)
    rep = check_structure(D, A, kernels=ks)
    assert rep.H1 and rep.H2 and rep.H2_tilde and rep.A_irreducible and not rep.D_irreducible
    bad = sample_field([[0.0, -1.0], [1.0, 0.0]], grid, tg)
    assert not check_structure(D, bad, kernels=ks).H2
