from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlspec.grid import build_spatial_grid, build_time_grid, quadrature, subgrid


@given(a=st.floats(-5, 5), width=st.floats(0.1, 10), n=st.integers(2, 300),
       rule=st.sampled_from(["midpoint", "trapezoid"]))
@settings(max_examples=60, deadline=None)
def test_weights_sum_to_length(a, width, n, rule):
    g = build_spatial_grid((a, a + width), n, rule)
    assert g.n == n
    assert np.isclose(g.weights.sum(), width, rtol=1e-12)
    assert np.all(g.x >= a) and np.all(g.x <= a + width)


def test_midpoint_exact_for_linear_and_second_order():
    g = build_spatial_grid((0.0, 2.0), 50)
    assert quadrature(3 * g.x + 1, g) == pytest.approx(8.0, rel=1e-13)
    errs = [abs(quadrature(np.sin(build_spatial_grid((0, np.pi), m).x), build_spatial_grid((0, np.pi), m)) - 2)
            for m in (20, 40)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.01)


def test_2d_grid_ordering_and_volume():
    g = build_spatial_grid(((0, 1), (0, 2)), (4, 5))
    assert g.n == 20 and g.shape == (4, 5) and g.dim == 2
    assert g.volume == 2.0
    assert np.isclose(g.weights.sum(), 2.0)
    # first axis slowest
    assert np.all(g.nodes[:5, 0] == g.nodes[0, 0])
    assert quadrature(g.nodes[:, 0] * g.nodes[:, 1], g) == pytest.approx(1.0)


def test_spacing():
    assert build_spatial_grid((0, 1), 10).spacing == (0.1,)
    assert build_spatial_grid((0, 1), 11, "trapezoid").spacing == pytest.approx((0.1,))


@pytest.mark.parametrize("bounds,n", [((1.0, 1.0), 10), ((2.0, 1.0), 10), ((0, 1), 1)])
def test_rejects_degenerate(bounds, n):
    with pytest.raises(ValueError):
        build_spatial_grid(bounds, n)


def test_rejects_3d_and_bad_rule():
    with pytest.raises(ValueError):
        build_spatial_grid(((0, 1), (0, 1), (0, 1)), 4)
    with pytest.raises(ValueError):
        build_spatial_grid((0, 1), 4, "simpson")


def test_time_grid():
    tg = build_time_grid(8)
    assert tg.knots[0] == 0.0 and tg.knots[-1] == 1.0 and len(tg.knots) == 9
    with pytest.raises(ValueError):
        build_time_grid(3)


def test_quadrature_shape_check_and_subgrid():
    g = build_spatial_grid((0, 1), 10)
    with pytest.raises(ValueError):
        quadrature(np.ones(9), g)
    idx = subgrid(g, (0.0, 0.5))
    assert list(idx) == [0, 1, 2, 3, 4]
