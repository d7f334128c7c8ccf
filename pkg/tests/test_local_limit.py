from __future__ import annotations

import numpy as np
import pytest

from conftest import inline
from nlspec.fields import kernel_set, triangular_kernel, uniform_kernel
from nlspec.local_limit import (dirichlet_laplacian, effective_diffusivity, interior_grid, local_principal_eigen,
                                local_problem_from_spec)


def test_interior_grid():
    g = interior_grid((0.0, 1.0), 19)
    assert g.n == 19 and g.x[0] == pytest.approx(0.05) and g.x[-1] == pytest.approx(0.95)
    with pytest.raises(ValueError):
        interior_grid((0.0, 1.0), 5)


def test_laplacian_eigenvalue_second_order():
    errs = []
    for m in (20, 40):
        ev = np.max(np.linalg.eigvalsh(dirichlet_laplacian(interior_grid((0.0, 1.0), m))))
        errs.append(abs(ev + np.pi ** 2))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_laplacian_2d():
    g = interior_grid(((0.0, 1.0), (0.0, 1.0)), 20)
    ev = np.max(np.linalg.eigvalsh(dirichlet_laplacian(g)))
    assert ev == pytest.approx(-2 * np.pi ** 2, rel=5e-3)


def test_effective_diffusivity():
    # d m2 / (2N): uniform m2 = 1/3, triangular m2 = 1/6
    assert effective_diffusivity(kernel_set(uniform_kernel(1)), 6.0) == pytest.approx(1.0)
    assert effective_diffusivity(kernel_set(triangular_kernel(1)), 12.0) == pytest.approx(1.0)


def test_local_eigen_scen_e_shape():
    spec = inline(n=50, steps=8, kernels=[{"type": "uniform"}], rates=6.0, A=0.0, sigma=0.1, m=2.0,
                  bc_mode="dirichlet")
    res = local_principal_eigen(local_problem_from_spec(spec, 100))
    assert res.s == pytest.approx(-np.pi ** 2, abs=0.05)
    assert res.is_principal_eigenvalue


def test_local_with_time_periodic_reaction():
    spec = inline(n=50, steps=64, kernels=[{"type": "uniform"}], rates=6.0, A="1 + sin(2*pi*t)", sigma=0.1, m=2.0,
                  bc_mode="dirichlet")
    res = local_principal_eigen(local_problem_from_spec(spec, 100))
    assert res.s == pytest.approx(1 - np.pi ** 2, abs=0.05)


def test_local_needs_scaled():
    spec = inline(n=20, steps=8, kernels=[{"type": "uniform"}], D=1.0, A=0.0)
    with pytest.raises(ValueError):
        local_problem_from_spec(spec)
