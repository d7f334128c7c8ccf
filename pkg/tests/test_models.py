from __future__ import annotations

import numpy as np
import pytest

from conftest import inline
from nlspec.floquet import spectral_bound
from nlspec.grid import build_spatial_grid
from nlspec.models import (BlowupError, LinearScalarModel, SemilinearSolver, StemCellModel, StemCellParams,
                           ZikaModel, ZikaParams, attractor, classify_stemcell, classify_zika, integrate_system,
                           ivp_error, nonlocal_to_local_ivp_error, stemcell_preset, zika_preset, zika_thresholds)
from nlspec.models.common import PeriodicTable, pairing
from nlspec.operator import PreconditionError


def _mean_field(steps, a=-1.0):
    # constant kernel on [0, 1]: P[u] = int u, so spatially constant data stay constant
    return inline(n=10, steps=steps, kernels=[{"type": "constant"}], D=1.0, A=a)


def test_linear_growth_matches_exponential():
    spec = inline(n=10, steps=20, kernels=[{"type": "constant"}], D=1.0, A=0.0)
    traj = integrate_system(spec, None, np.ones((10, 1)), 3.0)
    assert traj.final == pytest.approx(np.full((10, 1), np.exp(3.0)), rel=1e-10)
    assert traj.periods == 3.0 and traj.states.shape == (61, 10, 1)


def _logistic(t, u):
    return u * (1.0 - u)


def test_logistic_commuting_split_is_exact_to_rk4():
    # u' = int u - u + u (1 - u) = u (1 - u) for constant data; the linear flow is trivial
    exact = 1.0 / (1.0 + (1.0 / 0.1 - 1.0) * np.exp(-2.0))
    errs = [abs(integrate_system(_mean_field(st), _logistic, np.full((10, 1), 0.1), 2.0).final[0, 0] - exact)
            for st in (10, 20)]
    assert errs[1] < 1e-6
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.15)


def test_logistic_splitting_is_second_order():
    # u' = 2u - u^2: linear and reaction flows do not commute
    exact = 2.0 / (1.0 + (2.0 / 0.1 - 1.0) * np.exp(-4.0))
    errs = [abs(integrate_system(_mean_field(st, 0.0), _logistic, np.full((10, 1), 0.1), 2.0).final[0, 0] - exact)
            for st in (20, 40)]
    assert errs[1] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)


def test_run_to_periodic_finds_equilibrium():
    traj = SemilinearSolver(_mean_field(20), _logistic).run_to_periodic(np.full((10, 1), 0.3), tol=1e-9)
    assert traj.periodic_residual <= 1e-9
    assert np.allclose(traj.final, 1.0, atol=1e-8)


def test_negative_initial_data_rejected():
    with pytest.raises(ValueError):
        integrate_system(_mean_field(8), None, -np.ones((10, 1)), 1.0)


def test_blowup_guard():
    spec = inline(n=10, steps=8, kernels=[{"type": "constant"}], D=1.0, A=1.0)
    with pytest.raises(BlowupError):
        integrate_system(spec, None, np.ones((10, 1)), 20.0)


def test_periodic_table_and_pairing():
    g = build_spatial_grid((0, 1), 4)
    tab = PeriodicTable("x + sin(2*pi*t)", g, 8)
    assert np.allclose(tab(0.25), g.x + 1.0)
    assert np.allclose(tab(1.25), tab(0.25))
    assert tab.knots(8).shape == (9, 4)
    assert np.allclose(tab.knots(8)[0], tab.knots(8)[-1])
    u = np.ones((4, 2))
    assert pairing(u, u, g.weights) == pytest.approx(2.0)


def test_stemcell_rejects_sublinear_exponent():
    with pytest.raises(PreconditionError):
        StemCellModel(StemCellParams(n_exp=0.5))
    with pytest.raises(ValueError):
        StemCellModel(StemCellParams(c=[[-1.0]]))


def test_stemcell_decay_rate_closed_form():
    # c beta int Q - (beta + kappa) Q with beta = 1, kappa = 2 and mean-field kernel: rate -2
    c = classify_stemcell(stemcell_preset("S-n0-decay"))
    assert c.verdict == "decay"
    assert c.s == pytest.approx(-2.0, abs=1e-9)
    assert c.evidence["rate"] == pytest.approx(-2.0, rel=0.05)


def test_stemcell_neutral_projection():
    c = classify_stemcell(stemcell_preset("S-n0-neutral"))
    assert c.verdict == "neutral"
    assert c.evidence["distance"] <= 1e-3


def test_stemcell_persistence_independent_of_initial_data():
    model = StemCellModel(stemcell_preset("S-n2-persist"))
    a = attractor(model, np.full((40, 2), 2.0)).last_period()
    b = attractor(model, np.full((40, 2), 0.05)).last_period()
    assert a.min() > 0
    assert np.max(np.abs(a - b)) <= 1e-4


def test_zika_linearisation_is_cooperative():
    model = ZikaModel(ZikaParams())
    rep = model.full_linear_spec().structure()
    assert rep.H2
    L0 = model.L0_spec()
    assert L0.l == 1


def test_zika_reaction_vanishes_at_disease_free_state():
    model = ZikaModel(ZikaParams())
    U = np.zeros((model.grid.n, 3))
    assert np.allclose(model.reaction(0.0, U), 0.0)


def test_zika_thresholds_signs():
    th = zika_thresholds(zika_preset("Z-(iii)"))
    assert th.s_L0 < 0 and th.s_L1 is None
    th = zika_thresholds(zika_preset("Z-(ii)"))
    assert th.s_L0 > 0 and th.s_L1 < 0
    assert th.V_star.min() > 0 and th.V_star_residual < 1e-6


@pytest.mark.parametrize("name,verdict,bound", [("Z-(ii)", "vector_only", 1e-4), ("Z-(iii)", "extinction", 1e-5)])
def test_zika_fast_presets(name, verdict, bound):
    c = classify_zika(zika_preset(name))
    assert c.verdict == verdict and c.evidence["distance"] <= bound


def test_unknown_presets():
    with pytest.raises(KeyError):
        zika_preset("Z-(iv)")
    with pytest.raises(KeyError):
        stemcell_preset("S-n1")


def test_ivp_error_zero_for_zero_data():
    model = LinearScalarModel(u0="0", n=60, local_n=59, steps=50)
    assert ivp_error(model, 0.2, 0.05) == 0.0


def test_convergence_table_refuses_unresolved_sigma():
    model = LinearScalarModel(n=40, local_n=39, steps=50)
    table = nonlocal_to_local_ivp_error(model, [0.2, 0.01], T=0.02)
    assert table.sigmas == [0.2] and len(table.refused) == 1
    assert table.errors[0] > 0


def test_mean_field_s_matches_rate():
    spec = StemCellModel(stemcell_preset("S-n0-decay")).linear_spec()
    assert spectral_bound(spec).s == pytest.approx(-2.0, abs=1e-9)
