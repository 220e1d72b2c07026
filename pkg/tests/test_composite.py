import numpy as np
import pytest

from conftest import C_T, RESIDUAL_EPS
from oracles import h_of_sin
from pbflow import composite as cp
from pbflow.ns_solver import divergence, ns_residual, taylor_couette_state
from pbflow.profile import BoundaryData, ShearProfile
from pbflow.spectral import RadialGrid, ThetaGrid
from pbflow.verify import order_fit


@pytest.fixture(scope="module")
def flat():
    tg, rg = ThetaGrid(16), RadialGrid(0.5, 48)
    bd = BoundaryData.cosine(eta=0.0)
    return bd, cp.build_expansion(bd, C_T, 0.5, tg, rg, n_layer=48, n_psi=48)


@pytest.mark.parametrize("K", [0, 1])
def test_unperturbed_composite_is_the_shear_flow(flat, K):
    bd, exp = flat
    comp = cp.assemble(K, 0.05, exp)
    ref = taylor_couette_state(exp.profile, 0.05, exp.theta_grid, exp.radial_grid)
    assert np.abs(comp.u - ref.u).max() < 1e-12
    assert np.abs(comp.v).max() < 1e-12
    rep = cp.residual(comp)
    assert rep.linf_u < 1e-9 and rep.linf_v < 1e-9


@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_taylor_couette_state_residual(eps):
    tg, rg = ThetaGrid(8), RadialGrid(0.5, 32)
    prof = ShearProfile.build(BoundaryData.cosine(eta=0.0), 0.0, 0.0)
    Fu, Fv, Fc = ns_residual(taylor_couette_state(prof, eps, tg, rg))
    # at eps = 1 the second derivatives amplify roundoff to about 1e-9
    assert max(np.abs(Fu).max(), np.abs(Fv).max(), np.abs(Fc).max()) < 1e-8


def test_log_profile_needs_the_pressure_gradient():
    tg, rg = ThetaGrid(8), RadialGrid(0.5, 32)
    prof = ShearProfile.build(BoundaryData.cosine(eta=0.0), -1.0, 1.0)
    eps = 0.1
    ok = taylor_couette_state(prof, eps, tg, rg, pressure_gradient=2 * prof.c * eps ** 2)
    assert np.abs(ns_residual(ok)[0]).max() < 1e-10
    bad = taylor_couette_state(prof, eps, tg, rg)
    assert np.abs(ns_residual(bad)[0]).max() > 1e-3


def test_corrector_h_matches_antiderivative():
    tg, rg = ThetaGrid(16), RadialGrid(0.5, 16)
    s = rg.nodes * (1 - rg.nodes)
    K_field = np.sin(tg.nodes)[:, None] * s[None, :]
    assert np.abs(cp.corrector_h(K_field) - h_of_sin(s)(tg.nodes)).max() < 1e-14
    with pytest.raises(cp.ParameterError):
        cp.corrector_h(K_field + 1.0)


@pytest.mark.parametrize("K", [0, 1])
def test_composite_structure(expansion, bd_default, K):
    comp = cp.assemble(K, 0.05, expansion)
    th = comp.theta_grid.nodes
    assert np.array_equal(comp.u[:, -1], bd_default.outer_wall(th))
    assert np.array_equal(comp.u[:, 0], bd_default.inner_wall(th))
    assert np.all(comp.v[:, [0, -1]] == 0.0)
    assert np.abs(comp.v.mean(axis=0)).max() < 1e-14
    assert np.abs(divergence(comp.theta_grid, comp.radial_grid, comp.u, comp.v)).max() < 1e-12
    assert comp.u.min() > 0
    assert comp.pressure_gradient == pytest.approx(2 * expansion.profile.c * 0.05 ** 2)


def test_residual_orders(expansion):
    l2 = {K: [cp.residual(cp.assemble(K, e, expansion)).l2_u for e in RESIDUAL_EPS] for K in (0, 1)}
    s0 = order_fit(RESIDUAL_EPS, l2[0]).slope
    s1 = order_fit(RESIDUAL_EPS, l2[1]).slope
    assert s1 > 1.8
    assert s1 > s0 + 1.0
    assert all(a > b for a, b in zip(l2[0], l2[1]))


def test_leading_composite_wall_values(expansion, bd_default):
    # without the cutoff each wall also sees the tail of the opposite layer, ten layer widths away
    u = cp.leading_composite(expansion, 0.05)
    th = expansion.theta_grid.nodes
    assert np.abs(u[:, -1] - bd_default.outer_wall(th)).max() < 1e-5
    assert np.abs(u[:, 0] - bd_default.inner_wall(th)).max() < 1e-5


def test_parameter_errors(expansion):
    with pytest.raises(cp.ParameterError):
        cp.assemble(2, 0.05, expansion)
    with pytest.raises(cp.ParameterError, match="overlap"):
        cp.assemble(1, 0.5, expansion)
    with pytest.raises(cp.ParameterError):
        cp.build_expansion(expansion.bd, C_T, 0.5, expansion.theta_grid, expansion.radial_grid, order=2)
