import numpy as np
import pytest

from conftest import C_T
from oracles import taylor_couette
from pbflow import ns_solver as ns
from pbflow.profile import BoundaryData, ShearProfile
from pbflow.spectral import RadialGrid, ThetaGrid


@pytest.fixture(scope="module")
def small():
    return ThetaGrid(8), RadialGrid(0.5, 32)


def _tc(delta=0.0, c_t=0.0):
    bd = BoundaryData.cosine(eta=0.0)
    return bd, ShearProfile.build(bd, c_t, delta)


def test_taylor_couette_matches_closed_form(small):
    tg, rg = small
    _, prof = _tc()
    st = ns.taylor_couette_state(prof, 0.3, tg, rg)
    u, P = taylor_couette(prof.a, prof.b, rg.nodes)
    assert np.allclose(st.u[0], u, atol=1e-14)
    # same pressure up to the gauge constant
    assert np.allclose(st.p[0] - st.p[0, -1], P - P[-1], atol=1e-12)


@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_newton_keeps_exact_solution(small, eps):
    tg, rg = small
    bd, prof = _tc()
    st, rep = ns.newton_solve(eps, bd, ns.taylor_couette_state(prof, eps, tg, rg),
                              check_layer_resolution=False)
    assert rep.converged and rep.iterations <= 1
    assert np.abs(st.u - ns.taylor_couette_state(prof, eps, tg, rg).u).max() < 1e-10


def test_log_profile_with_pressure_gradient(small):
    tg, rg = small
    bd, prof = _tc(delta=1.0, c_t=C_T)
    eps = 0.2
    G = 2 * prof.c * eps ** 2
    seed = ns.taylor_couette_state(prof, eps, tg, rg, G)
    st, rep = ns.newton_solve(eps, bd, seed, check_layer_resolution=False)
    assert rep.iterations <= 1
    assert st.pressure_gradient == G
    assert np.abs(st.u - seed.u).max() < 1e-10


def test_newton_recovers_from_perturbed_seed(small):
    tg, rg = small
    bd, prof = _tc()
    eps = 0.5
    seed = ns.taylor_couette_state(prof, eps, tg, rg)
    r = rg.nodes
    bump = 0.05 * np.cos(tg.nodes)[:, None] * ((r - 0.5) * (1 - r))[None, :]
    st, rep = ns.newton_solve(eps, bd, seed.copy(u=seed.u + bump, v=seed.v + bump),
                              check_layer_resolution=False)
    assert np.abs(st.u - seed.u).max() < 1e-9 and np.abs(st.v).max() < 1e-9
    assert all(c < 10 for c in rep.quadratic_ratios()[:-1])


def test_vorticity_of_shear_flows(small):
    tg, rg = small
    r = rg.nodes
    for a, b in ((1.0, 0.0), (0.0, 1.0), (2.0, -0.3)):
        st = ns.NSState(0.1, tg, rg, np.tile(a * r + b / r, (tg.n, 1)), np.zeros((tg.n, rg.n)),
                        np.zeros((tg.n, rg.n)))
        assert np.allclose(ns.vorticity(st), 2 * a, atol=1e-11)
    st = ns.NSState(0.1, tg, rg, np.tile(r * np.log(r), (tg.n, 1)), np.zeros((tg.n, rg.n)),
                    np.zeros((tg.n, rg.n)))
    assert np.allclose(ns.vorticity(st), 2 * np.log(r) + 1, atol=1e-11)


def test_pressure_gauge_invariance(small):
    tg, rg = small
    _, prof = _tc()
    st = ns.taylor_couette_state(prof, 0.1, tg, rg)
    a = ns.ns_residual(st)
    b = ns.ns_residual(st.copy(p=st.p + 3.7))
    for x, y in zip(a, b):
        assert np.abs(x - y).max() < 1e-12


def test_area_weights_and_norm(small):
    tg, rg = small
    w = ns.area_weights(tg, rg)
    assert w.sum() == pytest.approx(1.0)
    assert ns.l2_norm(np.full((tg.n, rg.n), 2.0), tg, rg) == pytest.approx(2.0)


def test_resolution_checks():
    rg = RadialGrid(0.5, 16)
    with pytest.raises(ns.ResolutionError):
        ns.check_resolution(0.001, rg)
    n = ns.suggest_nr(0.02, 0.5)
    assert n % 2 == 0 and RadialGrid(0.5, n).wall_spacing() <= 0.005


def test_regrid_round_trip(small):
    tg, rg = small
    r = rg.nodes
    u = np.cos(tg.nodes)[:, None] * (r ** 2)[None, :] + 1.0
    st = ns.NSState(0.1, tg, rg, u, 0 * u, 0 * u)
    back = ns.regrid(ns.regrid(st, ThetaGrid(16), RadialGrid(0.5, 48)), tg, rg)
    assert np.abs(back.u - u).max() < 1e-12
    with pytest.raises(ValueError):
        ns.regrid(st, tg, RadialGrid(0.4, 32))


def test_continuation_unperturbed(small):
    tg, rg = small
    bd, prof = _tc()

    def seed(eps, delta):
        return ns.taylor_couette_state(prof, eps, tg, rg)

    states, reports = ns.continuation([0.5], 0.0, bd, seed, check_layer_resolution=False)
    assert len(states) == 1 and reports[0].path[0]["seed"] == "seed"
    states, reports = ns.continuation([0.5, 0.3, 0.2], 0.0, bd, seed, check_layer_resolution=False)
    assert [s.epsilon for s in states] == [0.5, 0.3, 0.2]
    for s in states:
        assert np.abs(s.u - seed(s.epsilon, 0).u).max() < 1e-9
    with pytest.raises(ValueError):
        ns.continuation([0.2, 0.3], 0.0, bd, seed)


def test_continuation_reports_failure(small):
    tg, rg = small
    bd, prof = _tc()

    def seed(eps, delta):
        return ns.taylor_couette_state(prof, eps, tg, rg)

    with pytest.raises(ns.ContinuationError) as info:
        ns.continuation([0.5, 0.001], 0.0, bd, seed)
    assert info.value.epsilon == 0.001 and len(info.value.states) == 1


@pytest.mark.slow
def test_perturbed_solve_quadratic_and_structure(problem, expansion):
    st, rep = problem.solve(expansion, 0.05)
    assert rep.converged and rep.iterations <= 6
    h = rep.history
    assert all(b < a for a, b in zip(h, h[1:]))
    assert np.abs(st.v.mean(axis=0)).max() < 1e-10
    Fu, Fv, Fc = ns.ns_residual(st)
    assert np.abs(Fc).max() < 1e-8
    assert ns.system_norm(st, problem.bd) < 1e-9
