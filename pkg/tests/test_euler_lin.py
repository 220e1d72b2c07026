import numpy as np
import pytest

from oracles import euler_cauchy_mode
from pbflow import euler_lin as el
from pbflow.profile import BoundaryData, ShearProfile
from pbflow.spectral import RadialGrid, ThetaGrid, d_radial, d_theta


@pytest.fixture(scope="module")
def small_grids():
    return ThetaGrid(16), RadialGrid(0.5, 48)


@pytest.fixture(scope="module")
def sheared():
    return ShearProfile.build(BoundaryData.cosine(eta=0.05), -1.0, 0.5)


@pytest.mark.parametrize("mode", [1, 2, 3])
def test_taylor_couette_reduces_to_euler_cauchy(small_grids, mode):
    tg, rg = small_grids
    tc = ShearProfile.build(BoundaryData.cosine(eta=0.0), 0.0, 0.0)
    th, r = tg.nodes, rg.nodes
    bo, bi = 0.3 * np.cos(mode * th), -0.2 * np.sin(mode * th)
    phi = el.solve_vek(np.zeros((tg.n, rg.n)), bo, bi, tc, tg, rg)
    ref = (np.real(np.exp(1j * mode * th)[:, None] * euler_cauchy_mode(mode, 0.5, 0.3, 0.2j, r)[None, :]))
    assert np.abs(phi - ref).max() < 1e-11


def test_solve_vek_residual_with_shear(small_grids, sheared):
    tg, rg = small_grids
    r = rg.nodes
    F = np.cos(tg.nodes)[:, None] * (r * (1 - r))[None, :]
    phi = el.solve_vek(F, np.sin(2 * tg.nodes), np.zeros(tg.n), sheared, tg, rg)
    lap = d_radial(phi, rg, 2) + d_radial(phi, rg) / r + d_theta(phi, 2) / r ** 2
    res = -lap + el.ue_potential(sheared, r)[None, :] * phi - F
    assert np.abs(res[:, 1:-1]).max() < 1e-9


def test_solve_vek_rejects_zero_mode_data(small_grids, sheared):
    tg, rg = small_grids
    with pytest.raises(el.SolvabilityError):
        el.solve_vek(np.zeros((tg.n, rg.n)), np.ones(tg.n), np.zeros(tg.n), sheared, tg, rg)


def test_uek_from_continuity(small_grids):
    tg, rg = small_grids
    r = rg.nodes
    s = (r - 0.5) ** 2 * (1 - r)
    phi = np.cos(tg.nodes)[:, None] * s[None, :]
    u = el.uek_from_continuity(phi, tg, rg, zero_mode=r)
    ds = 2 * (r - 0.5) * (1 - r) - (r - 0.5) ** 2
    assert np.allclose(u, -np.sin(tg.nodes)[:, None] * ds[None, :] + r[None, :], atol=1e-12)
    assert np.abs(d_theta(u) + d_radial(phi, rg)).max() < 1e-11
    with pytest.raises(el.SolvabilityError):
        el.uek_from_continuity(phi + 1.0, tg, rg)


def test_corrector_A1_manufactured():
    rg = RadialGrid(0.5, 32)
    r = rg.nodes
    A = (r - 0.5) * (1 - r) * np.exp(r)
    rhs = el.viscous_radial(A, rg)
    assert np.abs(el.corrector_A1(rhs, rg) - A).max() < 1e-12
    quad = (r - 0.5) * (1 - r)
    assert np.allclose(el.viscous_radial(quad, rg), -2 * r + (1.5 - 2 * r) - quad / r, atol=1e-11)


def test_order_one_pressure_and_momentum(small_grids, sheared):
    tg, rg = small_grids
    th = tg.nodes
    eo = el.solve_order(1, sheared, tg, rg, 0.1 * np.sin(th), -0.05 * np.cos(2 * th))
    assert eo.record["momentum_residual"] < 1e-8
    R1, R2 = el.momentum_residuals(eo.u, eo.v, eo.p, sheared, rg)
    assert np.abs(R1[:, 1:-1]).max() < 1e-8 and np.abs(R2[:, 1:-1]).max() < 1e-8
    w = rg.quad_weights * rg.nodes
    assert abs(eo.p.mean(axis=0) @ w) < 1e-13
    div = d_theta(eo.u) + d_radial(rg.nodes[None, :] * eo.v, rg)
    assert np.abs(div).max() < 1e-10
    assert np.allclose(eo.v[:, -1], 0.1 * np.sin(th), atol=1e-13)


def test_shifted_keeps_equations(small_grids, sheared):
    tg, rg = small_grids
    r = rg.nodes
    eo = el.solve_order(1, sheared, tg, rg, 0.1 * np.sin(tg.nodes), np.zeros(tg.n))
    sh = eo.shifted((r - 0.5) * (1 - r), sheared, rg)
    R1, R2 = el.momentum_residuals(sh.u, sh.v, sh.p, sheared, rg)
    assert np.abs(R1[:, 1:-1]).max() < 1e-8 and np.abs(R2[:, 1:-1]).max() < 1e-8


def test_order_two_with_quadratic_forcing(small_grids, sheared):
    tg, rg = small_grids
    eo = el.solve_order(1, sheared, tg, rg, 0.1 * np.sin(tg.nodes), 0.05 * np.cos(tg.nodes))
    F1, F2 = el.quadratic_forcing(eo.u, eo.v, rg)
    e2 = el.solve_order(2, sheared, tg, rg, np.zeros(tg.n), np.zeros(tg.n), F1, F2)
    assert e2.record["momentum_residual"] < 1e-6


def test_corrupted_forcing_fails_solvability(small_grids, sheared):
    tg, rg = small_grids
    F1 = np.ones((tg.n, rg.n))
    with pytest.raises(el.SolvabilityError):
        el.solve_order(2, sheared, tg, rg, np.zeros(tg.n), np.zeros(tg.n), F1, np.zeros_like(F1))
    assert el.solvability_check(F1) == 1.0


def test_expansion_solvability_levels(expansion):
    assert expansion.diagnostics["solvability_2_tilde"] < 1e-9
    assert expansion.diagnostics["solvability_3"] < 1e-7


def test_chi_properties():
    chi = el.CutoffChi(0.5)
    r = np.linspace(0.5, 1.0, 2001)
    c = chi(r)
    assert c[0] == 0.0 and c[-1] == 1.0
    assert np.all(chi(r[r <= chi.r1]) == 0) and np.all(chi(r[r >= chi.r2]) == 1)
    assert np.all(np.diff(c) >= 0)
    h = r[1] - r[0]
    assert np.abs(np.gradient(c, h) - chi(r, 1)).max() < 1e-3
    d2 = chi(r, 2)
    assert np.abs(np.gradient(chi(r, 1), h) - d2).max() < 1e-2 * np.abs(d2).max()
    # C2 junctions: first and second derivatives vanish at r1 and r2
    for x in (chi.r1, chi.r2):
        assert abs(chi(x, 1)) < 1e-12 and abs(chi(x, 2)) < 1e-12
    with pytest.raises(ValueError):
        chi(r, 3)
