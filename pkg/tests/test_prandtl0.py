import numpy as np
import pytest

from oracles import apply_L_single_mode, heat_seed_cos
from pbflow import prandtl0 as p0
from pbflow.profile import BoundaryData
from pbflow.spectral import LayerGrid, ThetaGrid, d_radial, d_theta


@pytest.fixture(scope="module")
def tg():
    return ThetaGrid(32)


def _psi_grid(bd, side, n=96):
    U, _, _ = p0.side_constants(bd, side)
    return LayerGrid(side, 1.25 * U * p0.default_layer_depth(bd), n)


def test_heat_seed_matches_mode_sum(tg):
    bd = BoundaryData.cosine(eta=0.05)
    g = _psi_grid(bd, "outer")
    Q0 = p0.heat_seed(bd, "outer", tg, g)
    U, kappa, _ = p0.side_constants(bd, "outer")
    spec = np.fft.rfft(p0.wall_datum(bd, "outer", tg.nodes)) / tg.n
    ref = np.zeros_like(Q0)
    for k in range(1, tg.n // 2):
        a, b = 2 * spec[k].real, -2 * spec[k].imag
        ref += heat_seed_cos(k * tg.nodes, g.nodes, a, kappa * U / k)
        ref += heat_seed_cos(k * tg.nodes - np.pi / 2, g.nodes, b, kappa * U / k)
    assert np.abs(Q0 - ref).max() < 1e-12
    assert np.abs(Q0[:, g.wall_index] - p0.wall_datum(bd, "outer", tg.nodes)).max() < 1e-12


def test_heat_seed_rejects_nonzero_mean_datum(tg, monkeypatch):
    bd = BoundaryData.cosine(eta=0.05)
    monkeypatch.setattr(p0, "wall_datum", lambda *a: np.ones(tg.n))
    with pytest.raises(p0.InvalidDatumError):
        p0.heat_seed(bd, "outer", tg, _psi_grid(bd, "outer"))


def test_apply_L_single_mode_oracle():
    tg = ThetaGrid(16)
    g = LayerGrid("outer", 60.0, 128)
    mu, U, kappa = 0.4, 1.5, 1.0
    Lam = np.cos(tg.nodes)[:, None] * np.exp(mu * g.nodes)[None, :]
    phi = p0.apply_L(Lam, U, kappa, g)
    ref = np.real(np.exp(1j * tg.nodes)[:, None] * apply_L_single_mode(mu, kappa * U, g.nodes)[None, :])
    assert np.abs(phi - ref).max() < 1e-8


def test_apply_L_pde_and_boundary_values(rng):
    tg = ThetaGrid(16)
    g = LayerGrid("inner", 30.0, 64)
    Lam = np.cos(2 * tg.nodes)[:, None] * np.exp(-0.3 * g.nodes)[None, :] * (1 + 0.2 * g.nodes)
    phi = p0.apply_L(Lam, 1.2, 0.5, g)
    interior = slice(1, -1)
    res = d_theta(phi) - 0.6 * d_radial(phi, g, 2) - d_theta(Lam)
    assert np.abs(res[:, interior]).max() < 1e-8
    assert np.abs(phi[:, g.wall_index]).max() < 1e-14 and np.abs(phi[:, g.far_index]).max() < 1e-14
    assert np.abs(phi.mean(axis=0)).max() < 1e-14


def test_map_H_matches_definition_and_rejects_negative():
    rng = np.random.default_rng(0)
    q, Q0, U = 0.1 * rng.standard_normal((4, 5)), 0.1 * rng.standard_normal((4, 5)), 1.3
    assert np.allclose(p0.map_H(q, Q0, U), (np.sqrt(q + Q0 + U * U) - U) ** 2, atol=1e-15)
    with pytest.raises(p0.NoContractionError, match="admissible"):
        p0.map_H(np.full((2, 2), -3.0), np.zeros((2, 2)), 1.0)


def test_fixed_point_trivial_at_eta_zero(tg):
    bd = BoundaryData.cosine(eta=0.0)
    vmf = p0.fixed_point(bd, "outer", tg, _psi_grid(bd, "outer"))
    assert vmf.iterations == 1 and np.abs(vmf.Q).max() == 0.0


@pytest.mark.parametrize("eta", [0.01, 0.02, 0.05])
@pytest.mark.parametrize("side", ["outer", "inner"])
def test_fixed_point_contracts(tg, eta, side):
    bd = BoundaryData.cosine(eta=eta)
    vmf = p0.fixed_point(bd, side, tg, _psi_grid(bd, side))
    assert max(vmf.ratios) < 0.9
    assert np.abs(vmf.Q).max() <= 2 * np.abs(vmf.Q0).max()
    # angular mean of Uv^2 does not depend on psi
    assert vmf.circulation_variation() < 1e-8


def test_fixed_point_fails_when_wall_speed_touches_zero(tg):
    bd = BoundaryData.cosine(alpha=0.2, beta=0.2, eta=0.2)
    with pytest.raises(p0.NoContractionError, match="admissible"):
        p0.solve_leading(bd, "outer", tg)


@pytest.fixture(scope="module")
def leading(tg):
    bd = BoundaryData.cosine(eta=0.05)
    return bd, {s: p0.solve_leading(bd, s, tg)[1] for s in ("outer", "inner")}


@pytest.mark.parametrize("side", ["outer", "inner"])
def test_layer_wall_trace_and_decay(tg, leading, side):
    bd, lead = leading
    pl = lead[side]
    _, _, wall = p0.side_constants(bd, side)
    g = pl.layer_grid
    assert np.abs(pl.u_p0[:, g.wall_index] - (wall(tg.nodes) - pl.U_wall)).max() < 1e-10
    assert np.abs(pl.u_p0[:, g.far_index]).max() < 1e-8
    assert np.abs(pl.v_p1[:, g.far_index]).max() < 1e-12


@pytest.mark.parametrize("side", ["outer", "inner"])
def test_v_p1_zero_angular_mean_and_residual(leading, side):
    _, lead = leading
    pl = lead[side]
    assert np.abs(pl.v_p1.mean(axis=0)).max() < 1e-12
    scale = np.abs(pl.u_p0).max()
    assert np.abs(pl.prandtl_residual()).max() < 1e-5 * max(scale, 1.0)


def test_layer_continuity(leading):
    _, lead = leading
    pl = lead["outer"]
    div = d_theta(pl.u_p0) + pl.kappa * d_radial(pl.v_p1, pl.layer_grid)
    assert np.abs(div).max() < 1e-8


def test_bad_side_rejected():
    with pytest.raises(ValueError):
        p0.side_constants(BoundaryData.cosine(), "middle")
