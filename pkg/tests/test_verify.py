import numpy as np
import pytest

from conftest import C_T
from pbflow import composite as cp
from pbflow import verify as vf
from pbflow.profile import BoundaryData, ShearProfile
from pbflow.spectral import RadialGrid


def test_order_fit_exact_power_law():
    x = np.array([0.1, 0.05, 0.025, 0.0125])
    f = vf.order_fit(x, 3.0 * x ** 2)
    assert f.slope == pytest.approx(2.0, abs=1e-12)
    assert np.exp(f.constant) == pytest.approx(3.0, rel=1e-12)
    assert f.residual < 1e-12


def test_order_fit_noise_and_errors():
    x = np.array([0.1, 0.07, 0.05, 0.035])
    y = x * np.array([1.02, 0.98, 1.01, 0.99])
    f = vf.order_fit(x, y)
    assert abs(f.slope - 1.0) < 0.1 and f.residual > 0
    with pytest.raises(ValueError):
        vf.order_fit([0.1, 0.05], [1.0, 0.5])
    with pytest.raises(ValueError):
        vf.order_fit([0.1, 0.05, 0.0], [1.0, 0.5, 0.2])
    with pytest.raises(ValueError):
        vf.order_fit([0.1, 0.05, 0.02], [1.0, -0.5, 0.2])


@pytest.fixture(scope="module")
def rg():
    return RadialGrid(0.5, 48)


def test_pb_log_profile_is_constant(rg):
    r = rg.nodes
    assert vf.pb_diagnostic(3.0 * np.log(r) + 1.0, r, rg) < 1e-10


def test_pb_quadratic_profile_varies(rg):
    r = rg.nodes
    assert vf.pb_diagnostic(r ** 2, r, rg) > 0.5


def test_pb_invariances(rg):
    r = rg.nodes
    w = r ** 3 - 0.2 * r
    base = vf.pb_diagnostic(w, r, rg)
    assert vf.pb_diagnostic(-2.5 * w + 7.0, r, rg) == pytest.approx(base, rel=1e-12)
    # u_e only enters through its sign
    assert vf.pb_diagnostic(w, 3 * r + 1, rg) == base
    assert vf.pb_diagnostic(w, -r, rg) == base


def test_pb_rejects_sign_changing_shear(rg):
    with pytest.raises(ValueError, match="nested"):
        vf.pb_diagnostic(rg.nodes, rg.nodes - 0.75, rg)


@pytest.mark.parametrize("window", [(0.4, 0.9), (0.6, 1.0), (0.8, 0.7)])
def test_bad_windows(rg, window):
    with pytest.raises(vf.WindowError):
        vf.pb_diagnostic(rg.nodes, rg.nodes, rg, window=window)


def test_default_window():
    assert vf.default_window(0.5) == pytest.approx((2 / 3, 5 / 6))


def test_family_target_linear_and_antisymmetric():
    unit = ShearProfile.build(BoundaryData.cosine(), C_T, 1.0)
    w = vf.default_window(0.5)
    t = vf.family_target(unit, 0.25, w)
    assert vf.family_target(unit, -0.25, w) == pytest.approx(-t)
    assert vf.family_target(unit, 0.75, w) == pytest.approx(3 * t)
    assert t != 0.0


def test_theorem_error_on_composite_and_mismatch(expansion):
    st = cp.assemble(1, 0.05, expansion).as_state()
    err_u, err_v = vf.theorem_error(st, expansion)
    assert 0 < err_u < 0.1 and 0 < err_v < 0.05
    with pytest.raises(vf.ParameterMismatch, match="pressure gradient"):
        vf.theorem_error(st.copy(pressure_gradient=0.0), expansion)
    bad = st.u.copy()
    bad[:, -1] += 1.0
    with pytest.raises(vf.ParameterMismatch, match="wall"):
        vf.theorem_error(st.copy(u=bad), expansion)


def test_vorticity_error_zero_for_shear_state(expansion):
    from pbflow.ns_solver import taylor_couette_state
    st = taylor_couette_state(expansion.profile, 0.05, expansion.theta_grid, expansion.radial_grid)
    assert vf.vorticity_limit_error(st, expansion.profile) < 1e-10
    assert vf.state_pb_variation(st, expansion.profile) > 0


def test_structural_invariants_of_composite(expansion, bd_default):
    st = cp.assemble(1, 0.05, expansion).as_state()
    inv = vf.structural_invariants(st, bd_default)
    assert inv["divergence"] < 1e-12 and inv["wall_u"] == 0.0 and inv["wall_v"] == 0.0
    assert inv["mean_v"] < 1e-14 and inv["pressure_mean"] < 1e-12
    crit = vf.invariant_criteria({"composite": inv})
    assert all(c.passed for c in crit)


def test_criteria_on_synthetic_report():
    eps = [0.1, 0.05, 0.025]
    pts = [{"epsilon": e, "sup_u_error": 2 * e, "sup_v_over_eps": 0.3 + e, "vorticity_error": e,
            "pb_variation": e * e} for e in eps]
    rep = vf.SweepReport("epsilon", eps, pts)
    crit = {c.name: c for c in vf.theorem_criteria(rep)}
    assert crit["theorem_error_slope"].measured == pytest.approx(1.0)
    assert all(c.passed for c in crit.values())
    pts[1]["pb_variation"] = 1.0
    crit = {c.name: c for c in vf.theorem_criteria(vf.SweepReport("epsilon", eps, pts))}
    assert not crit["pb_variation_decreasing"].passed
    assert vf.strictly_decreasing([3, 2, 1]) and not vf.strictly_decreasing([3, 3, 1])
    assert not vf.strictly_decreasing([1.0])


def test_empty_sweeps_rejected(problem, bd_default):
    with pytest.raises(ValueError):
        vf.theorem_sweep(problem, [])
    with pytest.raises(ValueError):
        vf.family_report([], 0.05, bd_default, C_T)


def test_sweep_records_failures(bd_default):
    # eps far below what the grid resolves: the point fails and is reported, not raised
    small = vf.Problem(bd_default, C_T, 0.5, n_theta=16, n_r=24, n_layer=48)
    rep = vf.theorem_sweep(small, [0.001])
    assert rep.points == [] and 0.001 in rep.failures
