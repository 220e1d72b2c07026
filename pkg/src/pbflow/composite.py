"""Matched composite approximation on the annulus grid.

``build_expansion`` computes every ingredient that does not depend on eps
(layers in their own variables, Euler corrections); ``assemble`` evaluates the
composite for a given eps and order K in {0, 1}:

    u = u_e + eps u~_e1 + eps^2 u_e2 + chi (u_p0 + eps u~_p1)(Y) + (1-chi) (inner wall)(Z)
    v = eps v_e1 + eps^2 v_e2 + chi (eps v_p1 + eps^2 v_p2)(Y) + (1-chi) (...)(Z)
    p = p_e + eps p~_e1 + eps^2 p_e2 + chi^2 (eps p_p1 + eps^2 p_p2)(Y) + (1-chi)^2 (...)(Z)

The second-order Euler fields are included at K=1 because they cancel the
wall values of eps^2 v_p2. K=0 keeps u_e + u_p0 and the eps-order normal
velocity.

followed by small fix-ups that make the wall values and the discrete
divergence exact. The constant azimuthal pressure gradient 2 delta c_t eps^2
balances the viscous defect of the shear profile.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import euler_lin as el
from . import prandtl0 as p0
from . import prandtl_lin as pl
from .ns_solver import NSState, area_weights, divergence, l2_norm, ns_residual
from .profile import BoundaryData, ShearProfile, eval_shear
from .spectral import LayerGrid, RadialGrid, ThetaGrid, d_radial, d_theta

log = logging.getLogger(__name__)

SIDES = ("outer", "inner")


class ParameterError(ValueError):
    pass


@dataclass
class Expansion:
    bd: BoundaryData
    profile: ShearProfile
    theta_grid: ThetaGrid
    radial_grid: RadialGrid
    chi: el.CutoffChi
    vonmises: dict
    leading: dict
    traces: dict = field(default_factory=dict)
    euler1: el.EulerOrder | None = None
    layer1: dict = field(default_factory=dict)
    euler1_tilde: el.EulerOrder | None = None
    euler2: el.EulerOrder | None = None
    A1: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def gradient_coefficient(self) -> float:
        """G / eps^2: the azimuthal pressure gradient per unit viscosity."""
        return 2.0 * self.profile.c

    def wall_index(self, side):
        return -1 if side == "outer" else 0


def _wall_traces(profile: ShearProfile, e1: el.EulerOrder, rg: RadialGrid, side: str) -> pl.WallTraces:
    i = -1 if side == "outer" else 0
    r_w = rg.nodes[i]
    U, dU, _, _ = eval_shear(profile, r_w)
    return pl.WallTraces(float(U), float(dU), e1.u[:, i].copy(), e1.v[:, i].copy(),
                         d_radial(e1.v, rg)[:, i].copy())


def build_expansion(bd: BoundaryData, c_t: float, delta: float, tg: ThetaGrid, rg: RadialGrid,
                    order: int = 1, n_layer: int = 96, n_psi: int = 96, depth: float | None = None,
                    gamma: float = 1e-4, fp_tol: float = 1e-10, fp_max_iter: int = 50,
                    psi_factor: float = 1.25) -> Expansion:
    """Leading layers (order 0) and, for order >= 1, the first-order Euler/Prandtl stack."""
    if order not in (0, 1):
        raise ParameterError("expansion orders above 1 are not built; use order 0 or 1")
    profile = ShearProfile.build(bd, c_t, delta)
    vonmises, leading = {}, {}
    for side in SIDES:
        vonmises[side], leading[side] = p0.solve_leading(bd, side, tg, n_layer, n_psi, depth,
                                                          fp_tol, fp_max_iter, psi_factor)
    exp = Expansion(bd, profile, tg, rg, el.CutoffChi(bd.r0), vonmises, leading)
    v_outer = -leading["outer"].v_p1_wall
    v_inner = -leading["inner"].v_p1_wall
    e1 = el.solve_order(1, profile, tg, rg, v_outer, v_inner)
    exp.euler1 = e1
    for side in SIDES:
        tr = _wall_traces(profile, e1, rg, side)
        exp.traces[side] = tr
        lead = leading[side]
        f1 = pl.forcing_f1(lead, tr)
        lay = pl.solve_linearized(lead, tr.v_e1, f1, -tr.u_e1, lead.v_p1, gamma=gamma)
        g1 = pl.forcing_g1(lead, lay, tr)
        lay.p_next = pl.pressure_integrate(g1.values, lead.layer_grid, lead.kappa)
        lay.record["f1_decay"] = f1.decay_ratio(lead.layer_grid)
        lay.record["residual"] = float(np.sqrt(np.mean(
            pl.linear_residual(lead, tr.v_e1, f1, lay, lead.v_p1) ** 2 @ lead.layer_grid.quad_weights)))
        exp.layer1[side] = lay
    if order == 0:
        return exp
    r = rg.nodes
    chi = exp.chi(r)
    blend = chi * exp.layer1["outer"].A_inf + (1.0 - chi) * exp.layer1["inner"].A_inf
    e1_bar = e1.shifted(blend, profile, rg)
    F1, F2 = el.quadratic_forcing(e1_bar.u, e1_bar.v, rg)
    exp.diagnostics["solvability_2"] = el.solvability_check(F1)
    v2_outer = -exp.layer1["outer"].v_next[:, leading["outer"].layer_grid.wall_index]
    v2_inner = -exp.layer1["inner"].v_next[:, leading["inner"].layer_grid.wall_index]
    e2_bar = el.solve_order(2, profile, tg, rg, v2_outer, v2_inner, F1, F2)
    A1 = el.corrector_A1(el.a1_rhs(e1_bar, e2_bar, rg), rg)
    e1_t = e1_bar.shifted(A1, profile, rg)
    F1t, F2t = el.quadratic_forcing(e1_t.u, e1_t.v, rg)
    exp.diagnostics["solvability_2_tilde"] = el.solvability_check(F1t)
    e2 = el.solve_order(2, profile, tg, rg, v2_outer, v2_inner, F1t, F2t)
    exp.diagnostics["solvability_3"] = el.order3_solvability(e1_t, e2, rg)
    exp.euler1_tilde, exp.euler2, exp.A1 = e1_t, e2, A1
    return exp


def layer_on_annulus(values: np.ndarray, grid: LayerGrid, n: np.ndarray, far_value: float = 0.0):
    """Interpolate a layer field to layer coordinates ``n``; beyond the depth use ``far_value``."""
    inside = np.abs(n) <= grid.L
    out = np.full((values.shape[0], n.size), far_value, dtype=float)
    if inside.any():
        out[:, inside] = values @ grid.interp_matrix(n[inside]).T
    return out


def layer_coordinates(rg: RadialGrid, eps: float):
    r = rg.nodes
    Y = (r - 1.0) / eps
    Z = (r - rg.r0) / eps
    Y[-1], Z[0] = 0.0, 0.0
    return {"outer": Y, "inner": Z}


def decay_depth(exp: Expansion, tol: float = 1e-2, floor: float = 1e-12) -> float:
    """Largest layer depth at which the leading layer still exceeds tol x its maximum.

    Layers below ``floor`` (roundoff from an unperturbed wall) have no depth.
    """
    depth = 0.0
    for side in SIDES:
        lead = exp.leading[side]
        prof = np.abs(lead.u_p0).max(axis=0)
        if prof.max() <= floor:
            continue
        big = np.abs(lead.layer_grid.nodes[prof > tol * prof.max()])
        depth = max(depth, big.max())
    return depth


@dataclass
class CompositeSolution:
    K: int
    epsilon: float
    theta_grid: ThetaGrid
    radial_grid: RadialGrid
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    h: np.ndarray
    pressure_gradient: float
    chi: el.CutoffChi

    def as_state(self) -> NSState:
        return NSState(self.epsilon, self.theta_grid, self.radial_grid, self.u.copy(), self.v.copy(),
                       self.p.copy(), self.pressure_gradient)


def corrector_h(K_field: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """h with d_theta h = K mode by mode; K must have zero angular mean at every radius."""
    nt = K_field.shape[0]
    mean = np.abs(K_field.mean(axis=0)).max()
    if mean > tol * max(1.0, np.abs(K_field).max()):
        raise ParameterError(f"corrector forcing has nonzero angular mean {mean:.2e}")
    spec = np.fft.rfft(K_field, axis=0)
    k = np.arange(spec.shape[0])
    out = np.zeros_like(spec)
    out[1:] = spec[1:] / (1j * k[1:, None])
    out[-1] = 0.0 if nt % 2 == 0 else out[-1]
    return np.fft.irfft(out, n=nt, axis=0)


def _wall_bumps(rg: RadialGrid):
    """Radial profiles vanishing at both walls with unit slope at one wall and zero slope at the other."""
    r, r0 = rg.nodes, rg.r0
    b_out = (r - 1.0) * ((r - r0) / (1.0 - r0)) ** 2
    b_in = (r - r0) * ((1.0 - r) / (1.0 - r0)) ** 2
    return b_out, b_in


def enforce_structure(u, v, bd: BoundaryData, tg: ThetaGrid, rg: RadialGrid):
    """Exact wall values, zero-mean v and zero discrete divergence; returns (u, v, h)."""
    theta = tg.nodes
    u = u.copy()
    v = v - v.mean(axis=0, keepdims=True)
    # remove residual wall values of v with profiles linear in r (no node-wise jumps)
    s = (rg.nodes - rg.r0) / (1.0 - rg.r0)
    v = v - np.outer(v[:, -1], s) - np.outer(v[:, 0], 1.0 - s)
    v[:, 0] = v[:, -1] = 0.0
    u[:, -1] = bd.outer_wall(theta)
    u[:, 0] = bd.inner_wall(theta)
    D = divergence(tg, rg, u, v)
    b_out, b_in = _wall_bumps(rg)
    v = v - np.outer(D[:, -1], b_out) - np.outer(D[:, 0] / rg.r0, b_in)
    D = divergence(tg, rg, u, v)
    h = corrector_h(-D - (-D).mean(axis=0, keepdims=True))
    u = u + h
    u[:, -1] = bd.outer_wall(theta)
    u[:, 0] = bd.inner_wall(theta)
    return u, v, h


def assemble(K: int, eps: float, exp: Expansion, collision_tol: float = 1e-2) -> CompositeSolution:
    """Composite of order K in {0, 1} on the expansion's annulus grid."""
    if K not in (0, 1):
        raise ParameterError("composite orders above 1 are not built")
    if K == 1 and exp.euler1_tilde is None:
        raise ParameterError("the expansion was built at order 0; K=1 needs order 1")
    reach = eps * decay_depth(exp, collision_tol)
    if reach > 1.0 - exp.bd.r0:
        raise ParameterError(f"eps={eps}: layers of depth {reach:.3f} overlap across the gap")
    tg, rg = exp.theta_grid, exp.radial_grid
    r = rg.nodes
    chi = exp.chi(r)
    weights = {"outer": chi, "inner": 1.0 - chi}
    coords = layer_coordinates(rg, eps)
    ue = exp.profile.u(r)
    u = np.tile(ue, (tg.n, 1))
    p = np.tile(exp.profile.pressure(r), (tg.n, 1))
    v = eps * exp.euler1.v.copy()
    if K == 1:
        e1, e2 = exp.euler1_tilde, exp.euler2
        u = u + eps * e1.u + eps ** 2 * e2.u
        v = v + eps ** 2 * e2.v
        p = p + eps * e1.p + eps ** 2 * e2.p
    else:
        p = p + eps * exp.euler1.p
    for side in SIDES:
        lead = exp.leading[side]
        g = lead.layer_grid
        n = coords[side]
        w = weights[side][None, :]
        lay = exp.layer1[side]
        uu = lead.u_p0 + (eps * lay.u_tilde if K == 1 else 0.0)
        vv = eps * lead.v_p1 + (eps ** 2 * lay.v_next if K == 1 else 0.0)
        pp = eps * lead.p_p1 + (eps ** 2 * lay.p_next if K == 1 else 0.0)
        u += w * layer_on_annulus(uu, g, n)
        v += w * layer_on_annulus(vv, g, n)
        p += w ** 2 * layer_on_annulus(pp, g, n)
    u, v, h = enforce_structure(u, v, exp.bd, tg, rg)
    p -= np.sum(area_weights(tg, rg) * p)
    G = exp.gradient_coefficient * eps ** 2
    return CompositeSolution(K, eps, tg, rg, u, v, p, h, G, exp.chi)


@dataclass
class ResidualReport:
    epsilon: float
    K: int
    l2_u: float
    l2_v: float
    linf_u: float
    linf_v: float
    l2_du_theta: float
    max_divergence: float

    def as_dict(self):
        return dict(self.__dict__)


def residual(comp: CompositeSolution) -> ResidualReport:
    state = comp.as_state()
    Ru, Rv, Rc = ns_residual(state)
    tg, rg = comp.theta_grid, comp.radial_grid
    inner = np.s_[:, 1:-1]
    Ru_i = np.zeros_like(Ru)
    Rv_i = np.zeros_like(Rv)
    Ru_i[inner], Rv_i[inner] = Ru[inner], Rv[inner]
    return ResidualReport(comp.epsilon, comp.K, l2_norm(Ru_i, tg, rg), l2_norm(Rv_i, tg, rg),
                          float(np.abs(Ru_i).max()), float(np.abs(Rv_i).max()),
                          l2_norm(d_theta(Ru_i), tg, rg), float(np.abs(Rc).max()))


def leading_composite(exp: Expansion, eps: float, rg: RadialGrid | None = None,
                      theta_values=None) -> np.ndarray:
    """u_e + u_p0((r-1)/eps) + u^_p0((r-r0)/eps) on an annulus grid (no cutoff)."""
    rg = rg or exp.radial_grid
    coords = layer_coordinates(rg, eps)
    u = np.tile(exp.profile.u(rg.nodes), (exp.theta_grid.n, 1))
    for side in SIDES:
        lead = exp.leading[side]
        u = u + layer_on_annulus(lead.u_p0, lead.layer_grid, coords[side])
    return u
