"""First-order Prandtl correction at either wall.

With n the layer variable, r = r_w + eps*n, kappa = r_w and U = u_e(r_w),
the order-eps layer fields (u1, v2) satisfy

    (U + u0) u1_theta + kappa (v_e1(w) + v1) u1_n + kappa (v2 - v2(w)) u0_n
        + u1 u0_theta - kappa u1_nn = f1
    u1_theta + kappa v2_n + (n v1)_n = 0

with u1 = -u_e1 on the wall and u1_n -> 0 far away; (u0, v1) is the leading
layer and "(w)" marks wall values. u1 tends to a constant A_inf. The
pressure follows from kappa p2_n = g1 with decay far away.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .prandtl0 import PrandtlLeading
from .spectral import LayerGrid, ThetaGrid, cumulative_layer_integral, d_radial, d_theta


class StagingError(ValueError):
    pass


class FarFieldError(RuntimeError):
    pass


@dataclass
class WallTraces:
    """Euler data at a wall needed by the first-order layer problem."""

    U: float            # u_e at the wall
    dU: float           # u_e' at the wall
    u_e1: np.ndarray    # first-order azimuthal Euler velocity at the wall (zero angular mean)
    v_e1: np.ndarray    # first-order radial Euler velocity at the wall
    dv_e1: np.ndarray   # its radial derivative at the wall


@dataclass
class ForcingField:
    side: str
    order: int
    terms: dict

    @property
    def values(self) -> np.ndarray:
        return sum(self.terms.values())

    def decay_ratio(self, grid: LayerGrid) -> float:
        vals = self.values
        scale = np.abs(vals).max()
        return float(np.abs(vals[:, grid.far_index]).max() / scale) if scale > 0 else 0.0


@dataclass
class BoundaryLayerOrder:
    side: str
    order: int
    u: np.ndarray            # u_p^(k), tends to A_inf
    v_next: np.ndarray       # v_p^(k+1), decays
    A_inf: float
    p_next: np.ndarray | None = None
    gamma: float = 0.0
    record: dict = field(default_factory=dict)

    @property
    def u_tilde(self) -> np.ndarray:
        return self.u - self.A_inf


def lift(n: np.ndarray) -> np.ndarray:
    """zeta(n) = (1 - |n|) exp(-|n|): equals 1 on the wall and has zero integral over the half-line."""
    a = np.abs(n)
    return (1.0 - a) * np.exp(-a)


def forcing_f1(lead: PrandtlLeading, tr: WallTraces) -> ForcingField:
    """Named summands of the first-order azimuthal forcing."""
    g = lead.layer_grid
    n = g.nodes[None, :]
    u0, v1, p1 = lead.u_p0, lead.v_p1, lead.p_p1
    k = lead.kappa
    u0_n, u0_nn, u0_t = d_radial(u0, g), d_radial(u0, g, 2), d_theta(u0)
    ue1, ve1, dve1 = (a[:, None] for a in (tr.u_e1, tr.v_e1, tr.dv_e1))
    terms = {
        "pressure": -d_theta(p1),
        "curvature": n * u0_nn + u0_n,
        "euler_stretch": -u0 * (d_theta(ue1) + ve1 + v1),
        "euler_advection": -(tr.dU * n + ue1) * u0_t,
        "normal_shear": -(k * dve1 + ve1) * n * u0_n,
        "normal_transport": -(k * tr.dU + n * u0_n + tr.U) * v1,
    }
    return ForcingField(lead.side, 1, terms)


def forcing_g1(lead: PrandtlLeading, layer: BoundaryLayerOrder, tr: WallTraces) -> ForcingField:
    """Named summands of kappa * d_n p_p^(2)."""
    g = lead.layer_grid
    n = g.nodes[None, :]
    u0, v1, p1 = lead.u_p0, lead.v_p1, lead.p_p1
    k = lead.kappa
    ut = layer.u_tilde
    ue1, ve1 = tr.u_e1[:, None], tr.v_e1[:, None]
    terms = {
        "pressure": -n * d_radial(p1, g),
        "viscous": k * d_radial(v1, g, 2),
        "advection": -tr.U * d_theta(v1) - u0 * (d_theta(ve1) + d_theta(v1)),
        "normal_transport": -k * d_radial(v1, g) * (ve1 + v1),
        "centrifugal": 2.0 * ((tr.dU * n + ue1 + layer.A_inf) * u0 + tr.U * ut + u0 * ut),
    }
    return ForcingField(lead.side, 1, terms)


class _LinearOperator:
    """Discrete linear layer operator acting on u flattened as [theta, n]."""

    def __init__(self, lead: PrandtlLeading, v_wall_e: np.ndarray, gamma: float):
        g, tg = lead.layer_grid, lead.theta_grid
        nt, nn = tg.n, g.n
        k = lead.kappa
        u0, v1 = lead.u_p0, lead.v_p1
        It, In = np.eye(nt), np.eye(nn)
        Dt = np.kron(tg.diff_matrix(1), In)
        Dtt = np.kron(tg.diff_matrix(2), In)
        Dn = np.kron(It, g.D)
        Dnn = np.kron(It, g.D2)
        W = np.kron(It, g.wall_integral)
        self.Dt, self.W = Dt, W
        a = (lead.U_wall + u0).ravel()
        b = (k * (v_wall_e[:, None] + v1)).ravel()
        c = d_theta(u0).ravel()
        self.u0_n = d_radial(u0, g).ravel()
        # kappa (v2 - v2(w)) u0_n with v2 - v2(w) = -(W u_theta + n v1) / kappa
        self.A = (a[:, None] * Dt + b[:, None] * Dn + np.diag(c) - self.u0_n[:, None] * (W @ Dt)
                  - k * Dnn - gamma * Dtt)
        self.Dn = Dn
        self.shape = (nt, nn)
        self.wall = np.arange(nt) * nn + g.wall_index
        self.far = np.arange(nt) * nn + g.far_index


def solve_linearized(lead: PrandtlLeading, v_wall_e: np.ndarray, forcing: ForcingField,
                     wall_bc: np.ndarray, v_prev: np.ndarray, gamma: float = 1e-4,
                     far_tol: float = 1e-6) -> BoundaryLayerOrder:
    """Solve the regularized linear layer problem for u and recover the next normal velocity.

    ``v_wall_e`` is the Euler radial velocity at the wall (first order),
    ``v_prev`` the layer normal velocity of the current order (v_p^(1) at
    order 1), which enters continuity through (n v_prev)_n.
    """
    g, tg = lead.layer_grid, lead.theta_grid
    k = lead.kappa
    if forcing.values.shape != lead.u_p0.shape:
        raise StagingError("forcing does not live on the leading-order layer grid")
    op = _LinearOperator(lead, v_wall_e, gamma)
    n = g.nodes[None, :]
    # the n v_prev part of v2 - v2(w) is known
    rhs = forcing.values + (op.u0_n.reshape(op.shape) * n * v_prev)
    ell = np.outer(wall_bc, lift(g.nodes))
    b = rhs.ravel() - op.A @ ell.ravel()
    A = op.A.copy()
    A[op.wall] = 0.0
    A[op.wall, op.wall] = 1.0
    b[op.wall] = 0.0
    A[op.far] = op.Dn[op.far]
    b[op.far] = 0.0
    u = np.linalg.solve(A, b).reshape(op.shape) + ell
    far = u[:, g.far_index]
    A_inf = float(far.mean())
    spread = float(np.abs(far - A_inf).max())
    if spread > far_tol * max(1.0, np.abs(u).max()):
        raise FarFieldError(f"{lead.side} layer: far-field value varies by {spread:.2e} in theta")
    V = -(d_theta(u) @ g.wall_integral.T + n * v_prev) / k
    v_next = V - V[:, [g.far_index]]
    return BoundaryLayerOrder(lead.side, 1, u, v_next, A_inf, gamma=gamma,
                              record={"far_spread": spread})


def linear_residual(lead: PrandtlLeading, v_wall_e, forcing: ForcingField, layer: BoundaryLayerOrder,
                    v_prev) -> np.ndarray:
    """Un-regularized residual of the first-order layer momentum equation."""
    g = lead.layer_grid
    k = lead.kappa
    u, u0 = layer.u, lead.u_p0
    v2 = layer.v_next
    v2w = v2[:, [g.wall_index]]
    return ((lead.U_wall + u0) * d_theta(u) + k * (v_wall_e[:, None] + lead.v_p1) * d_radial(u, g)
            + k * (v2 - v2w) * d_radial(u0, g) + u * d_theta(u0) - k * d_radial(u, g, 2)
            - forcing.values)


def pressure_integrate(g_forcing: np.ndarray, grid: LayerGrid, kappa: float = 1.0,
                       anchor: str = "far", decay_tol: float = 1e-6) -> np.ndarray:
    """p with kappa p_n = g, vanishing far away (orders 2, 3) or on the wall (order 4)."""
    if anchor not in ("far", "wall"):
        raise ValueError("anchor must be 'far' or 'wall'")
    return cumulative_layer_integral(np.asarray(g_forcing) / kappa, grid,
                                     from_far_end=anchor == "far", decay_tol=decay_tol)
