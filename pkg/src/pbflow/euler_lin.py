"""Linearized Euler corrections about the shear profile u_e(r).

At order k the outer fields solve

    u_e d_theta u + (r u_e)' v + d_theta p + F1 = 0
    u_e d_theta v - 2 u_e u + r d_r p + F2 = 0
    d_theta u + d_r(r v) = 0

where F1, F2 collect products of lower orders. Eliminating p gives, for
phi = r v,

    -Lap(phi) + U_e phi = (-r d_r F1 + d_theta F2) / (r u_e),

solved mode by mode in theta with Dirichlet data from the Prandtl layers.
The angular mean of u is not fixed by these equations; it is set by the
far-field constants of the layers (blended across the annulus by chi) and,
at first order, by the corrector A1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .profile import ShearProfile, eval_shear, ue_potential
from .spectral import RadialGrid, ThetaGrid, d_radial, d_theta


class SolvabilityError(ValueError):
    pass


class ConstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CutoffChi:
    """Quintic smoothstep: 0 on [r0, r1], 1 on [r2, 1], C2 at the junctions."""

    r0: float

    @property
    def r1(self) -> float:
        return (1.0 + 2.0 * self.r0) / 3.0

    @property
    def r2(self) -> float:
        return (2.0 + self.r0) / 3.0

    def __call__(self, r, order: int = 0):
        r = np.asarray(r, dtype=float)
        h = self.r2 - self.r1
        t = np.clip((r - self.r1) / h, 0.0, 1.0)
        inside = (r > self.r1) & (r < self.r2)
        if order == 0:
            return t ** 3 * (10 - 15 * t + 6 * t * t)
        if order == 1:
            return np.where(inside, 30 * t * t * (1 - t) ** 2 / h, 0.0)
        if order == 2:
            return np.where(inside, 60 * t * (1 - t) * (1 - 2 * t) / h ** 2, 0.0)
        raise ValueError("CutoffChi supports derivative orders 0, 1, 2")


@dataclass
class EulerOrder:
    order: int
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    zero_mode: np.ndarray
    forcing_u: np.ndarray | None = None
    forcing_v: np.ndarray | None = None
    record: dict = field(default_factory=dict)

    def shifted(self, extra_mean: np.ndarray, profile: ShearProfile, rg: RadialGrid) -> "EulerOrder":
        """Add a radial profile to the angular mean of u, with the matching pressure shift.

        A radial u-profile a(r) solves the linearized equations together with
        the pressure increment int_{r0}^r 2 u_e a / s ds.
        """
        r = rg.nodes
        dp = rg.integral_matrix @ (2.0 * profile.u(r) * extra_mean / r)
        return EulerOrder(self.order, self.u + extra_mean[None, :], self.v.copy(), self.p + dp[None, :],
                          self.zero_mode + extra_mean, self.forcing_u, self.forcing_v, dict(self.record))


def _rfft_modes(f):
    return np.fft.rfft(f, axis=0)


def solve_vek(forcing: np.ndarray, bc_outer: np.ndarray, bc_inner: np.ndarray, profile: ShearProfile,
              tg: ThetaGrid, rg: RadialGrid, tol: float = 1e-9) -> np.ndarray:
    """phi = r v with -Lap(phi) + U_e phi = forcing and phi = bc at r=1, r=r0.

    ``bc_outer`` and ``bc_inner`` are values of phi (i.e. r v) on the wall.
    """
    scale = max(1.0, np.abs(forcing).max(), np.abs(bc_outer).max(), np.abs(bc_inner).max())
    F = _rfft_modes(forcing) / tg.n
    bo = np.fft.rfft(bc_outer) / tg.n
    bi = np.fft.rfft(bc_inner) / tg.n
    if max(np.abs(F[0]).max(), abs(bo[0]), abs(bi[0])) > tol * scale:
        raise SolvabilityError(
            f"zero angular mode of the data is not zero (forcing {np.abs(F[0]).max():.2e}, "
            f"walls {abs(bo[0]):.2e}, {abs(bi[0]):.2e})")
    r = rg.nodes
    Ue = ue_potential(profile, r)
    base = rg.D2 + rg.D / r[:, None]
    out = np.zeros_like(F)
    for n in range(1, tg.n // 2):
        A = (base - np.diag(n * n / r ** 2 + Ue)).astype(complex)
        b = -F[n].copy()
        A[0] = 0.0
        A[0, 0] = 1.0
        A[-1] = 0.0
        A[-1, -1] = 1.0
        b[0], b[-1] = bi[n], bo[n]
        out[n] = np.linalg.solve(A, b)
    return np.fft.irfft(out * tg.n, n=tg.n, axis=0)


def uek_from_continuity(phi: np.ndarray, tg: ThetaGrid, rg: RadialGrid, zero_mode=None,
                        tol: float = 1e-9) -> np.ndarray:
    """u with d_theta u = -d_r(phi), mean profile ``zero_mode`` (default 0)."""
    phi_r = d_radial(phi, rg)
    spec = _rfft_modes(phi_r)
    if np.abs(_rfft_modes(phi)[0]).max() / tg.n > tol * max(1.0, np.abs(phi).max()):
        raise SolvabilityError("r v has a nonzero angular mean")
    k = np.arange(spec.shape[0])
    out = np.zeros_like(spec)
    out[1:] = -spec[1:] / (1j * k[1:, None])
    if tg.n % 2 == 0:
        out[-1] = 0.0
    u = np.fft.irfft(out, n=tg.n, axis=0)
    if zero_mode is not None:
        u = u + np.asarray(zero_mode)[None, :]
    return u


def corrector_A1(rhs: np.ndarray, rg: RadialGrid) -> np.ndarray:
    """A with r A'' + A' - A/r = rhs on [r0, 1], A(r0) = A(1) = 0."""
    r = rg.nodes
    M = r[:, None] * rg.D2 + rg.D - np.diag(1.0 / r)
    b = np.asarray(rhs, dtype=float).copy()
    M[0] = 0.0
    M[0, 0] = 1.0
    M[-1] = 0.0
    M[-1, -1] = 1.0
    b[0] = b[-1] = 0.0
    return np.linalg.solve(M, b)


def momentum_residuals(u, v, p, profile: ShearProfile, rg: RadialGrid, F1=0.0, F2=0.0):
    r = rg.nodes[None, :]
    ue, due, _, _ = eval_shear(profile, rg.nodes)
    ue, due = ue[None, :], due[None, :]
    R1 = ue * d_theta(u) + (ue + r * due) * v + d_theta(p) + F1
    R2 = ue * d_theta(v) - 2 * ue * u + r * d_radial(p, rg) + F2
    return R1, R2


def solvability_check(F1: np.ndarray) -> float:
    """max over r of |angular mean| of the azimuthal forcing."""
    return float(np.abs(np.asarray(F1).mean(axis=0)).max())


def pek_construct(u, v, profile: ShearProfile, tg: ThetaGrid, rg: RadialGrid, F1=None, F2=None,
                  check_tol: float = 1e-6, record: dict | None = None) -> np.ndarray:
    """Pressure from the azimuthal equation (nonzero modes) and the radial one (mean).

    The gauge is zero mean over the annulus. Both momentum equations are then
    checked at interior radii (the elimination does not impose the radial one
    on the walls); the measured residual goes to ``record["momentum_residual"]``.
    """
    F1 = np.zeros_like(u) if F1 is None else F1
    F2 = np.zeros_like(u) if F2 is None else F2
    r = rg.nodes
    ue, due, _, _ = eval_shear(profile, r)
    rhs = -(ue[None, :] * d_theta(u) + (ue + r * due)[None, :] * v + F1)
    spec = _rfft_modes(rhs)
    k = np.arange(spec.shape[0])
    out = np.zeros_like(spec)
    out[1:] = spec[1:] / (1j * k[1:, None])
    out[-1] = 0.0
    p = np.fft.irfft(out, n=tg.n, axis=0)
    mean_u = u.mean(axis=0)
    dphi = (2.0 * ue * mean_u - F2.mean(axis=0)) / r
    p = p + (rg.integral_matrix @ dphi)[None, :]
    w = rg.quad_weights * r
    p -= (p.mean(axis=0) @ w) / w.sum()
    R1, R2 = momentum_residuals(u, v, p, profile, rg, F1, F2)
    scale = max(1.0, np.abs(u).max(), np.abs(v).max(), np.abs(F1).max(), np.abs(F2).max())
    err = max(np.abs(R1[:, 1:-1]).max(), np.abs(R2[:, 1:-1]).max()) / scale
    if record is not None:
        record["momentum_residual"] = float(err)
    if err > check_tol:
        raise ConstructionError(f"order momentum residual {err:.2e} after pressure construction")
    return p


def quadratic_forcing(u1, v1, rg: RadialGrid):
    """(F1, F2) built from a first-order pair: the products entering the order-2 equations."""
    r = rg.nodes[None, :]
    F1 = u1 * d_theta(u1) + v1 * r * d_radial(u1, rg) + u1 * v1
    F2 = u1 * d_theta(v1) + v1 * r * d_radial(v1, rg) - u1 * u1
    return F1, F2


def solve_order(order: int, profile: ShearProfile, tg: ThetaGrid, rg: RadialGrid,
                v_outer: np.ndarray, v_inner: np.ndarray, F1=None, F2=None,
                zero_mode=None, solvability_tol: float = 1e-7) -> EulerOrder:
    """One order of the hierarchy from wall values of v and the product forcings."""
    r = rg.nodes
    record = {}
    if F1 is not None:
        record["solvability"] = solvability_check(F1)
        if record["solvability"] > solvability_tol * max(1.0, np.abs(F1).max()):
            raise SolvabilityError(f"order {order}: angular mean of the forcing is "
                                   f"{record['solvability']:.2e}")
        # drop the (vanishing) mean so that it does not leak into the pressure
        F1 = F1 - F1.mean(axis=0, keepdims=True)
        S = (-r[None, :] * d_radial(F1, rg) + d_theta(F2)) / (r * profile.u(r))[None, :]
    else:
        S = np.zeros((tg.n, rg.n))
    phi = solve_vek(S, v_outer * 1.0, v_inner * r[0], profile, tg, rg)
    v = phi / r[None, :]
    zm = np.zeros(rg.n) if zero_mode is None else np.asarray(zero_mode, dtype=float)
    u = uek_from_continuity(phi, tg, rg, zm)
    p = pek_construct(u, v, profile, tg, rg, F1, F2, record=record)
    return EulerOrder(order, u, v, p, zm, F1, F2, record)


def viscous_radial(f: np.ndarray, rg: RadialGrid) -> np.ndarray:
    """r f'' + f' - f/r for a radial profile."""
    r = rg.nodes
    return r * (rg.D2 @ f) + rg.D @ f - f / r


def a1_rhs(e1_bar: EulerOrder, e2: EulerOrder, rg: RadialGrid) -> np.ndarray:
    """Right side of the A1 equation from the blended first order and the second order."""
    r = rg.nodes[None, :]
    term = (e1_bar.v * d_radial(r * e2.u, rg) + e2.v * d_radial(r * e1_bar.u, rg)).mean(axis=0)
    return term - viscous_radial(e1_bar.u.mean(axis=0), rg)


def order3_solvability(e1_tilde: EulerOrder, e2: EulerOrder, rg: RadialGrid) -> float:
    """max_r |angular mean of the third-order azimuthal forcing|."""
    r = rg.nodes[None, :]
    m = (e1_tilde.v * d_radial(r * e2.u, rg) + e2.v * d_radial(r * e1_tilde.u, rg)).mean(axis=0)
    return float(np.abs(m - viscous_radial(e1_tilde.u.mean(axis=0), rg)).max())
