"""Leading-order Prandtl layers through the von Mises transformation.

Near a wall of radius r_w, with layer variable n = (r - r_w)/eps and
stream function psi = int_0^n (U + u_p0) dn', the total tangential speed
``Uv = U + u_p0`` obeys

    2 Uv_theta = kappa (Uv^2)_{psi psi},     kappa = r_w,

and ``Q = Uv^2 - U^2`` solves ``Q_theta - kappa U Q_psipsi = H_theta`` with
``H = (Uv - U)^2``. Writing ``Q = Q0 + q`` where Q0 carries the wall datum,
the correction is the fixed point of ``q = L(H(q))``.

The outer wall (r=1) uses n = Y <= 0 and the inner wall (r=r0) n = Z >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .profile import BoundaryData, wall_speeds
from .spectral import LayerGrid, ThetaGrid, cumulative_layer_integral, d_radial, d_theta


class InvalidDatumError(ValueError):
    pass


class NoContractionError(RuntimeError):
    pass


class TransformError(ValueError):
    pass


def side_constants(bd: BoundaryData, side: str):
    """(wall Euler speed U, diffusivity factor kappa, wall velocity function)."""
    U_outer, U_inner = wall_speeds(bd)
    if side == "outer":
        return U_outer, 1.0, bd.outer_wall
    if side == "inner":
        return U_inner, bd.r0, bd.inner_wall
    raise ValueError(f"side must be 'outer' or 'inner', got {side!r}")


def default_layer_depth(bd: BoundaryData) -> float:
    """Truncation depth in the layer variable, 40/sqrt(min wall speed)."""
    return 40.0 / np.sqrt(min(wall_speeds(bd)))


@dataclass
class VonMisesField:
    side: str
    theta_grid: ThetaGrid
    psi_grid: LayerGrid
    U_wall: float
    kappa: float
    Q0: np.ndarray
    q: np.ndarray
    ratios: list = field(default_factory=list)
    iterations: int = 0

    @property
    def Q(self) -> np.ndarray:
        """Uv^2 - U_wall^2."""
        return self.Q0 + self.q

    @property
    def U(self) -> np.ndarray:
        return np.sqrt(self.Q + self.U_wall ** 2)

    def circulation_variation(self) -> float:
        """Relative spread over psi of the angular mean of Uv^2."""
        m = (self.U ** 2).mean(axis=0)
        return float((m.max() - m.min()) / abs(m.mean()))


@dataclass
class PrandtlLeading:
    side: str
    theta_grid: ThetaGrid
    layer_grid: LayerGrid
    U_wall: float
    kappa: float
    u_p0: np.ndarray
    v_p1: np.ndarray
    p_p1: np.ndarray

    @property
    def v_p1_wall(self) -> np.ndarray:
        return self.v_p1[:, self.layer_grid.wall_index].copy()

    def prandtl_residual(self) -> np.ndarray:
        """Pointwise residual of the leading-order layer momentum equation."""
        g, k = self.layer_grid, self.kappa
        u, v = self.u_p0, self.v_p1
        return ((self.U_wall + u) * d_theta(u) + k * (v - self.v_p1_wall[:, None]) * d_radial(u, g)
                - k * d_radial(u, g, 2))


def wall_datum(bd: BoundaryData, side: str, theta: np.ndarray) -> np.ndarray:
    """Q at the wall: (wall speed)^2 - U_wall^2, zero mean by the Batchelor-Wood choice of U."""
    U, _, wall = side_constants(bd, side)
    return wall(theta) ** 2 - U ** 2


def heat_seed(bd: BoundaryData, side: str, tg: ThetaGrid, psi_grid: LayerGrid,
              tol: float = 1e-12) -> np.ndarray:
    """Decaying solution of Q_theta = kappa U Q_psipsi with the wall datum, mode by mode."""
    U, kappa, _ = side_constants(bd, side)
    datum = wall_datum(bd, side, tg.nodes)
    spec = np.fft.fft(datum) / tg.n
    if abs(spec[0]) > tol * max(1.0, np.abs(datum).max()):
        raise InvalidDatumError(f"wall datum has nonzero mean {spec[0].real:.3e}")
    k = tg.wavenumbers
    alpha = np.sqrt(np.abs(k) / (2.0 * kappa * U)) * (1.0 + 1j * np.sign(k))
    # decay away from the wall: psi <= 0 on the outer side, psi >= 0 on the inner side
    expo = np.exp(np.outer(alpha, psi_grid.sign * psi_grid.nodes))
    modes = spec[:, None] * expo
    modes[0] = 0.0
    modes[tg.n // 2] = 0.0
    return np.real(np.fft.ifft(modes * tg.n, axis=0))


def _mode_solve(ik, D2, diff, rhs, wall, far):
    """Solve ik f - diff f'' = rhs with f=0 at the wall and far nodes."""
    n = D2.shape[0]
    A = ik * np.eye(n, dtype=complex) - diff * D2
    b = rhs.astype(complex)
    for i in (wall, far):
        A[i] = 0.0
        A[i, i] = 1.0
        b[i] = 0.0
    return np.linalg.solve(A, b)


def apply_L(Lam: np.ndarray, U_wall: float, kappa: float, psi_grid: LayerGrid) -> np.ndarray:
    """Phi with Phi_theta - kappa U Phi_psipsi = Lam_theta, Phi = 0 at both ends, zero angular mean."""
    nt = Lam.shape[0]
    spec = np.fft.fft(Lam, axis=0)
    out = np.zeros_like(spec)
    k = np.fft.fftfreq(nt, d=1.0 / nt)
    D2 = psi_grid.D2
    for j in range(1, nt // 2):
        ik = 1j * k[j]
        out[j] = _mode_solve(ik, D2, kappa * U_wall, ik * spec[j], psi_grid.wall_index,
                             psi_grid.far_index)
        out[nt - j] = np.conj(out[j])
    return np.real(np.fft.ifft(out, axis=0))


def map_H(q: np.ndarray, Q0: np.ndarray, U_wall: float) -> np.ndarray:
    """(sqrt(q + Q0 + U^2) - U)^2, written in the expanded form."""
    rad = q + Q0 + U_wall ** 2
    if np.any(rad <= 0):
        raise NoContractionError("iterate left the admissible set: q + Q0 + U^2 <= 0")
    return q + Q0 - 2.0 * U_wall * np.sqrt(rad) + 2.0 * U_wall ** 2


def _layer_norm(f: np.ndarray, grid: LayerGrid) -> float:
    return float(np.sqrt(np.mean(f ** 2 @ grid.quad_weights)))


def fixed_point(bd: BoundaryData, side: str, tg: ThetaGrid, psi_grid: LayerGrid,
                tol: float = 1e-10, max_iter: int = 50) -> VonMisesField:
    """Iterate q <- L(H(q)) from q = 0, recording successive contraction ratios."""
    U, kappa, _ = side_constants(bd, side)
    Q0 = heat_seed(bd, side, tg, psi_grid)
    q = np.zeros_like(Q0)
    ratios, prev = [], None
    for it in range(1, max_iter + 1):
        q_new = apply_L(map_H(q, Q0, U), U, kappa, psi_grid)
        step = _layer_norm(q_new - q, psi_grid)
        q = q_new
        if prev is not None and prev > 0:
            ratios.append(step / prev)
            if ratios[-1] >= 1.0 and step > tol:
                raise NoContractionError(
                    f"{side} wall: contraction ratio {ratios[-1]:.3f} at iteration {it}; eta too large")
        prev = step
        if step < tol:
            return VonMisesField(side, tg, psi_grid, U, kappa, Q0, q, ratios, it)
    raise NoContractionError(f"{side} wall: no convergence in {max_iter} iterations (last step {step:.3e})")


def _invert_monotone(psi_grid: LayerGrid, Yp: np.ndarray, Up: np.ndarray, targets: np.ndarray,
                     U_wall: float, tol: float = 1e-13, max_iter: int = 40):
    """psi with Y(psi) = target for one angle; Y and Uv are nodal values on the psi grid.

    Returns (psi, inside) where ``inside`` flags targets reached within the grid.
    """
    lo, hi = sorted((psi_grid.nodes[0], psi_grid.nodes[-1]))
    Y_far = Yp[psi_grid.far_index]
    inside = np.abs(targets) <= np.abs(Y_far)
    psi = np.clip(U_wall * targets, lo, hi)
    for _ in range(max_iter):
        M = psi_grid.interp_matrix(psi)
        resid = M @ Yp - targets
        psi_new = np.clip(psi - resid * (M @ Up), lo, hi)
        done = np.max(np.abs(psi_new - psi)[inside], initial=0.0) < tol * max(1.0, hi - lo)
        psi = psi_new
        if done:
            break
    return psi, inside


def to_physical(vmf: VonMisesField, layer_grid: LayerGrid, decay_tol: float = 1e-6) -> PrandtlLeading:
    """Invert the von Mises map and recover (u_p0, v_p1, p_p1) on the layer grid."""
    Uv = vmf.U
    if np.any(Uv <= 0):
        raise TransformError("von Mises speed is not positive")
    g = vmf.psi_grid
    Y = (1.0 / Uv) @ g.wall_integral.T
    u = np.zeros((vmf.theta_grid.n, layer_grid.n))
    for i in range(vmf.theta_grid.n):
        psi, inside = _invert_monotone(g, Y[i], Uv[i], layer_grid.nodes, vmf.U_wall)
        vals = g.interp_matrix(psi) @ Uv[i] - vmf.U_wall
        u[i] = np.where(inside, vals, 0.0)
    k = vmf.kappa
    v = -cumulative_layer_integral(d_theta(u), layer_grid, decay_tol=decay_tol) / k
    p = cumulative_layer_integral((2.0 * vmf.U_wall * u + u ** 2) / k, layer_grid, decay_tol=decay_tol)
    return PrandtlLeading(vmf.side, vmf.theta_grid, layer_grid, vmf.U_wall, k, u, v, p)


def solve_leading(bd: BoundaryData, side: str, tg: ThetaGrid, n_layer: int = 96, n_psi: int = 96,
                  depth: float | None = None, tol: float = 1e-10, max_iter: int = 50,
                  psi_factor: float = 1.25):
    """Fixed point plus inversion on default grids; returns (VonMisesField, PrandtlLeading).

    The psi grid reaches ``psi_factor * U * depth``, a little beyond the image
    of the physical layer depth, so the inversion never extrapolates.
    """
    depth = depth or default_layer_depth(bd)
    U, _, _ = side_constants(bd, side)
    psi_grid = LayerGrid(side, psi_factor * U * depth, n_psi)
    layer_grid = LayerGrid(side, depth, n_layer)
    vmf = fixed_point(bd, side, tg, psi_grid, tol=tol, max_iter=max_iter)
    return vmf, to_physical(vmf, layer_grid)
