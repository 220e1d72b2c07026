"""Steady incompressible Navier-Stokes on the annulus, Newton with a direct solver.

Unknowns are the collocation values of (u, v, p) on the Fourier x Chebyshev
grid, with u the azimuthal and v the radial velocity. The momentum equations
are multiplied by r:

    u u_t + r v u_r + u v + p_t + G - e^2 (u_tt/r + r u_rr + u_r + 2 v_t/r - u/r) = 0
    u v_t + r v v_r - u^2 + r p_r  - e^2 (v_tt/r + r v_rr + v_r - 2 u_t/r - v/r) = 0
    u_t + r v_r + v = 0

Here e^2 is the viscosity. G is an optional constant azimuthal pressure
gradient: the pressure is ``G*theta + p`` with p periodic.

Momentum rows live at interior radial nodes and continuity at every node. At
each wall, the angular mean of continuity is redundant, so it is replaced by
the mean radial momentum at r=1 and by the pressure gauge at r=r0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la

from .profile import BoundaryData, ShearProfile
from .spectral import RadialGrid, ThetaGrid, d_radial, d_theta, resample_theta

log = logging.getLogger(__name__)


class NewtonError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


@dataclass
class NSState:
    epsilon: float
    theta_grid: ThetaGrid
    radial_grid: RadialGrid
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    pressure_gradient: float = 0.0

    @property
    def r(self) -> np.ndarray:
        return self.radial_grid.nodes

    @property
    def theta(self) -> np.ndarray:
        return self.theta_grid.nodes

    def copy(self, **changes) -> "NSState":
        base = dict(u=self.u.copy(), v=self.v.copy(), p=self.p.copy())
        base.update(changes)
        return replace(self, **base)


@dataclass
class NewtonReport:
    iterations: int = 0
    history: list = field(default_factory=list)
    converged: bool = False
    path: list = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.history[-1] if self.history else float("nan")

    def quadratic_ratios(self) -> list:
        """C_n = r_{n+1} / r_n^2 over the recorded history."""
        h = self.history
        return [h[i + 1] / h[i] ** 2 for i in range(len(h) - 1) if h[i] > 0]


def area_weights(tg: ThetaGrid, rg: RadialGrid) -> np.ndarray:
    """Quadrature weights for the mean over the annulus (sum to one)."""
    w = np.outer(np.full(tg.n, 1.0 / tg.n), rg.quad_weights * rg.nodes)
    return w / w.sum()


def l2_norm(field_: np.ndarray, tg: ThetaGrid, rg: RadialGrid) -> float:
    """Area-weighted root mean square over the annulus."""
    return float(np.sqrt(np.sum(area_weights(tg, rg) * np.asarray(field_) ** 2)))


def ns_residual(state: NSState):
    """Pointwise residuals of the two momentum equations and continuity."""
    e2 = state.epsilon ** 2
    u, v, p = state.u, state.v, state.p
    r = state.r[None, :]
    rg = state.radial_grid
    u_t, v_t, p_t = d_theta(u), d_theta(v), d_theta(p)
    u_r, v_r, p_r = d_radial(u, rg), d_radial(v, rg), d_radial(p, rg)
    Fu = (u * u_t + r * v * u_r + u * v + p_t + state.pressure_gradient
          - e2 * (viscous_part(u, rg) + 2 * v_t / r))
    Fv = (u * v_t + r * v * v_r - u * u + r * p_r
          - e2 * (viscous_part(v, rg) - 2 * u_t / r))
    Fc = u_t + r * v_r + v
    return Fu, Fv, Fc


def viscous_part(f: np.ndarray, rg: RadialGrid) -> np.ndarray:
    """f_tt/r + r f_rr + f_r - f/r, with the radial part evaluated as r d_r((r f)_r / r)."""
    r = rg.nodes[None, :]
    return d_theta(f, 2) / r + r * d_radial(d_radial(r * f, rg) / r, rg)


def vorticity(state: NSState) -> np.ndarray:
    """w = (d_r(r u) - d_theta v) / r."""
    r = state.r[None, :]
    return (d_radial(r * state.u, state.radial_grid) - d_theta(state.v)) / r


def divergence(tg, rg, u, v) -> np.ndarray:
    """u_t + r v_r + v in the same discrete form as the continuity rows of the solver.

    (d_r(r v) of the interpolant differs from this at truncation level.)
    """
    r = rg.nodes[None, :]
    return d_theta(u) + r * d_radial(v, rg) + v


def taylor_couette_state(profile: ShearProfile, epsilon: float, tg: ThetaGrid, rg: RadialGrid,
                         pressure_gradient: float = 0.0) -> NSState:
    """The shear profile as an NS state with its radial pressure and zero-mean gauge."""
    r = rg.nodes
    u = np.tile(profile.u(r), (tg.n, 1))
    p = np.tile(profile.pressure(r), (tg.n, 1))
    p -= np.sum(area_weights(tg, rg) * p)
    return NSState(epsilon, tg, rg, u, np.zeros_like(u), p, pressure_gradient)


def check_resolution(epsilon: float, rg: RadialGrid, min_nodes: int = 4):
    r = rg.nodes
    near_outer = np.count_nonzero(1.0 - r <= epsilon + 1e-14)
    near_inner = np.count_nonzero(r - rg.r0 <= epsilon + 1e-14)
    if min(near_outer, near_inner) < min_nodes:
        raise ResolutionError(
            f"only {min(near_outer, near_inner)} radial nodes within epsilon={epsilon} of a wall "
            f"(need {min_nodes}); increase n_r")


def suggest_nr(epsilon: float, r0: float, n_min: int = 48) -> int:
    """Smallest even Gauss-Lobatto count whose first wall spacing is at most epsilon/4."""
    n = n_min
    while RadialGrid(r0, n).wall_spacing() > epsilon / 4.0:
        n += 2
    return n + (n % 2)


class _Assembler:
    """Newton system for a fixed grid, viscosity and boundary data.

    The Fourier differentiation couples every angular node on a radial line
    and the Chebyshev one every radial node on an angular line, so LU fill
    makes sparse factorization slower than a dense one at these sizes.
    """

    def __init__(self, epsilon, tg: ThetaGrid, rg: RadialGrid, u_outer, u_inner, G):
        self.e2 = epsilon ** 2
        self.tg, self.rg, self.G = tg, rg, G
        nt, nr = tg.n, rg.n
        self.nt, self.nr, self.N = nt, nr, nt * nr
        self.u_outer, self.u_inner = u_outer, u_inner
        It, Ir = np.eye(nt), np.eye(nr)
        r = rg.nodes
        self.Dt = np.kron(tg.diff_matrix(1), Ir)
        self.Dr = np.kron(It, rg.D)
        rr = np.tile(r, nt)
        self.rr = rr
        # r f_rr + f_r - f/r written as r d_r((r f)_r / r)
        radial = (r[:, None] * rg.D) @ ((rg.D / r[:, None]) @ np.diag(r))
        self.visc = np.kron(tg.diff_matrix(2), np.diag(1.0 / r)) + np.kron(It, radial)
        self.rDr = rr[:, None] * self.Dr
        i = np.tile(np.arange(nr), nt)
        self.inner = np.nonzero(i == 0)[0]
        self.outer = np.nonzero(i == nr - 1)[0]
        self.gauge = area_weights(tg, rg).ravel()
        # rows k=1..nt-1 of `dif` subtract the first angular node, removing the mean
        self.dif = np.eye(nt)[1:] - np.eye(nt)[[0] * (nt - 1)]

    def split(self, x):
        N = self.N
        return x[:N], x[N:2 * N], x[2 * N:]

    def equations(self, x):
        u, v, p = self.split(x)
        Dt, Dr = self.Dt, self.Dr
        rr, e2 = self.rr, self.e2
        u_t, v_t = Dt @ u, Dt @ v
        u_r, v_r = Dr @ u, Dr @ v
        Fu = u * u_t + rr * v * u_r + u * v + Dt @ p + self.G - e2 * (self.visc @ u + 2 * v_t / rr)
        Fv = u * v_t + rr * v * v_r - u * u + rr * (Dr @ p) - e2 * (self.visc @ v - 2 * u_t / rr)
        Fc = u_t + rr * v_r + v
        return Fu, Fv, Fc

    def system(self, x):
        Fu, Fv, Fc = self.equations(x)
        u, v, p = self.split(x)
        Ru, Rv, Rc = Fu.copy(), Fv.copy(), Fc.copy()
        Ru[self.outer] = u[self.outer] - self.u_outer
        Ru[self.inner] = u[self.inner] - self.u_inner
        Rv[self.outer] = v[self.outer]
        Rv[self.inner] = v[self.inner]
        Rc[self.outer] = np.concatenate([[Fv[self.outer].mean()], self.dif @ Fc[self.outer]])
        Rc[self.inner] = np.concatenate([[self.gauge @ p], self.dif @ Fc[self.inner]])
        return np.concatenate([Ru, Rv, Rc])

    def jacobian(self, x):
        u, v, p = self.split(x)
        N, Dt, Dr, e2, rr = self.N, self.Dt, self.Dr, self.e2, self.rr
        u_t, v_t, u_r, v_r = Dt @ u, Dt @ v, Dr @ u, Dr @ v
        J = np.zeros((3 * N, 3 * N))
        Ju, Jv, Jc = J[:N], J[N:2 * N], J[2 * N:]
        Ju[:, :N] = u[:, None] * Dt + (rr * v)[:, None] * Dr - e2 * self.visc
        Ju[:, :N][np.diag_indices(N)] += u_t + v
        Ju[:, N:2 * N] = (-2 * e2) * Dt / rr[:, None]
        Ju[:, N:2 * N][np.diag_indices(N)] += rr * u_r + u
        Ju[:, 2 * N:] = Dt
        Jv[:, :N] = (2 * e2) * Dt / rr[:, None]
        Jv[:, :N][np.diag_indices(N)] += v_t - 2 * u
        Jv[:, N:2 * N] = u[:, None] * Dt + (rr * v)[:, None] * Dr - e2 * self.visc
        Jv[:, N:2 * N][np.diag_indices(N)] += rr * v_r
        Jv[:, 2 * N:] = self.rDr
        Jc[:, :N] = Dt
        Jc[:, N:2 * N] = self.rDr
        Jc[:, N:2 * N][np.diag_indices(N)] += 1.0
        mean_row = Jv[self.outer].mean(axis=0)
        for rows, first in ((self.outer, mean_row), (self.inner, None)):
            Jc[rows] = np.vstack([first if first is not None else np.zeros(3 * N),
                                  self.dif @ Jc[rows]])
        Jc[self.inner[0], 2 * N:] = self.gauge
        for rows, off in ((self.outer, 0), (self.inner, 0), (self.outer, N), (self.inner, N)):
            blk = J[off:off + N]
            blk[rows] = 0.0
            blk[rows, off + rows] = 1.0
        return J


def newton_solve(epsilon: float, bd: BoundaryData, guess: NSState, tol: float = 1e-10,
                 max_iter: int = 20, line_search: bool = False, pressure_gradient: float | None = None,
                 check_layer_resolution: bool = True,
                 step_tol: float = 1e-12) -> tuple[NSState, NewtonReport]:
    """Newton iteration from ``guess``; the residual is the area-weighted RMS of the system.

    Besides ``residual < tol`` the iteration also stops, as converged, once a
    full step changes the unknowns by less than ``step_tol`` relative to their
    size while the residual is below ``100*tol``: at epsilon of order one the
    viscous term has a roundoff floor near 1e-10.
    """
    tg, rg = guess.theta_grid, guess.radial_grid
    if check_layer_resolution:
        check_resolution(epsilon, rg)
    G = guess.pressure_gradient if pressure_gradient is None else pressure_gradient
    theta = tg.nodes
    asm = _Assembler(epsilon, tg, rg, bd.outer_wall(theta), bd.inner_wall(theta), G)
    x = np.concatenate([guess.u.ravel(), guess.v.ravel(), guess.p.ravel()])
    w = np.tile(area_weights(tg, rg).ravel() * 1.0, 3)
    w = np.where(w > 0, w, 0.0) / 3.0

    def norm(F):
        return float(np.sqrt(np.sum(w * F ** 2) + np.sum(F[np.r_[asm.outer, asm.inner]] ** 2) / asm.N))

    report = NewtonReport()
    F = asm.system(x)
    report.history.append(norm(F))
    for it in range(max_iter):
        if report.history[-1] < tol:
            report.converged = True
            break
        J = asm.jacobian(x)
        try:
            dx = la.lu_solve(la.lu_factor(J, overwrite_a=True, check_finite=False), -F)
        except (la.LinAlgError, ValueError) as exc:
            raise NewtonError(f"linear solve failed at iteration {it}: {exc}") from exc
        step = 1.0
        while True:
            x_new = x + step * dx
            F_new = asm.system(x_new)
            if not line_search or norm(F_new) < report.history[-1] or step < 1e-3:
                break
            step *= 0.5
        x, F = x_new, F_new
        report.iterations += 1
        report.history.append(norm(F))
        if (step * np.max(np.abs(dx)) < step_tol * max(1.0, np.max(np.abs(x)))
                and report.history[-1] < 100 * tol):
            report.converged = True
            break
        log.debug("newton it=%d residual=%.3e step=%.3g", it + 1, report.history[-1], step)
        if not np.isfinite(report.history[-1]):
            raise NewtonError("Newton iteration diverged (non-finite residual)")
    else:
        report.converged = report.history[-1] < tol
    if not report.converged:
        raise NewtonError(f"Newton did not converge in {max_iter} iterations "
                          f"(residual {report.history[-1]:.3e})")
    u, v, p = (a.reshape(tg.n, rg.n) for a in asm.split(x))
    u[:, -1] = bd.outer_wall(theta)
    u[:, 0] = bd.inner_wall(theta)
    v[:, 0] = v[:, -1] = 0.0
    return NSState(epsilon, tg, rg, u, v, p, G), report


class ContinuationError(NewtonError):
    """A continuation step failed; ``states`` and ``reports`` hold the steps that succeeded."""

    def __init__(self, message, epsilon, states, reports):
        super().__init__(message)
        self.epsilon = epsilon
        self.states = states
        self.reports = reports


def regrid(state: NSState, tg: ThetaGrid, rg: RadialGrid) -> NSState:
    """Spectral interpolation of a state onto another grid (same r0)."""
    if abs(state.radial_grid.r0 - rg.r0) > 1e-14:
        raise ValueError("cannot regrid between annuli with different r0")
    M = state.radial_grid.interp_matrix(rg.nodes)
    fields = []
    for f in (state.u, state.v, state.p):
        fields.append(resample_theta(f, tg.n) @ M.T)
    return NSState(state.epsilon, tg, rg, *fields, state.pressure_gradient)


def system_norm(state: NSState, bd: BoundaryData) -> float:
    """The Newton residual norm of ``state`` (as used for convergence)."""
    tg, rg = state.theta_grid, state.radial_grid
    theta = tg.nodes
    asm = _Assembler(state.epsilon, tg, rg, bd.outer_wall(theta), bd.inner_wall(theta),
                     state.pressure_gradient)
    x = np.concatenate([state.u.ravel(), state.v.ravel(), state.p.ravel()])
    F = asm.system(x)
    w = np.tile(area_weights(tg, rg).ravel(), 3) / 3.0
    return float(np.sqrt(np.sum(w * F ** 2) + np.sum(F[np.r_[asm.outer, asm.inner]] ** 2) / asm.N))


def continuation(epsilons, delta: float, bd: BoundaryData, seed_builder, **newton_opts):
    """Solve along a descending list of eps.

    ``seed_builder(eps, delta)`` returns a cold seed (normally the composite).
    From the second value on, the previous solution moved to the seed's grid
    is used instead when its residual is smaller. Returns (states, reports).
    """
    eps_list = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("continuation needs a strictly descending list of epsilon")
    states, reports = [], []
    for eps in eps_list:
        cold = seed_builder(eps, delta)
        seed, source = cold, "seed"
        if states:
            warm = regrid(states[-1], cold.theta_grid, cold.radial_grid)
            warm = NSState(eps, warm.theta_grid, warm.radial_grid, warm.u, warm.v, warm.p,
                           cold.pressure_gradient)
            if system_norm(warm, bd) < system_norm(cold, bd):
                seed, source = warm, "previous"
        try:
            state, rep = newton_solve(eps, bd, seed, **newton_opts)
        except (NewtonError, ResolutionError) as exc:
            raise ContinuationError(f"continuation stopped at eps={eps}: {exc}", eps, states,
                                    reports) from exc
        rep.path = [dict(epsilon=eps, delta=delta, seed=source)]
        states.append(state)
        reports.append(rep)
    return states, reports
