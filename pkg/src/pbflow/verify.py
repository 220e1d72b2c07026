"""Desk-scale checks of the asymptotic picture against full Navier-Stokes solves.

* ``theorem_error``: distance between an NS solution and the leading composite
  u_e + u_p0 + u^_p0, together with sup |v|.
* ``vorticity_limit_error``: interior distance of the NS vorticity to that of
  the shear profile.
* ``pb_diagnostic``: relative variation of 2 pi r w'(r); a flow with nested
  circular streamlines obeying the Prandtl-Batchelor law has it constant.
* ``family_report``: interior vorticity across the delta family at fixed eps.
* ``theorem_sweep``: the eps sweep behind the first two.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from . import composite as cp
from . import ns_solver as ns
from .profile import BoundaryData, ShearProfile, eval_shear
from .spectral import RadialGrid, ThetaGrid

log = logging.getLogger(__name__)


class ParameterMismatch(ValueError):
    pass


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class Fit:
    slope: float
    constant: float     # log of the prefactor: y ~ exp(constant) * x**slope
    residual: float     # RMS misfit in log space

    def as_dict(self):
        return {"slope": self.slope, "constant": self.constant, "residual": self.residual}


def order_fit(xs, ys) -> Fit:
    """Least squares line through (log x, log y)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("order_fit needs at least 3 paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("order_fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    slope, const = np.polyfit(lx, ly, 1)
    res = float(np.sqrt(np.mean((ly - (slope * lx + const)) ** 2)))
    return Fit(float(slope), float(const), res)


@dataclass
class SweepReport:
    axis: str
    values: list
    points: list                      # one metrics dict per converged value, same order as values
    fits: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def column(self, key):
        return [pt[key] for pt in self.points]

    def fit(self, key) -> Fit:
        """Fit ``key`` against the axis over converged points."""
        xs = [pt[self.axis] for pt in self.points]
        f = order_fit(xs, self.column(key))
        self.fits[key] = f
        return f

    def rows(self):
        return [dict(pt) for pt in self.points]


def _check_parameters(state: ns.NSState, bd: BoundaryData, exp: cp.Expansion, tol: float = 1e-12):
    theta = state.theta
    wall_err = max(np.abs(state.u[:, -1] - bd.outer_wall(theta)).max(),
                   np.abs(state.u[:, 0] - bd.inner_wall(theta)).max())
    if wall_err > 1e-10:
        raise ParameterMismatch(f"state wall values differ from the boundary data by {wall_err:.2e}")
    if abs(state.radial_grid.r0 - bd.r0) > tol:
        raise ParameterMismatch("state and boundary data have different r0")
    G = exp.gradient_coefficient * state.epsilon ** 2
    if abs(state.pressure_gradient - G) > 1e-12 * max(1.0, abs(G)):
        raise ParameterMismatch(f"state pressure gradient {state.pressure_gradient:.3e} does not "
                                f"match the expansion ({G:.3e})")


def theorem_error(state: ns.NSState, exp: cp.Expansion) -> tuple[float, float]:
    """(sup |u - u_e - u_p0 - u^_p0|, sup |v|) on the state's grid."""
    _check_parameters(state, exp.bd, exp)
    if state.theta_grid.n != exp.theta_grid.n:
        raise ParameterMismatch("state and expansion use different angular grids")
    lead = cp.leading_composite(exp, state.epsilon, state.radial_grid)
    return float(np.abs(state.u - lead).max()), float(np.abs(state.v).max())


def default_window(r0: float) -> tuple[float, float]:
    return (1.0 + 2.0 * r0) / 3.0, (2.0 + r0) / 3.0


def _window_points(rg: RadialGrid, window, n: int = 201) -> np.ndarray:
    r1, r2 = window
    if not rg.r0 < r1 < r2 < 1.0:
        raise WindowError(f"window [{r1}, {r2}] must lie strictly inside ({rg.r0}, 1)")
    return np.linspace(r1, r2, n)


def vorticity_limit_error(state: ns.NSState, profile: ShearProfile, window=None) -> float:
    """sup over the window of |w - w_e| with w_e = 2c ln r + 2a + c, the shear vorticity."""
    rg = state.radial_grid
    window = window or default_window(rg.r0)
    rs = _window_points(rg, window)
    w = ns.vorticity(state) @ rg.interp_matrix(rs).T
    return float(np.abs(w - eval_shear(profile, rs)[3][None, :]).max())


def window_mean_vorticity(state: ns.NSState, window=None) -> float:
    """Area mean of the vorticity over the annular window."""
    rg = state.radial_grid
    window = window or default_window(rg.r0)
    rs = _window_points(rg, window)
    wbar = ns.vorticity(state).mean(axis=0) @ rg.interp_matrix(rs).T
    return float(trapezoid(wbar * rs, rs) / trapezoid(rs, rs))


def pb_diagnostic(w, u_e, rg: RadialGrid, margin: float = 0.05, window=None) -> float:
    """(max - min) / |mean| of 2 pi r w'(r) over [r0+margin, 1-margin].

    ``w`` and ``u_e`` are radial profiles at the nodes of ``rg``; u_e only
    serves to check that the streamlines are nested circles.
    """
    w = np.asarray(w, dtype=float)
    u_e = np.asarray(u_e, dtype=float)
    if (np.any(u_e > 0) and np.any(u_e < 0)) or np.all(u_e == 0):
        raise ValueError("u_e changes sign: streamlines are not nested circles")
    window = window or (rg.r0 + margin, 1.0 - margin)
    rs = _window_points(rg, window)
    M = rg.interp_matrix(rs)
    g = 2.0 * np.pi * rs * (M @ (rg.D @ w))
    mean = g.mean()
    if mean == 0.0:
        return float("inf") if np.ptp(g) > 0 else 0.0
    return float(np.ptp(g) / abs(mean))


def state_pb_variation(state: ns.NSState, profile: ShearProfile, window=None) -> float:
    """pb_diagnostic of the angular-mean NS vorticity over the interior window."""
    rg = state.radial_grid
    w = ns.vorticity(state).mean(axis=0)
    return pb_diagnostic(w, profile.u(rg.nodes), rg, window=window or default_window(rg.r0))


@dataclass(frozen=True)
class Problem:
    """Everything a single sweep point needs; picklable for worker processes."""

    bd: BoundaryData
    c_t: float
    delta: float
    n_theta: int = 32
    n_r: int = 64
    K: int = 1
    tol: float = 1e-10
    max_iter: int = 20
    gamma: float = 1e-4
    n_layer: int = 96
    layer_depth: float | None = None
    psi_factor: float = 1.25
    fp_tol: float = 1e-10
    fp_max_iter: int = 50
    line_search: bool = False

    def grids(self):
        return ThetaGrid(self.n_theta), RadialGrid(self.bd.r0, self.n_r)

    def expansion(self) -> cp.Expansion:
        tg, rg = self.grids()
        return cp.build_expansion(self.bd, self.c_t, self.delta, tg, rg, order=self.K,
                                  n_layer=self.n_layer, n_psi=self.n_layer, depth=self.layer_depth,
                                  gamma=self.gamma, fp_tol=self.fp_tol, fp_max_iter=self.fp_max_iter,
                                  psi_factor=self.psi_factor)

    def seed(self, exp: cp.Expansion, eps: float) -> ns.NSState:
        return cp.assemble(self.K, eps, exp).as_state()

    def solve(self, exp: cp.Expansion, eps: float):
        return ns.newton_solve(eps, self.bd, self.seed(exp, eps), tol=self.tol, max_iter=self.max_iter,
                               line_search=self.line_search)


def solve_point(problem: Problem, eps: float, exp: cp.Expansion | None = None):
    """Newton solve at one eps seeded by the composite; returns (state, report)."""
    exp = exp or problem.expansion()
    return problem.solve(exp, eps)


def point_metrics(state: ns.NSState, exp: cp.Expansion, iterations: int | None = None,
                  newton_residual: float | None = None) -> dict:
    """Leading-composite error, sup |v|, interior vorticity error and PB variation of a converged state."""
    eps = state.epsilon
    err_u, err_v = theorem_error(state, exp)
    return {
        "epsilon": eps,
        "delta": exp.profile.delta,
        "sup_u_error": err_u,
        "sup_v": err_v,
        "sup_v_over_eps": err_v / eps,
        "vorticity_error": vorticity_limit_error(state, exp.profile),
        "pb_variation": state_pb_variation(state, exp.profile),
        "newton_iterations": iterations,
        "newton_residual": newton_residual,
    }


def _sweep_point(problem: Problem, eps: float, exp: cp.Expansion | None = None):
    exp = exp or problem.expansion()
    state, rep = solve_point(problem, eps, exp)
    return point_metrics(state, exp, rep.iterations, rep.final_residual), state


def _run_points(fn, args_of, values, workers: int):
    """Evaluate ``fn(*args_of(v))`` for each value; returns (results, failures) keyed by value."""
    results, failures = {}, {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {v: pool.submit(fn, *args_of(v)) for v in values}
            for v, fut in futs.items():
                try:
                    results[v] = fut.result()
                except Exception as exc:  # noqa: BLE001 - reported per point
                    failures[v] = f"{type(exc).__name__}: {exc}"
    else:
        for v in values:
            try:
                results[v] = fn(*args_of(v))
            except Exception as exc:  # noqa: BLE001 - reported per point
                log.warning("sweep point %s failed: %s", v, exc)
                failures[v] = f"{type(exc).__name__}: {exc}"
    return results, failures


def theorem_sweep(problem: Problem, epsilons, workers: int = 1, keep_states: bool = False) -> SweepReport:
    """NS solves over eps, seeded by the composite; fits sup-error and records interior metrics."""
    if len(epsilons) == 0:
        raise ValueError("empty epsilon sweep")
    # the expansion does not depend on eps: build it once unless points run in other processes
    shared = problem.expansion() if workers <= 1 else None
    values = sorted({float(e) for e in epsilons}, reverse=True)
    results, failures = _run_points(_sweep_point, lambda e: (problem, e, shared), values, workers)
    eps_sorted = sorted(results, reverse=True)
    rep = SweepReport("epsilon", eps_sorted, [results[e][0] for e in eps_sorted], failures=failures)
    if keep_states:
        rep.extra["states"] = {e: results[e][1] for e in eps_sorted}
    if len(rep.points) >= 3:
        rep.fit("sup_u_error")
    return rep


def composite_sweep(problem: Problem, epsilons, K: int | None = None) -> SweepReport:
    """Residual norms of the composite itself (no NS solve)."""
    K = problem.K if K is None else K
    exp = problem.expansion()
    points = []
    for eps in sorted(epsilons, reverse=True):
        comp = cp.assemble(K, eps, exp)
        r = cp.residual(comp).as_dict()
        r["max_h"] = float(np.abs(comp.h).max())
        points.append(r)
    rep = SweepReport("epsilon", sorted(epsilons, reverse=True), points)
    rep.extra["diagnostics"] = dict(exp.diagnostics)
    if len(points) >= 3:
        rep.fit("l2_u")
    return rep


def family_target(profile_unit: ShearProfile, d_delta: float, window) -> float:
    """Window average of 2 d_delta (c_t ln r + a_t + c_t/2)."""
    rs = np.linspace(*window, 2001)
    f = 2.0 * d_delta * (profile_unit.c_t * np.log(rs) + profile_unit.a_t + profile_unit.c_t / 2.0)
    return float(trapezoid(f * rs, rs) / trapezoid(rs, rs))


def family_report(deltas, epsilon: float, bd: BoundaryData, c_t: float, workers: int = 1,
                  window=None, **problem_opts) -> SweepReport:
    """Converge NS at each delta and compare interior mean vorticity differences with the limit."""
    if len(deltas) == 0:
        raise ValueError("empty delta list")
    window = window or default_window(bd.r0)
    values = sorted(set(float(d) for d in deltas))

    results, failures = _run_points(
        _family_point, lambda d: (Problem(bd, c_t, d, **problem_opts), epsilon, window), values, workers)
    done = sorted(results)
    points = [results[d] for d in done]
    unit = ShearProfile.build(bd, c_t, 1.0)
    pairs = []
    for i, di in enumerate(done):
        for dj in done[i + 1:]:
            measured = results[dj]["mean_vorticity"] - results[di]["mean_vorticity"]
            target = family_target(unit, dj - di, window)
            rel = abs(measured - target) / abs(target) if target != 0 else float("inf")
            pairs.append({"delta_i": di, "delta_j": dj, "measured": measured, "target": target,
                          "relative_error": rel})
    means = [p["mean_vorticity"] for p in points]
    steps = np.diff(means)
    monotone = bool(np.all(steps > 0) or np.all(steps < 0)) if len(means) > 1 else True
    rep = SweepReport("delta", done, points, failures=failures)
    rep.extra.update(pairs=pairs, monotone=monotone, window=list(window), epsilon=epsilon)
    return rep


def _family_point(problem: Problem, eps: float, window):
    exp = problem.expansion()
    state, rep = problem.solve(exp, eps)
    return {
        "delta": problem.delta,
        "epsilon": eps,
        "mean_vorticity": window_mean_vorticity(state, window),
        "vorticity_error": vorticity_limit_error(state, exp.profile, window),
        "newton_iterations": rep.iterations,
        "newton_residual": rep.final_residual,
    }


def structural_invariants(state: ns.NSState, bd: BoundaryData) -> dict:
    """Divergence, wall traces, angular mean of v and pressure gauge of a state."""
    tg, rg = state.theta_grid, state.radial_grid
    theta = tg.nodes
    return {
        "divergence": float(np.abs(ns.divergence(tg, rg, state.u, state.v)).max()),
        "wall_u": float(max(np.abs(state.u[:, -1] - bd.outer_wall(theta)).max(),
                            np.abs(state.u[:, 0] - bd.inner_wall(theta)).max())),
        "wall_v": float(max(np.abs(state.v[:, 0]).max(), np.abs(state.v[:, -1]).max())),
        "mean_v": float(np.abs(state.v.mean(axis=0)).max()),
        "pressure_mean": float(abs(np.sum(ns.area_weights(tg, rg) * state.p))),
    }



@dataclass(frozen=True)
class Criterion:
    name: str
    measured: float
    threshold: str
    passed: bool

    def as_dict(self):
        return {"name": self.name, "measured": self.measured, "threshold": self.threshold,
                "passed": bool(self.passed)}


def strictly_decreasing(values) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(v.size >= 2 and np.all(np.diff(v) < 0))


def theorem_criteria(rep: SweepReport, min_slope: float = 0.9, max_v_ratio: float = 2.0) -> list:
    """Slope of the sup error, spread of sup|v|/eps, monotone interior vorticity and PB variation.

    ``rep.points`` are ordered by decreasing eps, so "decreasing with eps"
    means strictly decreasing along the list.
    """
    out = []
    if len(rep.points) >= 3:
        fit = rep.fits.get("sup_u_error") or rep.fit("sup_u_error")
        out.append(Criterion("theorem_error_slope", fit.slope, f">= {min_slope}", fit.slope >= min_slope))
    else:
        out.append(Criterion("theorem_error_slope", float("nan"), ">= 3 converged points", False))
    ve = rep.column("sup_v_over_eps")
    ratio = max(ve) / min(ve) if ve and min(ve) > 0 else float("inf")
    out.append(Criterion("sup_v_over_eps_spread", ratio, f"< {max_v_ratio}", ratio < max_v_ratio))
    we = rep.column("vorticity_error")
    out.append(Criterion("vorticity_error_decreasing", we[-1] if we else float("nan"),
                         "strictly decreasing as eps decreases", strictly_decreasing(we)))
    pb = rep.column("pb_variation")
    out.append(Criterion("pb_variation_decreasing", pb[-1] if pb else float("nan"),
                         "strictly decreasing as eps decreases", strictly_decreasing(pb)))
    return out


def residual_criterion(rep: SweepReport, min_slope: float = 1.8) -> Criterion:
    fit = rep.fits.get("l2_u") or rep.fit("l2_u")
    return Criterion("composite_residual_slope", fit.slope, f">= {min_slope}", fit.slope >= min_slope)


def family_criteria(rep: SweepReport, rel_tol: float = 0.1) -> list:
    pairs = rep.extra.get("pairs", [])
    worst = max((p["relative_error"] for p in pairs), default=float("inf"))
    return [
        Criterion("family_all_converged", float(len(rep.failures)), "0 failures", not rep.failures),
        Criterion("family_difference_error", worst, f"< {rel_tol}", worst < rel_tol),
        Criterion("family_monotone", float(rep.extra.get("monotone", False)), "strictly monotone in delta",
                  bool(rep.extra.get("monotone", False))),
    ]


def invariant_criteria(invariants: dict, div_tol: float = 1e-10, wall_tol: float = 1e-12,
                       mean_tol: float = 1e-10) -> list:
    """Criteria over a {label: structural_invariants(...)} mapping (worst case across labels)."""
    def worst(key):
        return max((inv[key] for inv in invariants.values()), default=0.0)
    return [
        Criterion("divergence", worst("divergence"), f"< {div_tol}", worst("divergence") < div_tol),
        Criterion("wall_traces", max(worst("wall_u"), worst("wall_v")), f"< {wall_tol}",
                  max(worst("wall_u"), worst("wall_v")) < wall_tol),
        Criterion("angular_mean_v", worst("mean_v"), f"< {mean_tol}", worst("mean_v") < mean_tol),
    ]
