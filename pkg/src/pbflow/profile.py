"""Boundary data, Batchelor-Wood wall speeds and the rotating shear family."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import RadialGrid


class ProfileError(ValueError):
    pass


def _coeff_table(coeffs) -> dict[int, complex]:
    """Normalize Fourier data given as {mode: c} or [(mode, re, im), ...]."""
    if isinstance(coeffs, dict):
        table = {int(k): complex(v) for k, v in coeffs.items()}
    else:
        table = {int(m): complex(re, im) for m, re, im in coeffs}
    return {k: v for k, v in table.items() if v != 0}


def _make_real(table: dict[int, complex]) -> dict[int, complex]:
    """Fill in missing negative modes so the coefficients describe a real function."""
    out = dict(table)
    for k, v in table.items():
        if -k not in out:
            out[-k] = np.conj(v)
    return out


@dataclass(frozen=True)
class BoundaryData:
    """Wall speeds ``alpha + eta f(theta)`` at r=1 and ``beta + eta g(theta)`` at r=r0.

    ``f_hat`` and ``g_hat`` map Fourier mode to complex coefficient,
    ``f = sum_k f_hat[k] e^{ik theta}``. A table listing only positive modes is
    completed by conjugate symmetry.
    """

    alpha: float
    beta: float
    eta: float
    f_hat: dict = field(default_factory=dict)
    g_hat: dict = field(default_factory=dict)
    r0: float = 0.5

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ProfileError("wall mean speeds alpha and beta must be positive")
        if self.eta < 0:
            raise ProfileError("eta must be non-negative")
        if not 0 < self.r0 < 1:
            raise ProfileError("r0 must lie in (0,1)")
        f = _make_real(_coeff_table(self.f_hat))
        g = _make_real(_coeff_table(self.g_hat))
        for name, tab in (("f", f), ("g", g)):
            if abs(tab.get(0, 0.0)) != 0.0:
                raise ProfileError(f"{name} must have zero mean (mode 0 coefficient is {tab[0]})")
            for k, v in tab.items():
                if abs(tab[-k] - np.conj(v)) > 1e-14 * max(1.0, abs(v)):
                    raise ProfileError(f"{name} coefficients are not conjugate symmetric at mode {k}")
        object.__setattr__(self, "f_hat", f)
        object.__setattr__(self, "g_hat", g)

    @classmethod
    def cosine(cls, alpha=2.0, beta=1.5, eta=0.05, r0=0.5, mode=1, inner_phase=0.0):
        """f = cos(mode*theta), g = cos(mode*theta + inner_phase)."""
        return cls(alpha, beta, eta, {mode: 0.5}, {mode: 0.5 * np.exp(1j * inner_phase)}, r0)

    def max_mode(self) -> int:
        modes = list(self.f_hat) + list(self.g_hat)
        return max((abs(k) for k in modes), default=0)

    def f(self, theta) -> np.ndarray:
        return _synth(self.f_hat, theta)

    def g(self, theta) -> np.ndarray:
        return _synth(self.g_hat, theta)

    def outer_wall(self, theta) -> np.ndarray:
        return self.alpha + self.eta * self.f(theta)

    def inner_wall(self, theta) -> np.ndarray:
        return self.beta + self.eta * self.g(theta)

    def with_eta(self, eta: float) -> "BoundaryData":
        return replace(self, eta=eta)

    def to_triples(self) -> dict:
        def triples(tab):
            return [[k, tab[k].real, tab[k].imag] for k in sorted(tab) if k > 0]
        return {"alpha": self.alpha, "beta": self.beta, "eta": self.eta, "r0": self.r0,
                "f": triples(self.f_hat), "g": triples(self.g_hat)}

    @classmethod
    def from_triples(cls, d: dict) -> "BoundaryData":
        return cls(d["alpha"], d["beta"], d["eta"], list(d.get("f", [])), list(d.get("g", [])),
                   d.get("r0", 0.5))


def _synth(table: dict, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    out = np.zeros_like(theta, dtype=complex)
    for k, c in table.items():
        out += c * np.exp(1j * k * theta)
    return out.real


def mean_square(table: dict) -> float:
    """(1/2pi) * integral of the squared real function, by Parseval."""
    return float(sum(abs(c) ** 2 for c in table.values()))


def wall_speeds(bd: BoundaryData) -> tuple[float, float]:
    """Limiting Euler speeds at r=1 and r=r0 (Batchelor-Wood)."""
    U_outer = np.sqrt(bd.alpha ** 2 + bd.eta ** 2 * mean_square(bd.f_hat))
    U_inner = np.sqrt(bd.beta ** 2 + bd.eta ** 2 * mean_square(bd.g_hat))
    return float(U_outer), float(U_inner)


def solve_base_coeffs(U_outer: float, U_inner: float, r0: float) -> tuple[float, float]:
    """Taylor-Couette ``a r + b/r`` with the given wall speeds."""
    A = np.array([[1.0, 1.0], [r0, 1.0 / r0]])
    a0, b0 = np.linalg.solve(A, [U_outer, U_inner])
    return float(a0), float(b0)


def tilde_shape(a_t, b_t, c_t, r):
    r = np.asarray(r, dtype=float)
    return a_t * r + b_t / r + c_t * r * np.log(r)


def solve_tilde_coeffs(c_t: float, r0: float, check_positive: bool = True) -> tuple[float, float]:
    """Coefficients of ``a r + b/r + c r ln r`` vanishing at r0 and 1.

    The shape is linear in ``c_t``, so only one sign of ``c_t`` can keep it
    non-negative; the other sign is rejected with the offending radius.
    """
    b_t = -c_t * r0 * np.log(r0) / (1.0 / r0 - r0)
    a_t = -b_t
    if check_positive and c_t != 0.0:
        r = RadialGrid(r0, 10 * 32).nodes
        vals = tilde_shape(a_t, b_t, c_t, r)
        bad = np.nonzero(vals < -1e-14 * abs(c_t))[0]
        if bad.size:
            i = bad[np.argmin(vals[bad])]
            raise ProfileError(
                f"shape with c_t={c_t} is negative at r={r[i]:.6f} (value {vals[i]:.3e}); "
                f"use c_t of the opposite sign")
    return float(a_t), float(b_t)


def feasible_c_t(magnitude: float, r0: float) -> float:
    """Return +-magnitude, whichever sign keeps the shear perturbation non-negative."""
    for c in (magnitude, -magnitude):
        try:
            solve_tilde_coeffs(c, r0)
            return c
        except ProfileError:
            continue
    raise ProfileError(f"no sign of c_t={magnitude} gives a non-negative shape at r0={r0}")


@dataclass(frozen=True)
class ShearProfile:
    """u(r) = a r + b/r + c r ln r with a=a0+delta*a_t, b=b0+delta*b_t, c=delta*c_t."""

    a0: float
    b0: float
    a_t: float
    b_t: float
    c_t: float
    delta: float
    r0: float

    @classmethod
    def build(cls, bd: BoundaryData, c_t: float = 0.0, delta: float = 0.0) -> "ShearProfile":
        if not 0.0 <= delta <= 1.0:
            raise ProfileError(f"delta must lie in [0,1], got {delta}")
        U_outer, U_inner = wall_speeds(bd)
        a0, b0 = solve_base_coeffs(U_outer, U_inner, bd.r0)
        a_t, b_t = solve_tilde_coeffs(c_t, bd.r0)
        return cls(a0, b0, a_t, b_t, c_t, delta, bd.r0)

    @property
    def a(self) -> float:
        return self.a0 + self.delta * self.a_t

    @property
    def b(self) -> float:
        return self.b0 + self.delta * self.b_t

    @property
    def c(self) -> float:
        return self.delta * self.c_t

    def u(self, r):
        return eval_shear(self, r)[0]

    def pressure(self, r):
        """Radial pressure with p' = u^2/r, normalized to zero at r=1."""
        a, b, c = self.a, self.b, self.c
        r = np.asarray(r, dtype=float)
        L = np.log(r)

        def P(r, L):
            # antiderivative of (a r + b/r + c r L)^2 / r
            return (a * a * r ** 2 / 2 - b * b / (2 * r ** 2) + 2 * a * b * L
                    + 2 * a * c * r ** 2 * (L / 2 - 0.25) + b * c * L ** 2
                    + c * c * r ** 2 * (L ** 2 / 2 - L / 2 + 0.25))
        return P(r, L) - P(1.0, 0.0)

    @property
    def viscous_defect(self) -> float:
        """Constant value of r u'' + u' - u/r, equal to 2c."""
        return 2.0 * self.c


def eval_shear(p: ShearProfile, r):
    """Return (u, u', u'', vorticity) of the shear profile at ``r``."""
    r = np.asarray(r, dtype=float)
    a, b, c = p.a, p.b, p.c
    L = np.log(r)
    u = a * r + b / r + c * r * L
    du = a - b / r ** 2 + c * (L + 1.0)
    d2u = 2.0 * b / r ** 3 + c / r
    w = 2.0 * a + c + 2.0 * c * L
    return u, du, d2u, w


def ue_potential(p: ShearProfile, r):
    """U_e = (u'' + u'/r - u/r^2) / u, the coefficient in the linearized Euler operator."""
    u, du, d2u, _ = eval_shear(p, r)
    if np.any(np.asarray(u) <= 0):
        raise ProfileError("shear profile is not positive on the requested radii")
    return (d2u + du / np.asarray(r) - u / np.asarray(r) ** 2) / u
