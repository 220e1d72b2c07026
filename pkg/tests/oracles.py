"""Hand-derived closed forms used as independent references."""
import numpy as np


def euler_cauchy_mode(n: int, r0: float, phi_outer: complex, phi_inner: complex, r):
    """A r^n + B r^-n through phi(1) and phi(r0): the U_e = 0 mode solution of the Euler operator."""
    M = np.array([[1.0, 1.0], [r0 ** n, r0 ** -n]])
    A, B = np.linalg.solve(M, np.array([phi_outer, phi_inner], dtype=complex))
    return A * r ** n + B * r ** (-n)


def apply_L_single_mode(mu: float, u: float, psi):
    """Phi for Lambda = e^{i theta} e^{mu psi} on psi <= 0 with diffusivity u.

    Solves i Phi - u Phi'' = i e^{mu psi}, Phi(0) = 0, decay: Phi = c (e^{mu psi} - e^{s psi}),
    c = i / (i - u mu^2), s the root of s^2 = i/u with positive real part.
    """
    c = 1j / (1j - u * mu * mu)
    s = np.sqrt(1j / u)
    if s.real < 0:
        s = -s
    return c * (np.exp(mu * psi) - np.exp(s * psi))


def heat_seed_cos(theta, psi, amplitude: float, kappa_u: float):
    """amplitude * Re[e^{i theta} e^{alpha psi}], alpha = (1+i)/sqrt(2 kappa_u), for psi <= 0.

    Solves Q_theta = kappa_u Q_psipsi with Q(theta, 0) = amplitude cos(theta).
    """
    alpha = (1 + 1j) / np.sqrt(2.0 * kappa_u)
    return amplitude * np.real(np.exp(1j * theta)[:, None] * np.exp(alpha * psi)[None, :])


def taylor_couette(a: float, b: float, r):
    """u = a r + b/r and the pressure with p' = u^2/r, zero at r = 1."""
    u = a * r + b / r

    def P(x):
        return a * a * x ** 2 / 2 - b * b / (2 * x ** 2) + 2 * a * b * np.log(x)
    return u, P(r) - P(1.0)


def h_of_sin(s):
    """theta-antiderivative of sin(theta) s(r) with zero mean: -cos(theta) s(r)."""
    return lambda theta: -np.cos(theta)[:, None] * s[None, :]
