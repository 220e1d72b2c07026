"""Discretization primitives: Fourier in theta, Chebyshev in r, stretched layer grids.

Fields are plain ``numpy`` arrays indexed ``[theta_node, radial_node]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as C


class DecayError(ValueError):
    """Raised when a layer field does not decay at the far end of its grid."""


def cheb_nodes(n: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto points on [-1, 1] in increasing order."""
    return -np.cos(np.pi * np.arange(n) / (n - 1))


def cheb_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Collocation derivative matrix on the increasing Gauss-Lobatto points ``x``."""
    n = len(x)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return D


def cheb_barycentric_weights(n: int) -> np.ndarray:
    w = (-1.0) ** np.arange(n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def barycentric_matrix(nodes: np.ndarray, weights: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Matrix mapping nodal values to the interpolant evaluated at ``targets``."""
    targets = np.asarray(targets, dtype=float)
    diff = targets[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    M = weights[None, :] / diff
    M /= M.sum(axis=1, keepdims=True)
    rows = np.nonzero(exact.any(axis=1))[0]
    for i in rows:
        M[i] = exact[i].astype(float)
    return M


def cheb_integration_matrix(n: int) -> np.ndarray:
    """Matrix mapping nodal values on [-1,1] to the antiderivative vanishing at x=-1."""
    x = cheb_nodes(n)
    to_coef = np.linalg.inv(C.chebvander(x, n - 1))
    P = np.stack([C.chebint(np.eye(n)[j], lbnd=-1.0) for j in range(n)], axis=1)
    return C.chebvander(x, n) @ P @ to_coef


@dataclass(frozen=True)
class ThetaGrid:
    n: int

    def __post_init__(self):
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"ThetaGrid needs a positive even size, got {self.n}")

    @cached_property
    def nodes(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n) / self.n

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n)

    def diff_matrix(self, order: int = 1) -> np.ndarray:
        return d_theta(np.eye(self.n), order)


@dataclass(frozen=True)
class RadialGrid:
    r0: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.r0 < 1.0:
            raise ValueError(f"r0 must lie in (0,1), got {self.r0}")
        if self.n < 4:
            raise ValueError("RadialGrid needs at least 4 points")

    @cached_property
    def x(self) -> np.ndarray:
        return cheb_nodes(self.n)

    @cached_property
    def nodes(self) -> np.ndarray:
        r = self.r0 + 0.5 * (1.0 - self.r0) * (self.x + 1.0)
        r[0], r[-1] = self.r0, 1.0
        return r

    @property
    def scale(self) -> float:
        return 2.0 / (1.0 - self.r0)

    @cached_property
    def D(self) -> np.ndarray:
        return cheb_diff_matrix(self.x) * self.scale

    @cached_property
    def D2(self) -> np.ndarray:
        return self.D @ self.D

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Clenshaw-Curtis weights for the integral over [r0, 1]."""
        return cheb_integration_matrix(self.n)[-1] / self.scale

    @cached_property
    def integral_matrix(self) -> np.ndarray:
        """Antiderivative from r0 at every node."""
        return cheb_integration_matrix(self.n) / self.scale

    def interp_matrix(self, r: np.ndarray) -> np.ndarray:
        xt = (np.asarray(r) - self.r0) * self.scale - 1.0
        return barycentric_matrix(self.x, cheb_barycentric_weights(self.n), xt)

    def wall_spacing(self) -> float:
        return self.nodes[1] - self.nodes[0]


@dataclass(frozen=True)
class LayerGrid:
    """Truncated half-line ``[-L, 0]`` (outer side) or ``[0, L]`` (inner side).

    Nodes come from Gauss-Lobatto points through the algebraic map
    ``s = -a (1 - x) / (b + x)``, which keeps half of the nodes within
    ``half_depth`` of the wall.
    """

    side: str
    L: float
    n: int
    half_depth: float = 0.0

    def __post_init__(self):
        if self.side not in ("outer", "inner"):
            raise ValueError(f"side must be 'outer' or 'inner', got {self.side!r}")
        if self.L <= 0 or self.n < 4:
            raise ValueError("LayerGrid needs L > 0 and n >= 4")

    @property
    def sign(self) -> float:
        """+1 when the far end is at -L (outer side), -1 otherwise."""
        return 1.0 if self.side == "outer" else -1.0

    @cached_property
    def _b(self) -> float:
        h = self.half_depth or self.L / 8.0
        h = min(h, 0.499 * self.L)
        return 1.0 / (1.0 - 2.0 * h / self.L)

    def _map(self, x):
        b = self._b
        a = 0.5 * self.L * (b - 1.0)
        return -a * (1.0 - x) / (b + x)

    def _inverse(self, s):
        b = self._b
        a = 0.5 * self.L * (b - 1.0)
        return (a + b * s) / (a - s)

    def _dsdx(self, x):
        b = self._b
        a = 0.5 * self.L * (b - 1.0)
        return a * (1.0 + b) / (b + x) ** 2

    @cached_property
    def x(self) -> np.ndarray:
        return cheb_nodes(self.n)

    @cached_property
    def nodes(self) -> np.ndarray:
        """Layer coordinate, ordered from the far end to the wall (outer) or wall to far end (inner)."""
        s = self._map(self.x)
        s[0], s[-1] = -self.L, 0.0
        return s * self.sign if self.side == "outer" else 0.0 - s[::-1]

    @property
    def wall_index(self) -> int:
        return self.n - 1 if self.side == "outer" else 0

    @property
    def far_index(self) -> int:
        return 0 if self.side == "outer" else self.n - 1

    @cached_property
    def D(self) -> np.ndarray:
        Dx = cheb_diff_matrix(self.x)
        Ds = Dx / self._dsdx(self.x)[:, None]
        if self.side == "inner":
            # n = -s with reversed ordering: d/dn = -d/ds, flip both axes
            Ds = -Ds[::-1, ::-1]
        return Ds

    @cached_property
    def D2(self) -> np.ndarray:
        return self.D @ self.D

    @cached_property
    def far_integral(self) -> np.ndarray:
        """Matrix of the antiderivative in the layer variable vanishing at the far end."""
        I = cheb_integration_matrix(self.n) * self._dsdx(self.x)[None, :]
        if self.side == "inner":
            # int_{far}^{n} f dn' with n=-s: equals -(I_s f)(s) reflected
            I = -I[::-1, ::-1]
        return I

    @cached_property
    def quad_weights(self) -> np.ndarray:
        """Weights for the integral over the whole truncated layer (positive)."""
        w = cheb_integration_matrix(self.n)[-1] * self._dsdx(self.x)
        return w if self.side == "outer" else w[::-1].copy()

    @cached_property
    def wall_integral(self) -> np.ndarray:
        """Matrix of the antiderivative vanishing at the wall node."""
        I = self.far_integral
        return I - I[self.wall_index][None, :]

    def interp_matrix(self, s: np.ndarray) -> np.ndarray:
        """Interpolation from the nodes to layer coordinates ``s`` (must lie in the grid)."""
        s = np.asarray(s, dtype=float)
        raw = s if self.side == "outer" else -s
        xt = self._inverse(raw)
        M = barycentric_matrix(self.x, cheb_barycentric_weights(self.n), xt)
        return M if self.side == "outer" else M[:, ::-1]


def _check_order(order: int):
    if order <= 0:
        raise ValueError(f"derivative order must be positive, got {order}")


def d_theta(values: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative along axis 0 (the periodic direction)."""
    _check_order(order)
    values = np.asarray(values)
    n = values.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    mult = (1j * k) ** order
    if order % 2:
        mult[n // 2] = 0.0
    shape = (n,) + (1,) * (values.ndim - 1)
    spec = np.fft.fft(values, axis=0) * mult.reshape(shape)
    out = np.fft.ifft(spec, axis=0)
    return out.real if np.isrealobj(values) else out


def d_radial(values: np.ndarray, grid, order: int = 1) -> np.ndarray:
    """Collocation derivative along axis 1 for a RadialGrid or LayerGrid."""
    _check_order(order)
    D = grid.D2 if order == 2 else np.linalg.matrix_power(grid.D, order)
    return np.asarray(values) @ D.T


def mean_theta(values: np.ndarray) -> np.ndarray:
    return np.asarray(values).mean(axis=0)


def cumulative_layer_integral(values: np.ndarray, grid: LayerGrid, from_far_end: bool = True,
                              decay_tol: float = 1e-6, floor: float = 1e-12) -> np.ndarray:
    """Antiderivative along the layer variable.

    With ``from_far_end`` the result vanishes at the truncation depth; the
    input must then have decayed there relative to its maximum (values below
    ``floor`` count as decayed, so roundoff-sized fields pass).
    """
    values = np.asarray(values)
    if from_far_end:
        scale = np.max(np.abs(values))
        far = np.max(np.abs(values[..., grid.far_index]))
        if far > max(decay_tol * scale, floor):
            raise DecayError(f"field has not decayed at the far end ({far:.3e} vs max {scale:.3e})")
        M = grid.far_integral
    else:
        M = grid.wall_integral
    return values @ M.T


def fourier_interp_matrix(n_from: int, theta: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation from an equispaced grid of size ``n_from`` to ``theta``."""
    k = np.fft.fftfreq(n_from, d=1.0 / n_from)
    F = np.fft.fft(np.eye(n_from), axis=0) / n_from
    E = np.exp(1j * np.outer(theta, k))
    E[:, n_from // 2] = np.cos(n_from // 2 * theta)
    return (E @ F).real


def resample_theta(values: np.ndarray, n_to: int) -> np.ndarray:
    """Change the number of angular nodes by zero padding / truncation of the spectrum."""
    values = np.asarray(values)
    n = values.shape[0]
    if n == n_to:
        return values.copy()
    theta = 2.0 * np.pi * np.arange(n_to) / n_to
    return np.tensordot(fourier_interp_matrix(n, theta), values, axes=(1, 0))


def project_real(spec: np.ndarray) -> np.ndarray:
    """Force conjugate symmetry of a full-length FFT spectrum along axis 0."""
    n = spec.shape[0]
    idx = (-np.arange(n)) % n
    return 0.5 * (spec + np.conj(spec[idx]))
