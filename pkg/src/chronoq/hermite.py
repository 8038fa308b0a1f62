"""Hermite-Gaussian expansion of the chronocyclic Q-function.

A coherent mode centered at ``xi`` with linear phase ``-xi_in * t`` is a
displaced Gaussian, so its overlap with any spectrum can be written in the
Hermite-Gaussian (Fock-like) basis ``phi_m`` exactly as a coherent state is
written in photon-number states:

    Q(xi, t) ~ exp(-(xi**2 + t**2) / 2) * |sum_m c_m beta**m|**2,
    beta = (xi + i t) / sqrt(2),   c_m = <phi_m|f> / sqrt(m!).

Evaluating it is an independent route to the Q-function that shares nothing
with the direct projection code beyond the grid quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InvalidArgument, PhaseSpaceGrid, SpectralAmplitude
from .forward import QFunction

__all__ = [
    "HermiteExpansion",
    "MAX_ORDER",
    "hermite_function",
    "hermite_over_factorial",
    "hg_functions",
    "expand_state",
    "q_via_expansion",
]

MAX_ORDER = 60


def _check_order(m):
    if int(m) != m or m < 0:
        raise InvalidArgument(f"order must be a non-negative integer, got {m}")
    if m > MAX_ORDER:
        raise InvalidArgument(f"order {m} exceeds {MAX_ORDER}")
    return int(m)


def hermite_function(m: int, x) -> np.ndarray:
    """Physicists' Hermite polynomial ``H_m(x)`` by three-term recurrence."""
    m = _check_order(m)
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), 2 * x
    if m == 0:
        return h_prev
    for k in range(1, m):
        h_prev, h = h, 2 * x * h - 2 * k * h_prev
    return h


def hermite_over_factorial(order: int, x) -> np.ndarray:
    """Rows ``H_m(x) / m!`` for ``m = 0..order``.

    Uses ``h_{m+1} = (2 x h_m - 2 h_{m-1}) / (m + 1)`` so nothing overflows.
    """
    order = _check_order(order)
    x = np.asarray(x, dtype=float)
    out = np.empty((order + 1,) + x.shape)
    out[0] = 1.0
    if order >= 1:
        out[1] = 2 * x
    for m in range(1, order):
        out[m + 1] = (2 * x * out[m] - 2 * out[m - 1]) / (m + 1)
    return out


def hg_functions(order: int, x) -> np.ndarray:
    """Orthonormal Hermite-Gaussian functions ``phi_m(x)``, ``m = 0..order``.

    ``phi_m = (2**m m! sqrt(pi))**-0.5 H_m(x) exp(-x**2/2)``, evaluated by the
    normalized recurrence so large orders neither overflow nor underflow.
    """
    order = _check_order(order)
    x = np.asarray(x, dtype=float)
    out = np.empty((order + 1,) + x.shape)
    out[0] = math.pi**-0.25 * np.exp(-(x**2) / 2)
    if order >= 1:
        out[1] = math.sqrt(2) * x * out[0]
    for m in range(1, order):
        out[m + 1] = math.sqrt(2 / (m + 1)) * x * out[m] - math.sqrt(m / (m + 1)) * out[m - 1]
    return out


@dataclass(frozen=True, eq=False)
class HermiteExpansion:
    """Coefficients ``c_m = <phi_m|f> / sqrt(m!)``, ``m = 0..M``."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=complex).ravel()
        if c.size == 0:
            raise InvalidArgument("expansion needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    @property
    def order(self) -> int:
        return self.coefficients.size - 1

    @property
    def fock_amplitudes(self) -> np.ndarray:
        """``<phi_m|f>``; their squared moduli are the HG mode weights."""
        m = np.arange(self.coefficients.size)
        return self.coefficients * np.exp(0.5 * np.array([math.lgamma(k + 1) for k in m]))

    @staticmethod
    def beta(xi, t):
        return (np.asarray(xi) + 1j * np.asarray(t)) / math.sqrt(2)

    def amplitude(self, xi, t):
        """``sum_m c_m beta**m``; the projection amplitude up to a Gaussian factor and a phase."""
        # numpy polyval takes coefficients lowest order first
        return np.polynomial.polynomial.polyval(self.beta(xi, t), self.coefficients)

    def truncated(self, order: int) -> "HermiteExpansion":
        return HermiteExpansion(self.coefficients[: order + 1])


def expand_state(f: SpectralAmplitude, order: int) -> HermiteExpansion:
    order = _check_order(order)
    phi = hg_functions(order, f.grid.xi)
    a = phi @ f.values * f.grid.dxi
    inv_sqrt_fact = np.exp(-0.5 * np.array([math.lgamma(m + 1) for m in range(order + 1)]))
    return HermiteExpansion(a * inv_sqrt_fact)


def q_via_expansion(expansion: HermiteExpansion, ps_grid: PhaseSpaceGrid) -> QFunction:
    xi, t = np.meshgrid(ps_grid.xi_shifts, ps_grid.t_shifts)
    q = np.exp(-(xi**2 + t**2) / 2) * np.abs(expansion.amplitude(xi, t)) ** 2
    peak = q.max()
    if peak > 0:
        q = q / peak
    return QFunction(ps_grid, q)
