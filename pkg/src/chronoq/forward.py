"""Coherent-mode projections, chronocyclic Q-functions and photon counting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._parallel import chunked_map
from .core import (
    FrequencyGrid,
    GridWarning,
    InvalidArgument,
    PhaseSpaceGrid,
    SpectralAmplitude,
    SpectralCorrelation,
)

__all__ = [
    "QpgModel",
    "QFunction",
    "CountMap",
    "DEFAULT_PM_WIDTH",
    "coherent_mode",
    "coherent_mode_vectors",
    "project",
    "q_function",
    "simulate_counts",
    "subtract_background",
]

# 60 GHz phase-matching width, as angular frequency.
DEFAULT_PM_WIDTH = 2 * math.pi * 0.06e12

# Modes closer than this (in sigma_c) to the grid edge are flagged.
MODE_MARGIN = 3.0


@dataclass(frozen=True)
class QpgModel:
    """Projection device. ``ideal=False`` applies a Gaussian spectral envelope
    of rms width ``pm_width`` (rad/s) to every measurement mode."""

    ideal: bool = True
    pm_width: float | None = None

    def __post_init__(self):
        if not self.ideal:
            if self.pm_width is None:
                object.__setattr__(self, "pm_width", DEFAULT_PM_WIDTH)
            elif not self.pm_width > 0:
                raise InvalidArgument(f"pm_width must be positive, got {self.pm_width}")


@dataclass(frozen=True, eq=False)
class QFunction:
    """Non-negative Q values, shape ``ps_grid.shape`` (t rows, xi columns).

    ``n_clamped`` records how many points were clamped to zero during
    background subtraction.
    """

    ps_grid: PhaseSpaceGrid
    values: np.ndarray
    n_clamped: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.ps_grid.shape:
            raise InvalidArgument(f"values shape {v.shape} != scan shape {self.ps_grid.shape}")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidArgument("Q values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def argmax(self) -> tuple[float, float]:
        """``(xi, t)`` of the maximum."""
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.ps_grid.xi_shifts[j]), float(self.ps_grid.t_shifts[i])


@dataclass(frozen=True, eq=False)
class CountMap:
    ps_grid: PhaseSpaceGrid
    counts: np.ndarray
    background: np.ndarray
    scale: float
    seed: int

    def __post_init__(self):
        c = np.array(self.counts)
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.asarray(c) == np.round(c)):
                raise InvalidArgument("counts must be integers")
        c = c.astype(np.int64)
        b = np.array(self.background, dtype=float)
        for name, arr in (("counts", c), ("background", b)):
            if arr.shape != self.ps_grid.shape:
                raise InvalidArgument(f"{name} shape {arr.shape} != scan shape {self.ps_grid.shape}")
            if np.any(arr < 0):
                raise InvalidArgument(f"{name} must be non-negative")
            arr.setflags(write=False)
        if not self.scale > 0:
            raise InvalidArgument(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "background", b)

    def effective_counts(self) -> np.ndarray:
        """Background-subtracted counts, clamped at zero."""
        return np.maximum(self.counts - self.background, 0.0)

    def __eq__(self, other):
        if not isinstance(other, CountMap):
            return NotImplemented
        return (
            self.ps_grid == other.ps_grid
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.background, other.background)
            and self.scale == other.scale
            and self.seed == other.seed
        )

    __hash__ = None


def _pm_envelope(grid: FrequencyGrid, qpg: QpgModel | None) -> np.ndarray | None:
    if qpg is None or qpg.ideal:
        return None
    w = qpg.pm_width / grid.sigma_c
    return np.exp(-(grid.xi**2) / (2 * w**2))


def coherent_mode_vectors(grid: FrequencyGrid, points, qpg: QpgModel | None = None) -> np.ndarray:
    """Unit-2-norm coherent-mode vectors, one row per ``(xi, t)`` in ``points``.

    Rows are grid values times ``sqrt(dxi)``; divide by ``sqrt(dxi)`` to get
    grid-normalized amplitudes.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    xi, t = points[:, :1], points[:, 1:2]
    x = grid.xi[None, :]
    e = np.exp(-((x - xi) ** 2) / 2) * np.exp(-1j * x * t)
    env = _pm_envelope(grid, qpg)
    if env is not None:
        e = e * env[None, :]
    norms = np.linalg.norm(e, axis=1)
    if np.any(norms == 0):
        raise InvalidArgument("coherent mode vanishes on this grid")
    return e / norms[:, None]


def coherent_mode(
    grid: FrequencyGrid, xi: float, t: float, qpg: QpgModel | None = None
) -> SpectralAmplitude:
    """Normalized TF coherent mode centered at spectral shift ``xi`` with
    linear spectral phase ``-xi_in * t``."""
    if abs(xi) > grid.half_span - MODE_MARGIN:
        warnings.warn(
            f"coherent mode at xi={xi:g} is within {MODE_MARGIN:g} of the grid edge "
            f"(half-span {grid.half_span:.3g}); it will be clipped",
            GridWarning,
            stacklevel=2,
        )
    v = coherent_mode_vectors(grid, [[xi, t]], qpg)[0]
    return SpectralAmplitude(grid, v / math.sqrt(grid.dxi))


def project(f: SpectralAmplitude, mode: SpectralAmplitude) -> complex:
    """Overlap ``sum_k f_k conj(mode_k) dxi``; the QPG count rate is ``|.|**2``."""
    if f.grid != mode.grid:
        raise InvalidArgument("spectral amplitude and mode live on different grids")
    return complex(np.sum(f.values * mode.values.conj()) * f.grid.dxi)


def _check_scan_fits(grid: FrequencyGrid, ps_grid: PhaseSpaceGrid):
    reach = np.abs(ps_grid.xi_shifts).max()
    if reach > grid.half_span - MODE_MARGIN:
        warnings.warn(
            f"scan reaches xi={reach:g} but grid half-span is {grid.half_span:.3g}; "
            "edge modes are clipped",
            GridWarning,
            stacklevel=3,
        )


def q_function(
    state: SpectralAmplitude | SpectralCorrelation,
    ps_grid: PhaseSpaceGrid,
    qpg: QpgModel | None = None,
    workers: int = 1,
) -> QFunction:
    """Chronocyclic Q-function of a pure or mixed state, scaled to max 1."""
    grid = state.grid
    _check_scan_fits(grid, ps_grid)
    points = ps_grid.points()
    if isinstance(state, SpectralAmplitude):
        if not state.is_normalized:
            raise InvalidArgument("spectral amplitude must be normalized")
        v = state.as_vector()

        def chunk(s):
            e = coherent_mode_vectors(grid, points[s], qpg)
            return np.abs(e.conj() @ v) ** 2

    elif isinstance(state, SpectralCorrelation):
        rho = state.density()

        def chunk(s):
            e = coherent_mode_vectors(grid, points[s], qpg)
            return np.einsum("kj,kj->k", e.conj() @ rho, e).real

    else:
        raise InvalidArgument(f"unsupported state type {type(state).__name__}")

    q = np.concatenate(chunked_map(chunk, len(points), workers))
    q = np.maximum(q, 0.0)
    peak = q.max()
    if peak > 0:
        q = q / peak
    return QFunction(ps_grid, q.reshape(ps_grid.shape))


def simulate_counts(q: QFunction, scale: float, background_level: float = 0.0, seed: int = 0) -> CountMap:
    """Poisson photon counts with mean ``scale * q + background_level``.

    Every scan point draws from its own stream seeded by ``(seed, index)``,
    so the map does not depend on evaluation order.
    """
    if not scale > 0:
        raise InvalidArgument(f"scale must be positive, got {scale}")
    if background_level < 0:
        raise InvalidArgument(f"background_level must be >= 0, got {background_level}")
    if int(seed) != seed or seed < 0:
        raise InvalidArgument(f"seed must be a non-negative integer, got {seed}")
    mean = (scale * q.values + background_level).ravel()
    counts = np.empty(mean.size, dtype=np.int64)
    for k, lam in enumerate(mean):
        rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(k,)))
        counts[k] = rng.poisson(lam)
    background = np.full(q.ps_grid.shape, float(background_level))
    return CountMap(q.ps_grid, counts.reshape(q.ps_grid.shape), background, float(scale), int(seed))


def subtract_background(counts: CountMap) -> QFunction:
    """``max(counts - background, 0)`` scaled to max 1; clamped points are counted."""
    diff = counts.counts - counts.background
    n_clamped = int(np.count_nonzero(diff < 0))
    values = np.maximum(diff, 0.0)
    peak = values.max()
    if peak > 0:
        values = values / peak
    return QFunction(counts.ps_grid, values, n_clamped=n_clamped)
