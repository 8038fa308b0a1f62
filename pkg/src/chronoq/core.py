"""Frequency grids, phase-space grids, the test-pulse library and TF states.

All computation happens in dimensionless units: a frequency offset ``w``
(rad/s from the grid center) maps to ``xi = w / sigma_c`` and a delay ``tau``
(s) maps to ``t = tau * sigma_c``. Inner products are Riemann sums with
weight ``dxi`` on the uniform grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

__all__ = [
    "InvalidArgument",
    "NumericalFailure",
    "GridWarning",
    "FrequencyGrid",
    "PhaseSpaceGrid",
    "SpectralAmplitude",
    "SpectralCorrelation",
    "PulseSpec",
    "PULSE_KINDS",
    "make_grid",
    "make_scan",
    "to_dimensionless",
    "to_physical",
    "make_pulse",
    "normalize",
    "pure_correlation",
    "mixed_correlation",
]


class InvalidArgument(ValueError):
    """Raised when an argument violates an operation's precondition."""


class NumericalFailure(ArithmeticError):
    """Raised when NaN or overflow shows up inside an iterative computation."""


class GridWarning(UserWarning):
    """A mode or pulse does not fit comfortably inside the frequency grid."""


NORM_TOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform angular-frequency grid, symmetric about ``center_frequency``.

    Parameters
    ----------
    center_frequency : float
        Grid center in rad/s.
    spacing : float
        Bin spacing in rad/s.
    n_points : int
        Number of bins (at least 8).
    sigma_c : float
        Coherent-mode frequency scale in rad/s.
    """

    center_frequency: float
    spacing: float
    n_points: int
    sigma_c: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise InvalidArgument(f"n_points must be an integer >= 8, got {self.n_points}")
        if not self.spacing > 0:
            raise InvalidArgument(f"spacing must be positive, got {self.spacing}")
        if not self.sigma_c > 0:
            raise InvalidArgument(f"sigma_c must be positive, got {self.sigma_c}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def offsets(self) -> np.ndarray:
        """Bin offsets from the center in rad/s."""
        k = np.arange(self.n_points) - (self.n_points - 1) / 2
        return k * self.spacing

    @property
    def frequencies(self) -> np.ndarray:
        return self.center_frequency + self.offsets

    @property
    def xi(self) -> np.ndarray:
        """Dimensionless bin coordinates ``(w_k - w0) / sigma_c``."""
        return self.offsets / self.sigma_c

    @property
    def dxi(self) -> float:
        return self.spacing / self.sigma_c

    @property
    def half_span(self) -> float:
        """Largest dimensionless offset on the grid."""
        return (self.n_points - 1) / 2 * self.dxi

    def compatible(self, other: "FrequencyGrid") -> bool:
        return self == other


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    """Scan points: dimensionless spectral shifts ``xi`` and temporal shifts ``t``.

    Matrices indexed by this grid have shape ``(len(t_shifts), len(xi_shifts))``.
    """

    xi_shifts: np.ndarray
    t_shifts: np.ndarray

    def __post_init__(self):
        xi = np.array(self.xi_shifts, dtype=float).ravel()
        t = np.array(self.t_shifts, dtype=float).ravel()
        for name, arr in (("xi_shifts", xi), ("t_shifts", t)):
            if arr.size == 0:
                raise InvalidArgument(f"{name} must be non-empty")
            if np.any(np.diff(arr) <= 0):
                raise InvalidArgument(f"{name} must be strictly increasing")
            arr.setflags(write=False)
        object.__setattr__(self, "xi_shifts", xi)
        object.__setattr__(self, "t_shifts", t)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.t_shifts.size, self.xi_shifts.size)

    @property
    def size(self) -> int:
        return self.t_shifts.size * self.xi_shifts.size

    def points(self) -> np.ndarray:
        """(size, 2) array of ``(xi, t)`` in row-major (t outer, xi inner) order."""
        xi, t = np.meshgrid(self.xi_shifts, self.t_shifts)
        return np.column_stack([xi.ravel(), t.ravel()])

    def centroid(self) -> tuple[float, float]:
        return (float(self.xi_shifts.mean()), float(self.t_shifts.mean()))

    def __eq__(self, other):
        if not isinstance(other, PhaseSpaceGrid):
            return NotImplemented
        return np.array_equal(self.xi_shifts, other.xi_shifts) and np.array_equal(
            self.t_shifts, other.t_shifts
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SpectralAmplitude:
    """Complex spectral amplitude ``f(xi_in)`` sampled on ``grid``."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=complex).ravel()
        if v.size != self.grid.n_points:
            raise InvalidArgument(
                f"values has {v.size} entries, grid has {self.grid.n_points} points"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dxi))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) < NORM_TOL

    def as_vector(self) -> np.ndarray:
        """Values scaled by ``sqrt(dxi)`` so that the plain 2-norm is the grid norm."""
        return self.values * math.sqrt(self.grid.dxi)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.values)


@dataclass(frozen=True, eq=False)
class SpectralCorrelation:
    """Two-point spectral correlation ``W[j, k] = sum_n lam_n conj(f_n[j]) f_n[k]``.

    Hermitian, positive semidefinite and of unit trace under the grid
    measure (``trace(W) * dxi == 1``). Construction validates all three.
    """

    grid: FrequencyGrid
    matrix: np.ndarray
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        n = self.grid.n_points
        if m.shape != (n, n):
            raise InvalidArgument(f"matrix shape {m.shape} does not match grid ({n}, {n})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.validate:
            problems = self.invariant_violations()
            if problems:
                raise InvalidArgument("; ".join(problems))

    def invariant_violations(self) -> list[str]:
        m = self.matrix
        out = []
        scale = max(np.abs(m).max(), 1e-300)
        if np.abs(m - m.conj().T).max() > 1e-12 * scale:
            out.append("matrix is not Hermitian")
        lam = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if lam[0] < -1e-10 * max(lam[-1], 0.0):
            out.append(f"matrix is not positive semidefinite (min eigenvalue {lam[0]:.3g})")
        tr = self.trace()
        if abs(tr - 1.0) > 1e-10:
            out.append(f"trace under grid measure is {tr!r}, expected 1")
        return out

    def trace(self) -> float:
        return float(np.trace(self.matrix).real * self.grid.dxi)

    def density(self) -> np.ndarray:
        """Unit-trace density matrix in the discrete basis, ``rho = |f><f|``."""
        return self.matrix.T * self.grid.dxi

    @classmethod
    def from_density(cls, grid: FrequencyGrid, rho: np.ndarray, validate=True):
        """Inverse of :meth:`density`."""
        rho = np.asarray(rho, dtype=complex)
        rho = (rho + rho.conj().T) / 2
        return cls(grid, rho.T / grid.dxi, validate=validate)

    def eigen(self) -> tuple[np.ndarray, list[SpectralAmplitude]]:
        """Eigenvalues (descending) and grid-normalized eigenmodes."""
        lam, vecs = np.linalg.eigh(self.density())
        order = np.argsort(lam, kind="stable")[::-1]
        modes = [
            SpectralAmplitude(self.grid, vecs[:, i] / math.sqrt(self.grid.dxi))
            for i in order
        ]
        return lam[order], modes

    def purity(self) -> float:
        rho = self.density()
        return float(np.trace(rho @ rho).real)


PULSE_KINDS = ("gaussian", "hermite_gauss", "double_pulse", "phase_step", "chirped_gaussian")


@dataclass(frozen=True)
class PulseSpec:
    """Parameters of a library pulse. Lengths are in units of ``sigma_c``.

    ``chirp`` defaults to 0 for every kind except ``chirped_gaussian`` (0.5).
    ``step_width`` is the erf rise width of the phase step; 0 gives an ideal
    Heaviside step.
    """

    kind: str
    width: float = 1.0
    center: float = 0.0
    chirp: float | None = None
    order: int = 1
    separation: float = 4.0
    relative_phase: float = 0.0
    step_position: float = 0.0
    step_height: float = math.pi / 2
    step_width: float = 0.7

    def __post_init__(self):
        if self.kind not in PULSE_KINDS:
            raise InvalidArgument(
                f"unsupported pulse kind {self.kind!r}; expected one of {PULSE_KINDS}"
            )
        if not self.width > 0:
            raise InvalidArgument(f"width must be positive, got {self.width}")
        if int(self.order) != self.order or self.order < 0:
            raise InvalidArgument(f"order must be an integer >= 0, got {self.order}")
        if self.step_width < 0:
            raise InvalidArgument(f"step_width must be >= 0, got {self.step_width}")
        if self.separation < 0:
            raise InvalidArgument(f"separation must be >= 0, got {self.separation}")

    @property
    def effective_chirp(self) -> float:
        if self.chirp is not None:
            return float(self.chirp)
        return 0.5 if self.kind == "chirped_gaussian" else 0.0

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for name in self.__dataclass_fields__:
            if name != "kind":
                out[name] = getattr(self, name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgument(f"unknown pulse parameter(s): {sorted(unknown)}")
        if "kind" not in d:
            raise InvalidArgument("pulse spec is missing 'kind'")
        return cls(**d)


def make_grid(center, span_in_sigma, n_points, sigma_c) -> FrequencyGrid:
    """Uniform grid covering ``center +- span_in_sigma * sigma_c / 2``.

    >>> make_grid(0.0, 8, 9, 1.0).offsets
    array([-4., -3., -2., -1.,  0.,  1.,  2.,  3.,  4.])
    """
    if not sigma_c > 0:
        raise InvalidArgument(f"sigma_c must be positive, got {sigma_c}")
    if not span_in_sigma > 0:
        raise InvalidArgument(f"span must be positive, got {span_in_sigma}")
    if span_in_sigma < 6:
        raise InvalidArgument(
            f"span_in_sigma={span_in_sigma} is too small to contain the mode support (need >= 6)"
        )
    if int(n_points) != n_points or n_points < 8:
        raise InvalidArgument(f"n_points must be an integer >= 8, got {n_points}")
    spacing = span_in_sigma * sigma_c / (n_points - 1)
    return FrequencyGrid(float(center), float(spacing), int(n_points), float(sigma_c))


def make_scan(xi_range=(-4.0, 4.0), n_xi=41, t_range=(-4.0, 4.0), n_t=41) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(np.linspace(*xi_range, n_xi), np.linspace(*t_range, n_t))


def to_dimensionless(omega, tau, grid: FrequencyGrid):
    return omega / grid.sigma_c, tau * grid.sigma_c


def to_physical(xi, t, grid: FrequencyGrid):
    return xi * grid.sigma_c, t / grid.sigma_c


def _hermite(n: int, x: np.ndarray) -> np.ndarray:
    h_prev, h = np.ones_like(x), 2 * x
    if n == 0:
        return h_prev
    for m in range(1, n):
        h_prev, h = h, 2 * x * h - 2 * m * h_prev
    return h


def make_pulse(spec: PulseSpec, grid: FrequencyGrid) -> SpectralAmplitude:
    """Sample a library pulse on ``grid`` and normalize it."""
    w = spec.width
    x = grid.xi - spec.center
    env = np.exp(-(x**2) / (2 * w**2))
    support = abs(spec.center) + 4 * w
    if support > grid.half_span:
        warnings.warn(
            f"pulse support {support:.3g} exceeds grid half-span {grid.half_span:.3g}",
            GridWarning,
            stacklevel=2,
        )

    if spec.kind in ("gaussian", "chirped_gaussian"):
        values = env.astype(complex)
    elif spec.kind == "hermite_gauss":
        values = _hermite(int(spec.order), x / w) * env
    elif spec.kind == "double_pulse":
        half = spec.separation / 2
        values = env * (np.exp(1j * x * half) + np.exp(1j * spec.relative_phase) * np.exp(-1j * x * half))
    elif spec.kind == "phase_step":
        y = grid.xi - spec.step_position
        if spec.step_width == 0:
            step = np.heaviside(y, 0.5)
        else:
            step = 0.5 * (1 + erf(y / spec.step_width))
        values = env * np.exp(1j * spec.step_height * step)
    else:  # pragma: no cover - guarded by PulseSpec
        raise InvalidArgument(f"unsupported pulse kind {spec.kind!r}")

    if spec.effective_chirp:
        values = values * np.exp(1j * spec.effective_chirp * x**2)
    return normalize(SpectralAmplitude(grid, values))


def normalize(f: SpectralAmplitude) -> SpectralAmplitude:
    n = f.norm()
    if not n > 0 or not np.isfinite(n):
        raise InvalidArgument("cannot normalize a zero (or non-finite) spectral amplitude")
    if n == 1.0:
        return f
    return SpectralAmplitude(f.grid, f.values / n)


def pure_correlation(f: SpectralAmplitude) -> SpectralCorrelation:
    """Rank-1 correlation ``W[j, k] = conj(f[j]) f[k]``."""
    if not f.is_normalized:
        raise InvalidArgument(f"spectral amplitude is not normalized (norm {f.norm():.6g})")
    v = f.values
    return SpectralCorrelation(f.grid, np.outer(v.conj(), v) / f.norm() ** 2)


def mixed_correlation(weights, modes) -> SpectralCorrelation:
    """Incoherent mixture ``sum_n weights[n] * pure_correlation(modes[n])``.

    Weights are renormalized to sum to one; modes need not be orthogonal.
    """
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or len(weights) != len(modes) or len(modes) == 0:
        raise InvalidArgument("need one weight per mode")
    if np.any(weights < 0) or weights.sum() <= 0:
        raise InvalidArgument("weights must be non-negative and not all zero")
    grid = modes[0].grid
    m = np.zeros((grid.n_points, grid.n_points), dtype=complex)
    for w, f in zip(weights / weights.sum(), modes):
        if f.grid != grid:
            raise InvalidArgument("all modes must share one grid")
        m += w * pure_correlation(f).matrix
    return SpectralCorrelation(grid, m)
