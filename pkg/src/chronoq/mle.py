"""Maximum-likelihood reconstruction of the spectral correlation matrix.

The measurement operators are rank-1 projectors onto coherent modes. They do
not sum to the identity, so the iteration runs on the whitened variable

    sigma = G^{1/2} rho G^{1/2} / tr(G rho),    G = sum_k |e_k><e_k|,

restricted to the eigenspace of ``G`` the scan actually probes. There the
whitened projectors ``G^{-1/2} |e_k><e_k| G^{-1/2}`` resolve the identity and
``p_k = <e_k|rho|e_k> / sum_j <e_j|rho|e_j>`` becomes an ordinary Born
probability, so the standard diluted R-rho-R update applies:

    sigma <- N[(1 + eps (R - 1)) sigma (1 + eps (R - 1))],
    R = sum_k (f_k / p_k) G^{-1/2} |e_k><e_k| G^{-1/2}.

``eps`` is halved within an iteration whenever a step would lower the
likelihood, which makes the likelihood sequence non-decreasing.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._parallel import chunked_map, tree_sum
from .core import (
    FrequencyGrid,
    InvalidArgument,
    NumericalFailure,
    PhaseSpaceGrid,
    SpectralAmplitude,
    SpectralCorrelation,
)
from .forward import CountMap, QpgModel, coherent_mode_vectors

__all__ = [
    "Povm",
    "ReconstructionResult",
    "IncompleteScanWarning",
    "build_povm",
    "log_likelihood",
    "reconstruct",
    "extract_dominant_mode",
    "fix_global_phase",
]

log = logging.getLogger(__name__)

P_FLOOR = 1e-300
G_FLOOR = 1e-12
MAX_HALVINGS = 40
TIE_TOL = 1e-9
MAX_STEP = 64.0


class IncompleteScanWarning(UserWarning):
    """Fewer scan points than twice the grid size."""


@dataclass(frozen=True, eq=False)
class Povm:
    """Coherent-mode measurement operators for one scan.

    Attributes
    ----------
    elements : ndarray, shape (K, n)
        Unit-2-norm mode vectors (grid values times ``sqrt(dxi)``).
    index : ndarray, shape (K,)
        Flat position of each element in the ``ps_grid.shape`` count matrix.
    completeness : ndarray, shape (n, n)
        ``G = sum_k |e_k><e_k|``.
    support_tol : float
        Eigenvectors of ``G`` with eigenvalue below ``support_tol * max`` are
        treated as unmeasured and excluded from the reconstruction.
    """

    grid: FrequencyGrid
    ps_grid: PhaseSpaceGrid
    elements: np.ndarray
    index: np.ndarray
    completeness: np.ndarray
    qpg: QpgModel | None = None
    support_tol: float = 1e-5

    @property
    def size(self) -> int:
        return self.elements.shape[0]

    def points(self) -> np.ndarray:
        return self.ps_grid.points()[self.index]

    @cached_property
    def _eig(self):
        g, u = np.linalg.eigh(self.completeness)
        return g, u

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Significant eigenvectors (columns) and eigenvalues of ``G``."""
        g, u = self._eig
        keep = g > self.support_tol * g[-1]
        return u[:, keep], g[keep]

    def inverse_sqrt_completeness(self) -> np.ndarray:
        """``G^{-1/2}`` with eigenvalues floored at ``1e-12 * max``."""
        g, u = self._eig
        g = np.maximum(g, G_FLOOR * g[-1])
        return (u / np.sqrt(g)) @ u.conj().T

    def permuted(self, order) -> "Povm":
        order = np.asarray(order)
        return Povm(
            self.grid,
            self.ps_grid,
            self.elements[order],
            self.index[order],
            self.completeness,
            self.qpg,
            self.support_tol,
        )


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    correlation: SpectralCorrelation
    eigenvalues: np.ndarray
    eigenmodes: list[SpectralAmplitude]
    iterations: int
    final_log_likelihood: float
    converged: bool
    history: np.ndarray = field(repr=False)
    ps_grid: PhaseSpaceGrid | None = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict)


def build_povm(
    grid: FrequencyGrid,
    ps_grid: PhaseSpaceGrid,
    qpg: QpgModel | None = None,
    support_tol: float = 1e-5,
) -> Povm:
    if ps_grid.size < 2 * grid.n_points:
        warnings.warn(
            f"{ps_grid.size} scan points for {grid.n_points} frequency bins; "
            "the scan is likely informationally incomplete",
            IncompleteScanWarning,
            stacklevel=2,
        )
    e = coherent_mode_vectors(grid, ps_grid.points(), qpg)
    g = tree_sum(chunked_map(lambda s: e[s].T @ e[s].conj(), e.shape[0]))
    g = (g + g.conj().T) / 2
    return Povm(grid, ps_grid, e, np.arange(ps_grid.size), g, qpg, support_tol)


def _probabilities(rho: np.ndarray, elements: np.ndarray) -> np.ndarray:
    raw = np.einsum("kj,kj->k", elements.conj() @ rho, elements).real
    return raw / raw.sum()


def log_likelihood(W: SpectralCorrelation, data: CountMap, povm: Povm) -> float:
    """``sum_k n_k log p_k`` with background-subtracted counts ``n_k``."""
    if W.grid != povm.grid:
        raise InvalidArgument("correlation and POVM live on different grids")
    if data.ps_grid != povm.ps_grid:
        raise InvalidArgument("count map and POVM use different scans")
    n = data.effective_counts().ravel()[povm.index]
    if not n.sum() > 0:
        raise InvalidArgument("all counts are zero after background subtraction")
    p = np.maximum(_probabilities(W.density(), povm.elements), P_FLOOR)
    nz = n > 0
    return float(np.sum(n[nz] * np.log(p[nz])))


def fix_global_phase(f: SpectralAmplitude) -> SpectralAmplitude:
    """Rotate ``f`` so its largest-magnitude sample is real and positive."""
    v = np.asarray(f.values)
    mag = np.abs(v)
    if not mag.max() > 0:
        raise InvalidArgument("cannot fix the phase of a zero spectral amplitude")
    i = int(np.argmax(mag))
    out = v * (v[i].conjugate() / mag[i])
    out[i] = mag[i]
    return SpectralAmplitude(f.grid, out)


def reconstruct(
    data: CountMap,
    povm: Povm,
    max_iters: int = 2000,
    tol: float = 1e-10,
    dilution: float = 1.0,
    workers: int = 1,
    callback=None,
) -> ReconstructionResult:
    """Iterative MLE of the correlation matrix from a count map.

    Parameters
    ----------
    data : CountMap
        Raw counts; ``max(counts - background, 0)`` are used as frequencies.
    povm : Povm
        Measurement operators, e.g. from :func:`build_povm`.
    max_iters, tol : int, float
        Stop after ``max_iters`` updates or once the relative gain in
        log-likelihood drops below ``tol``.
    dilution : float
        Base step ``eps`` of each update; 1 is the undiluted R-rho-R map.
        A step that lowers the likelihood is halved until it does not; a
        full step that succeeds is doubled (up to ``MAX_STEP``) while the
        likelihood keeps rising. The history is therefore non-decreasing.
    workers : int
        Threads for the per-iteration accumulation. Does not change results.
    callback : callable, optional
        Called as ``callback(iteration, rho)`` with the unit-trace density
        matrix of each iterate.
    """
    if data.ps_grid != povm.ps_grid:
        raise InvalidArgument("count map and POVM use different scans")
    if not dilution > 0:
        raise InvalidArgument(f"dilution must be positive, got {dilution}")
    if max_iters < 0:
        raise InvalidArgument("max_iters must be >= 0")

    order = np.argsort(povm.index, kind="stable")
    elements = povm.elements[order]
    counts = data.effective_counts().ravel()[povm.index[order]]
    total = counts.sum()
    if not total > 0:
        raise InvalidArgument("all counts are zero after background subtraction")
    freq = counts / total
    nz = freq > 0

    basis, g = povm.support()
    r = g.size
    # row k holds the whitened projector vector, conjugated: e_k^dag U g^{-1/2}
    wt = (elements.conj() @ basis) / np.sqrt(g)
    wt_c = wt.conj()
    eye = np.eye(r)
    back = basis / np.sqrt(g)

    def to_rho(sigma):
        rho = back @ sigma @ back.conj().T
        rho = (rho + rho.conj().T) / 2
        return rho / np.trace(rho).real

    def probs(sigma):
        parts = chunked_map(
            lambda s: np.einsum("ki,ki->k", wt[s] @ sigma, wt_c[s]).real, len(freq), workers
        )
        return np.concatenate(parts)

    def objective(p):
        if not np.all(np.isfinite(p)):
            raise NumericalFailure("non-finite projection probability")
        return float(np.sum(freq[nz] * np.log(np.maximum(p[nz], P_FLOOR))))

    sigma = np.diag(g / g.sum()).astype(complex)
    p = probs(sigma)
    value = objective(p)
    history = [value]
    halvings = 0
    converged = False
    it = 0
    while it < max_iters:
        w = np.where(nz, freq / np.maximum(p, P_FLOOR), 0.0)
        R = tree_sum(chunked_map(lambda s: (wt_c[s].T * w[s]) @ wt[s], len(freq), workers))
        if not np.all(np.isfinite(R)):
            raise NumericalFailure("non-finite R operator")

        def attempt(e):
            a = eye + e * (R - eye)
            t = a @ sigma @ a.conj().T
            t = (t + t.conj().T) / 2
            t /= np.trace(t).real
            pt = probs(t)
            return t, pt, objective(pt)

        eps = dilution
        for _ in range(MAX_HALVINGS):
            trial, p_trial, v_trial = attempt(eps)
            if v_trial >= value:
                break
            eps /= 2
            halvings += 1
        else:
            # no ascent step representable in floating point: at the maximum
            converged = True
            break
        if eps == dilution:
            # the full step was accepted: try longer ones while they keep improving
            while eps * 2 <= MAX_STEP:
                cand = attempt(eps * 2)
                if not cand[2] > v_trial:
                    break
                eps *= 2
                trial, p_trial, v_trial = cand
        it += 1
        gain = v_trial - value
        sigma, p, value = trial, p_trial, v_trial
        history.append(value)
        if callback is not None:
            callback(it, to_rho(sigma))
        if gain <= tol * abs(value):
            converged = True
            break

    rho = to_rho(sigma)
    lam, vecs = np.linalg.eigh(rho)
    idx = np.argsort(lam, kind="stable")[::-1]
    lam = np.clip(lam[idx], 0.0, None)
    lam = lam / lam.sum()
    vecs = vecs[:, idx]
    grid = povm.grid
    modes = [fix_global_phase(SpectralAmplitude(grid, vecs[:, i] / math.sqrt(grid.dxi))) for i in range(len(lam))]
    basis_vecs = np.column_stack([m.as_vector() for m in modes])
    rho = (basis_vecs * lam) @ basis_vecs.conj().T
    correlation = SpectralCorrelation.from_density(grid, rho)

    final = float(np.sum(counts[nz] * np.log(np.maximum(p[nz], P_FLOOR))))
    if not converged:
        log.info("MLE stopped after %d iterations without meeting tol=%g", it, tol)
    return ReconstructionResult(
        correlation=correlation,
        eigenvalues=lam,
        eigenmodes=modes,
        iterations=it,
        final_log_likelihood=final,
        converged=converged,
        history=np.array(history),
        ps_grid=povm.ps_grid,
        diagnostics={
            "support_dim": r,
            "step_halvings": halvings,
            "tol": tol,
            "max_iters": max_iters,
            "dilution": dilution,
            "total_counts": float(total),
        },
    )


def extract_dominant_mode(result: ReconstructionResult) -> tuple[SpectralAmplitude, float]:
    """Eigenmode with the largest weight.

    A near-tie (weights within 1e-9) goes to the mode with the larger overlap
    with the coherent mode at the scan centroid.
    """
    lam = result.eigenvalues
    if len(lam) > 1 and abs(lam[0] - lam[1]) < TIE_TOL and result.ps_grid is not None:
        grid = result.correlation.grid
        ref = coherent_mode_vectors(grid, [result.ps_grid.centroid()])[0]
        tied = [i for i in range(len(lam)) if abs(lam[0] - lam[i]) < TIE_TOL]
        overlaps = [abs(np.vdot(ref, result.eigenmodes[i].as_vector())) for i in tied]
        best = tied[int(np.argmax(overlaps))]
        log.info("dominant-mode tie among %d modes resolved to mode %d", len(tied), best)
        return result.eigenmodes[best], float(lam[best])
    return result.eigenmodes[0], float(lam[0])
