"""Figures of merit: similarity of profiles and fidelity of correlation matrices."""

from __future__ import annotations

import numpy as np

from .core import InvalidArgument, SpectralCorrelation

__all__ = ["similarity", "fidelity", "mode_weights", "purity"]


def similarity(e, t) -> float:
    """Normalized overlap ``sum(e*t) / sqrt(sum(e**2) * sum(t**2))``.

    Lies in [0, 1] for non-negative profiles and is invariant to rescaling
    either argument.

    >>> round(similarity([1, 0], [1, 1]), 5)
    0.70711
    """
    e = np.asarray(e, dtype=float)
    t = np.asarray(t, dtype=float)
    if e.shape != t.shape:
        raise InvalidArgument(f"shape mismatch: {e.shape} vs {t.shape}")
    ee = np.sum(e * e)
    tt = np.sum(t * t)
    if ee == 0 or tt == 0:
        raise InvalidArgument("similarity is undefined for an all-zero profile")
    return float(np.sum(e * t) / np.sqrt(ee * tt))


def fidelity(W_t: SpectralCorrelation, W_e: SpectralCorrelation) -> float:
    """Trace overlap ``Tr(W_t W_e)`` under the grid measure.

    Equals ``|<f_t|f_e>|**2`` when both states are pure.
    """
    if W_t.grid != W_e.grid:
        raise InvalidArgument("correlations live on different grids")
    a = W_t.density()
    b = W_e.density()
    # Tr(AB) = sum_jk A_jk B_kj
    val = np.sum(a * b.T)
    scale = max(abs(val.real), 1.0)
    if abs(val.imag) > 1e-10 * scale:
        raise InvalidArgument(f"trace overlap has imaginary residue {val.imag:.3g}")
    return float(val.real)


def purity(W: SpectralCorrelation) -> float:
    return fidelity(W, W)


def mode_weights(result) -> np.ndarray:
    """Eigenvalue spectrum of a reconstruction, descending and summing to one."""
    return np.array(result.eigenvalues, dtype=float)
