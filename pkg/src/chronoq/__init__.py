"""Chronocyclic Q-function simulation and maximum-likelihood pulse reconstruction."""

from .core import (
    PULSE_KINDS,
    FrequencyGrid,
    GridWarning,
    InvalidArgument,
    NumericalFailure,
    PhaseSpaceGrid,
    PulseSpec,
    SpectralAmplitude,
    SpectralCorrelation,
    make_grid,
    make_pulse,
    make_scan,
    mixed_correlation,
    normalize,
    pure_correlation,
    to_dimensionless,
    to_physical,
)
from .forward import (
    CountMap,
    QFunction,
    QpgModel,
    coherent_mode,
    project,
    q_function,
    simulate_counts,
    subtract_background,
)
from .hermite import HermiteExpansion, expand_state, hermite_function, hg_functions, q_via_expansion
from .metrics import fidelity, mode_weights, purity, similarity
from .mle import (
    Povm,
    ReconstructionResult,
    build_povm,
    extract_dominant_mode,
    fix_global_phase,
    log_likelihood,
    reconstruct,
)

__version__ = "0.1.0"
