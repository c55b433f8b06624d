"""Equilibration time bounds from the distribution of energy gaps."""
from . import bounds, dynamics, gaps, models, spectral
from .bounds import (
    BoundReport,
    MicrocanonicalWindow,
    TruncationReport,
    bound_report,
    central_window,
    default_window,
    microcanonical_window,
    proposition1_bound,
    t_eq,
    theorem3_bound,
    theorem4_bound,
    truncate,
)
from .dynamics import (
    EvolutionTrace,
    TypicalityReport,
    distinguishability,
    expectation_trace,
    haar_typicality,
    lorentzian_average,
    time_average,
    time_average_spectral,
)
from .gaps import GapDistribution, a_delta, build_gap_distribution, xi
from .models import (
    PAULI,
    InitialStateSpec,
    SystemBathModel,
    build_initial_state,
    embed_system_observable,
    free_spin,
    ising_ring,
    random_ring,
    system_state,
)
from .spectral import SpectralDecomposition, diagonalize, to_eigenbasis, window_projector

__version__ = "0.1.0"
