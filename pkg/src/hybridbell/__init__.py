"""CHSH Bell tests for two-photon states that entangle polarization with a
continuous degree of freedom, including the auxiliary-pair indirect
measurement of the continuum party."""

from .chsh import AngleSettings, BellReport, bell_value, canonical_settings, optimize_settings
from .continuum import Bundle, Grid, inner, make_grid, normalize, sample_function
from .errors import DegenerateInputError, InvalidArgumentError, NumericalValidationError
from .hybrid import HybridState, SchmidtForm, schmidt_decompose, state_with_overlap
from .montecarlo import estimate_bell, run_bell_experiment
from .protocol import four_photon_pipeline, run_protocol

__all__ = [
    "AngleSettings", "BellReport", "Bundle", "DegenerateInputError", "Grid", "HybridState",
    "InvalidArgumentError", "NumericalValidationError", "SchmidtForm", "bell_value",
    "canonical_settings", "estimate_bell", "four_photon_pipeline", "inner", "make_grid",
    "normalize", "optimize_settings", "run_bell_experiment", "run_protocol", "sample_function",
    "schmidt_decompose", "state_with_overlap",
]
