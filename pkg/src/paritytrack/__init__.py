"""Repeated photon-parity measurement of a cavity: simulation, Bayesian filtering,
jump detection and ensemble analysis."""

from .errors import (
    ConfigError,
    FitError,
    ImpossibleOutcomeError,
    InconclusiveError,
    NumericalError,
    ParityTrackError,
    StageDependencyError,
    TruncationError,
)
from .fock import (
    FockDensityMatrix,
    cat_state,
    coherent_state,
    default_dim,
    initial_state,
    parity_expectation,
    state_fidelity,
    wigner_point,
)
from .readout import ReadoutModel, VoltageModel, default_model, perfect_model
from .trajectory import SimConfig, TrajectoryRecord, simulate_ensemble, simulate_trajectory
from .quantum_filter import FilterSettings, bayes_update, build_kraus, free_evolve, run_filter, run_filter_batch
from .jumps import JumpReport, SchmittConfig, count_jumps, missed_jump_probability
from .analysis import analytic_parity, fit_global_decay, predicted_correlation_average
from .cadence import CadenceParams, optimal_spacing
from .config import ExperimentConfig, load_config
from .pipeline import run_pipeline

__version__ = "0.1.0"
