"""Quantum filtering for a cavity watched by a homodyne detector and a photon counter at once."""

from .commute import CommutativityReport, MeasurementSpec, check_self_commutative, cross_validate
from .ensemble import (
    ComparisonReport,
    EnsembleSummary,
    SimulationConfig,
    TrajectoryRecord,
    analytic_mean_number,
    analytic_number_distribution,
    compare_filters,
    run_ensemble,
    run_trajectory,
)
from .filters import (
    FilterSetup,
    StepRecord,
    cavity_setup,
    filter_gains,
    lindblad_rhs,
    measurement_expectations,
    sme_step,
    sse_step,
    sse_step_corrected_unnormalized,
    sse_step_kuramochi,
)
from .network import SLHModel, beam_splitter, concatenate, series

__version__ = "0.1.0"
