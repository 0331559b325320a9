"""Photon-echo simulations of a three-level Raman memory with quasi-degenerate levels."""
from .analysis import (
    EchoReport,
    NoPeakError,
    beat_period,
    detect_echo_peak,
    fit_exponential_decay,
    memory_time_estimate,
    photon_number_decay,
    predict_echo_time,
    theoretical_decay_coefficient,
)
from .bloch import AtomContext, Fields, Trajectory, integrate_sequence, liouvillian, rhs, step_rk4
from .ensemble import (
    DeltaDistribution,
    EnsembleSpec,
    GaussianDistribution,
    SignalTrace,
    accumulate_polarization,
    analytic_envelope,
    gaussian_average_integral,
    sample_detunings,
    simulate_ensemble,
)
from .model import (
    D_INFINITE,
    Pulse,
    PulseSequence,
    SystemParams,
    Transition,
    ValidationError,
    echo_sequence,
    ground_state,
    hermitize,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AtomContext",
    "D_INFINITE",
    "DeltaDistribution",
    "EchoReport",
    "EnsembleSpec",
    "Fields",
    "GaussianDistribution",
    "NoPeakError",
    "Pulse",
    "PulseSequence",
    "SignalTrace",
    "SystemParams",
    "Trajectory",
    "Transition",
    "ValidationError",
    "accumulate_polarization",
    "analytic_envelope",
    "beat_period",
    "detect_echo_peak",
    "echo_sequence",
    "fit_exponential_decay",
    "gaussian_average_integral",
    "ground_state",
    "hermitize",
    "integrate_sequence",
    "liouvillian",
    "memory_time_estimate",
    "photon_number_decay",
    "predict_echo_time",
    "rhs",
    "sample_detunings",
    "simulate_ensemble",
    "step_rk4",
    "theoretical_decay_coefficient",
    "validate",
]
