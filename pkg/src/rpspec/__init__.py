"""Qubit noise spectroscopy with correlated random pulse sequences.

Simulates the full dephasing measurement protocol, designs sign-sequence
ensembles whose mean spectral window matches a target weighting, reconstructs
sparse spectra from cosine-lag decay measurements, and benchmarks against an
evenly spaced echo-train sweep.
"""

__version__ = "0.1.0"

from .cpmg import CpmgSweep, build_sweep, cpmg_spectroscopy, resource_comparison
from .csrecon import (DesignMatrix, MeasurementSet, ReconstructionResult,
                      acquire_measurements, build_design_matrix, cross_validate,
                      draw_lags, extract_peaks, lasso_solve,
                      phase_transition_study, reconstruct)
from .errors import (DecoherenceFloorError, DesignFailureError,
                     InfeasibleLagError, InfeasibleTargetError, RpspecError,
                     SolverFailureError)
from .experiment import (ChiEstimate, ExperimentPlan, FunctionalEstimate,
                         accuracy_scaling_study, ensemble_mean_window,
                         estimate_functional, run_protocol)
from .pulse import (PulseSequence, WindowFunction, chi_exact, cpmg_sequence,
                    window_cpmg, window_exact)
from .seqgen import (CorrelationProfile, FirDesign, TargetFunction,
                     correlation_from_target, cos_lag_target, design_fir,
                     expected_window, sample_sequence)
from .spectra import (FrequencyGrid, NoiseSpectrum, SparseSpectrum, evaluate,
                      quantum_dot_standin, random_sparse)

__all__ = [
    "__version__",
    "ChiEstimate", "CorrelationProfile", "CpmgSweep", "DecoherenceFloorError",
    "DesignFailureError", "DesignMatrix", "ExperimentPlan", "FirDesign",
    "FrequencyGrid", "FunctionalEstimate", "InfeasibleLagError",
    "InfeasibleTargetError", "MeasurementSet", "NoiseSpectrum", "PulseSequence",
    "ReconstructionResult", "RpspecError", "SolverFailureError", "SparseSpectrum",
    "TargetFunction", "WindowFunction", "accuracy_scaling_study",
    "acquire_measurements", "build_design_matrix", "build_sweep", "chi_exact",
    "correlation_from_target", "cos_lag_target", "cpmg_sequence",
    "cpmg_spectroscopy", "cross_validate", "design_fir", "draw_lags",
    "ensemble_mean_window", "estimate_functional", "evaluate", "expected_window",
    "extract_peaks", "lasso_solve", "phase_transition_study",
    "quantum_dot_standin", "random_sparse", "reconstruct", "resource_comparison",
    "run_protocol", "sample_sequence", "window_cpmg", "window_exact",
]
