"""Density-matrix reconstruction from noisy quantum homodyne tomography data.

Simulates homodyne measurement records for a catalog of reference
states, deconvolves detector inefficiency through adapted pattern
functions, and estimates the density matrix by empirical projection
followed by coordinatewise soft thresholding.  Includes the Monte Carlo
machinery to study the estimator's convergence.
"""

from .estimator import (
    DensityMatrixEstimator,
    EstimationResult,
    EstimatorConfig,
    choose_N,
    estimate,
    index_set,
    oracle_bound,
    raw_estimate,
    soft_threshold,
    thresholds,
)
from .evaluation import (
    PowerLawFit,
    RmseStudy,
    coverage_rate,
    fit_power_law,
    relative_rmse,
    run_study,
    tail_bound_check,
    threshold_scale_sweep,
)
from .measurement import NoiseConfig, add_noise, noisy_density, sample_ideal, sample_records
from .patterns import (
    PatternTable,
    adapted_ft,
    build_table,
    eval_pattern,
    kernel_G,
    pattern_ft,
    sup_norm,
)
from .states import (
    ClassParams,
    DensityMatrix,
    StateModel,
    class_envelope_check,
    density_matrix,
    quadrature_density,
)

__version__ = "0.1.0"

__all__ = [
    "ClassParams",
    "DensityMatrix",
    "DensityMatrixEstimator",
    "EstimationResult",
    "EstimatorConfig",
    "NoiseConfig",
    "PatternTable",
    "PowerLawFit",
    "RmseStudy",
    "StateModel",
    "add_noise",
    "adapted_ft",
    "build_table",
    "choose_N",
    "class_envelope_check",
    "coverage_rate",
    "density_matrix",
    "estimate",
    "eval_pattern",
    "fit_power_law",
    "index_set",
    "kernel_G",
    "noisy_density",
    "oracle_bound",
    "pattern_ft",
    "quadrature_density",
    "raw_estimate",
    "relative_rmse",
    "run_study",
    "sample_ideal",
    "sample_records",
    "soft_threshold",
    "sup_norm",
    "tail_bound_check",
    "threshold_scale_sweep",
    "thresholds",
]
