"""High-dimensional covariance tests with analytic power and Monte Carlo oracles."""

from __future__ import annotations

from hdcov._kernels import BACKEND
from hdcov.calibration import NullCalibration, decide, null_calibrate_mc, null_mean_exact, null_variance_asymptotic
from hdcov.model import CovarianceSpec, build_covariance, normalize_sphericity, stein_loss, sym_sqrt, trace_power_mean
from hdcov.power import PowerPrediction, analytic_power, mean_gap_leading, power_ordering, spiked_power
from hdcov.statistics import gradient, hessian, sample_cov_known_mean, sample_cov_unknown_mean, statistic

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CovarianceSpec",
    "NullCalibration",
    "PowerPrediction",
    "analytic_power",
    "build_covariance",
    "decide",
    "gradient",
    "hessian",
    "mean_gap_leading",
    "normalize_sphericity",
    "null_calibrate_mc",
    "null_mean_exact",
    "null_variance_asymptotic",
    "power_ordering",
    "sample_cov_known_mean",
    "sample_cov_unknown_mean",
    "spiked_power",
    "statistic",
    "stein_loss",
    "sym_sqrt",
    "trace_power_mean",
]
