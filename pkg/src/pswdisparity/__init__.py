"""Propensity-score balancing weights for controlled descriptive comparisons."""

from .config import AnalysisConfig, Categorical, CovariateSpec, load_config
from .data import Dataset, covariate_spec, design_matrix, load_dataset, write_dataset
from .diagnostics import asd, balance_report, overlap_summary
from .estimation import WacdEstimate, bootstrap_se, estimate_wacd, hajek_wacd, sandwich_se
from .iomc import (
    fit_outcome_model,
    iomc_disparity,
    rank_and_replace,
    weighted_rank,
)
from .propensity import PropensityModel, fit_logistic, predict
from .synth import Scenario, generate, replicate_study
from .weighting import Scheme, WeightSet, balancing_weights, effective_sample_size

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig", "Categorical", "CovariateSpec", "Dataset", "PropensityModel",
    "Scenario", "Scheme", "WacdEstimate", "WeightSet", "asd", "balance_report",
    "balancing_weights", "bootstrap_se", "covariate_spec", "design_matrix",
    "effective_sample_size", "estimate_wacd", "fit_logistic", "fit_outcome_model",
    "generate", "hajek_wacd", "iomc_disparity", "load_config", "load_dataset",
    "overlap_summary", "predict", "rank_and_replace", "replicate_study", "sandwich_se",
    "weighted_rank", "write_dataset",
]
