"""Surrogate-modeling toolkit for crashworthiness design studies.

Trains exact Gaussian-process regressors (with RBF, exponential and Matérn
kernels, optionally ARD) and regularized linear baselines on tabular
design-of-experiments data, extracts crash metrics from solver time-series
exports, evaluates models with repeated K-fold cross-validation, and
propagates input uncertainty through a trained surrogate by Monte Carlo
sampling.
"""

__version__ = "0.1.0"

from .data import (Dataset, INPUT_COLUMNS, OUTPUT_COLUMNS, Standardizer,
                   filter_outliers, fit_standardizer, load_dataset,
                   train_test_split)
from .doe import (DesignSpace, cutout_length, default_design_space,
                  lhs_sample)
from .gp import FittedGP, Posterior, cholesky_with_jitter, fit, make_fitted, \
    log_marginal_likelihood
from .kernels import (FAMILIES, Hyperparameters, KernelSpec, kernel_eval,
                      kernel_gradients, kernel_matrix)
from .linear import LinearModel, fit_linear, grid_search_lambda
from .metrics import RegressionMetrics, compute_metrics, percent_errors, \
    repeated_kfold
from .propagation import (Constant, InputDistributions, Normal,
                          PropagationResult, StreamingMoments, propagate,
                          sample_inputs)
from .surrogate import (SurrogateConfig, SurrogateModel, fit_surrogate,
                        holdout_report, load_model, save_model)

__all__ = [
    "Dataset", "INPUT_COLUMNS", "OUTPUT_COLUMNS", "Standardizer",
    "filter_outliers", "fit_standardizer", "load_dataset", "train_test_split",
    "DesignSpace", "cutout_length", "default_design_space", "lhs_sample",
    "FittedGP", "Posterior", "cholesky_with_jitter", "fit", "make_fitted",
    "log_marginal_likelihood",
    "FAMILIES", "Hyperparameters", "KernelSpec", "kernel_eval",
    "kernel_gradients", "kernel_matrix",
    "LinearModel", "fit_linear", "grid_search_lambda",
    "RegressionMetrics", "compute_metrics", "percent_errors", "repeated_kfold",
    "Constant", "InputDistributions", "Normal", "PropagationResult",
    "StreamingMoments", "propagate", "sample_inputs",
    "SurrogateConfig", "SurrogateModel", "fit_surrogate", "holdout_report",
    "load_model", "save_model",
]
