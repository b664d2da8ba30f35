"""Bayesian interpolating neural networks: CP-structured Gaussian-basis
surrogates with closed-form predictive uncertainty."""

__version__ = "0.1.0"

from .basis import BasisSpec, basis_matrix, equispaced_centers, eval_basis
from .core import (
    BinnError,
    CenterPlacement,
    ConfigError,
    CsvFormatError,
    Dataset,
    DatasetError,
    ModelConfig,
    Scaler,
    SingularSystemError,
    derive_seed,
    fit_scaler,
    load_csv,
    save_csv,
)
from .model import (
    BinnModel,
    fit,
    init_model,
    load_model,
    predict,
    predict_mean,
    predict_std,
    predict_variance,
    sample_predictions,
    save_model,
    sweep,
)

__all__ = [
    "BasisSpec",
    "BinnError",
    "BinnModel",
    "CenterPlacement",
    "ConfigError",
    "CsvFormatError",
    "Dataset",
    "DatasetError",
    "ModelConfig",
    "Scaler",
    "SingularSystemError",
    "basis_matrix",
    "derive_seed",
    "equispaced_centers",
    "eval_basis",
    "fit",
    "fit_scaler",
    "init_model",
    "load_csv",
    "load_model",
    "predict",
    "predict_mean",
    "predict_std",
    "predict_variance",
    "sample_predictions",
    "save_csv",
    "save_model",
    "sweep",
]
