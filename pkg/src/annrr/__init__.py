"""Singular-value penalized estimators for low-rank approximation and reduced-rank regression."""

from annrr.exceptions import ConfigurationError, ContractError, NumericalError, WeightOrderError
from annrr.linalg import (
    SvdFactorization,
    Tolerances,
    matrix_rank,
    projector,
    pseudo_inverse,
    sym_eig,
    thin_svd,
)
from annrr.thresholding import (
    WeightVector,
    adaptive_nuclear_norm,
    adaptive_weights,
    asvt,
    hsvt,
    ssvt,
)
from annrr.estimators import (
    EstimatorConfig,
    FitResult,
    ann_fit,
    estimate_rank,
    fit,
    nnp_fit,
    ols_fit,
    roann_fit,
    rorr_fit,
    rsc_fit,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "NumericalError",
    "WeightOrderError",
    "SvdFactorization",
    "Tolerances",
    "matrix_rank",
    "projector",
    "pseudo_inverse",
    "sym_eig",
    "thin_svd",
    "WeightVector",
    "adaptive_nuclear_norm",
    "adaptive_weights",
    "asvt",
    "hsvt",
    "ssvt",
    "EstimatorConfig",
    "FitResult",
    "ann_fit",
    "estimate_rank",
    "fit",
    "nnp_fit",
    "ols_fit",
    "roann_fit",
    "rorr_fit",
    "rsc_fit",
]
