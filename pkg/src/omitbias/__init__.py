"""Asymptotic bias of treatment effects when logistic or probit fits omit covariates."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

from .bias import (
    LeastFalse,
    all_methods,
    binary_covariate_least_false,
    figure1_curve,
    gail_least_false_alpha,
    neuhaus_factor,
    neuhaus_least_false_alpha,
    probit_least_false,
    probit_neuhaus_hprime,
    skew_normal_least_false,
)
from .covariates import (
    BinaryBlock,
    CovariateModel,
    TrueModel,
    attenuation_radical,
    conditional_dispersion,
    load_models,
    models_from_dict,
)
from .errors import ContractError, ConvergenceError, DomainError, NumericalError, SeparationError
from .glm import Dataset, FitResult, fit
from .oracle import (
    CovariateLaw,
    OracleResult,
    ScenarioSpec,
    monte_carlo_least_false,
    outcome_probability_check,
    quadrature_least_false,
    sample_covariates,
)
from .specfun import PROBIT_LOGIT_C, expit, logit, norm_cdf, norm_pdf, norm_quantile, owen_t

try:
    __version__ = version("omitbias")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.0.0"

__all__ = [
    "PROBIT_LOGIT_C",
    "BinaryBlock",
    "ContractError",
    "ConvergenceError",
    "CovariateLaw",
    "CovariateModel",
    "Dataset",
    "DomainError",
    "FitResult",
    "LeastFalse",
    "NumericalError",
    "OracleResult",
    "ScenarioSpec",
    "SeparationError",
    "TrueModel",
    "__version__",
    "all_methods",
    "attenuation_radical",
    "binary_covariate_least_false",
    "conditional_dispersion",
    "expit",
    "figure1_curve",
    "fit",
    "gail_least_false_alpha",
    "load_models",
    "logit",
    "models_from_dict",
    "monte_carlo_least_false",
    "neuhaus_factor",
    "neuhaus_least_false_alpha",
    "norm_cdf",
    "norm_pdf",
    "norm_quantile",
    "outcome_probability_check",
    "owen_t",
    "probit_least_false",
    "probit_neuhaus_hprime",
    "quadrature_least_false",
    "sample_covariates",
    "skew_normal_least_false",
]
