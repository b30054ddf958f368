"""Independent ground truth for least-false values: quadrature and Monte Carlo."""

from .montecarlo import monte_carlo_least_false, outcome_probability_check, simulate
from .quadrature import OracleResult, expected_score, quadrature_least_false
from .sampling import CovariateLaw, ScenarioSpec, sample_covariates

__all__ = [
    "CovariateLaw",
    "OracleResult",
    "ScenarioSpec",
    "expected_score",
    "monte_carlo_least_false",
    "outcome_probability_check",
    "quadrature_least_false",
    "sample_covariates",
    "simulate",
]
