"""Binary-response maximum likelihood by iteratively reweighted least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .covariates import check_link
from .errors import ContractError, NumericalError, SeparationError

_VAR_FLOOR = 1e-10
_RANK_TOL = 1e-10
_SEPARATION_NORM = 1e4
_MAX_HALVINGS = 40
_STEP_TOL = 1e-6


@dataclass(frozen=True)
class Dataset:
    """Outcomes in {0, 1} and a design matrix that includes the intercept column."""

    y: np.ndarray
    design: np.ndarray

    def __post_init__(self) -> None:
        y = np.asarray(self.y, dtype=float).reshape(-1)
        design = np.asarray(self.design, dtype=float)
        if design.ndim != 2:
            raise ContractError(f"design must be 2-D, got shape {design.shape}")
        if design.shape[0] != y.size:
            raise ContractError(f"design has {design.shape[0]} rows but y has {y.size} entries")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ContractError("y entries must all be 0 or 1")
        if not np.all(np.isfinite(design)):
            raise ContractError("design must be finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "design", design)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def k(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class FitResult:
    coefficients: np.ndarray
    iterations: int
    converged: bool
    max_score: float
    log_likelihood: float


def _mean_and_slope(eta: np.ndarray, link: str) -> tuple[np.ndarray, np.ndarray]:
    if link == "logistic":
        mu = special.expit(eta)
        return mu, mu * (1.0 - mu)
    return special.ndtr(eta), np.exp(-0.5 * eta * eta) / np.sqrt(2.0 * np.pi)


def log_likelihood(y: np.ndarray, eta: np.ndarray, link: str) -> float:
    if link == "logistic":
        # y eta - log(1 + e^eta), overflow-free
        return float(y @ eta - np.sum(np.maximum(eta, 0.0) + np.log1p(np.exp(-np.abs(eta)))))
    return float(np.sum(special.log_ndtr((2.0 * y - 1.0) * eta)))


def score(dataset: Dataset, coefficients: np.ndarray, link: str) -> np.ndarray:
    """Gradient of the log-likelihood at ``coefficients``."""
    eta = dataset.design @ coefficients
    mu, slope = _mean_and_slope(eta, link)
    var = np.maximum(mu * (1.0 - mu), _VAR_FLOOR)
    return dataset.design.T @ ((dataset.y - mu) * slope / var)


def fit(
    dataset: Dataset,
    link: str = "logistic",
    tol: float = 1e-8,
    max_iter: int = 100,
    start: np.ndarray | None = None,
) -> FitResult:
    """Maximum likelihood fit of a logistic or probit regression.

    Starts from zero (or ``start``) and takes Fisher-scoring steps (Newton steps for the
    canonical logistic link), halving a step whenever it lowers the
    log-likelihood. Each step solves the weighted least-squares problem by
    QR of the weighted design.

    Convergence needs both a score below ``tol`` and a Newton step below
    1e-6 relative to the coefficients. Raises :class:`NumericalError` on rank
    deficiency and :class:`SeparationError` when the coefficient norm exceeds
    1e4 or the score vanishes while Newton steps stay large. Hitting
    ``max_iter`` returns a result with ``converged=False``.
    """
    check_link(link)
    if dataset.n <= dataset.k:
        raise ContractError(f"need more rows than columns, got n={dataset.n}, k={dataset.k}")
    X, y = dataset.design, dataset.y
    beta = np.zeros(dataset.k) if start is None else np.array(start, dtype=float)
    if beta.shape != (dataset.k,):
        raise ContractError(f"start must have length {dataset.k}")
    eta = X @ beta
    ll = log_likelihood(y, eta, link)
    max_score = np.inf
    for iteration in range(1, max_iter + 1):
        mu, slope = _mean_and_slope(eta, link)
        var = np.maximum(mu * (1.0 - mu), _VAR_FLOOR)
        grad = X.T @ ((y - mu) * slope / var)
        max_score = float(np.max(np.abs(grad)))
        root_w = slope / np.sqrt(var)
        q_mat, r_mat = linalg.qr(X * root_w[:, None], mode="economic", check_finite=False)
        diag = np.abs(np.diag(r_mat))
        if diag.min() <= _RANK_TOL * diag.max():
            raise NumericalError("design is rank deficient at the current weights")
        step = linalg.solve_triangular(r_mat, q_mat.T @ ((y - mu) / np.sqrt(var)), check_finite=False)
        if max_score < tol:
            if np.max(np.abs(step)) < _STEP_TOL * (1.0 + np.max(np.abs(beta))):
                return FitResult(beta, iteration - 1, True, max_score, ll)
            # the score has vanished but the curvature has too: coefficients are running off
            raise SeparationError(
                f"score below {tol:g} with Newton step {np.max(np.abs(step)):.3g} at coefficient norm "
                f"{np.linalg.norm(beta):.3g}; data look separated"
            )
        for _ in range(_MAX_HALVINGS):
            trial = beta + step
            trial_eta = X @ trial
            trial_ll = log_likelihood(y, trial_eta, link)
            if trial_ll >= ll - 1e-12 * abs(ll):
                break
            step = 0.5 * step
        else:
            # no ascent direction left at machine precision
            return FitResult(beta, iteration, max_score < tol, max_score, ll)
        beta, eta, ll = trial, trial_eta, trial_ll
        if np.linalg.norm(beta) > _SEPARATION_NORM:
            raise SeparationError(
                f"coefficient norm {np.linalg.norm(beta):.3g} exceeds {_SEPARATION_NORM:g}; data look separated"
            )
    max_score = float(np.max(np.abs(score(dataset, beta, link))))
    return FitResult(beta, max_iter, False, max_score, ll)
