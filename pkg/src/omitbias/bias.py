"""Closed-form least-false values when covariates are left out of the fit.

Every formula here depends on the omitted covariates only through the
quadratic form ``v = beta2' Omega~ beta2`` (see :func:`omitted_quadratic_form`)
plus the covariate means. Methods:

* ``skew_normal`` -- extended skew-Normal matching under ``expit(u) ~ Phi(c u)``
* ``probit_exact`` -- the same matching for a probit link, where it is exact
* ``gail`` -- small-``beta2`` Taylor expansion, treatment-only fits
* ``neuhaus`` -- Owen's T ratio ``T(h, a) / T(h, 1)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .covariates import (
    CovariateModel,
    TrueModel,
    conditional_dispersion,
    omitted_quadratic_form,
    radical_from_quadratic,
)
from .errors import ContractError
from .specfun import PROBIT_LOGIT_C, PROBIT_LOGIT_C2, expit, logit, owen_t

METHODS = (
    "skew_normal",
    "gail",
    "neuhaus",
    "probit_exact",
    "quadrature_oracle",
    "monte_carlo_oracle",
)


@dataclass(frozen=True)
class LeastFalse:
    """Limit of the reduced-model MLE, tagged with how it was obtained.

    ``mu_star`` is ``None`` for methods that only describe the treatment
    effect; ``gamma_star`` is set only when a binary covariate is fitted.
    """

    mu_star: float | None
    alpha_star: float
    beta1_star: np.ndarray
    method: str
    link: str
    gamma_star: float | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}")

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "link": self.link,
            "mu_star": self.mu_star,
            "alpha_star": self.alpha_star,
            "beta1_star": np.asarray(self.beta1_star).tolist(),
            "gamma_star": self.gamma_star,
        }


def _prepare(model: TrueModel, cov: CovariateModel) -> tuple[float, np.ndarray]:
    model.check_against(cov)
    return omitted_quadratic_form(cov, model.beta2), cov.regression_of_omitted()


def _esn_least_false(model: TrueModel, cov: CovariateModel, link: str, method: str) -> LeastFalse:
    v, reg = _prepare(model, cov)
    q_tilde = radical_from_quadratic(v, link)
    b2 = model.beta2
    nu1p, nu1m = cov.nu_plus[: cov.p], cov.nu_minus[: cov.p]
    nu2p, nu2m = cov.nu_plus[cov.p :], cov.nu_minus[cov.p :]
    # reg.T @ nu1 is Omega21 Omega11^{-1} nu1; zero-length when p == 0
    shift_sum = (nu2p + nu2m) - reg.T @ (nu1p + nu1m)
    shift_diff = (nu2p - nu2m) - reg.T @ (nu1p - nu1m)
    beta1_star = (model.beta1 + reg @ b2) / q_tilde
    mu_star = (model.mu + 0.5 * float(b2 @ shift_sum)) / q_tilde
    alpha_star = (model.alpha + 0.5 * float(b2 @ shift_diff)) / q_tilde
    return LeastFalse(mu_star, alpha_star, beta1_star, method, link)


def skew_normal_least_false(model: TrueModel, cov: CovariateModel) -> LeastFalse:
    """Approximate least-false ``(mu*, alpha*, beta1*)`` for a logistic fit.

    With equal arm means this reduces to ``alpha* = alpha / q~``.
    """
    if model.link != "logistic":
        raise ContractError("skew_normal_least_false needs link='logistic'; use probit_least_false")
    return _esn_least_false(model, cov, "logistic", "skew_normal")


def probit_least_false(model: TrueModel, cov: CovariateModel) -> LeastFalse:
    """Exact least-false values for a probit fit with Gaussian covariates."""
    if model.link != "probit":
        raise ContractError("probit_least_false needs link='probit'")
    return _esn_least_false(model, cov, "probit", "probit_exact")


def gail_least_false_alpha(model: TrueModel, cov: CovariateModel) -> LeastFalse:
    """Gail's small-``beta2`` approximation for a treatment-only fit.

    Not clamped: large ``beta2`` pushes ``alpha*`` through zero and beyond.
    """
    model.check_against(cov)
    if cov.p != 0:
        raise ContractError("Gail's method applies only when no covariates besides treatment are fitted (p = 0)")
    v = float(model.beta2 @ cov.omega22 @ model.beta2)
    a = model.alpha
    if model.link == "logistic":
        alpha_star = a - 0.5 * v * (expit(model.mu + a) - expit(model.mu - a))
    else:
        alpha_star = a * (1.0 - 0.5 * v)
    return LeastFalse(None, alpha_star, np.zeros(0), "gail", model.link)


def neuhaus_factor(h: float, a: float) -> float:
    """Correction factor ``T(h, a) / T(h, 1)`` for ``0 < a <= 1``."""
    if not (math.isfinite(a) and 0.0 < a <= 1.0):
        raise ContractError(f"neuhaus_factor needs 0 < a <= 1, got a={a}")
    if a == 1.0:
        return 1.0
    # T(h, 1) = Phi(h) Phi(-h) / 2 vanishes in double precision near |h| ~ 38
    num, den = owen_t(h, a), owen_t(h, 1.0)
    if den == 0.0:
        return 1.0
    return min(1.0, num / den)


def neuhaus_arguments(model: TrueModel, cov: CovariateModel) -> tuple[float, float]:
    """``(h, a)`` for the Owen's T correction, fitted covariates held at their mean."""
    v, _ = _prepare(model, cov)
    nu = cov.nu_mean
    q_tilde = radical_from_quadratic(v, "logistic")
    h = PROBIT_LOGIT_C * (model.mu + float(model.beta @ nu)) / q_tilde
    a = 1.0 / math.sqrt(1.0 + 2.0 * PROBIT_LOGIT_C2 * v)
    return h, a


def neuhaus_least_false_alpha(model: TrueModel, cov: CovariateModel) -> LeastFalse:
    if model.link != "logistic":
        raise ContractError("neuhaus_least_false_alpha needs link='logistic'; for probit see probit_neuhaus_hprime")
    h, a = neuhaus_arguments(model, cov)
    return LeastFalse(None, model.alpha * neuhaus_factor(h, a), np.zeros(0), "neuhaus", "logistic")


def probit_neuhaus_hprime(model: TrueModel, cov: CovariateModel) -> float:
    """Probit ``H'(0)`` with Gaussian covariates.

    The numerator ``E[phi(eta)]`` has the closed form ``phi(h/c) / sqrt(1 + v)``
    which cancels the denominator, leaving ``1 / sqrt(1 + v)``: the same factor
    as :func:`probit_least_false` in the randomized case.
    """
    if model.link != "probit":
        raise ContractError("probit_neuhaus_hprime needs link='probit'")
    v, _ = _prepare(model, cov)
    return 1.0 / radical_from_quadratic(v, "probit")


def binary_covariate_least_false(model: TrueModel, cov: CovariateModel) -> LeastFalse:
    """Least-false values when a non-treatment binary covariate ``B`` is also fitted.

    Covariate means are taken per level of ``B`` from ``model.binary_block``;
    treatment is independent of ``(B, X)``. Exact for probit.
    """
    block = model.binary_block
    if block is None:
        raise ContractError("binary_covariate_least_false needs a TrueModel with binary_block")
    v, reg = _prepare(model, cov)
    q_tilde = radical_from_quadratic(v, model.link)
    b2 = model.beta2
    p = cov.p
    nu1p, nu1m = block.nu_b_plus[:p], block.nu_b_minus[:p]
    nu2p, nu2m = block.nu_b_plus[p:], block.nu_b_minus[p:]
    shift_sum = (nu2p + nu2m) - reg.T @ (nu1p + nu1m)
    shift_diff = (nu2p - nu2m) - reg.T @ (nu1p - nu1m)
    method = "skew_normal" if model.link == "logistic" else "probit_exact"
    return LeastFalse(
        mu_star=(model.mu + 0.5 * float(b2 @ shift_sum)) / q_tilde,
        alpha_star=model.alpha / q_tilde,
        beta1_star=(model.beta1 + reg @ b2) / q_tilde,
        method=method,
        link=model.link,
        gamma_star=(block.gamma + 0.5 * float(b2 @ shift_diff)) / q_tilde,
    )


def figure1_curve(q_tilde_inv: float, p_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Owen's T correction factor against the typical response probability ``P``.

    ``h = c logit(P) / q~`` and ``a = 1 / sqrt(2 q~^2 - 1)``.
    """
    if not 0.0 < q_tilde_inv <= 1.0:
        raise ContractError(f"q_tilde_inv must lie in (0, 1], got {q_tilde_inv}")
    grid = [float(x) for x in p_grid]
    if any(not 0.0 < x < 1.0 for x in grid):
        raise ContractError("P grid values must lie strictly inside (0, 1)")
    q_tilde = 1.0 / q_tilde_inv
    a = 1.0 / math.sqrt(2.0 * q_tilde * q_tilde - 1.0)
    return [(x, neuhaus_factor(PROBIT_LOGIT_C * logit(x) / q_tilde, a)) for x in grid]


def all_methods(model: TrueModel, cov: CovariateModel) -> dict[str, LeastFalse]:
    """Every closed-form method applicable to the scenario, keyed by method name."""
    out: dict[str, LeastFalse] = {}
    if model.binary_block is not None:
        lf = binary_covariate_least_false(model, cov)
        out[lf.method] = lf
        return out
    if model.link == "logistic":
        out["skew_normal"] = skew_normal_least_false(model, cov)
        out["neuhaus"] = neuhaus_least_false_alpha(model, cov)
    else:
        out["probit_exact"] = probit_least_false(model, cov)
        factor = probit_neuhaus_hprime(model, cov)
        out["neuhaus"] = LeastFalse(None, model.alpha * factor, np.zeros(0), "neuhaus", "probit")
    if cov.p == 0:
        out["gail"] = gail_least_false_alpha(model, cov)
    return out


__all__ = [
    "LeastFalse",
    "METHODS",
    "all_methods",
    "binary_covariate_least_false",
    "conditional_dispersion",
    "figure1_curve",
    "gail_least_false_alpha",
    "neuhaus_arguments",
    "neuhaus_factor",
    "neuhaus_least_false_alpha",
    "omitted_quadratic_form",
    "probit_least_false",
    "probit_neuhaus_hprime",
    "skew_normal_least_false",
]
