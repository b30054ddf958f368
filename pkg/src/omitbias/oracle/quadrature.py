"""Deterministic least-false values from the expected score equations.

For a fitted linear predictor ``eta* = Z' theta*`` with ``Z = (1, T, X1)`` the
maximum likelihood limit solves

    E[ Z w(eta*) (F(eta) - F(eta*)) ] = 0,

where ``eta`` is the true linear predictor, ``F`` the link and ``w`` the
score weight (1 for the canonical logistic link, ``phi / (Phi Phi(-.))`` for
probit). The logistic link is used exactly, not through its probit
surrogate.

Within an arm ``X`` is Gaussian, so every expectation collapses onto one
Gaussian direction:

* the fitted side depends on ``X`` only through ``eta*``, with
  ``E[X1 | eta*]`` linear in ``eta*``;
* logistic: ``E[Z F(eta)]`` does not involve ``theta*`` and is reduced to
  ``eta`` alone by Stein's identity ``E[X1 F(eta)] = nu1 E F + Cov(X1, eta) E F'``;
* probit: given ``eta*``, ``E[Phi(eta)]`` and ``E[phi(eta)]`` are closed form.

Each one-dimensional expectation is a Gauss-Hermite sum whose node count
grows with the variance of the integration variable, so that step-like
integrands (large linear-predictor spread) are still resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from ..bias import LeastFalse, probit_least_false, skew_normal_least_false
from ..covariates import CovariateModel, TrueModel
from ..errors import ContractError, ConvergenceError

DEFAULT_NODES = 80
MAX_NODES = 4000
RESIDUAL_TOL = 1e-10
# nodes per unit variance keeping Gauss-Hermite error near 1e-10 for expit(m + s z)
_NODES_PER_VAR = 14.0


@dataclass(frozen=True)
class OracleResult:
    least_false: LeastFalse
    mc_std_error: np.ndarray | None
    n_effective: int
    info: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        is_mc = self.least_false.method == "monte_carlo_oracle"
        if is_mc != (self.mc_std_error is not None):
            raise ContractError("mc_std_error must be present exactly for Monte Carlo results")


@lru_cache(maxsize=32)
def _hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = special.roots_hermitenorm(nodes)
    return x, w / math.sqrt(2.0 * math.pi)


def _rule(variance: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Standard-Normal points and weights sized for a predictor of this variance."""
    if variance <= 0.0:
        return np.zeros(1), np.ones(1)
    n = int(min(MAX_NODES, max(nodes, math.ceil(_NODES_PER_VAR * variance))))
    return _hermite(n)


def _fit_terms(eta: np.ndarray, link: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``F``, ``F'`` and the score weight ``w`` at ``eta``."""
    if link == "logistic":
        f = special.expit(eta)
        return f, f * (1.0 - f), np.ones_like(eta)
    log_phi = -0.5 * eta * eta - 0.5 * math.log(2.0 * math.pi)
    w = np.exp(log_phi - special.log_ndtr(eta) - special.log_ndtr(-eta))
    return special.ndtr(eta), np.exp(log_phi), w


class _Arm:
    """Gaussian moments of one treatment arm."""

    def __init__(self, model: TrueModel, cov: CovariateModel, t: float, nodes: int) -> None:
        self.t = t
        self.p = cov.p
        self.link = model.link
        self.nodes = nodes
        nu = cov.nu_plus if t > 0 else cov.nu_minus
        self.nu1 = nu[: cov.p]
        self.omega11 = cov.omega[: cov.p, : cov.p]
        beta = model.beta
        self.true_mean = model.mu + model.alpha * t + float(beta @ nu)
        self.true_var = float(beta @ cov.omega @ beta)
        self.cross_true = cov.omega[: cov.p, :] @ beta  # Cov(X1, eta)
        self._true_part = self._logistic_true_part() if self.link == "logistic" else None

    def _zrow(self, cond_x1: np.ndarray) -> np.ndarray:
        m = cond_x1.shape[0]
        return np.column_stack([np.ones(m), np.full(m, self.t), cond_x1])

    def _logistic_true_part(self) -> np.ndarray:
        z, w = _rule(self.true_var, self.nodes)
        eta = self.true_mean + math.sqrt(self.true_var) * z
        f = special.expit(eta)
        ef, edf = float(w @ f), float(w @ (f * (1.0 - f)))
        return np.concatenate([[ef, self.t * ef], self.nu1 * ef + self.cross_true * edf])

    def moments(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``E[Z w (F(eta) - F(eta*))]`` and the information ``-E[Z Z' w F'(eta*)]``."""
        beta1s = theta[2:]
        fit_mean = theta[0] + theta[1] * self.t + float(beta1s @ self.nu1)
        cross_fit = self.omega11 @ beta1s  # Cov(X1, eta*)
        fit_var = float(beta1s @ cross_fit)
        z, wts = _rule(fit_var, self.nodes)
        sd = math.sqrt(fit_var) if fit_var > 0.0 else 0.0
        eta_fit = fit_mean + sd * z
        # Cov(X1, z) for the standardised fitted predictor
        gain = cross_fit / sd if sd > 0.0 else np.zeros(self.p)
        cond_x1 = self.nu1 + np.outer(z, gain)
        zrow = self._zrow(cond_x1)
        f_fit, df_fit, w = _fit_terms(eta_fit, self.link)

        if self.link == "logistic":
            resid = self._true_part - zrow.T @ (wts * f_fit)
        else:
            # eta | eta*: mean a + b z, variance s2
            b = float(beta1s @ self.cross_true) / sd if sd > 0.0 else 0.0
            s2 = max(0.0, self.true_var - b * b)
            root = math.sqrt(1.0 + s2)
            arg = (self.true_mean + b * z) / root
            g_cdf = special.ndtr(arg)
            g_pdf = np.exp(-0.5 * arg * arg) / (math.sqrt(2.0 * math.pi) * root)
            # Cov(X1, eta | eta*)
            cross_cond = self.cross_true - gain * b
            resid = zrow.T @ (wts * w * (g_cdf - f_fit))
            if self.p:
                resid[2:] += cross_cond * float(wts @ (w * g_pdf))

        h = wts * w * df_fit
        info = -(zrow * h[:, None]).T @ zrow
        if self.p:
            info[2:, 2:] -= (self.omega11 - np.outer(gain, gain)) * float(h.sum())
        return resid, info


def expected_score(
    model: TrueModel, cov: CovariateModel, theta, nodes: int = DEFAULT_NODES
) -> tuple[np.ndarray, np.ndarray]:
    """Expected reduced-model score at ``theta = (mu*, alpha*, beta1*)`` and its Jacobian.

    The Jacobian is exact for the logistic link. For probit it omits the
    term carrying the derivative of the score weight, which vanishes at the
    root when the reduced model is correct and is small otherwise.
    """
    theta = np.asarray(theta, dtype=float)
    return _Scorer(model, cov, nodes)(theta)


class _Scorer:
    def __init__(self, model: TrueModel, cov: CovariateModel, nodes: int) -> None:
        self.arms = [
            (cov.p_treat, _Arm(model, cov, 1.0, nodes)),
            (1.0 - cov.p_treat, _Arm(model, cov, -1.0, nodes)),
        ]
        self.size = cov.p + 2

    def __call__(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        resid = np.zeros(self.size)
        jac = np.zeros((self.size, self.size))
        for prob, arm in self.arms:
            r, j = arm.moments(theta)
            resid += prob * r
            jac += prob * j
        return resid, jac


def _start(model: TrueModel, cov: CovariateModel) -> np.ndarray:
    lf = skew_normal_least_false(model, cov) if model.link == "logistic" else probit_least_false(model, cov)
    return np.concatenate([[lf.mu_star, lf.alpha_star], lf.beta1_star])


def quadrature_least_false(
    model: TrueModel,
    cov: CovariateModel,
    nodes: int = DEFAULT_NODES,
    *,
    law: str = "normal",
    tol: float = RESIDUAL_TOL,
    max_iter: int = 100,
    start=None,
) -> OracleResult:
    """Solve the expected score equations by damped Newton from the closed-form start.

    ``nodes`` is the minimum Gauss-Hermite order; it is raised automatically
    for widely spread linear predictors. Only Gaussian covariates are
    supported; other laws go through ``monte_carlo_least_false``. ``start``
    overrides the closed-form starting point.
    """
    if law != "normal":
        raise ContractError(
            f"quadrature oracle assumes Gaussian covariates, got law={law!r}; use monte_carlo_least_false"
        )
    if model.binary_block is not None:
        raise ContractError("quadrature oracle does not model a binary covariate; use monte_carlo_least_false")
    if nodes < 20:
        raise ContractError(f"need at least 20 quadrature nodes, got {nodes}")
    model.check_against(cov)
    scorer = _Scorer(model, cov, nodes)
    theta = _start(model, cov) if start is None else np.array(start, dtype=float)
    if theta.shape != (cov.p + 2,):
        raise ContractError(f"start must have length p+2={cov.p + 2}")
    resid, jac = scorer(theta)
    norm = float(np.max(np.abs(resid)))
    iterations = 0
    while norm >= tol:
        if iterations >= max_iter:
            raise ConvergenceError(f"Newton stopped after {max_iter} iterations, residual {norm:.3e}", norm)
        iterations += 1
        try:
            step = np.linalg.solve(jac, -resid)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"singular Jacobian at residual {norm:.3e}", norm) from exc
        scale = 1.0
        while True:
            trial = theta + scale * step
            t_resid, t_jac = scorer(trial)
            t_norm = float(np.max(np.abs(t_resid)))
            if t_norm < norm or scale < 1e-6:
                break
            scale *= 0.5
        if t_norm >= norm:
            raise ConvergenceError(f"line search failed at residual {norm:.3e}", norm)
        theta, resid, jac, norm = trial, t_resid, t_jac, t_norm
    lf = LeastFalse(float(theta[0]), float(theta[1]), theta[2:].copy(), "quadrature_oracle", model.link)
    return OracleResult(lf, None, nodes, {"iterations": iterations, "residual": norm, "min_nodes": nodes})
