"""Least-false values by fitting the reduced model to a large simulated trial."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import special

from ..bias import LeastFalse
from ..covariates import CovariateModel, TrueModel
from ..errors import ContractError, NumericalError
from ..glm import Dataset, fit
from ..specfun import PROBIT_LOGIT_C, PROBIT_LOGIT_C2
from .quadrature import OracleResult
from .sampling import CovariateSampler, ScenarioSpec, chunk_generator, chunk_sizes

JACKKNIFE_BLOCKS = 20
MIN_N = 10_000


def _simulate_chunk(spec: ScenarioSpec, sampler: CovariateSampler, index: int, rows: int) -> dict[str, np.ndarray]:
    rng = chunk_generator(spec.seed, index)
    model, cov = spec.true_model, spec.cov
    x = sampler.draw(rng, rows)
    t = np.where(rng.random(rows) < cov.p_treat, 1.0, -1.0)
    block = model.binary_block
    if block is not None:
        b = np.where(rng.random(rows) < block.theta, 1.0, -1.0)
        x = x + np.where(b[:, None] > 0, block.nu_b_plus, block.nu_b_minus)
    else:
        b = None
        x = x + np.where(t[:, None] > 0, cov.nu_plus, cov.nu_minus)
    eta = model.mu + model.alpha * t + x @ model.beta
    if b is not None:
        eta = eta + block.gamma * b
    prob = special.expit(eta) if model.link == "logistic" else special.ndtr(eta)
    y = (rng.random(rows) < prob).astype(float)
    out = {"t": t, "x1": x[:, : cov.p], "y": y}
    if b is not None:
        out["b"] = b
    return out


def simulate(spec: ScenarioSpec, workers: int = 1) -> dict[str, np.ndarray]:
    """Simulated trial arrays ``t``, ``x1`` (fitted covariates), ``y`` and optionally ``b``.

    Chunks are generated from independent substreams and concatenated in
    chunk order, so the result does not depend on ``workers``.
    """
    sampler = CovariateSampler(spec.cov, spec.covariate_law)
    sizes = chunk_sizes(spec.n)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _simulate_chunk(spec, sampler, *a), enumerate(sizes)))
    else:
        parts = [_simulate_chunk(spec, sampler, i, m) for i, m in enumerate(sizes)]
    return {key: np.concatenate([part[key] for part in parts]) for key in parts[0]}


def reduced_design(data: dict[str, np.ndarray]) -> np.ndarray:
    """Columns ``(1, T[, B], X1)`` of the fitted model."""
    cols = [np.ones_like(data["t"]), data["t"]]
    if "b" in data:
        cols.append(data["b"])
    return np.column_stack(cols + [data["x1"]])


def _fit_or_raise(
    y: np.ndarray, design: np.ndarray, link: str, context: str, start: np.ndarray | None = None
) -> np.ndarray:
    try:
        result = fit(Dataset(y, design), link, start=start)
    except NumericalError as exc:
        raise type(exc)(f"{context}: {exc}") from exc
    if not result.converged:
        raise NumericalError(f"{context}: reduced-model fit did not converge (max score {result.max_score:.3e})")
    return result.coefficients


def monte_carlo_least_false(spec: ScenarioSpec, workers: int = 1) -> OracleResult:
    """Fit the reduced model to ``spec.n`` simulated rows.

    Standard errors come from a delete-one-block jackknife over 20
    contiguous blocks. Coefficients are ordered ``(mu, alpha[, gamma], beta1)``.
    """
    if spec.n < MIN_N:
        raise ContractError(f"Monte Carlo oracle needs n >= {MIN_N}, got {spec.n}")
    data = simulate(spec, workers)
    design = reduced_design(data)
    y = data["y"]
    link = spec.fitted_link
    context = f"scenario {spec.digest()[:12]}"
    full = _fit_or_raise(y, design, link, context)

    edges = np.linspace(0, spec.n, JACKKNIFE_BLOCKS + 1).astype(int)

    def leave_out(block: int) -> np.ndarray:
        keep = np.ones(spec.n, dtype=bool)
        keep[edges[block] : edges[block + 1]] = False
        # warm start from the full-data estimate; the replicate is a small perturbation of it
        return _fit_or_raise(y[keep], design[keep], link, f"{context} jackknife block {block}", full)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            replicates = np.array(list(pool.map(leave_out, range(JACKKNIFE_BLOCKS))))
    else:
        replicates = np.array([leave_out(b) for b in range(JACKKNIFE_BLOCKS)])
    centred = replicates - replicates.mean(axis=0)
    std_error = np.sqrt((JACKKNIFE_BLOCKS - 1) / JACKKNIFE_BLOCKS * np.sum(centred**2, axis=0))

    has_b = "b" in data
    offset = 3 if has_b else 2
    lf = LeastFalse(
        mu_star=float(full[0]),
        alpha_star=float(full[1]),
        beta1_star=full[offset:].copy(),
        method="monte_carlo_oracle",
        link=link,
        gamma_star=float(full[2]) if has_b else None,
    )
    t = data["t"]
    info = {
        "coefficients": full.tolist(),
        "outcome_rate_plus": float(y[t > 0].mean()),
        "outcome_rate_minus": float(y[t < 0].mean()),
        "law": spec.covariate_law.label,
        "seed": spec.seed,
    }
    return OracleResult(lf, std_error, spec.n, info)


def outcome_probability_check(model: TrueModel, cov: CovariateModel) -> tuple[float, float]:
    """Approximate ``Pr(Y = 1 | T = +1)`` and ``Pr(Y = 1 | T = -1)`` for Gaussian covariates.

    Exact for probit; uses ``expit(u) ~ Phi(c u)`` for logistic.
    """
    model.check_against(cov)
    beta = model.beta
    v = float(beta @ cov.omega @ beta)
    if model.link == "logistic":
        scale, root = PROBIT_LOGIT_C, np.sqrt(1.0 + PROBIT_LOGIT_C2 * v)
    else:
        scale, root = 1.0, np.sqrt(1.0 + v)
    plus = model.mu + model.alpha + float(beta @ cov.nu_plus)
    minus = model.mu - model.alpha + float(beta @ cov.nu_minus)
    return float(special.ndtr(scale * plus / root)), float(special.ndtr(scale * minus / root))
