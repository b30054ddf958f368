"""Covariate laws, true outcome models and the conditional-dispersion algebra.

Covariates ``X = (X1, X2)`` are split into ``p`` fitted and ``q`` omitted
coordinates. Conditional on treatment arm ``T = t`` the covariates have mean
``nu_t`` and a dispersion ``omega`` common to both arms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import numpy as np
from scipy import linalg

from .errors import ContractError, NumericalError
from .specfun import PROBIT_LOGIT_C2

Link = Literal["logistic", "probit"]
LINKS: tuple[str, ...] = ("logistic", "probit")

_PIVOT_RATIO = 1e-12
_SYM_TOL = 1e-10


def _vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ContractError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def check_link(link: str) -> str:
    if link not in LINKS:
        raise ContractError(f"link must be one of {LINKS}, got {link!r}")
    return link


@dataclass(frozen=True)
class CovariateModel:
    """Arm-wise covariate means and a common dispersion matrix.

    The first ``p`` coordinates are fitted, the last ``q`` omitted.
    """

    nu_plus: np.ndarray
    nu_minus: np.ndarray
    omega: np.ndarray
    p: int
    q: int
    p_treat: float = 0.5

    def __post_init__(self) -> None:
        p, q = int(self.p), int(self.q)
        if p < 0 or q < 1:
            raise ContractError(f"need p >= 0 and q >= 1, got p={p}, q={q}")
        k = p + q
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        nu_plus = _vector(self.nu_plus, "nu_plus")
        nu_minus = _vector(self.nu_minus, "nu_minus")
        for name, nu in (("nu_plus", nu_plus), ("nu_minus", nu_minus)):
            if nu.shape != (k,):
                raise ContractError(f"{name} has length {nu.size}, expected p+q={k}")
        omega = np.array(self.omega, dtype=float)
        if omega.shape != (k, k):
            raise ContractError(f"omega has shape {omega.shape}, expected ({k}, {k})")
        if not np.all(np.isfinite(omega)):
            raise ContractError("omega must be finite")
        scale = max(1.0, float(np.max(np.abs(omega))))
        if np.max(np.abs(omega - omega.T)) > _SYM_TOL * scale:
            raise ContractError("omega must be symmetric")
        omega = 0.5 * (omega + omega.T)
        if np.min(np.linalg.eigvalsh(omega)) < -1e-10 * scale:
            raise ContractError("omega must be positive semi-definite")
        omega.setflags(write=False)
        if not 0.0 < float(self.p_treat) < 1.0:
            raise ContractError(f"p_treat must lie in (0, 1), got {self.p_treat}")
        object.__setattr__(self, "nu_plus", nu_plus)
        object.__setattr__(self, "nu_minus", nu_minus)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "p_treat", float(self.p_treat))

    @classmethod
    def randomized(cls, omega, p: int, nu=None) -> CovariateModel:
        """Randomized trial: equal arm means and ``Pr(T = +1) = 1/2``."""
        omega = np.asarray(omega, dtype=float)
        nu = np.zeros(omega.shape[0]) if nu is None else np.asarray(nu, dtype=float)
        q = omega.shape[0] - p
        return cls(nu_plus=nu, nu_minus=nu, omega=omega, p=p, q=q, p_treat=0.5)

    @classmethod
    def equicorrelated(cls, p: int, q: int, rho: float = 0.5, var: float = 1.0) -> CovariateModel:
        """Zero-mean randomized design with common variance and correlation."""
        k = p + q
        omega = var * ((1.0 - rho) * np.eye(k) + rho * np.ones((k, k)))
        return cls.randomized(omega, p)

    @property
    def is_randomized(self) -> bool:
        return bool(np.array_equal(self.nu_plus, self.nu_minus))

    @property
    def nu_mean(self) -> np.ndarray:
        """Marginal covariate mean, pooled over arms."""
        return self.p_treat * self.nu_plus + (1.0 - self.p_treat) * self.nu_minus

    @property
    def omega11(self) -> np.ndarray:
        return self.omega[: self.p, : self.p]

    @property
    def omega12(self) -> np.ndarray:
        return self.omega[: self.p, self.p :]

    @property
    def omega21(self) -> np.ndarray:
        return self.omega[self.p :, : self.p]

    @property
    def omega22(self) -> np.ndarray:
        return self.omega[self.p :, self.p :]

    def regression_of_omitted(self) -> np.ndarray:
        """``Omega11^{-1} Omega12`` (p x q); empty when nothing is fitted."""
        if self.p == 0:
            return np.zeros((0, self.q))
        return linalg.cho_solve(_checked_cholesky(self.omega11), self.omega12)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nu_plus": self.nu_plus.tolist(),
            "nu_minus": self.nu_minus.tolist(),
            "omega": self.omega.tolist(),
            "p": self.p,
            "q": self.q,
            "p_treat": self.p_treat,
        }


def _checked_cholesky(block: np.ndarray) -> tuple[np.ndarray, bool]:
    """Cholesky factor of the fitted-covariate block, failing on tiny pivots."""
    try:
        factor = linalg.cho_factor(block, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Omega11 (fitted-covariate block) is not positive definite: {exc}") from exc
    pivots = np.diag(factor[0]) ** 2
    if pivots.min() < _PIVOT_RATIO * pivots.max():
        raise NumericalError(
            f"Omega11 (fitted-covariate block) is numerically singular: "
            f"pivot ratio {pivots.min() / pivots.max():.3e} < {_PIVOT_RATIO:g}"
        )
    return factor


def conditional_dispersion(model: CovariateModel) -> np.ndarray:
    """Dispersion of the omitted covariates given the fitted ones.

    The Schur complement ``Omega22 - Omega21 Omega11^{-1} Omega12``.
    """
    if model.p == 0:
        return np.array(model.omega22, copy=True)
    cond = model.omega22 - model.omega21 @ model.regression_of_omitted()
    return 0.5 * (cond + cond.T)


def omitted_quadratic_form(model: CovariateModel, beta2) -> float:
    """``beta2' Omega~ beta2``, the variance of the omitted linear predictor given X1."""
    beta2 = _vector(beta2, "beta2")
    if beta2.shape != (model.q,):
        raise ContractError(f"beta2 has length {beta2.size}, expected q={model.q}")
    return max(0.0, float(beta2 @ conditional_dispersion(model) @ beta2))


def radical_from_quadratic(v: float, link: str) -> float:
    scale = PROBIT_LOGIT_C2 if check_link(link) == "logistic" else 1.0
    return float(np.sqrt(1.0 + scale * v))


def attenuation_radical(model: CovariateModel, beta2, link: str = "logistic") -> float:
    """``sqrt(1 + c^2 beta2' Omega~ beta2)`` (logistic) or ``sqrt(1 + beta2' Omega~ beta2)`` (probit)."""
    return radical_from_quadratic(omitted_quadratic_form(model, beta2), link)


@dataclass(frozen=True)
class BinaryBlock:
    """A non-treatment binary covariate ``B`` in {-1, +1}.

    ``nu_b_plus``/``nu_b_minus`` are the covariate means given ``B = +1``/``-1``.
    """

    gamma: float
    theta: float
    nu_b_plus: np.ndarray
    nu_b_minus: np.ndarray

    def __post_init__(self) -> None:
        if not 0.0 < float(self.theta) < 1.0:
            raise ContractError(f"theta = Pr(B=+1) must lie in (0, 1), got {self.theta}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "nu_b_plus", _vector(self.nu_b_plus, "nu_b_plus"))
        object.__setattr__(self, "nu_b_minus", _vector(self.nu_b_minus, "nu_b_minus"))

    def to_dict(self) -> dict[str, Any]:
        return {
            "gamma": self.gamma,
            "theta": self.theta,
            "nu_b_plus": self.nu_b_plus.tolist(),
            "nu_b_minus": self.nu_b_minus.tolist(),
        }


@dataclass(frozen=True)
class TrueModel:
    """Outcome model ``Pr(Y=1) = F(mu + alpha T [+ gamma B] + beta1'X1 + beta2'X2)``."""

    link: str
    mu: float
    alpha: float
    beta1: np.ndarray
    beta2: np.ndarray
    binary_block: BinaryBlock | None = field(default=None)

    def __post_init__(self) -> None:
        check_link(self.link)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "alpha", float(self.alpha))
        beta1 = np.asarray(self.beta1, dtype=float).reshape(-1)
        object.__setattr__(self, "beta1", _vector(beta1, "beta1") if beta1.size else _empty())
        object.__setattr__(self, "beta2", _vector(self.beta2, "beta2"))

    @property
    def beta(self) -> np.ndarray:
        return np.concatenate([self.beta1, self.beta2])

    def check_against(self, cov: CovariateModel) -> None:
        if self.beta1.size != cov.p:
            raise ContractError(f"beta1 has length {self.beta1.size}, covariate model has p={cov.p}")
        if self.beta2.size != cov.q:
            raise ContractError(f"beta2 has length {self.beta2.size}, covariate model has q={cov.q}")
        if self.binary_block is not None:
            k = cov.p + cov.q
            for name in ("nu_b_plus", "nu_b_minus"):
                if getattr(self.binary_block, name).size != k:
                    raise ContractError(f"binary_block.{name} must have length p+q={k}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "link": self.link,
            "mu": self.mu,
            "alpha": self.alpha,
            "beta1": self.beta1.tolist(),
            "beta2": self.beta2.tolist(),
        }
        if self.binary_block is not None:
            out["binary_block"] = self.binary_block.to_dict()
        return out


def _empty() -> np.ndarray:
    arr = np.zeros(0)
    arr.setflags(write=False)
    return arr


_REQUIRED = ("omega", "p", "q", "link", "mu", "alpha", "beta1", "beta2")


def models_from_dict(data: dict[str, Any]) -> tuple[TrueModel, CovariateModel]:
    """Build ``(TrueModel, CovariateModel)`` from the scenario JSON layout.

    ``nu_plus``/``nu_minus`` default to zero vectors and ``p_treat`` to 1/2.
    Errors name the offending field.
    """
    if not isinstance(data, dict):
        raise ContractError("scenario must be a JSON object")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ContractError(f"missing required field(s): {', '.join(missing)}")
    try:
        omega = np.asarray(data["omega"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ContractError(f"field 'omega': {exc}") from exc
    if omega.ndim != 2:
        raise ContractError("field 'omega': must be an array of arrays (row-major)")
    k = omega.shape[0]
    try:
        cov = CovariateModel(
            nu_plus=data.get("nu_plus", np.zeros(k)),
            nu_minus=data.get("nu_minus", data.get("nu_plus", np.zeros(k))),
            omega=omega,
            p=int(data["p"]),
            q=int(data["q"]),
            p_treat=float(data.get("p_treat", 0.5)),
        )
        block = None
        if data.get("binary_block") is not None:
            bb = data["binary_block"]
            missing_bb = [key for key in ("gamma", "theta", "nu_b_plus", "nu_b_minus") if key not in bb]
            if missing_bb:
                raise ContractError(f"binary_block missing field(s): {', '.join(missing_bb)}")
            block = BinaryBlock(
                gamma=bb["gamma"], theta=bb["theta"], nu_b_plus=bb["nu_b_plus"], nu_b_minus=bb["nu_b_minus"]
            )
        model = TrueModel(
            link=data["link"],
            mu=data["mu"],
            alpha=data["alpha"],
            beta1=data["beta1"],
            beta2=data["beta2"],
            binary_block=block,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ContractError):
            raise
        raise ContractError(f"invalid scenario field: {exc}") from exc
    model.check_against(cov)
    return model, cov


def models_to_dict(model: TrueModel, cov: CovariateModel) -> dict[str, Any]:
    return {**cov.to_dict(), **model.to_dict()}


def load_models(path: str | Path) -> tuple[TrueModel, CovariateModel]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ContractError(f"{path}: not valid JSON ({exc})") from exc
    return models_from_dict(data)
