"""Seeded covariate generators: Normal, multivariate t and partly log-Normal.

Random numbers come from the counter-based Philox generator. Rows are
produced in fixed-size chunks and chunk ``i`` draws from the substream
``SeedSequence(seed, spawn_key=(i,))``, so output depends only on the seed and
never on how many workers generate chunks.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize

from ..covariates import CovariateModel, TrueModel, check_link, models_from_dict, models_to_dict
from ..errors import ContractError

CHUNK_ROWS = 1 << 16
#: log-scale variance giving exp(sigma W) unit variance: (e^s2 - 1) e^s2 = 1
LOGNORMAL_SIGMA2 = math.log((1.0 + math.sqrt(5.0)) / 2.0)
LAWS = ("normal", "student_t", "lognormal")


@dataclass(frozen=True)
class CovariateLaw:
    """Distribution family of the covariates around their arm means.

    ``student_t`` needs ``df > 2``; ``lognormal`` needs a boolean ``mask``
    marking the coordinates that are exponentiated and centred.
    """

    kind: str = "normal"
    df: float | None = None
    mask: tuple[bool, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in LAWS:
            raise ContractError(f"covariate law must be one of {LAWS}, got {self.kind!r}")
        if self.kind == "student_t":
            if self.df is None or not self.df > 2:
                raise ContractError(f"student_t law needs df > 2 for finite variance, got {self.df}")
            object.__setattr__(self, "df", float(self.df))
        if self.kind == "lognormal":
            if self.mask is None:
                raise ContractError("lognormal law needs a mask")
            object.__setattr__(self, "mask", tuple(bool(m) for m in self.mask))

    @property
    def label(self) -> str:
        if self.kind == "student_t":
            return f"student_t({self.df:g})"
        if self.kind == "lognormal":
            return "lognormal(" + "".join("L" if m else "N" for m in self.mask) + ")"
        return "normal"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.df is not None:
            out["df"] = self.df
        if self.mask is not None:
            out["mask"] = list(self.mask)
        return out

    @classmethod
    def from_obj(cls, obj: Any) -> CovariateLaw:
        if obj is None:
            return cls()
        if isinstance(obj, str):
            return cls(obj)
        if isinstance(obj, dict):
            unknown = set(obj) - {"kind", "df", "mask"}
            if unknown:
                raise ContractError(f"covariate_law: unknown field(s) {sorted(unknown)}")
            return cls(obj.get("kind", "normal"), obj.get("df"), obj.get("mask"))
        raise ContractError(f"covariate_law must be a string or object, got {type(obj).__name__}")


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything needed to reproduce one simulated experiment."""

    true_model: TrueModel
    cov: CovariateModel
    covariate_law: CovariateLaw = field(default_factory=CovariateLaw)
    n: int = 200_000
    seed: int = 0
    fitted_link: str | None = None

    def __post_init__(self) -> None:
        self.true_model.check_against(self.cov)
        if self.fitted_link is None:
            object.__setattr__(self, "fitted_link", self.true_model.link)
        check_link(self.fitted_link)
        if int(self.n) < 1:
            raise ContractError(f"n must be positive, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", int(self.seed))
        k = self.cov.p + self.cov.q
        if self.covariate_law.mask is not None and len(self.covariate_law.mask) != k:
            raise ContractError(f"lognormal mask has length {len(self.covariate_law.mask)}, expected p+q={k}")
        if self.true_model.binary_block is not None and not self.cov.is_randomized:
            raise ContractError("with a binary covariate, arm means must be equal; give means per B level instead")

    def to_dict(self) -> dict[str, Any]:
        return {
            **models_to_dict(self.true_model, self.cov),
            "covariate_law": self.covariate_law.to_dict(),
            "n": self.n,
            "seed": self.seed,
            "fitted_link": self.fitted_link,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioSpec:
        model, cov = models_from_dict(data)
        return cls(
            true_model=model,
            cov=cov,
            covariate_law=CovariateLaw.from_obj(data.get("covariate_law")),
            n=int(data.get("n", 200_000)),
            seed=int(data.get("seed", 0)),
            fitted_link=data.get("fitted_link"),
        )


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _lognormal_sd(s2: float) -> float:
    return math.sqrt(math.expm1(s2) * math.exp(s2))


def delivered_correlation(rho: float, log_i: bool, log_j: bool, s2: float = LOGNORMAL_SIGMA2) -> float:
    """Correlation of the transformed pair when the Gaussian pair has correlation ``rho``."""
    if log_i and log_j:
        return math.expm1(rho * s2) / math.expm1(s2)
    if log_i or log_j:
        return rho * math.sqrt(s2) * math.exp(0.5 * s2) / _lognormal_sd(s2)
    return rho


def gaussian_copula_correlation(target, mask) -> np.ndarray:
    """Gaussian correlation matrix whose transformed coordinates have correlation ``target``.

    Each off-diagonal entry is found by bracketing root search on
    :func:`delivered_correlation`.
    """
    target = np.asarray(target, dtype=float)
    k = target.shape[0]
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            goal = target[i, j]
            if not (mask[i] or mask[j]):
                out[i, j] = out[j, i] = goal
                continue

            def gap(r: float, i=i, j=j, goal=goal) -> float:
                return delivered_correlation(r, mask[i], mask[j]) - goal

            lo, hi = gap(-1.0), gap(1.0)
            if lo > 0 or hi < 0:
                reach = (delivered_correlation(-1.0, mask[i], mask[j]), delivered_correlation(1.0, mask[i], mask[j]))
                raise ContractError(
                    f"correlation {goal:.4f} between covariates {i} and {j} is not reachable "
                    f"under the log-Normal law (range {reach[0]:.4f} to {reach[1]:.4f})"
                )
            out[i, j] = out[j, i] = optimize.brentq(gap, -1.0, 1.0, xtol=1e-14, rtol=1e-14)
    try:
        np.linalg.cholesky(out)
    except np.linalg.LinAlgError as exc:
        raise ContractError("underlying Gaussian correlation matrix is not positive definite") from exc
    return out


class CovariateSampler:
    """Draws centred covariates with dispersion ``cov.omega`` under a given law."""

    def __init__(self, cov: CovariateModel, law: CovariateLaw) -> None:
        self.law = law
        self.k = cov.p + cov.q
        omega = np.asarray(cov.omega)
        sd = np.sqrt(np.diag(omega))
        self.info: dict[str, Any] = {"law": law.label}
        if law.kind == "lognormal":
            if np.any(sd == 0):
                raise ContractError("log-Normal coordinates need positive variance")
            corr = omega / np.outer(sd, sd)
            self.mask = np.array(law.mask, dtype=bool)
            gauss_corr = gaussian_copula_correlation(corr, law.mask)
            self.factor = np.linalg.cholesky(gauss_corr)
            self.sd = sd
            self.info["gaussian_correlation"] = gauss_corr.tolist()
        else:
            self.factor = _psd_factor(omega)
            if law.kind == "student_t":
                self.factor = self.factor * math.sqrt((law.df - 2.0) / law.df)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.k))
        if self.law.kind == "student_t":
            chi2 = rng.chisquare(self.law.df, size=n)
            return (z @ self.factor.T) / np.sqrt(chi2 / self.law.df)[:, None]
        x = z @ self.factor.T
        if self.law.kind == "lognormal":
            s2 = LOGNORMAL_SIGMA2
            logged = (np.exp(math.sqrt(s2) * x) - math.exp(0.5 * s2)) / _lognormal_sd(s2)
            x = np.where(self.mask, logged, x) * self.sd
        return x


def _psd_factor(omega: np.ndarray) -> np.ndarray:
    """``L`` with ``L L' = omega``; tolerates singular ``omega``."""
    try:
        return np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        lam, vec = np.linalg.eigh(omega)
        return vec * np.sqrt(np.clip(lam, 0.0, None))


def chunk_sizes(n: int) -> list[int]:
    full, rest = divmod(n, CHUNK_ROWS)
    return [CHUNK_ROWS] * full + ([rest] if rest else [])


def sample_covariates(spec: ScenarioSpec, n: int | None = None) -> np.ndarray:
    """``n`` centred covariate rows (mean zero, dispersion ``omega``) under the given law."""
    n = spec.n if n is None else int(n)
    sampler = CovariateSampler(spec.cov, spec.covariate_law)
    parts = [sampler.draw(chunk_generator(spec.seed, i), m) for i, m in enumerate(chunk_sizes(n))]
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, sampler.k))
