"""Mayo Clinic primary biliary cirrhosis (PBC) trial case study.

Reads the published PBC data (the layout distributed with R's ``survival``
package, or any delimited file with equivalent column names), fits the full
logistic model for end-of-study mortality and computes how the attenuation
radical shrinks as covariates are added one at a time.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .covariates import CovariateModel, attenuation_radical
from .errors import ContractError
from .glm import Dataset, FitResult, fit

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "nan", ".", "?"})

# canonical field -> accepted header spellings (compared case-insensitively)
_ALIASES: dict[str, tuple[str, ...]] = {
    "id": ("id", "rownames", "case", "patient"),
    "status": ("status",),
    "treatment": ("trt", "treatment", "rx", "drug"),
    "bilirubin": ("bili", "bilirubin"),
    "cholesterol": ("chol", "cholesterol"),
    "albumin": ("albumin", "alb"),
    "copper": ("copper", "urine_copper", "cu"),
    "alk_phos": ("alk.phos", "alk_phos", "alkphos", "alkaline_phosphatase", "alp", "ap"),
}
_REQUIRED = ("status", "treatment", "bilirubin", "cholesterol", "albumin", "copper", "alk_phos")

COVARIATES = ("bilirubin", "cholesterol", "albumin", "copper", "alk_phos")
COVARIATE_LABELS = ("log bilirubin", "log cholesterol", "albumin", "log copper", "log AP")
_LOGGED = (True, True, False, True, True)
POLICIES = ("complete_case", "mean_impute")

#: status code -> end-of-study death indicator (0 censored, 1 transplant, 2 dead)
DEFAULT_OUTCOME: dict[int, int] = {0: 0, 1: 0, 2: 1}

_TREATMENT_CODES = {
    "1": "penicillamine",
    "d-penicillamine": "penicillamine",
    "penicillamine": "penicillamine",
    "2": "placebo",
    "placebo": "placebo",
}


@dataclass(frozen=True)
class PbcRecord:
    id: str
    treatment: str
    status: int
    bilirubin: float | None
    cholesterol: float | None
    albumin: float | None
    copper: float | None
    alk_phos: float | None

    @property
    def randomized(self) -> bool:
        return self.treatment != "not_randomized"


def _number(token: str, line: int, column: str) -> float | None:
    token = token.strip()
    if token.lower() in MISSING_TOKENS:
        return None
    try:
        value = float(token)
    except ValueError:
        raise ContractError(f"line {line}: column {column!r} is not numeric: {token!r}") from None
    if not math.isfinite(value):
        raise ContractError(f"line {line}: column {column!r} is not finite: {token!r}")
    return value


def _treatment(token: str, line: int) -> str:
    token = token.strip().strip('"').lower()
    if token in MISSING_TOKENS:
        return "not_randomized"
    if token.endswith(".0"):
        token = token[:-2]
    try:
        return _TREATMENT_CODES[token]
    except KeyError:
        raise ContractError(f"line {line}: unrecognised treatment code {token!r}") from None


def _resolve_columns(header: Sequence[str]) -> dict[str, int]:
    lowered = [h.strip().strip('"').lower() for h in header]
    columns: dict[str, int] = {}
    for name, spellings in _ALIASES.items():
        for spelling in spellings:
            if spelling in lowered:
                columns[name] = lowered.index(spelling)
                break
    missing = [name for name in _REQUIRED if name not in columns]
    if missing:
        raise ContractError(f"PBC file lacks required column(s): {', '.join(missing)}; header was {header}")
    return columns


def _split_rows(text: str) -> list[list[str]]:
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip()), "")
    if "," in first:
        return list(csv.reader(lines))
    if "\t" in first:
        return list(csv.reader(lines, delimiter="\t"))
    return [ln.split() for ln in lines]


def load_pbc(path: str | Path) -> list[PbcRecord]:
    """Parse a delimited PBC file with a header row (comma, tab or whitespace).

    Missing values may be empty or one of ``NA``, ``NaN``, ``.``, ``?``.
    Treatment codes: 1 = penicillamine, 2 = placebo, missing = not randomized.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = _split_rows(text)
    nonblank = [(i + 1, row) for i, row in enumerate(rows) if any(cell.strip() for cell in row)]
    if not nonblank:
        raise ContractError(f"{path}: empty file, expected a header row and PBC records")
    _, header = nonblank[0]
    columns = _resolve_columns(header)
    records = []
    for line, row in nonblank[1:]:
        if len(row) != len(header):
            raise ContractError(f"line {line}: expected {len(header)} fields, found {len(row)}")
        status = _number(row[columns["status"]], line, "status")
        if status is None or status != int(status):
            raise ContractError(f"line {line}: status must be an integer code, got {row[columns['status']]!r}")
        rec_id = row[columns["id"]].strip().strip('"') if "id" in columns else str(line)
        records.append(
            PbcRecord(
                id=rec_id,
                treatment=_treatment(row[columns["treatment"]], line),
                status=int(status),
                **{name: _number(row[columns[name]], line, name) for name in COVARIATES},
            )
        )
    if not records:
        raise ContractError(f"{path}: header found but no records")
    counts = missingness(records)
    log.info("loaded %d PBC records (%d randomized); missing: %s", len(records), counts["randomized"], counts)
    return records


def randomized(records: Sequence[PbcRecord]) -> list[PbcRecord]:
    return [r for r in records if r.randomized]


def missingness(records: Sequence[PbcRecord]) -> dict[str, int]:
    """Record counts plus per-covariate missing counts among randomized records."""
    trial = randomized(records)
    out = {"records": len(records), "randomized": len(trial), "not_randomized": len(records) - len(trial)}
    for name in COVARIATES:
        out[name] = sum(getattr(r, name) is None for r in trial)
    return out


@dataclass(frozen=True)
class AnalysisData:
    """Randomized patients after transformation and missing-data handling."""

    ids: list[str]
    treatment: np.ndarray  # +1 penicillamine, -1 placebo
    status: np.ndarray
    covariates: np.ndarray  # columns in COVARIATES order, logs base 10 except albumin
    policy: str
    excluded: int
    imputed: dict[str, int] = field(default_factory=dict)


def transform_covariates(records: Sequence[PbcRecord], policy: str = "complete_case") -> AnalysisData:
    """Log10-transform every covariate except albumin and apply the missing-data policy."""
    if policy not in POLICIES:
        raise ContractError(f"missing-data policy must be one of {POLICIES}, got {policy!r}")
    trial = randomized(records)
    if len(trial) != len(records):
        raise ContractError("transform_covariates expects randomized records only; filter with randomized()")
    rows = []
    for rec in trial:
        values = []
        for name, logged in zip(COVARIATES, _LOGGED):
            value = getattr(rec, name)
            if value is not None and logged:
                if value <= 0:
                    raise ContractError(f"record {rec.id}: {name} = {value} cannot be log-transformed")
                value = math.log10(value)
            values.append(np.nan if value is None else value)
        rows.append(values)
    x = np.array(rows, dtype=float).reshape(len(trial), len(COVARIATES))
    missing = np.isnan(x)
    imputed: dict[str, int] = {}
    if policy == "complete_case":
        keep = ~missing.any(axis=1)
    else:
        keep = np.ones(len(trial), dtype=bool)
        means = np.nanmean(x, axis=0)
        for j, name in enumerate(COVARIATES):
            if missing[:, j].any():
                imputed[name] = int(missing[:, j].sum())
                x[missing[:, j], j] = means[j]
    kept = [rec for rec, k in zip(trial, keep) if k]
    return AnalysisData(
        ids=[r.id for r in kept],
        treatment=np.array([1.0 if r.treatment == "penicillamine" else -1.0 for r in kept]),
        status=np.array([r.status for r in kept], dtype=int),
        covariates=x[keep],
        policy=policy,
        excluded=int((~keep).sum()),
        imputed=imputed,
    )


@dataclass(frozen=True)
class CaseStudy:
    beta: np.ndarray
    alpha: float
    intercept: float
    omega: np.ndarray
    correlations: np.ndarray
    q_tilde_ladder: list[tuple[str, float]]
    alpha_unadjusted: float
    n: int
    policy: str
    missingness: dict[str, Any]
    fit: FitResult

    def report(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "policy": self.policy,
            "missingness": self.missingness,
            "covariates": list(COVARIATE_LABELS),
            "beta": self.beta.tolist(),
            "alpha": self.alpha,
            "intercept": self.intercept,
            "alpha_unadjusted": self.alpha_unadjusted,
            "omega": self.omega.tolist(),
            "correlations": self.correlations.tolist(),
            "q_tilde_ladder": [{"included": label, "q_tilde": value} for label, value in self.q_tilde_ladder],
            "fit": {
                "iterations": self.fit.iterations,
                "converged": self.fit.converged,
                "max_score": self.fit.max_score,
                "log_likelihood": self.fit.log_likelihood,
            },
        }


def outcome_vector(status: np.ndarray, outcome_def: Mapping[int, int]) -> np.ndarray:
    unknown = sorted(set(status.tolist()) - set(outcome_def))
    if unknown:
        raise ContractError(f"status code(s) {unknown} have no entry in the outcome definition")
    return np.array([outcome_def[s] for s in status.tolist()], dtype=float)


def q_tilde_ladder(beta: np.ndarray, omega: np.ndarray) -> list[tuple[str, float]]:
    """Attenuation radical for the nested models None, +1st, ..., +4th covariate.

    At step ``k`` the first ``k`` covariates are fitted and the rest omitted.
    """
    k_total = len(beta)
    ladder = []
    for k in range(k_total):
        cov = CovariateModel.randomized(omega, p=k)
        label = "None" if k == 0 else f"+ {COVARIATE_LABELS[k - 1]}"
        ladder.append((label, attenuation_radical(cov, beta[k:], "logistic")))
    return ladder


def pbc_case_study(
    records: Sequence[PbcRecord],
    outcome_def: Mapping[int, int] | None = None,
    policy: str = "complete_case",
) -> CaseStudy:
    """Full-model fit, covariate dispersion and the nested ``q~`` ladder."""
    outcome_def = DEFAULT_OUTCOME if outcome_def is None else outcome_def
    counts = missingness(records)
    data = transform_covariates(randomized(records), policy)
    y = outcome_vector(data.status, outcome_def)
    n = len(y)
    design = np.column_stack([np.ones(n), data.treatment, data.covariates])
    full = fit(Dataset(y, design), "logistic")
    unadjusted = fit(Dataset(y, design[:, :2]), "logistic")
    omega = np.cov(data.covariates, rowvar=False, ddof=1)
    sd = np.sqrt(np.diag(omega))
    beta = full.coefficients[2:]
    counts = {**counts, "excluded": data.excluded, "imputed": data.imputed}
    return CaseStudy(
        beta=beta,
        alpha=float(full.coefficients[1]),
        intercept=float(full.coefficients[0]),
        omega=omega,
        correlations=omega / np.outer(sd, sd),
        q_tilde_ladder=q_tilde_ladder(beta, omega),
        alpha_unadjusted=float(unadjusted.coefficients[1]),
        n=n,
        policy=policy,
        missingness=counts,
        fit=full,
    )
