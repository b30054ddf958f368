"""Scenario grids for the three published comparison tables, and the published values.

Each table is a list of :class:`Cell` objects. :func:`table_rows` evaluates
every applicable method for every cell and returns long-format rows.

Covariates are Normal (or t / partly log-Normal in table 3) with zero mean,
unit variance and pairwise correlation 1/2; ``beta`` is shared by every
covariate coefficient.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .bias import (
    gail_least_false_alpha,
    neuhaus_least_false_alpha,
    probit_least_false,
    probit_neuhaus_hprime,
    skew_normal_least_false,
)
from .covariates import CovariateModel, TrueModel
from .oracle import CovariateLaw, ScenarioSpec, monte_carlo_least_false, quadrature_least_false

DEFAULT_SEED = 20240611
DESK_N = 200_000
PAPER_N = 2_000_000

CSV_FIELDS = (
    "table",
    "block",
    "column",
    "p",
    "q",
    "link",
    "mu",
    "alpha",
    "beta",
    "law",
    "method",
    "value",
    "std_error",
    "published",
)


@dataclass(frozen=True)
class Cell:
    table: int
    block: str
    column: str
    p: int
    q: int
    link: str
    mu: float
    alpha: float
    beta: float
    law: CovariateLaw = field(default_factory=CovariateLaw)
    published: dict[str, float] = field(default_factory=dict, compare=False, hash=False)

    def models(self) -> tuple[TrueModel, CovariateModel]:
        model = TrueModel(self.link, self.mu, self.alpha, [self.beta] * self.p, [self.beta] * self.q)
        return model, CovariateModel.equicorrelated(self.p, self.q)

    @property
    def is_gaussian(self) -> bool:
        return self.law.kind == "normal"


_AB_BLOCKS = ((0.5, 0.5), (1.5, 0.5), (0.5, 2.0), (1.5, 2.0))


def _ab_label(alpha: float, beta: float) -> str:
    return f"alpha={alpha:g} beta={beta:g}"


# Table 1: rows of published values per (alpha, beta) block, columns p/q layouts.
_T1_LAYOUTS = ((0, 2), (1, 1), (2, 3))
_T1_PUBLISHED = {
    "numerical": ((0.433, 0.482, 0.308), (1.307, 1.447, 1.328), (0.206, 0.347, 0.227), (0.619, 1.045, 0.677)),
    "skew_normal": ((0.446, 0.485, 0.330), (1.337, 1.454, 1.337), (0.220, 0.350, 0.220), (0.661, 1.051, 0.661)),
    "gail": ((0.408,), (1.262,), (-0.970,), (-2.311,)),
    "neuhaus": ((0.434, 0.481, 0.309), (1.302, 1.442, 1.302), (0.202, 0.330, 0.202), (0.605, 0.990, 0.605)),
}


def table1_cells() -> list[Cell]:
    """Table 1: mu = 0, logistic, three covariate layouts per (alpha, beta) block.

    The published third column of the first block (0.308 / 0.330 / 0.309)
    is reproduced by all five covariates omitted (p = 0, q = 5), not by the
    p = 2, q = 3 layout used in the other blocks; that cell uses p = 0, q = 5.
    """
    cells = []
    for b, (alpha, beta) in enumerate(_AB_BLOCKS):
        for j, (p, q) in enumerate(_T1_LAYOUTS):
            if b == 0 and j == 2:
                p, q = 0, 5
            published = {
                method: rows[b][j] for method, rows in _T1_PUBLISHED.items() if j < len(rows[b])
            }
            cells.append(Cell(1, _ab_label(alpha, beta), f"p={p} q={q}", p, q, "logistic", 0.0, alpha, beta,
                              published=published))
    return cells


_T2_BLOCKS = ((0, 2, 0.5), (0, 2, 2.0), (2, 3, 0.5))
_T2_PUBLISHED = {
    "numerical": (
        (0.433, 0.455, 0.488, 0.378, 0.377, 0.372),
        (0.207, 0.213, 0.231, 0.139, 0.138, 0.140),
        (0.437, 0.445, 0.458, 0.378, 0.378, 0.379),
    ),
    "skew_normal": (
        (0.446, 0.446, 0.446, 0.378, 0.378, 0.378),
        (0.220, 0.220, 0.220, 0.139, 0.139, 0.139),
        (0.446, 0.446, 0.446, 0.378, 0.378, 0.378),
    ),
    "gail": (
        (0.408, 0.460, 0.493, 0.313, 0.313, 0.313),
        (-0.971, -0.139, 0.390, -2.50, -2.50, -2.50),
        (),
    ),
    "neuhaus": (
        (0.434, 0.452, 0.482, 0.378, 0.378, 0.378),
        (0.202, 0.208, 0.227, 0.139, 0.139, 0.139),
        (0.434, 0.452, 0.482, 0.378, 0.378, 0.378),
    ),
}


def table2_cells() -> list[Cell]:
    """Table 2: alpha = 0.5, logistic and probit, mu in {0, 2, 4}."""
    cells = []
    for b, (p, q, beta) in enumerate(_T2_BLOCKS):
        block = f"p={p} q={q} beta={beta:g}"
        for j, (link, mu) in enumerate((lk, m) for lk in ("logistic", "probit") for m in (0.0, 2.0, 4.0)):
            published = {
                method: rows[b][j] for method, rows in _T2_PUBLISHED.items() if len(rows[b]) > j
            }
            cells.append(Cell(2, block, f"{link} mu={mu:g}", p, q, link, mu, 0.5, beta, published=published))
    return cells


_T3_LAWS = (
    CovariateLaw("student_t", df=4),
    CovariateLaw("lognormal", mask=(True, False)),
    CovariateLaw("lognormal", mask=(False, True)),
    CovariateLaw("lognormal", mask=(True, True)),
)
_T3_NUMERICAL = (
    (0.484, 1.456, 0.376, 1.129),
    (0.479, 1.441, 0.352, 1.061),
    (0.488, 1.460, 0.403, 1.194),
    (0.481, 1.452, 0.375, 1.131),
)
_T3_SKEW_NORMAL = (0.485, 1.454, 0.350, 1.051)
_T3_NEUHAUS = (0.481, 1.442, 0.330, 0.990)


def table3_cells() -> list[Cell]:
    """Table 3: one fitted and one omitted covariate under non-Normal laws, mu = 0."""
    cells = []
    for i, law in enumerate(_T3_LAWS):
        for j, (alpha, beta) in enumerate(_AB_BLOCKS):
            published = {
                "numerical": _T3_NUMERICAL[i][j],
                "skew_normal": _T3_SKEW_NORMAL[j],
                "neuhaus": _T3_NEUHAUS[j],
            }
            cells.append(Cell(3, law.label, _ab_label(alpha, beta), 1, 1, "logistic", 0.0, alpha, beta, law,
                              published=published))
    return cells


TABLES = {1: table1_cells, 2: table2_cells, 3: table3_cells}


def cell_seed(base_seed: int, table: int, index: int) -> int:
    """Independent 64-bit seed for one cell, derived from the run seed."""
    state = np.random.SeedSequence(base_seed, spawn_key=(table, index)).generate_state(1, dtype=np.uint64)
    return int(state[0])


def closed_form_values(cell: Cell) -> dict[str, float]:
    """Treatment-effect limits from every closed-form method applicable to the cell."""
    model, cov = cell.models()
    out: dict[str, float] = {}
    if cell.link == "logistic":
        out["skew_normal"] = skew_normal_least_false(model, cov).alpha_star
        if cov.p == 0:
            out["gail"] = gail_least_false_alpha(model, cov).alpha_star
        out["neuhaus"] = neuhaus_least_false_alpha(model, cov).alpha_star
    else:
        out["skew_normal"] = probit_least_false(model, cov).alpha_star
        if cov.p == 0:
            out["gail"] = gail_least_false_alpha(model, cov).alpha_star
        out["neuhaus"] = model.alpha * probit_neuhaus_hprime(model, cov)
    return out


def _row(cell: Cell, method: str, value: float, std_error: float | None) -> dict[str, Any]:
    return {
        "table": cell.table,
        "block": cell.block,
        "column": cell.column,
        "p": cell.p,
        "q": cell.q,
        "link": cell.link,
        "mu": cell.mu,
        "alpha": cell.alpha,
        "beta": cell.beta,
        "law": cell.law.label,
        "method": method,
        "value": value,
        "std_error": std_error,
        "published": cell.published.get(method),
    }


def cell_rows(cell: Cell, index: int, n: int, seed: int, simulate: bool = True) -> list[dict[str, Any]]:
    rows = []
    model, cov = cell.models()
    if simulate:
        spec = ScenarioSpec(model, cov, cell.law, n, cell_seed(seed, cell.table, index))
        mc = monte_carlo_least_false(spec)
        rows.append(_row(cell, "numerical", mc.least_false.alpha_star, float(mc.mc_std_error[1])))
    if cell.is_gaussian:
        quad = quadrature_least_false(model, cov)
        rows.append(_row(cell, "quadrature", quad.least_false.alpha_star, None))
    for method, value in closed_form_values(cell).items():
        rows.append(_row(cell, method, value, None))
    return rows


def _cell_job(args: tuple[Cell, int, int, int, bool]) -> list[dict[str, Any]]:
    return cell_rows(*args)


def table_rows(
    which: int, n: int = DESK_N, seed: int = DEFAULT_SEED, simulate: bool = True, workers: int = 1
) -> list[dict[str, Any]]:
    """Long-format rows for one table; order is fixed regardless of ``workers``."""
    cells = TABLES[which]()
    jobs = [(cell, i, n, seed, simulate) for i, cell in enumerate(cells)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_cell_job, jobs))
    else:
        chunks = [_cell_job(job) for job in jobs]
    return [row for chunk in chunks for row in chunk]


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Iterable[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in rows:
        writer.writerow([_fmt(row[key]) for key in CSV_FIELDS])
    return buf.getvalue()
