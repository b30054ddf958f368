"""Command-line front end.

Subcommands::

    correct  SCENARIO.json   closed-form alpha* under every applicable method
    table    {1,2,3}         simulated, quadrature and closed-form columns as CSV
    figure1                  Owen's T correction factor curves against P
    pbc      DATA            primary biliary cirrhosis case study
    oracle   SCENARIO.json   quadrature or Monte Carlo least-false values

Exit codes: 0 success, 2 schema or contract error, 3 numerical failure, 4 I/O.
CSV output is deterministic; its run manifest goes to ``PATH.manifest.json``
when ``--out PATH`` is given and to stderr otherwise. JSON output embeds the
manifest.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bias import all_methods, figure1_curve
from .covariates import (
    TrueModel,
    attenuation_radical,
    load_models,
    models_to_dict,
    omitted_quadratic_form,
)
from .errors import ContractError, NumericalError
from .oracle import ScenarioSpec, monte_carlo_least_false, outcome_probability_check, quadrature_least_false
from .pbc import load_pbc, pbc_case_study
from .tables import DEFAULT_SEED, DESK_N, TABLES, rows_to_csv, table_rows

log = logging.getLogger("omitbias")

EXIT_OK, EXIT_CONTRACT, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
FIGURE1_DEFAULTS = (0.7, 0.8, 0.9, 0.95)

TABLE_HELP = """\
CSV layout (one row per cell and method, long format):
  table, block, column      position in the published table
  p, q, link, mu, alpha, beta, law
                            the scenario (every covariate coefficient equals beta;
                            covariates have unit variance and correlation 1/2)
  method                    numerical (Monte Carlo fit at --n rows), quadrature
                            (Gaussian cells only), skew_normal, gail (p = 0 only),
                            neuhaus
  value                     least-false treatment effect alpha*
  std_error                 jackknife standard error (numerical rows only)
  published                 value printed in the published table, if any
"""


@dataclass
class RunManifest:
    command: str
    scenario_digest: str
    seed: int | None
    version: str
    started: str
    elapsed_seconds: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _digest(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _sig4(x: float | None) -> str:
    return "-" if x is None else f"{x:.4g}"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class _Output:
    """Writes a payload plus its manifest to ``--out`` or stdout."""

    def __init__(self, args: argparse.Namespace, command: str) -> None:
        self.args = args
        self.command = command
        self.started = datetime.now(timezone.utc)
        self.clock = time.perf_counter()

    def manifest(self, digest: str, seed: int | None) -> RunManifest:
        return RunManifest(
            command=self.command,
            scenario_digest=digest,
            seed=seed,
            version=__version__,
            started=self.started.isoformat(timespec="seconds"),
            elapsed_seconds=round(time.perf_counter() - self.clock, 3),
        )

    def emit(self, text: str, manifest: RunManifest, embedded: bool) -> None:
        out = self.args.out
        if out is None:
            sys.stdout.write(text)
            if not embedded:
                sys.stderr.write(json.dumps(manifest.to_dict()) + "\n")
            return
        path = Path(out)
        path.write_text(text, encoding="utf-8")
        if not embedded:
            Path(f"{path}.manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")

    def emit_report(self, report: dict[str, Any], text: str, csv_text: str | None, digest: str, seed: int | None):
        fmt = self.args.format
        manifest = self.manifest(digest, seed)
        if fmt == "json":
            body = json.dumps({"manifest": manifest.to_dict(), **report}, indent=2, default=_jsonable) + "\n"
            self.emit(body, manifest, embedded=True)
        elif fmt == "csv" and csv_text is not None:
            self.emit(csv_text, manifest, embedded=False)
        else:
            self.emit(text, manifest, embedded=False)


def _csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def cmd_correct(args: argparse.Namespace) -> int:
    model, cov = load_models(args.scenario)
    if args.probit:
        model = TrueModel("probit", model.mu, model.alpha, model.beta1, model.beta2, model.binary_block)
    v = omitted_quadratic_form(cov, model.beta2)
    q_tilde = attenuation_radical(cov, model.beta2, model.link)
    p_plus, p_minus = outcome_probability_check(model, cov)
    methods = all_methods(model, cov)
    report = {
        "scenario": models_to_dict(model, cov),
        "v": v,
        "q_tilde": q_tilde,
        "outcome_probability": {"treated": p_plus, "control": p_minus},
        "methods": {name: lf.as_dict() for name, lf in methods.items()},
    }
    lines = [
        f"link {model.link}, alpha = {_sig4(model.alpha)}",
        f"v = beta2' Omega~ beta2 = {_sig4(v)}, q~ = {_sig4(q_tilde)}",
        f"Pr(Y=1 | T=+1) ~ {_sig4(p_plus)}, Pr(Y=1 | T=-1) ~ {_sig4(p_minus)}",
    ]
    for name, lf in methods.items():
        extra = f", gamma* = {_sig4(lf.gamma_star)}" if lf.gamma_star is not None else ""
        lines.append(f"  {name:<14} alpha* = {_sig4(lf.alpha_star)}{extra}")
    csv_text = _csv(["method", "alpha_star", "q_tilde", "v"], [[n, lf.alpha_star, q_tilde, v] for n, lf in methods.items()])
    _Output(args, "correct").emit_report(report, "\n".join(lines) + "\n", csv_text, _digest(report["scenario"]), None)
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    n = DESK_N if args.n is None else args.n
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if n < 10_000:
        raise ContractError(f"--n must be at least 10000 for the simulated column, got {n}")
    rows = table_rows(args.which, n=n, seed=seed, workers=args.workers)
    digest = _digest({"table": args.which, "cells": [repr(c) for c in TABLES[args.which]()], "n": n, "seed": seed})
    lines = [f"{'block':<22}{'column':<22}{'law':<18}{'method':<13}{'value':>9}{'s.e.':>9}{'published':>10}"]
    for r in rows:
        lines.append(
            f"{r['block']:<22}{r['column']:<22}{r['law']:<18}{r['method']:<13}"
            f"{_sig4(r['value']):>9}{_sig4(r['std_error']):>9}{_sig4(r['published']):>10}"
        )
    report = {"table": args.which, "n": n, "rows": rows}
    _Output(args, f"table {args.which}").emit_report(report, "\n".join(lines) + "\n", rows_to_csv(rows), digest, seed)
    return EXIT_OK


def cmd_figure1(args: argparse.Namespace) -> int:
    values = tuple(args.q_tilde_inv) if args.q_tilde_inv else FIGURE1_DEFAULTS
    if args.grid < 1:
        raise ContractError("--grid must be positive")
    grid = np.linspace(0.01, 0.99, args.grid).tolist() if args.grid > 1 else [0.5]
    curves = {v: [f for _, f in figure1_curve(v, grid)] for v in values}
    header = ["P"]
    for v in values:
        header += [f"factor_{v:g}", f"reference_{v:g}"]
    table = [[p] + [x for v in values for x in (curves[v][i], float(v))] for i, p in enumerate(grid)]
    report = {"P": grid, "curves": {f"{v:g}": curves[v] for v in values}}
    text = "\n".join(["  ".join(f"{h:>14}" for h in header)] + ["  ".join(f"{_sig4(x):>14}" for x in row) for row in table])
    digest = _digest({"q_tilde_inv": values, "grid": args.grid})
    _Output(args, "figure1").emit_report(report, text + "\n", _csv(header, table), digest, None)
    return EXIT_OK


def _outcome_def(codes: Sequence[int]) -> dict[int, int]:
    return {code: int(code in codes) for code in (0, 1, 2)}


def cmd_pbc(args: argparse.Namespace) -> int:
    records = load_pbc(args.data)
    policy = "mean_impute" if args.impute_mean else "complete_case"
    study = pbc_case_study(records, _outcome_def(args.death_codes), policy)
    report = {**study.report(), "outcome_codes_counted_as_death": list(args.death_codes)}
    labels = report["covariates"]
    lines = [
        f"policy {policy}: n = {study.n}, missingness {study.missingness}",
        f"treatment alpha = {_sig4(study.alpha)} (adjusted), {_sig4(study.alpha_unadjusted)} (unadjusted)",
        "covariate          coef      var",
    ]
    for j, label in enumerate(labels):
        lines.append(f"  {label:<16}{_sig4(float(study.beta[j])):>8}{_sig4(float(study.omega[j, j])):>9}")
    lines.append("correlations")
    for j, label in enumerate(labels):
        lines.append(f"  {label:<16}" + "".join(f"{_sig4(float(x)):>9}" for x in study.correlations[j]))
    lines.append("q~ ladder")
    for label, value in study.q_tilde_ladder:
        lines.append(f"  {label:<18}{_sig4(value):>8}")
    csv_text = _csv(["included", "q_tilde"], study.q_tilde_ladder)
    digest = _digest({"data": str(Path(args.data).resolve()), "policy": policy, "death": args.death_codes})
    _Output(args, "pbc").emit_report(report, "\n".join(lines) + "\n", csv_text, digest, None)
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ContractError("scenario must be a JSON object")
    if args.n is not None:
        data["n"] = args.n
    if args.seed is not None:
        data["seed"] = args.seed
    spec = ScenarioSpec.from_dict(data)
    if args.method == "quadrature":
        result = quadrature_least_false(spec.true_model, spec.cov, args.nodes, law=spec.covariate_law.kind)
    else:
        result = monte_carlo_least_false(spec, workers=args.workers)
    lf = result.least_false
    se = None if result.mc_std_error is None else result.mc_std_error.tolist()
    report = {"scenario": spec.to_dict(), "least_false": lf.as_dict(), "mc_std_error": se, "info": result.info}
    lines = [f"{lf.method} ({lf.link}): mu* = {_sig4(lf.mu_star)}, alpha* = {_sig4(lf.alpha_star)}"]
    lines += [f"  beta1*[{j}] = {_sig4(float(b))}" for j, b in enumerate(lf.beta1_star)]
    if lf.gamma_star is not None:
        lines.append(f"  gamma* = {_sig4(lf.gamma_star)}")
    if se is not None:
        lines.append("  jackknife s.e. " + ", ".join(_sig4(s) for s in se))
    coef = [lf.mu_star, lf.alpha_star] + ([lf.gamma_star] if lf.gamma_star is not None else []) + lf.beta1_star.tolist()
    names = ["mu", "alpha"] + (["gamma"] if lf.gamma_star is not None else []) + [f"beta1_{j}" for j in range(len(lf.beta1_star))]
    csv_text = _csv(["coefficient", "value", "std_error"], [[nm, c, None if se is None else se[i]] for i, (nm, c) in enumerate(zip(names, coef))])
    _Output(args, f"oracle {args.method}").emit_report(report, "\n".join(lines) + "\n", csv_text, spec.digest(), spec.seed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed for simulated quantities")
    common.add_argument("--n", type=int, default=None, help="simulated sample size (default 200000)")
    common.add_argument("--format", choices=("csv", "json", "text"), default=None, help="output format")
    common.add_argument("--out", default=None, metavar="PATH", help="write output to PATH instead of stdout")
    common.add_argument("--workers", type=int, default=1, help="parallel workers; output does not depend on it")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="omitbias", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", parents=[common], help="closed-form corrections for a scenario file")
    p.add_argument("scenario", help="JSON scenario (omega, p, q, link, mu, alpha, beta1, beta2, ...)")
    p.add_argument("--probit", action="store_true", help="treat the true model as probit")
    p.set_defaults(func=cmd_correct, default_format="text")

    p = sub.add_parser(
        "table", parents=[common], help="reproduce a comparison table", epilog=TABLE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("which", type=int, choices=sorted(TABLES))
    p.set_defaults(func=cmd_table, default_format="csv")

    p = sub.add_parser("figure1", parents=[common], help="correction factor curves against P")
    p.add_argument("--q-tilde-inv", type=float, nargs="+", default=None, help="values of 1/q~ (default 0.7 0.8 0.9 0.95)")
    p.add_argument("--grid", type=int, default=99, help="number of P values evenly spaced on [0.01, 0.99]")
    p.set_defaults(func=cmd_figure1, default_format="csv")

    p = sub.add_parser("pbc", parents=[common], help="primary biliary cirrhosis case study")
    p.add_argument("data", help="delimited PBC data file with a header row")
    p.add_argument("--impute-mean", action="store_true", help="mean-impute missing covariates instead of dropping rows")
    p.add_argument("--death-codes", type=int, nargs="+", default=[2], help="status codes counted as death (default 2)")
    p.set_defaults(func=cmd_pbc, default_format="json")

    p = sub.add_parser("oracle", parents=[common], help="quadrature or Monte Carlo least-false values")
    p.add_argument("scenario", help="JSON scenario; may add covariate_law, n, seed, fitted_link")
    p.add_argument("--method", choices=("quadrature", "monte_carlo"), default="quadrature")
    p.add_argument("--nodes", type=int, default=80, help="minimum Gauss-Hermite order")
    p.set_defaults(func=cmd_oracle, default_format="text")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
