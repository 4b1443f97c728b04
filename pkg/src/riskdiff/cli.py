"""Command-line driver: describe, fit, and the full Monte Carlo report.

Exit codes: 0 success, 2 data error, 3 fit error, 4 inference error. Every
failure writes one machine-readable JSON object to stderr. The report
command requires an explicit --seed so published runs stay reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .dataset import ColumnSchema, describe, load_cohort, save_cohort
from .effects import StandardizationSet, effect_triple
from .errors import DataError, FitError, InferenceError, TooFewDraws
from .fixtures import CARDIA_SCHEMA, cardia_cohort, cardia_fit
from .glm import FitResult, ModelSpec, build_design, fit_logistic
from .inference import (
    confidence_ellipse,
    ellipse_csv,
    histogram_csv,
    marginal_report,
    tercile_report,
)
from .montecarlo import DEFAULT_N_DRAWS, effect_distribution

EXIT_DATA = 2
EXIT_FIT = 3
EXIT_INFERENCE = 4


def _error_json(code, exc_or_list):
    errs = exc_or_list if isinstance(exc_or_list, list) else [exc_or_list]
    payload = {
        "exit_code": code,
        "errors": [
            {"error": type(e).__name__, "message": str(e)} for e in errs
        ],
    }
    print(json.dumps(payload), file=sys.stderr)
    return code


def _schema_from_args(args) -> ColumnSchema:
    return ColumnSchema(
        outcome=args.outcome_col,
        exposure1=args.exposure1_col,
        exposure2=args.exposure2_col,
        covariates=tuple(c.strip() for c in args.covariate_cols.split(",")
                         if c.strip()),
    )


def _add_input_args(p, covariates_required=True):
    p.add_argument("--input", required=True, help="cohort CSV path")
    p.add_argument("--outcome-col", default="y")
    p.add_argument("--exposure1-col", default="z1")
    p.add_argument("--exposure2-col", default="z2")
    p.add_argument("--covariate-cols", default="",
                   required=covariates_required,
                   help="comma list of covariate column names, in order")


def _provenance(args, extra=None):
    meta = {
        "version": f"riskdiff {__version__}",
        "model": args.model,
    }
    if extra:
        meta.update(extra)
    return meta


def cmd_describe(args) -> int:
    try:
        cohort = load_cohort(args.input, _schema_from_args(args))
    except DataError as e:
        return _error_json(EXIT_DATA, e)
    table = describe(cohort)
    if args.json:
        print(table.to_json())
    else:
        print(table.to_text())
    return 0


def cmd_fit(args) -> int:
    try:
        cohort = load_cohort(args.input, _schema_from_args(args))
    except DataError as e:
        return _error_json(EXIT_DATA, e)
    spec = ModelSpec.parse(args.model)
    try:
        X = build_design(cohort, spec)
        y = [r.y for r in cohort.records]
        fit = fit_logistic(X, y, term_names=spec.names)
    except FitError as e:
        return _error_json(EXIT_FIT, e)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = json.loads(fit.to_json())
    payload["provenance"] = _provenance(args)
    (out / "fit.json").write_text(json.dumps(payload, indent=2))
    print(f"wrote {out / 'fit.json'}")
    return 0


def cmd_report(args) -> int:
    spec = ModelSpec.parse(args.model)
    try:
        cohort = load_cohort(args.input, _schema_from_args(args))
    except DataError as e:
        return _error_json(EXIT_DATA, e)
    try:
        if args.fit_json:
            fit = FitResult.from_json(Path(args.fit_json).read_text())
            if tuple(fit.term_names) != spec.names:
                raise FitError(
                    f"fit terms {fit.term_names} do not match --model "
                    f"{spec.names}")
        else:
            X = build_design(cohort, spec)
            y = [r.y for r in cohort.records]
            fit = fit_logistic(X, y, term_names=spec.names)
        std = StandardizationSet.from_cohort(cohort)
        plug = effect_triple(fit.pi_hat, spec, std)
        dist = effect_distribution(fit, spec, std, n_draws=args.draws,
                                   seed=args.seed,
                                   allow_jitter=args.allow_jitter,
                                   workers=args.workers)
    except FitError as e:
        return _error_json(EXIT_FIT, e)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _provenance(args, {
        "seed": args.seed, "n_draws": args.draws, "alpha": args.alpha,
        "jitter": dist.jitter, "source_hash": dist.source_hash,
    })

    def write_json(name, payload):
        (out / name).write_text(json.dumps(
            {"provenance": meta, **payload}, indent=2))

    def write_text(name, text):
        header = "# " + json.dumps(meta) + "\n"
        (out / name).write_text(header + text)

    write_json("effects.json", {
        "te1": plug.te1, "te2": plug.te2, "int": plug.int_})
    write_text("draws.csv", dist.to_csv())

    errors = []
    for which in ("te1", "te2", "int"):
        point = {"te1": plug.te1, "te2": plug.te2, "int": plug.int_}[which]
        write_json(f"marginal_{which}.json",
                   marginal_report(dist, which, point).to_dict())
        write_text(f"hist_{which}.csv", histogram_csv(dist.component(which)))
    for which in ("te1", "te2"):
        try:
            ell = confidence_ellipse(
                list(zip(dist.component(which), dist.int_)), args.alpha)
            write_json(f"ellipse_{which}_int.json", ell.to_dict())
            write_text(f"ellipse_{which}_int.csv", ellipse_csv(ell))
        except InferenceError as e:
            errors.append(e)
        try:
            rep = tercile_report(dist, which)
            write_json(f"terciles_{which}.json", rep.to_dict())
            cond = dist.component(which)
            q1, q2 = rep.boundaries
            for i, mask in enumerate((cond <= q1,
                                      (cond > q1) & (cond <= q2),
                                      cond > q2)):
                write_text(f"hist_int_{which}_t{i + 1}.csv",
                           histogram_csv(dist.int_[mask]))
        except TooFewDraws as e:
            errors.append(e)
    if errors:
        return _error_json(EXIT_INFERENCE, errors)
    print(f"wrote report bundle to {out}")
    return 0


def cmd_fixture(args) -> int:
    """Write the bundled cohort reconstruction and its fixture fit to disk."""
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cohort(cardia_cohort(), out / "cardia_cohort.csv", CARDIA_SCHEMA)
    (out / "cardia_fit.json").write_text(cardia_fit().to_json())
    print(f"wrote {out / 'cardia_cohort.csv'} and {out / 'cardia_fit.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskdiff",
        description="Standardized risk differences and additive interaction "
                    "from a logistic model, with Monte Carlo interval "
                    "estimates.")
    parser.add_argument("--version", action="version",
                        version=f"riskdiff {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="descriptive events/totals table")
    _add_input_args(p)
    p.add_argument("--json", action="store_true",
                   help="emit JSON instead of aligned text")
    p.set_defaults(func=cmd_describe, model="")

    p = sub.add_parser("fit", help="fit the logistic model, write fit.json")
    _add_input_args(p)
    p.add_argument("--model", required=True,
                   help='comma list of terms, e.g. "z1,z2,z1*z2,x1,x2,x3,z1*x1"')
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="full Monte Carlo report bundle")
    _add_input_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--fit-json", default=None,
                   help="use this FitResult instead of refitting the cohort")
    p.add_argument("--draws", type=int, default=DEFAULT_N_DRAWS)
    p.add_argument("--seed", type=int, required=True,
                   help="RNG seed (required: no silent entropy)")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--allow-jitter", action="store_true",
                   help="permit the smallest diagonal jitter that makes a "
                        "non-positive-definite covariance factorable")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fixture",
                       help="write the bundled cohort reconstruction and fit")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
