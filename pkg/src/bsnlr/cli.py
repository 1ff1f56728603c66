"""Command-line interface: ``bsnlr fit | diagnose | simulate``.

Exit codes: 0 success, 1 I/O error, 2 invalid input, 3 fit did not converge
(or failed numerically).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__
from . import expr as ex
from .dataio import DataError, load_dataset, read_table, write_csv
from .diagnostics import (EXPLANATORY, SCHEMES, PerturbationScheme, check_continuous,
                          default_scale, generalized_leverage, influence_report)
from .distributions import SNParams, sn_from_normal
from .errors import BSError, ModelSyntaxError
from .fitter import FitOptions, fit_mle, init_params
from .likelihood import Theta
from .model import BUILTINS, builtin_text, parse_model
from .plots import index_plot
from .report import build_report, dumps

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2, 3

log = logging.getLogger("bsnlr")


class UsageError(ValueError):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _model_text(args, covariates) -> str:
    if args.builtin:
        return builtin_text(args.builtin, covariates)
    return args.model


def _config(args) -> dict:
    keys = ("command", "data", "response", "model", "builtin", "init", "scheme", "covariate",
            "sy", "sx", "seed", "out", "svg", "tol", "max_iter", "beta", "alpha", "n",
            "range", "outliers", "shift")
    return {k: getattr(args, k) for k in keys if hasattr(args, k)}


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _load(args):
    header, _ = read_table(args.data)
    if args.response not in header:
        raise DataError(f"{args.data}: no column named {args.response!r} (columns: {', '.join(header)})")
    candidates = [h for h in header if h != args.response]
    text = _model_text(args, candidates)
    try:
        probe = ex.parse(text, candidates)
    except ModelSyntaxError as err:
        raise ModelSyntaxError(f"model {text!r}: {err}") from None
    used = {candidates[j] for j in ex.covariate_columns(probe)}
    covariate = getattr(args, "covariate", None)
    if covariate is not None:
        if covariate not in candidates:
            raise DataError(f"{args.data}: no covariate column named {covariate!r}")
        used.add(covariate)
    names = [h for h in candidates if h in used]
    data = load_dataset(args.data, args.response, names)
    model = parse_model(text, names)
    return model, data


def _fit(args, model, data):
    init = None
    if args.init:
        values = _float_list(args.init)
        if len(values) == model.p + 1:
            init = Theta(values[:-1], values[-1])
        elif len(values) == model.p:
            init = init_params(model, data, beta0=values)
        else:
            raise UsageError(f"--init needs {model.p} or {model.p + 1} values, got {len(values)}")
    if data.n < model.p + 1:
        raise UsageError(f"need at least p + 1 = {model.p + 1} rows, got {data.n}")
    return fit_mle(model, data, FitOptions(tol=args.tol, max_iter=args.max_iter, init=init))


def cmd_fit(args) -> int:
    model, data = _load(args)
    fit = _fit(args, model, data)
    _emit(dumps(build_report(_config(args), fit)), args.out)
    if not fit.converged:
        log.error("fit did not converge in %d iterations", fit.iterations)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _schemes(args, data) -> list[PerturbationScheme]:
    names = []
    for s in args.scheme or ["all"]:
        names.extend(SCHEMES if s == "all" else [s])
    names = list(dict.fromkeys(names))
    out = []
    for name in names:
        if name == EXPLANATORY:
            if not args.covariate:
                raise UsageError("the explanatory scheme requires --covariate")
            check_continuous(data.X[:, data.column(args.covariate)])
            out.append(PerturbationScheme(name, covariate=args.covariate, scale=args.sx))
        elif name == "response":
            out.append(PerturbationScheme(name, scale=args.sy))
        else:
            out.append(PerturbationScheme(name))
    return out


def cmd_diagnose(args) -> int:
    model, data = _load(args)
    schemes = _schemes(args, data)
    fit = _fit(args, model, data)
    config = _config(args)
    if not fit.converged:
        _emit(dumps(build_report(config, fit)), args.out)
        log.error("fit did not converge in %d iterations; diagnostics skipped", fit.iterations)
        return EXIT_NOT_CONVERGED
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = [influence_report(fit, s) for s in schemes]
    leverage = generalized_leverage(fit)
    text = dumps(build_report(config, fit, reports, leverage))
    if args.svg:
        os.makedirs(args.svg, exist_ok=True)
        plots = {}
        for rep in reports:
            tag = rep.scheme.kind
            plots[f"{tag}-dmax.svg"] = index_plot(rep.d_max, f"d_max ({tag})", "d_max")
            plots[f"{tag}-ci.svg"] = index_plot(
                rep.C_i, f"Total local influence ({tag})", "C_i",
                hline=rep.threshold, hline_label="2 mean(C_i)",
            )
        plots["leverage.svg"] = index_plot(leverage.diagonal, "Generalized leverage", "GL_ii")
        for name, svg in plots.items():
            with open(os.path.join(args.svg, name), "w") as fh:
                fh.write(svg)
    _emit(text, args.out)
    return EXIT_OK


def _parse_range(spec: str):
    try:
        name, bounds = spec.split("=", 1)
        lo, hi = (float(v) for v in bounds.split(":"))
    except ValueError:
        raise UsageError(f"--range expects NAME=LO:HI, got {spec!r}") from None
    if not lo < hi:
        raise UsageError(f"--range {spec!r}: need LO < HI")
    return name.strip(), lo, hi


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    if not args.alpha > 0:
        raise UsageError(f"--alpha must be positive, got {args.alpha}")
    ranges = [_parse_range(s) for s in args.range or []]
    names = [r[0] for r in ranges]
    if args.response in names:
        raise UsageError(f"response name {args.response!r} clashes with a covariate")
    model = parse_model(_model_text(args, names), names)
    beta = np.array(_float_list(args.beta))
    if beta.size != model.p:
        raise UsageError(f"--beta needs {model.p} values, got {beta.size}")
    if args.outliers < 0 or args.outliers > args.n:
        raise UsageError(f"--outliers must be between 0 and n, got {args.outliers}")
    if args.outliers and not args.out:
        raise UsageError("--outliers needs --out (indices go to a sidecar file)")

    rng = np.random.default_rng(args.seed)
    X = np.column_stack([rng.uniform(lo, hi, args.n) for _, lo, hi in ranges]) if ranges \
        else np.zeros((args.n, 0))
    z = rng.standard_normal(args.n)
    y = model.mean(X, beta) + sn_from_normal(z, SNParams(args.alpha, 0.0, 2.0))
    planted = []
    if args.outliers:
        shift = args.shift * default_scale(y)
        planted = sorted(int(i) for i in rng.choice(args.n, size=args.outliers, replace=False))
        y[planted] += shift
    columns = {args.response: y}
    columns.update({name: X[:, j] for j, name in enumerate(names)})
    _emit(write_csv(columns), args.out)
    if args.outliers:
        sidecar = {"indices": [i + 1 for i in planted], "shift": shift, "multiple_of_sd": args.shift}
        with open(args.out + ".outliers.json", "w") as fh:
            fh.write(json.dumps(sidecar, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsnlr", description="Birnbaum-Saunders nonlinear regression and influence diagnostics."
    )
    parser.add_argument("--version", action="version", version=f"bsnlr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_source(p, required=True):
        g = p.add_mutually_exclusive_group(required=required)
        g.add_argument("--model", metavar="TEXT", help="mean function, e.g. 'b1 + b2*exp(b3*x1)'")
        g.add_argument("--builtin", metavar="NAME", choices=BUILTINS, help="builtin mean function")

    def common(p):
        p.add_argument("--data", metavar="PATH", required=True, help="CSV file with a header row")
        p.add_argument("--response", metavar="NAME", required=True, help="column of log-lifetimes")
        model_source(p)
        p.add_argument("--init", metavar="CSV-LIST", help="start values b1..bp[,alpha]")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", metavar="PATH", help="report path (default: stdout)")
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=200)

    fit = sub.add_parser("fit", help="maximum likelihood fit")
    common(fit)
    fit.set_defaults(func=cmd_fit)

    diag = sub.add_parser("diagnose", help="fit, then local influence and generalized leverage")
    common(diag)
    diag.add_argument("--scheme", action="append", choices=SCHEMES + ("all",),
                      help="perturbation scheme (repeatable; default all)")
    diag.add_argument("--covariate", metavar="NAME", help="covariate for the explanatory scheme")
    diag.add_argument("--sy", type=float, default=None, help="response perturbation scale")
    diag.add_argument("--sx", type=float, default=None, help="covariate perturbation scale")
    diag.add_argument("--svg", metavar="DIR", help="write index plots here")
    diag.set_defaults(func=cmd_diagnose)

    sim = sub.add_parser("simulate", help="simulate a dataset from the model")
    model_source(sim)
    sim.add_argument("--beta", metavar="CSV-LIST", required=True)
    sim.add_argument("--alpha", type=float, required=True)
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--range", metavar="NAME=LO:HI", action="append",
                     help="uniform covariate range (repeatable)")
    sim.add_argument("--response", metavar="NAME", default="y")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", metavar="PATH", help="CSV path (default: stdout)")
    sim.add_argument("--outliers", type=int, default=0, help="plant this many shifted responses")
    sim.add_argument("--shift", type=float, default=5.0, help="outlier shift in response SDs")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="bsnlr: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    for flag in ("sy", "sx", "tol"):
        value = getattr(args, flag, None)
        if value is not None and not value > 0:
            parser.error(f"--{flag.replace('_', '-')} must be positive")
    if getattr(args, "max_iter", 1) < 1:
        parser.error("--max-iter must be at least 1")
    try:
        return args.func(args)
    except (DataError, ModelSyntaxError, UsageError, KeyError, ValueError) as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else err
        print(f"bsnlr: error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"bsnlr: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except BSError as err:
        print(f"bsnlr: fit failed: {err}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
