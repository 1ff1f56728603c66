"""JSON report assembly and schema validation."""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np

from . import __version__
from .diagnostics import InfluenceReport, LeverageMatrix
from .fitter import FitResult


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _vec(v) -> list:
    return [_num(x) for x in np.asarray(v, dtype=float).reshape(-1)]


def fit_block(fit: FitResult) -> dict:
    se = fit.standard_errors
    p = fit.model.p
    return {
        "beta": _vec(fit.theta_hat.beta),
        "alpha": _num(fit.theta_hat.alpha),
        "standard_errors": None if se is None else {"beta": _vec(se[:p]), "alpha": _num(se[p])},
        "loglik": _num(fit.loglik_at_hat),
        "iterations": int(fit.iterations),
        "converged": bool(fit.converged),
        "score_norm": _num(fit.score_norm),
        "covariance": None if fit.covariance is None else [_vec(r) for r in fit.covariance],
    }


def scheme_block(rep: InfluenceReport) -> dict:
    return {
        "scheme": rep.scheme.kind,
        "covariate": rep.scheme.covariate,
        "scale": None if rep.scheme.scale is None else _num(rep.scheme.scale),
        "C_dmax": _num(rep.C_dmax),
        "d_max": _vec(rep.d_max),
        "C_i": _vec(rep.C_i),
        "threshold": _num(rep.threshold),
        "flagged": [i + 1 for i in rep.flagged],
        "C_dmax_beta": _num(rep.C_dmax_beta),
        "d_max_beta": _vec(rep.d_max_beta),
        "C_i_beta": _vec(rep.C_i_beta),
        "warnings": list(rep.warnings),
    }


def leverage_block(lev: LeverageMatrix) -> dict:
    return {"diagonal": _vec(lev.diagonal), "trace": _num(lev.trace)}


def build_report(config: dict, fit: FitResult, schemes=None, leverage=None) -> dict:
    report = {
        "provenance": {"tool": "bsnlr", "version": __version__, "seed": config.get("seed"),
                       "config": config},
        "model": {"text": fit.model.text, "p": fit.model.p, "covariates": list(fit.model.covariates)},
        "n": int(fit.data.n),
        "fit": fit_block(fit),
    }
    if schemes is not None or leverage is not None:
        report["diagnostics"] = {
            "schemes": [scheme_block(r) for r in (schemes or [])],
            "leverage": None if leverage is None else leverage_block(leverage),
        }
    return report


def dumps(report: dict) -> str:
    # float repr is the shortest string that round-trips exactly.
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def schema() -> dict:
    return json.loads(resources.files("bsnlr").joinpath("report.schema.json").read_text())


def validate(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, schema())
