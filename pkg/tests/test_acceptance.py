"""Acceptance criteria. Each test prints one PASS/FAIL line and then asserts."""

import json
import subprocess
import sys
import time
import warnings

import mpmath
import numpy as np
import pytest

from bsnlr.diagnostics import (CASE_WEIGHTS, EXPLANATORY, RESPONSE, PerturbationScheme,
                               compute_delta, curvature_from_displacement, default_scale,
                               delta_case_weights, delta_explanatory, delta_response,
                               generalized_leverage, hessian_at_hat, influence_report,
                               max_curvature, normal_curvature, perturbed_loglik)
from bsnlr.distributions import SNParams, sn_from_normal
from bsnlr.fitter import FitOptions, fit_mle, psi_alpha
from bsnlr.likelihood import Theta, cross_deriv_y, loglik, observed_hessian, score_vector
from bsnlr.model import Dataset, parse_model
from bsnlr.numeric import fd_cross, fd_gradient, fd_hessian

from helpers import random_triples, rel_err, simulate


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail, elapsed=None):
        timing = "" if elapsed is None else f" [{elapsed:.1f} s]"
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail}{timing}")
        assert ok, f"criterion {number} failed: {detail}"
    return emit


@pytest.fixture(scope="module")
def triples():
    return random_triples(count=25, n=30, seed=2024)


@pytest.fixture(scope="module")
def triple_fits(triples):
    fits = []
    for _, model, data in triples:
        fit = fit_mle(model, data, FitOptions(tol=1e-10))
        assert fit.converged
        fits.append(fit)
    return fits


def test_criterion_1_derivatives(triples, verdict):
    t0 = time.perf_counter()
    ps = set()
    worst_score = worst_hess = 0.0
    for theta, model, data in triples:
        ps.add(model.p)
        f = lambda v: loglik(Theta.from_vector(v), model, data)
        worst_score = max(worst_score, rel_err(score_vector(theta, model, data), fd_gradient(f, theta.vector)))
        H = observed_hessian(theta, model, data).matrix
        worst_hess = max(worst_hess, rel_err(H, fd_hessian(f, theta.vector)))
    elapsed = time.perf_counter() - t0
    ok = worst_score <= 1e-6 and worst_hess <= 1e-5 and elapsed < 10 and ps == {1, 2, 3}
    verdict(1, "derivative correctness",
            ok, f"{len(triples)} triples, p in {sorted(ps)}; max score rel err {worst_score:.2e} (tol 1e-6), "
                f"max Hessian rel err {worst_hess:.2e} (tol 1e-5)", elapsed)


def _schemes_for(fit):
    # x1 is continuous in every triple; intercept-only models get a zero Delta
    return [PerturbationScheme(CASE_WEIGHTS), PerturbationScheme(RESPONSE),
            PerturbationScheme(EXPLANATORY, covariate="x1")]


def test_criterion_2_delta(triple_fits, verdict):
    t0 = time.perf_counter()
    worst = {CASE_WEIGHTS: 0.0, RESPONSE: 0.0, EXPLANATORY: 0.0}
    for fit in triple_fits:
        for scheme in _schemes_for(fit):
            with warnings.catch_warnings():
                # models without x1 warn that the explanatory Delta is zero
                warnings.simplefilter("ignore")
                delta = compute_delta(fit, scheme)
            f = lambda t, w: perturbed_loglik(fit, scheme, w)(Theta.from_vector(t))
            oracle = fd_cross(f, fit.theta_hat.vector, scheme.omega0(fit.data.n))
            worst[scheme.kind] = max(worst[scheme.kind], rel_err(delta.values, oracle))
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-4 and elapsed < 30
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    verdict(2, "Delta correctness", ok, f"max rel err vs FD cross-derivative: {detail} (tol 1e-4)", elapsed)


def test_criterion_3_identities(triple_fits, verdict):
    worst_resp = worst_cols = worst_xi = 0.0
    for fit in triple_fits:
        S_y = default_scale(fit.data.y)
        delta = delta_response(fit, S_y).values
        L = cross_deriv_y(fit.theta_hat, fit.model, fit.data)
        worst_resp = max(worst_resp, rel_err(delta, S_y * L))
        cw = delta_case_weights(fit).values
        col = np.max(np.linalg.norm(cw, axis=0))
        worst_cols = max(worst_cols, float(np.max(np.abs(cw.sum(axis=1)))) / col)
        xi = fit.xi_at_hat
        a = fit.theta_hat.alpha
        worst_xi = max(worst_xi, float(np.max(np.abs(xi.xi1 ** 2 - xi.xi2 ** 2 - 4 / a ** 2) / (4 / a ** 2))))
    ok = worst_resp <= 1e-12 and worst_cols <= 1e-6 and worst_xi <= 1e-10
    verdict(3, "algebraic identities", ok,
            f"response Delta vs S_y*L_theta_y {worst_resp:.1e} (tol 1e-12); case-weight column sums "
            f"{worst_cols:.1e} (tol 1e-6); xi identity {worst_xi:.1e} (tol 1e-10)")


def test_criterion_4_curvature_displacement(verdict):
    t0 = time.perf_counter()
    model, data = simulate("b1*exp(b2*x1)", [2.0, 0.7], 0.4, 20, seed=5)
    fit = fit_mle(model, data, FitOptions(tol=1e-12))
    rng = np.random.default_rng(99)
    worst = {}
    for scheme in (PerturbationScheme(CASE_WEIGHTS), PerturbationScheme(RESPONSE),
                   PerturbationScheme(EXPLANATORY, covariate="x1")):
        delta = compute_delta(fit, scheme)
        info = hessian_at_hat(fit)
        _, d_max = max_curvature(delta, info)
        directions = [d_max] + [v / np.linalg.norm(v) for v in rng.normal(size=(3, data.n))]
        errs = []
        for d in directions:
            C_d = normal_curvature(delta, info, d)
            C_ld = curvature_from_displacement(fit, scheme, d)
            errs.append(abs(C_ld - C_d) / C_d)
        worst[scheme.kind] = max(errs)
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 0.05 and elapsed < 120
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    verdict(4, "curvature-displacement consistency", ok,
            f"n=20, d_max + 3 random directions; max rel err {detail} (tol 5e-2)", elapsed)


def test_criterion_5_leverage_oracle(verdict):
    t0 = time.perf_counter()
    model, data = simulate("b1*exp(b2*x1)", [2.0, 0.7], 0.5, 15, seed=15)
    fit = fit_mle(model, data, FitOptions(tol=1e-12))
    GL = generalized_leverage(fit).GL
    eps = 1e-4 * default_scale(data.y)
    mu0 = fit.design_at_hat.mu
    oracle = np.empty_like(GL)
    for col in range(data.n):
        y = data.y.copy()
        y[col] += eps
        refit = fit_mle(model, data.with_y(y), FitOptions(tol=1e-12, init=fit.theta_hat))
        oracle[:, col] = (model.mean(data.X, refit.theta_hat.beta) - mu0) / eps
    worst = float(np.max(np.abs(GL - oracle) / np.abs(oracle)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed < 120
    verdict(5, "generalized leverage oracle", ok,
            f"n=15, all {GL.size} entries; max rel err {worst:.2e} (tol 1e-3); trace {np.trace(GL):.4f}", elapsed)


def test_criterion_6_linear_reductions(verdict):
    model, data = simulate("b1 + b2*x1 + b3*x2", [1.0, 2.0, -1.0], 0.6, 40, seed=6)
    fit = fit_mle(model, data, FitOptions(tol=1e-12))
    beta, a = fit.theta_hat.beta, fit.theta_hat.alpha
    n = data.n
    X = np.column_stack([np.ones(n), data.X])
    z = data.y - X @ beta
    x1 = 2 / a * np.cosh(z / 2)
    x2 = 2 / a * np.sinh(z / 2)
    v = -(2 * x2 ** 2 + 4 / a ** 2 - 1 + x2 ** 2 / x1 ** 2) / 4
    h = -x1 * x2 / a
    k = 1 / a ** 2 - 3 * x2 ** 2 / a ** 2
    S_y = default_scale(data.y)
    S_x = default_scale(data.X[:, 0])
    errs = {}

    L = np.zeros((4, 4))
    L[:3, :3] = X.T @ (v[:, None] * X)
    L[:3, 3] = L[3, :3] = X.T @ h
    L[3, 3] = k.sum()
    errs["Hessian"] = rel_err(observed_hessian(fit.theta_hat, model, data).matrix, L)

    cw = np.vstack([X.T * ((x1 * x2 - x2 / x1) / 2), -1 / a + x2 ** 2 / a])
    errs["case-weights"] = rel_err(delta_case_weights(fit).values, cw)

    resp = np.vstack([X.T * (-S_y * v), S_y * x1 * x2 / a])
    errs["response"] = rel_err(delta_response(fit, S_y).values, resp)

    j = 1  # x1 is the second column of X
    expl = np.empty((4, n))
    for r in range(3):
        mu_rw = S_x if r == j else 0.0
        expl[r] = mu_rw / 2 * (x1 * x2 - x2 / x1) + (S_x * beta[j] * X[:, r]) * v
    expl[3] = -S_x * beta[j] * x1 * x2 / a
    errs["explanatory"] = rel_err(delta_explanatory(fit, "x1", S_x).values, expl)

    Lty = -np.vstack([X.T * v, h])
    GL = np.hstack([X, np.zeros((n, 1))]) @ np.linalg.solve(-L, Lty)
    errs["leverage"] = rel_err(generalized_leverage(fit).GL, GL)

    ok = max(errs.values()) <= 1e-12
    verdict(6, "linear-model reductions", ok,
            ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (tol 1e-12)")


def _psi_quadrature(alpha):
    mpmath.mp.dps = 40
    x = mpmath.sqrt(2) / alpha
    erfcx = 2 / mpmath.sqrt(mpmath.pi) * mpmath.quad(lambda u: mpmath.exp(-2 * x * u - u * u), [0, mpmath.inf])
    return 2 + 4 / mpmath.mpf(alpha) ** 2 - mpmath.sqrt(2 * mpmath.pi) / alpha * erfcx


def test_criterion_7_psi(verdict):
    small = abs(psi_alpha(0.1) - 401) / 401
    large = abs(psi_alpha(100.0) - 2)
    worst = 0.0
    for a in (0.1, 0.5, 1.0, 2.0, 10.0, 100.0):
        ref = _psi_quadrature(a)
        worst = max(worst, float(abs((psi_alpha(a) - ref) / ref)))
    ok = small < 1e-3 and large < 0.05 and worst <= 1e-10
    verdict(7, "psi limits", ok,
            f"|psi(0.1)-401|/401 = {small:.2e} (tol 1e-3), |psi(100)-2| = {large:.2e} (tol 0.05), "
            f"max rel err vs quadrature {worst:.1e} (tol 1e-10)")


def _exp_growth_data(seed, n=200):
    model, data = simulate("b1 + b2*exp(b3*x1)", [1.0, 2.0, 0.5], 0.5, n, seed=seed, lo=0.0, hi=3.0,
                           names=("x1",))
    return model, data


def test_criterion_8_recovery(verdict):
    t0 = time.perf_counter()
    truth = np.array([1.0, 2.0, 0.5])
    model, data = _exp_growth_data(2008)
    fit = fit_mle(model, data)
    single = bool(fit.converged and np.all(np.abs(fit.theta_hat.beta - truth) <= 3 * fit.standard_errors[:3]))
    covered = 0
    reps = 50
    for r in range(reps):
        model, data = _exp_growth_data(3000 + r)
        fit = fit_mle(model, data)
        if fit.converged and fit.covariance is not None:
            covered += bool(np.all(np.abs(fit.theta_hat.beta - truth) <= 3 * fit.standard_errors[:3]))
    elapsed = time.perf_counter() - t0
    ok = single and covered / reps >= 0.95 and elapsed < 60
    verdict(8, "MLE recovery", ok,
            f"fixed-seed fit within 3 SE: {single}; 3-SE box coverage {covered}/{reps} (need >= 95%)", elapsed)


def test_criterion_9_planted_outlier(verdict):
    hits = 0
    reps = 50
    for r in range(reps):
        rng = np.random.default_rng(1000 + r)
        n = 30
        x = rng.uniform(0.0, 2.0, n)
        model = parse_model("b1*exp(b2*x1)", ["x1"])
        y = model.mean(x[:, None], [2.0, 0.3]) + sn_from_normal(rng.standard_normal(n), SNParams(0.5))
        k = int(rng.integers(n))
        y[k] += 5 * default_scale(y)
        data = Dataset(y, x[:, None], ("x1",))
        fit = fit_mle(model, data)
        if not fit.converged:
            continue
        rep = influence_report(fit, PerturbationScheme(RESPONSE))
        hits += bool(int(np.argmax(rep.C_i)) == k and int(np.argmax(np.abs(rep.d_max))) == k
                     and k in rep.flagged)
    ok = hits >= 45
    verdict(9, "planted-outlier detection", ok,
            f"planted index is max C_i, max |d_max| and flagged in {hits}/{reps} (need >= 45)")


def test_criterion_10_determinism(tmp_path, verdict):
    cli = [sys.executable, "-m", "bsnlr.cli"]
    outputs = []
    for run in ("a", "b"):
        work = tmp_path / run
        work.mkdir()
        sim = cli + ["simulate", "--model", "b1*exp(b2*x1)", "--beta", "2,0.3", "--alpha", "0.5",
                     "--n", "60", "--range", "x1=0:2", "--seed", "17", "--outliers", "1", "--out", "sim.csv"]
        diag = cli + ["diagnose", "--data", "sim.csv", "--response", "y", "--model", "b1*exp(b2*x1)",
                      "--covariate", "x1", "--seed", "17", "--out", "report.json", "--svg", "plots"]
        for cmd in (sim, diag):
            subprocess.run(cmd, cwd=work, check=True, capture_output=True)
        outputs.append({p.relative_to(work).as_posix(): p.read_bytes()
                        for p in sorted(work.rglob("*")) if p.is_file()})
    same = outputs[0] == outputs[1]
    assert len(json.loads(outputs[0]["report.json"])["diagnostics"]["schemes"]) == 3
    verdict(10, "determinism", same,
            f"{len(outputs[0])} output files (CSV, JSON report, sidecar, SVG) byte-identical across two runs: {same}")
