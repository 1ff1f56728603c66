"""Maximum likelihood estimation for BS nonlinear regression."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (BSError, ConvergenceError, EvaluationError, NotLocalMaximumError,
                     NotPositiveDefiniteError)
from .likelihood import (Theta, XiTable, _per_obs, compute_xi, loglik, loglik_from_mu, observed_hessian,
                         score_vector)
from .model import Dataset, DesignBundle, MeanModel, build_design
from .numeric import cholesky_solve, erfcx, fd_gradient, fd_hessian, qr_least_squares

log = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-6
_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8
    max_iter: int = 200
    init: Theta | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass
class FitResult:
    theta_hat: Theta
    loglik_at_hat: float
    iterations: int
    converged: bool
    score_norm: float
    covariance: np.ndarray | None
    design_at_hat: DesignBundle
    xi_at_hat: XiTable
    model: MeanModel = field(repr=False)
    data: Dataset = field(repr=False)
    trace: list = field(default_factory=list, repr=False)

    @property
    def standard_errors(self) -> np.ndarray | None:
        if self.covariance is None:
            return None
        return np.sqrt(np.diag(self.covariance))


def psi_alpha(alpha: float) -> float:
    """Weight function of the beta update; 1 + 4/a^2 for small a, 2 for large a."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return 2.0 + 4.0 / alpha ** 2 - (_SQRT_2PI / alpha) * erfcx(_SQRT2 / alpha)


def _alpha_root(z: np.ndarray) -> float:
    """Closed-form alpha solving U_alpha = 0 for fixed residuals z."""
    return math.sqrt(4.0 / z.size * float(np.sum(np.sinh(z / 2.0) ** 2)))


def _least_squares_start(model: MeanModel, data: Dataset, beta0, max_iter: int = 50) -> np.ndarray:
    """Levenberg-Marquardt damped Gauss-Newton for min ||y - mu(beta)||^2."""
    beta = np.asarray(beta0, dtype=float)
    try:
        design = build_design(model, data, beta, check_rank=False)
    except EvaluationError as err:
        raise ConvergenceError(
            f"least-squares start values cannot be evaluated at beta={beta.tolist()} ({err}); "
            "supply explicit initial values"
        ) from err
    r = data.y - design.mu
    sse = float(r @ r)
    lam = 1e-3
    for _ in range(max_iter):
        D = design.D
        scale = np.sqrt(np.maximum(np.sum(D * D, axis=0), 1e-300))
        improved = False
        while lam < 1e16:
            A = np.vstack([D, math.sqrt(lam) * np.diag(scale)])
            b = np.concatenate([r, np.zeros(model.p)])
            step = np.linalg.lstsq(A, b, rcond=None)[0]
            cand = beta + step
            try:
                cand_design = build_design(model, data, cand, check_rank=False)
            except EvaluationError:
                lam *= 10.0
                continue
            cand_r = data.y - cand_design.mu
            cand_sse = float(cand_r @ cand_r)
            if cand_sse < sse:
                improved = True
                break
            lam *= 10.0
        if not improved:
            break
        done = sse - cand_sse <= 1e-14 * max(sse, 1e-300)
        beta, design, r, sse = cand, cand_design, cand_r, cand_sse
        lam = max(lam / 10.0, 1e-12)
        if done:
            break
    if not np.all(np.isfinite(beta)):
        raise ConvergenceError("least-squares start values diverged; supply explicit initial values")
    return beta


def init_params(model: MeanModel, data: Dataset, beta0=None) -> Theta:
    """Starting values: least-squares beta, then the alpha root given those residuals."""
    if data.n < model.p:
        raise ValueError(f"need n >= p, got n={data.n}, p={model.p}")
    if beta0 is None:
        beta0 = np.ones(model.p)
    beta = _least_squares_start(model, data, beta0)
    alpha = _alpha_root(data.y - model.mean(data.X, beta))
    if alpha < ALPHA_FLOOR:
        warnings.warn(
            f"start value for alpha is {alpha:.3g} (near-exact fit); floored at {ALPHA_FLOOR}",
            stacklevel=2,
        )
        alpha = ALPHA_FLOOR
    return Theta(beta, alpha)


def _try_loglik(theta_vec, model, data) -> float:
    if not theta_vec[-1] > 0:
        return -math.inf
    try:
        return loglik_from_mu(theta_vec[-1], data.y, model.mean(data.X, theta_vec[:-1]))
    except BSError:
        return -math.inf


def _per_obs_terms(theta: Theta, data: Dataset, design: DesignBundle) -> np.ndarray:
    return _per_obs(theta.alpha, data.y - design.mu)


def _newton_proposal(theta: Theta, model: MeanModel, data: Dataset, design: DesignBundle):
    """Newton step with the analytic Hessian, or None where -L is not positive definite."""
    info = observed_hessian(theta, model, data, design)
    try:
        step = cholesky_solve(-info.matrix, score_vector(theta, model, data, design))
    except NotPositiveDefiniteError:
        return None
    proposal = theta.vector + step
    return proposal if proposal[-1] > 0 else None


def fit_mle(model: MeanModel, data: Dataset, opts: FitOptions | None = None) -> FitResult:
    """Joint iterative maximum likelihood for (beta, alpha).

    Each iteration applies the weighted least-squares beta update with weight
    2/psi(alpha) on ``s`` and the alpha update ``alpha (1 + mean xi2^2) / 2``,
    both from the current iterate. A step that lowers the log-likelihood is
    halved toward the previous iterate (at most 20 times). If that fails, or
    the log-likelihood stops moving before the convergence test passes, the
    remaining iterations take Newton steps with the analytic Hessian.
    """
    opts = opts or FitOptions()
    n, p = data.n, model.p
    if n < p + 1:
        raise ValueError(f"need n >= p + 1 observations, got n={n}, p={p}")
    theta = opts.init if opts.init is not None else init_params(model, data)
    current = theta.vector
    ll = _try_loglik(current, model, data)
    if not math.isfinite(ll):
        raise ConvergenceError("log-likelihood is not finite at the initial values")
    trace = []
    converged = False
    iterations = 0
    newton = False
    stalled = 0
    for iterations in range(1, opts.max_iter + 1):
        th = Theta.from_vector(current)
        design = build_design(model, data, th.beta)
        xi = compute_xi(th, data.y, design.mu)
        proposal = _newton_proposal(th, model, data, design) if newton else None
        if proposal is None:
            newton = False
            step_beta = qr_least_squares(design.D, (2.0 / psi_alpha(th.alpha)) * xi.s)
            alpha_new = 0.5 * th.alpha * (1.0 + float(np.mean(xi.xi2 ** 2)))
            proposal = np.append(th.beta + step_beta, alpha_new)
        mode = "newton" if newton else "scheme"

        # The update direction is always an ascent direction. Once its
        # predicted gain is below the rounding level of the log-likelihood the
        # ascent test is meaningless and the full step is taken.
        gain = float(score_vector(th, model, data, design) @ (proposal - current))
        noise = 64.0 * np.finfo(float).eps * float(np.sum(np.abs(_per_obs_terms(th, data, design))))
        halvings = 0
        cand = proposal
        cand_ll = _try_loglik(cand, model, data)
        if gain > noise:
            t = 1.0
            while cand_ll < ll and halvings < 20:
                t *= 0.5
                halvings += 1
                cand = current + t * (proposal - current)
                cand_ll = _try_loglik(cand, model, data)
            if cand_ll < ll:
                trace.append((iterations, ll, current[-1], halvings, mode))
                if newton:
                    log.debug("iteration %d: no ascent after 20 halvings", iterations)
                    break
                newton = True
                continue
        elif not math.isfinite(cand_ll):
            trace.append((iterations, ll, current[-1], halvings, mode))
            break

        change = np.max(np.abs(cand - current) / np.maximum(1.0, np.abs(current)))
        dll = abs(cand_ll - ll)
        current, ll = cand, cand_ll
        trace.append((iterations, ll, current[-1], halvings, mode))
        score_norm = float(np.max(np.abs(score_vector(Theta.from_vector(current), model, data))))
        small_dll = dll <= opts.tol * max(1.0, abs(ll))
        if change <= opts.tol and small_dll and score_norm <= 10.0 * opts.tol * max(1.0, abs(ll)):
            converged = True
            break
        # The fixed-point scheme can crawl (or cycle) near the optimum; after a
        # few steps without progress, finish with Newton steps.
        stalled = stalled + 1 if small_dll else 0
        if stalled >= 3:
            newton = True

    theta_hat = Theta.from_vector(current)
    design = build_design(model, data, theta_hat.beta)
    xi = compute_xi(theta_hat, data.y, design.mu)
    score_norm = float(np.max(np.abs(score_vector(theta_hat, model, data, design))))
    if not converged and score_norm <= 10.0 * opts.tol * max(1.0, abs(ll)):
        # Stalled at the floating-point floor of an already stationary point.
        converged = True
    result = FitResult(
        theta_hat=theta_hat,
        loglik_at_hat=loglik(theta_hat, model, data),
        iterations=iterations,
        converged=converged,
        score_norm=score_norm,
        covariance=None,
        design_at_hat=design,
        xi_at_hat=xi,
        model=model,
        data=data,
        trace=trace,
    )
    try:
        result.covariance = asymptotic_covariance(result)
    except NotLocalMaximumError as err:
        warnings.warn(str(err), stacklevel=2)
    return result


def asymptotic_covariance(fit: FitResult) -> np.ndarray:
    """``(-L)^-1`` with L the log-likelihood Hessian at the estimate."""
    info = observed_hessian(fit.theta_hat, fit.model, fit.data, fit.design_at_hat)
    neg = -info.matrix
    try:
        cov = cholesky_solve(neg, np.eye(neg.shape[0]))
    except NotPositiveDefiniteError as err:
        raise NotLocalMaximumError(
            f"not a local maximum: the negative Hessian is not positive definite ({err})"
        ) from err
    return 0.5 * (cov + cov.T)


def refit_perturbed(fit: FitResult, perturbed_loglik: Callable[[Theta], float],
                    init: Theta | None = None, max_iter: int = 200) -> Theta:
    """Maximize a perturbed log-likelihood by damped Newton with finite-difference derivatives."""
    x = (init or fit.theta_hat).vector.copy()

    def f(v):
        if not v[-1] > 0:
            return -math.inf
        try:
            return float(perturbed_loglik(Theta.from_vector(v)))
        except BSError:
            return -math.inf

    fx = f(x)
    if not math.isfinite(fx):
        raise ConvergenceError("perturbed log-likelihood is not finite at the start point", best=x)
    for _ in range(max_iter):
        g = fd_gradient(f, x)
        if np.max(np.abs(g)) <= 1e-8 * max(1.0, abs(fx)):
            return Theta.from_vector(x)
        H = fd_hessian(f, x)
        neg = -0.5 * (H + H.T)
        shift = 0.0
        while True:
            try:
                direction = cholesky_solve(neg + shift * np.eye(x.size), g)
                break
            except NotPositiveDefiniteError:
                shift = max(2.0 * shift, 1e-8 * max(1.0, np.max(np.abs(neg))))
        # Near the optimum the gain is below rounding, so allow a few ulps of slack.
        slack = 64.0 * np.finfo(float).eps * max(1.0, abs(fx))
        t = 1.0
        while t > 1e-10:
            cand = x + t * direction
            fc = f(cand)
            if fc >= fx - slack:
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                "perturbed refit stalled before reaching the gradient tolerance",
                best=Theta.from_vector(x),
            )
        x, fx = cand, fc
    raise ConvergenceError(
        f"perturbed refit did not converge in {max_iter} iterations", best=Theta.from_vector(x)
    )
