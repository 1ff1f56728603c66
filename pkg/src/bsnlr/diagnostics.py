"""Local influence, total local influence and generalized leverage.

A perturbation scheme defines a perturbed log-likelihood l(theta | omega)
with a null point omega0 where it reduces to l(theta). Everything here is
built from

    Delta = d2 l(theta | omega) / d theta d omega^T     at (theta_hat, omega0),

a (p+1) x n matrix, and the log-likelihood Hessian L at theta_hat. The normal
curvature in a unit direction d is ``2 |d^T Delta^T L^-1 Delta d|``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BSError
from .fitter import FitResult, refit_perturbed
from .likelihood import (ObservedInfo, Theta, cross_deriv_y, loglik_from_mu,
                         observed_hessian, _per_obs, _residuals)
from .numeric import jacobi_sym_eig_max

CASE_WEIGHTS = "case-weights"
RESPONSE = "response"
EXPLANATORY = "explanatory"
SCHEMES = (CASE_WEIGHTS, RESPONSE, EXPLANATORY)


@dataclass(frozen=True)
class PerturbationScheme:
    kind: str
    covariate: str | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown perturbation scheme {self.kind!r}; choose from {', '.join(SCHEMES)}")
        if self.kind == EXPLANATORY and not self.covariate:
            raise ValueError("the explanatory scheme needs a covariate")
        if self.scale is not None and not self.scale > 0:
            raise ValueError(f"perturbation scale must be positive, got {self.scale}")

    def omega0(self, n: int) -> np.ndarray:
        return np.ones(n) if self.kind == CASE_WEIGHTS else np.zeros(n)


@dataclass(frozen=True)
class DeltaMatrix:
    scheme: PerturbationScheme
    values: np.ndarray
    omega0: np.ndarray


@dataclass
class InfluenceReport:
    scheme: PerturbationScheme
    C_dmax: float
    d_max: np.ndarray
    C_i: np.ndarray
    threshold: float
    flagged: list[int]
    C_dmax_beta: float
    d_max_beta: np.ndarray
    C_i_beta: np.ndarray
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class LeverageMatrix:
    GL: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.GL).copy()

    @property
    def trace(self) -> float:
        return float(np.trace(self.GL))


def default_scale(values) -> float:
    """Sample standard deviation (divisor n - 1)."""
    return float(np.std(np.asarray(values, dtype=float), ddof=1))


def _hat_terms(fit: FitResult):
    xi = fit.xi_at_hat
    return xi.xi1, xi.xi2, fit.theta_hat.alpha


def delta_case_weights(fit: FitResult) -> DeltaMatrix:
    x1, x2, a = _hat_terms(fit)
    coef = 0.5 * (x1 * x2 - x2 / x1)
    b = -1.0 / a + x2 ** 2 / a
    values = np.vstack([fit.design_at_hat.D.T * coef[None, :], b[None, :]])
    return DeltaMatrix(PerturbationScheme(CASE_WEIGHTS), values, np.ones(fit.data.n))


def delta_response(fit: FitResult, S_y: float | None = None) -> DeltaMatrix:
    S_y = default_scale(fit.data.y) if S_y is None else float(S_y)
    x1, x2, a = _hat_terms(fit)
    c = S_y * (2.0 * x2 ** 2 + 4.0 / a ** 2 - 1.0 + x2 ** 2 / x1 ** 2) / 4.0
    d = S_y * x1 * x2 / a
    values = np.vstack([fit.design_at_hat.D.T * c[None, :], d[None, :]])
    return DeltaMatrix(PerturbationScheme(RESPONSE, scale=S_y), values, np.zeros(fit.data.n))


def _covariate_index(fit: FitResult, covariate) -> tuple[str, int]:
    names = fit.data.names
    if isinstance(covariate, (int, np.integer)):
        return names[covariate], int(covariate)
    return covariate, fit.data.column(covariate)


def check_continuous(values) -> None:
    if np.unique(values).size < 3:
        raise ValueError("explanatory perturbation needs a continuous covariate (at least 3 distinct values)")


def delta_explanatory(fit: FitResult, covariate, S_x: float | None = None) -> DeltaMatrix:
    """Delta for an additive shift ``x_ij + omega_i * S_x`` of one covariate column.

    Derivatives of the mean with respect to the covariate come from the same
    dual-number evaluation as D and G, so every occurrence of the covariate in
    the expression is perturbed together.
    """
    name, j = _covariate_index(fit, covariate)
    column = fit.data.X[:, j]
    check_continuous(column)
    S_x = default_scale(column) if S_x is None else float(S_x)
    scheme = PerturbationScheme(EXPLANATORY, covariate=name, scale=S_x)
    n, p = fit.data.n, fit.model.p
    if not fit.model.uses(name):
        warnings.warn(f"covariate {name!r} does not appear in the mean function; Delta is zero", stacklevel=2)
        return DeltaMatrix(scheme, np.zeros((p + 1, n)), np.zeros(n))
    x1, x2, a = _hat_terms(fit)
    dual = fit.model.dual(fit.data.X, fit.theta_hat.beta, wrt_covariate=j)
    grad = np.broadcast_to(dual.grad, (n, p + 1))
    hess = np.broadcast_to(dual.hess, (n, p + 1, p + 1))
    mu_w = S_x * grad[:, p]  # d mu_iw / d omega_i
    mu_r = grad[:, :p]  # d mu_iw / d beta_r
    mu_rw = S_x * hess[:, :p, p]  # d2 mu_iw / d beta_r d omega_i
    s_half = 0.5 * (x1 * x2 - x2 / x1)
    v_term = (2.0 * x2 ** 2 + 4.0 / a ** 2 - 1.0 + x2 ** 2 / x1 ** 2) / 4.0
    delta_beta = mu_rw * s_half[:, None] - (mu_w * v_term)[:, None] * mu_r
    e = -mu_w * x1 * x2 / a
    return DeltaMatrix(scheme, np.vstack([delta_beta.T, e[None, :]]), np.zeros(n))


def compute_delta(fit: FitResult, scheme: PerturbationScheme) -> DeltaMatrix:
    if scheme.kind == CASE_WEIGHTS:
        return delta_case_weights(fit)
    if scheme.kind == RESPONSE:
        return delta_response(fit, scheme.scale)
    return delta_explanatory(fit, scheme.covariate, scheme.scale)


def hessian_at_hat(fit: FitResult) -> ObservedInfo:
    return observed_hessian(fit.theta_hat, fit.model, fit.data, fit.design_at_hat)


def _inverse(info: ObservedInfo) -> np.ndarray:
    L = info.matrix
    try:
        inv = np.linalg.solve(L, np.eye(L.shape[0]))
    except np.linalg.LinAlgError as err:
        raise BSError(f"log-likelihood Hessian is singular: {err}") from err
    return 0.5 * (inv + inv.T)


def _beta_middle(info: ObservedInfo) -> np.ndarray:
    if info.Lba.size == 0:
        raise ValueError("beta-subset curvature needs at least one regression parameter")
    if info.Laa == 0.0:
        raise BSError("alpha-alpha Hessian entry is zero; beta-subset curvature undefined")
    M = _inverse(info)
    M[-1, -1] -= 1.0 / info.Laa
    return M


def _values(delta) -> np.ndarray:
    return delta.values if isinstance(delta, DeltaMatrix) else np.asarray(delta, dtype=float)


def normal_curvature(delta, info: ObservedInfo, d) -> float:
    d = np.asarray(d, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-10:
        raise ValueError("direction must have unit norm")
    w = _values(delta) @ d
    return 2.0 * abs(float(w @ _inverse(info) @ w))


def _curvature_matrix(Delta: np.ndarray, middle: np.ndarray) -> np.ndarray:
    B = -Delta.T @ middle @ Delta
    return 0.5 * (B + B.T)


def _top_eigen(B: np.ndarray, Delta: np.ndarray, middle: np.ndarray, notes: list[str]):
    """Largest eigenpair of ``B = -Delta^T M Delta``.

    B has rank at most p+1, so the Jacobi solve runs on the compressed
    (p+1) x (p+1) matrix ``R (-M) R^T`` where ``Delta^T = Q R``; its
    eigenvectors map back through Q.
    """
    n = Delta.shape[1]
    k = Delta.shape[0]
    if n <= k:
        pair = jacobi_sym_eig_max(B)
        value, vec = pair.value, pair.vector
    else:
        Q, R = np.linalg.qr(Delta.T, mode="reduced")
        S = -R @ middle @ R.T
        pair = jacobi_sym_eig_max(0.5 * (S + S.T))
        value = pair.value
        vec = Q @ pair.vector
        norm = np.linalg.norm(vec)
        vec = vec / norm if norm > 0 else np.eye(n)[0]
        k_max = int(np.argmax(np.abs(vec)))
        if vec[k_max] < 0:
            vec = -vec
        if value < 0:
            # Curvature of the null space of Delta is zero.
            value = 0.0
    scale = max(np.max(np.abs(B)), np.finfo(float).tiny)
    if value < 0:
        if value < -1e-10 * scale:
            notes.append(f"largest eigenvalue of B is negative ({value:.3g}); fit may not be a maximum")
        value = 0.0
    return value, vec


def _min_eigen_check(B: np.ndarray, notes: list[str], label: str) -> None:
    scale = max(np.max(np.abs(B)), np.finfo(float).tiny)
    low = float(np.min(np.linalg.eigvalsh(B))) if B.shape[0] <= 400 else 0.0
    if low < -1e-8 * scale:
        msg = f"{label} has a negative eigenvalue {low:.3g}; fit may not be a local maximum"
        notes.append(msg)
        warnings.warn(msg, stacklevel=3)


def max_curvature(delta, info: ObservedInfo, notes: list[str] | None = None):
    """Return ``(C_dmax, d_max)``; ``C_dmax`` is twice the largest eigenvalue of B."""
    notes = [] if notes is None else notes
    Delta = _values(delta)
    middle = _inverse(info)
    B = _curvature_matrix(Delta, middle)
    value, vec = _top_eigen(B, Delta, middle, notes)
    return 2.0 * value, vec


def _diag_curvatures(Delta: np.ndarray, middle: np.ndarray) -> np.ndarray:
    return 2.0 * np.abs(np.einsum("ri,rs,si->i", Delta, middle, Delta))


def curvature_beta(delta, info: ObservedInfo, notes: list[str] | None = None):
    """Return ``(C_dmax_beta, d_max_beta, C_i_beta)`` for influence on beta alone."""
    notes = [] if notes is None else notes
    Delta = _values(delta)
    middle = _beta_middle(info)
    B1 = _curvature_matrix(Delta, middle)
    value, vec = _top_eigen(B1, Delta, middle, notes)
    return 2.0 * value, vec, _diag_curvatures(Delta, middle)


def total_local_influence(delta, info: ObservedInfo):
    """Return ``(C_i, threshold, flagged)`` with flagged = {i : C_i >= 2 mean(C)} (0-based)."""
    C = _diag_curvatures(_values(delta), _inverse(info))
    threshold = 2.0 * float(np.mean(C))
    # With every C_i zero the rule would flag all cases; flag none instead.
    flagged = [int(i) for i in np.flatnonzero(C >= threshold)] if threshold > 0 else []
    return C, threshold, flagged


def influence_report(fit: FitResult, scheme: PerturbationScheme) -> InfluenceReport:
    delta = compute_delta(fit, scheme)
    info = hessian_at_hat(fit)
    notes: list[str] = []
    C_dmax, d_max = max_curvature(delta, info, notes)
    _min_eigen_check(_curvature_matrix(delta.values, _inverse(info)), notes, "B")
    C_i, threshold, flagged = total_local_influence(delta, info)
    Cb, db, Cib = curvature_beta(delta, info, notes)
    return InfluenceReport(delta.scheme, C_dmax, d_max, C_i, threshold, flagged, Cb, db, Cib, notes)


def generalized_leverage(fit: FitResult) -> LeverageMatrix:
    """``[D 0] (-L)^-1 L_theta_y`` at the estimate."""
    info = hessian_at_hat(fit)
    neg = -info.matrix
    try:
        np.linalg.cholesky(neg)
    except np.linalg.LinAlgError:
        raise BSError("generalized leverage needs a negative definite Hessian at the estimate") from None
    Lty = cross_deriv_y(fit.theta_hat, fit.model, fit.data, fit.design_at_hat)
    sens = np.linalg.solve(neg, Lty)
    return LeverageMatrix(fit.design_at_hat.D @ sens[:-1])


def perturbed_loglik(fit: FitResult, scheme: PerturbationScheme, omega):
    """The perturbed log-likelihood ``theta -> l(theta | omega)``."""
    omega = np.asarray(omega, dtype=float)
    model, data = fit.model, fit.data
    if scheme.kind == CASE_WEIGHTS:
        def f(theta: Theta) -> float:
            mu = model.mean(data.X, theta.beta)
            return float(omega @ _per_obs(theta.alpha, _residuals(data.y, mu)))
        return f
    if scheme.kind == RESPONSE:
        S_y = default_scale(data.y) if scheme.scale is None else scheme.scale
        y_w = data.y + omega * S_y

        def f(theta: Theta) -> float:
            return loglik_from_mu(theta.alpha, y_w, model.mean(data.X, theta.beta))
        return f
    j = data.column(scheme.covariate)
    S_x = default_scale(data.X[:, j]) if scheme.scale is None else scheme.scale
    X_w = data.X.copy()
    X_w[:, j] += omega * S_x

    def f(theta: Theta) -> float:
        return loglik_from_mu(theta.alpha, data.y, model.mean(X_w, theta.beta))
    return f


def likelihood_displacement(fit: FitResult, scheme: PerturbationScheme, omega,
                            init: Theta | None = None) -> float:
    """``2 {l(theta_hat) - l(theta_hat_omega)}`` with theta_hat_omega from a fresh refit."""
    omega = np.asarray(omega, dtype=float)
    if np.array_equal(omega, scheme.omega0(fit.data.n)):
        return 0.0
    theta_w = refit_perturbed(fit, perturbed_loglik(fit, scheme, omega), init)
    base = perturbed_loglik(fit, scheme, scheme.omega0(fit.data.n))
    return 2.0 * (base(fit.theta_hat) - base(theta_w))


def curvature_from_displacement(fit: FitResult, scheme: PerturbationScheme, d,
                                steps=(-0.02, -0.01, 0.01, 0.02)) -> float:
    """Second derivative of a quadratic fitted to ``a -> LD(omega0 + a d)``."""
    d = np.asarray(d, dtype=float)
    omega0 = scheme.omega0(fit.data.n)
    a = np.asarray(steps, dtype=float)
    ld = np.array([likelihood_displacement(fit, scheme, omega0 + ai * d) for ai in a])
    coef = np.polyfit(a, ld, 2)
    return 2.0 * coef[0]

