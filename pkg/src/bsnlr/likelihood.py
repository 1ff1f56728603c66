"""Log-likelihood, score and second derivatives of the BS nonlinear regression model.

With ``z = y - mu`` each observation contributes

    l_i = -log(8 pi)/2 + log(xi1) - xi2**2 / 2,
    xi1 = (2/alpha) cosh(z/2),   xi2 = (2/alpha) sinh(z/2).

``ObservedInfo`` holds the raw Hessian of the log-likelihood (negative
definite at an interior maximum), not its negation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import logcosh
from .errors import ResidualTooLargeError
from .model import Dataset, DesignBundle, MeanModel, build_design

HALF_LOG_8PI = 0.5 * math.log(8.0 * math.pi)
MAX_RESIDUAL = 700.0


@dataclass(frozen=True)
class Theta:
    beta: np.ndarray
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float).reshape(-1))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def vector(self) -> np.ndarray:
        return np.append(self.beta, self.alpha)

    @classmethod
    def from_vector(cls, v) -> "Theta":
        v = np.asarray(v, dtype=float)
        return cls(v[:-1], v[-1])


@dataclass(frozen=True)
class XiTable:
    xi1: np.ndarray
    xi2: np.ndarray

    @property
    def s(self) -> np.ndarray:
        """``xi1*xi2 - xi2/xi1``, twice the derivative of l_i with respect to mu_i."""
        return self.xi1 * self.xi2 - self.xi2 / self.xi1


@dataclass(frozen=True)
class ObservedInfo:
    Lbb: np.ndarray
    Lba: np.ndarray
    Laa: float

    @property
    def matrix(self) -> np.ndarray:
        p = self.Lba.size
        M = np.empty((p + 1, p + 1))
        M[:p, :p] = self.Lbb
        M[:p, p] = self.Lba
        M[p, :p] = self.Lba
        M[p, p] = self.Laa
        return 0.5 * (M + M.T)


def _residuals(y, mu) -> np.ndarray:
    z = np.asarray(y, dtype=float) - np.asarray(mu, dtype=float)
    big = np.abs(z) > MAX_RESIDUAL
    if np.any(big):
        i = int(np.flatnonzero(big)[0])
        raise ResidualTooLargeError(
            f"residual too large at row {i + 1}: |y - mu| = {abs(z[i]):.6g} > {MAX_RESIDUAL}", row=i
        )
    return z


def compute_xi(theta: Theta, y, mu) -> XiTable:
    z = _residuals(y, mu)
    c = 2.0 / theta.alpha
    return XiTable(c * np.cosh(z / 2.0), c * np.sinh(z / 2.0))


def _per_obs(alpha: float, z: np.ndarray) -> np.ndarray:
    xi2 = (2.0 / alpha) * np.sinh(z / 2.0)
    return -HALF_LOG_8PI + math.log(2.0 / alpha) + logcosh(z / 2.0) - 0.5 * xi2 * xi2


def per_obs_loglik(theta: Theta, model: MeanModel, data: Dataset) -> np.ndarray:
    mu = model.mean(data.X, theta.beta)
    return _per_obs(theta.alpha, _residuals(data.y, mu))


def loglik(theta: Theta, model: MeanModel, data: Dataset) -> float:
    return float(np.sum(per_obs_loglik(theta, model, data)))


def loglik_from_mu(alpha: float, y, mu) -> float:
    return float(np.sum(_per_obs(alpha, _residuals(y, mu))))


def score(theta: Theta, model: MeanModel, data: Dataset, design: DesignBundle | None = None):
    """Return ``(U_beta, U_alpha)``."""
    design = design or build_design(model, data, theta.beta, check_rank=False)
    xi = compute_xi(theta, data.y, design.mu)
    a = theta.alpha
    u_beta = 0.5 * design.D.T @ xi.s
    u_alpha = -data.n / a + float(np.sum(xi.xi2 ** 2)) / a
    return u_beta, u_alpha


def score_vector(theta, model, data, design=None) -> np.ndarray:
    u_beta, u_alpha = score(theta, model, data, design)
    return np.append(u_beta, u_alpha)


def bracket_term(s, G) -> np.ndarray:
    """Bracket product ``[s^T][G]``: the p x p matrix ``sum_i s_i G[i]``."""
    s = np.asarray(s, dtype=float)
    G = np.asarray(G, dtype=float)
    if G.ndim != 3 or G.shape[0] != s.size or G.shape[1] != G.shape[2]:
        raise ValueError(f"bracket product needs s (n,) and G (n, p, p); got {s.shape} and {G.shape}")
    return np.einsum("i,ijk->jk", s, G)


def hessian_weights(theta: Theta, xi: XiTable):
    """Per-observation ``v``, ``h`` and ``k`` entering the second derivatives."""
    a = theta.alpha
    x1, x2 = xi.xi1, xi.xi2
    v = -(2.0 * x2 ** 2 + 4.0 / a ** 2 - 1.0 + x2 ** 2 / x1 ** 2) / 4.0
    h = -x1 * x2 / a
    k = 1.0 / a ** 2 - 3.0 * x2 ** 2 / a ** 2
    return v, h, k


def observed_hessian(theta: Theta, model: MeanModel, data: Dataset,
                     design: DesignBundle | None = None) -> ObservedInfo:
    design = design or build_design(model, data, theta.beta, check_rank=False)
    xi = compute_xi(theta, data.y, design.mu)
    v, h, k = hessian_weights(theta, xi)
    D = design.D
    Lbb = D.T @ (v[:, None] * D) + 0.5 * bracket_term(xi.s, design.G)
    return ObservedInfo(0.5 * (Lbb + Lbb.T), D.T @ h, float(np.sum(k)))


def cross_deriv_y(theta: Theta, model: MeanModel, data: Dataset,
                  design: DesignBundle | None = None) -> np.ndarray:
    """Mixed derivatives d2 l / d theta d y^T as a (p+1) x n matrix."""
    design = design or build_design(model, data, theta.beta, check_rank=False)
    xi = compute_xi(theta, data.y, design.mu)
    v, h, _ = hessian_weights(theta, xi)
    return -np.vstack([design.D.T * v[None, :], h[None, :]])
