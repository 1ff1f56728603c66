"""Special functions, small dense linear algebra and finite-difference oracles.

Matrices are plain 2-D ``numpy`` arrays throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import FiniteDifferenceError, NotPositiveDefiniteError, SingularDesignError

_SQRT_PI = math.sqrt(math.pi)
# erfc(x) * exp(x*x) is representable without overflow below this point.
_ERFCX_SWITCH = 25.0


def erf(x: float) -> float:
    return math.erf(x)


def erfcx(x: float) -> float:
    """Scaled complementary error function ``exp(x**2) * (1 - erf(x))`` for ``x >= 0``."""
    if x < 0:
        raise ValueError(f"erfcx is only defined here for x >= 0, got {x}")
    if x < _ERFCX_SWITCH:
        return math.erfc(x) * math.exp(x * x)
    # Asymptotic series; at x >= 25 eight terms are below double rounding.
    inv2x2 = 1.0 / (2.0 * x * x)
    term = 1.0
    total = 1.0
    for k in range(1, 9):
        term *= -(2 * k - 1) * inv2x2
        total += term
    return total / (x * _SQRT_PI)


def cholesky(A: np.ndarray) -> np.ndarray:
    """Lower-triangular factor L with ``L @ L.T == A``.

    Raises NotPositiveDefiniteError naming the first non-positive pivot.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    if np.max(np.abs(A - A.T)) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    L = np.zeros_like(A)
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(
                f"not positive definite: pivot {j} is {pivot:.6g}", pivot=j
            )
        L[j, j] = math.sqrt(pivot)
        L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def _forward(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.array(b, dtype=float)
    for i in range(L.shape[0]):
        x[i] = (x[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def _backward(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    x = np.array(b, dtype=float)
    for i in range(U.shape[0] - 1, -1, -1):
        x[i] = (x[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def cholesky_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive-definite ``A``.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    L = cholesky(A)
    b = np.asarray(b, dtype=float)
    return _backward(L.T, _forward(L, b))


def qr_least_squares(A: np.ndarray, b: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Least-squares solution of ``A x ~ b`` through a Householder QR.

    A column whose triangular pivot falls below ``rtol * ||A||`` is reported
    as linearly dependent on the columns before it.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    rows, cols = A.shape
    if rows < cols:
        raise SingularDesignError(
            f"singular design: {rows} rows cannot determine {cols} columns", column=rows
        )
    Q, R = np.linalg.qr(A, mode="reduced")
    check_pivots(R, np.linalg.norm(A), rtol)
    return _backward(R, Q.T @ b)


def check_pivots(R: np.ndarray, norm: float, rtol: float = 1e-10) -> None:
    threshold = rtol * norm
    for j in range(R.shape[1]):
        if not abs(R[j, j]) > threshold:
            raise SingularDesignError(
                f"singular design: column {j} is numerically dependent on earlier columns",
                column=j,
            )


@dataclass(frozen=True)
class EigenPair:
    value: float
    vector: np.ndarray


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def jacobi_eigh(A: np.ndarray, tol: float = 1e-15, max_sweeps: int = 60):
    """All eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with eigenvectors in the columns, sorted by
    decreasing eigenvalue.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * max(scale, np.finfo(float).tiny):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    norm = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * norm or norm == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                colp = A[:, p].copy()
                colq = A[:, q]
                A[:, p] = c * colp - s * colq
                A[:, q] = s * colp + c * colq
                rowp = A[p, :].copy()
                rowq = A[q, :]
                A[p, :] = c * rowp - s * rowq
                A[q, :] = s * rowp + c * rowq
                vp = V[:, p].copy()
                vq = V[:, q]
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    values = np.diag(A).copy()
    order = np.argsort(-values, kind="stable")
    V = V[:, order]
    for j in range(n):
        V[:, j] = _fix_sign(V[:, j] / np.linalg.norm(V[:, j]))
    return values[order], V


def jacobi_sym_eig_max(A: np.ndarray) -> EigenPair:
    """Algebraically largest eigenvalue and its unit eigenvector.

    The eigenvector sign is chosen so that its largest-magnitude entry is positive.
    """
    values, vectors = jacobi_eigh(A)
    return EigenPair(float(values[0]), vectors[:, 0].copy())


def fd_step(x: float, order: int = 1) -> float:
    """Central-difference step: eps^(1/3) for first derivatives, eps^(1/4) for second.

    The rounding error of a second difference grows like eps / h^2, so the
    first-derivative step would leave about 1e-5 relative noise in a Hessian.
    """
    eps = np.finfo(float).eps
    base = np.cbrt(eps) if order == 1 else eps ** 0.25
    return base * max(1.0, abs(x))


def _call(f: Callable, *args) -> float:
    value = f(*args)
    if not np.isfinite(value):
        raise FiniteDifferenceError(
            f"non-finite function value {value} at probe point {args}", point=args
        )
    return float(value)


def fd_gradient(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        h = fd_step(x[j])
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        grad[j] = (_call(f, xp) - _call(f, xm)) / (xp[j] - xm[j])
    return grad


def fd_hessian(f: Callable[[np.ndarray], float], x) -> np.ndarray:
    """Central-difference Hessian; only the upper triangle is probed, then mirrored."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = np.array([fd_step(v, 2) for v in x])
    f0 = _call(f, x)
    H = np.empty((k, k))
    for i in range(k):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        H[i, i] = (_call(f, xp) - 2.0 * f0 + _call(f, xm)) / (h[i] * h[i])
        for j in range(i + 1, k):
            H[i, j] = H[j, i] = _mixed(f, x, i, j, h[i], h[j])
    return H


def _mixed(f, x, i, j, hi, hj) -> float:
    total = 0.0
    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        z = x.copy()
        z[i] += si * hi
        z[j] += sj * hj
        total += si * sj * _call(f, z)
    return total / (4.0 * hi * hj)


def fd_cross(f: Callable[[np.ndarray, np.ndarray], float], theta, omega) -> np.ndarray:
    """Mixed second derivatives ``d2 f / d theta_r d omega_i`` as a len(theta) x len(omega) matrix."""
    theta = np.asarray(theta, dtype=float)
    omega = np.asarray(omega, dtype=float)
    k, m = theta.size, omega.size
    z = np.concatenate([theta, omega])

    def g(v):
        return f(v[:k], v[k:])

    out = np.empty((k, m))
    for r in range(k):
        hr = fd_step(theta[r], 2)
        for i in range(m):
            out[r, i] = _mixed(g, z, r, k + i, hr, fd_step(omega[i], 2))
    return out
