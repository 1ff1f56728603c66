"""Datasets, mean models and the design bundle (mu, D, G)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .dual import Dual2
from .errors import EvaluationError, SingularDesignError
from .numeric import check_pivots

BUILTINS = ("linear", "exp-growth", "michaelis-menten")


@dataclass(frozen=True)
class Dataset:
    """Log-lifetimes ``y`` with an n x m covariate table."""

    y: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else np.zeros((y.size, 0))
        if X.shape[0] != y.size:
            raise ValueError(f"covariate table has {X.shape[0]} rows but y has {y.size}")
        names = tuple(self.names) if self.names else tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ValueError(f"{len(names)} covariate names for {X.shape[1]} columns")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.y.size

    def column(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no covariate named {name!r}") from None

    def with_y(self, y) -> "Dataset":
        return Dataset(y, self.X, self.names)

    def with_X(self, X) -> "Dataset":
        return Dataset(self.y, X, self.names)

    def drop(self, i: int) -> "Dataset":
        keep = np.arange(self.n) != i
        return Dataset(self.y[keep], self.X[keep], self.names)


@dataclass(frozen=True)
class DesignBundle:
    mu: np.ndarray  # (n,)
    D: np.ndarray  # (n, p)
    G: np.ndarray  # (n, p, p)


@dataclass(frozen=True)
class MeanModel:
    text: str
    ast: ex.Expr = field(repr=False)
    covariates: tuple[str, ...]
    p: int

    def uses(self, name: str) -> bool:
        return self.covariates.index(name) in ex.covariate_columns(self.ast)

    def dual(self, X, beta, wrt_covariate: int | None = None) -> Dual2:
        """Evaluate with derivatives w.r.t. ``beta`` (and one covariate column, appended last).

        ``X`` is either one covariate row (m,) or a table (n, m).
        """
        X = np.asarray(X, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if beta.size != self.p:
            raise ValueError(f"expected {self.p} parameters, got {beta.size}")
        shape = X.shape[:-1]
        k = self.p + (wrt_covariate is not None)
        return _eval(self.ast, _Env(X, beta, shape, k, wrt_covariate))

    def mean(self, X, beta) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        with np.errstate(all="ignore"):
            mu = _value(self.ast, X, np.asarray(beta, dtype=float))
        mu = np.broadcast_to(mu, X.shape[:-1]).astype(float)
        if not np.all(np.isfinite(mu)):
            # Re-run with derivatives to locate the failing node and row.
            self.dual(X, beta)
            raise EvaluationError("non-finite mean value")
        return mu


def parse_model(text: str, covariates=(), p: int | None = None) -> MeanModel:
    covariates = tuple(covariates)
    ast = ex.parse(text, covariates, p)
    used = ex.parameter_indices(ast)
    if p is None:
        p = max(used, default=0)
    if p < 1:
        raise ex.ModelSyntaxError("model has no parameters b1..bp")
    return MeanModel(text, ast, covariates, p)


def builtin_text(name: str, covariates) -> str:
    """Expand a builtin model name to expression text over the given covariates."""
    covariates = list(covariates)
    if name == "linear":
        terms = ["b1"] + [f"b{j + 2}*{c}" for j, c in enumerate(covariates)]
        return " + ".join(terms)
    if not covariates:
        raise ValueError(f"builtin model {name!r} needs a covariate")
    x = covariates[0]
    if name == "exp-growth":
        return f"b1 + b2*exp(b3*{x})"
    if name == "michaelis-menten":
        return f"b1*{x}/(b2 + {x})"
    raise ValueError(f"unknown builtin model {name!r}; choose from {', '.join(BUILTINS)}")


def eval_dual2(model: MeanModel, x, beta) -> Dual2:
    """Value, gradient and Hessian of the mean function at one covariate row."""
    return model.dual(np.asarray(x, dtype=float).reshape(-1), beta)


def build_design(model: MeanModel, data: Dataset, beta, check_rank: bool = True) -> DesignBundle:
    n, p = data.n, model.p
    d = model.dual(data.X, beta)
    mu = np.broadcast_to(d.value, (n,)).copy()
    D = np.broadcast_to(d.grad, (n, p)).copy()
    G = np.broadcast_to(d.hess, (n, p, p)).copy()
    if check_rank:
        if n < p:
            raise SingularDesignError(f"singular design at current beta: n={n} < p={p}", column=n)
        norm = np.linalg.norm(D)
        try:
            if norm == 0.0:
                raise SingularDesignError("singular design", column=0)
            check_pivots(np.linalg.qr(D, mode="r"), norm, 1e-10)
        except SingularDesignError as err:
            raise SingularDesignError(
                f"singular design at current beta: column b{err.column + 1} is dependent",
                column=err.column,
            ) from None
    return DesignBundle(mu, D, G)


class _Env:
    def __init__(self, X, beta, shape, k, wrt):
        self.X, self.beta, self.shape, self.k, self.wrt = X, beta, shape, k, wrt


def _first_row(mask) -> int | None:
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return int(np.flatnonzero(mask)[0])


def _check(node, mask, message):
    if np.any(mask):
        raise EvaluationError(message, offset=node.pos, row=_first_row(mask))


def _finite(node, d: Dual2) -> Dual2:
    bad = ~np.isfinite(d.value)
    bad = bad | ~np.all(np.isfinite(d.grad), axis=-1) | ~np.all(np.isfinite(d.hess), axis=(-1, -2))
    _check(node, bad, "non-finite result")
    return d


def _eval(node, env: _Env) -> Dual2:
    if isinstance(node, ex.Num):
        return Dual2.constant(node.value, env.shape, env.k)
    if isinstance(node, ex.Param):
        return Dual2.variable(np.full(env.shape, env.beta[node.index - 1]), node.index - 1, env.k)
    if isinstance(node, ex.Covariate):
        col = env.X[..., node.column]
        if env.wrt == node.column:
            return Dual2.variable(col, env.k - 1, env.k)
        return Dual2(col.copy(), np.zeros(env.shape + (env.k,)), np.zeros(env.shape + (env.k, env.k)))
    if isinstance(node, ex.Neg):
        return -_eval(node.operand, env)
    if isinstance(node, ex.BinOp):
        u = _eval(node.left, env)
        v = _eval(node.right, env)
        if node.op == "+":
            return u + v
        if node.op == "-":
            return u - v
        if node.op == "*":
            return u * v
        if node.op == "/":
            _check(node, v.value == 0.0, "division by zero")
            return _finite(node, u / v)
        return _finite(node, _power(node, u, v))
    if isinstance(node, ex.Call):
        return _finite(node, _call(node, _eval(node.arg, env)))
    raise TypeError(f"not an expression node: {node!r}")


def _power(node, u: Dual2, v: Dual2) -> Dual2:
    if v.is_constant():
        c = v.value
        integer = c == np.round(c)
        _check(node, ~integer & (u.value <= 0), "non-integer power of a non-positive base")
        _check(node, integer & (c < 0) & (u.value == 0), "division by zero in negative power")
        with np.errstate(all="ignore"):
            f0 = u.value ** c
            f1 = np.where(c == 0, 0.0, c * u.value ** (c - 1))
            f2 = np.where((c == 0) | (c == 1), 0.0, c * (c - 1) * u.value ** (c - 2))
        return u.chain(f0, f1, f2)
    _check(node, u.value <= 0, "power with a variable exponent needs a positive base")
    log_u = u.chain(np.log(u.value), 1.0 / u.value, -1.0 / u.value ** 2)
    w = v * log_u
    e = np.exp(w.value)
    return w.chain(e, e, e)


def _call(node, u: Dual2) -> Dual2:
    x = u.value
    name = node.func
    with np.errstate(over="ignore"):
        if name == "exp":
            e = np.exp(x)
            return u.chain(e, e, e)
        if name == "log":
            _check(node, x <= 0, "log of a non-positive value")
            return u.chain(np.log(x), 1.0 / x, -1.0 / (x * x))
        if name == "sqrt":
            _check(node, x <= 0, "sqrt of a non-positive value")
            r = np.sqrt(x)
            return u.chain(r, 0.5 / r, -0.25 / (r * x))
        if name == "sinh":
            return u.chain(np.sinh(x), np.cosh(x), np.sinh(x))
        if name == "cosh":
            return u.chain(np.cosh(x), np.sinh(x), np.cosh(x))
        if name == "tanh":
            t = np.tanh(x)
            sech2 = 1.0 - t * t
            return u.chain(t, sech2, -2.0 * t * sech2)
        if name == "arcsinh":
            q = 1.0 + x * x
            return u.chain(np.arcsinh(x), 1.0 / np.sqrt(q), -x / (q * np.sqrt(q)))
    raise TypeError(f"unknown function {name!r}")


_VALUE_FUNCS = {
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "sinh": np.sinh,
    "cosh": np.cosh, "tanh": np.tanh, "arcsinh": np.arcsinh,
}


def _value(node, X, beta):
    if isinstance(node, ex.Num):
        return node.value
    if isinstance(node, ex.Param):
        return beta[node.index - 1]
    if isinstance(node, ex.Covariate):
        return X[..., node.column]
    if isinstance(node, ex.Neg):
        return -_value(node.operand, X, beta)
    if isinstance(node, ex.BinOp):
        a = _value(node.left, X, beta)
        b = _value(node.right, X, beta)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return np.where(np.asarray(b) == 0, np.nan, a / np.where(np.asarray(b) == 0, 1.0, b))
        return _value_power(a, b)
    if isinstance(node, ex.Call):
        a = _value(node.arg, X, beta)
        if node.func in ("log", "sqrt"):
            a = np.where(np.asarray(a) <= 0, np.nan, a)
        return _VALUE_FUNCS[node.func](a)
    raise TypeError(f"not an expression node: {node!r}")


def _value_power(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = (b == np.round(b)) | (a > 0)
    return np.where(ok, np.power(np.where(ok, a, 1.0), b), np.nan)
