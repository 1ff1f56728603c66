import numpy as np

from bsnlr.distributions import SNParams, sn_from_normal
from bsnlr.likelihood import Theta
from bsnlr.model import Dataset, parse_model

# (text, true beta, covariate range) per parameter count
MODELS = {
    1: [("b1", [1.5], (0.0, 2.0)), ("exp(b1*x1)", [0.8], (0.0, 2.0))],
    2: [("b1 + b2*x1", [1.0, 2.0], (0.0, 2.0)), ("b1*exp(b2*x1)", [2.0, 0.7], (0.0, 2.0)),
        ("b1*x1/(b2 + x1)", [3.0, 0.5], (0.1, 3.0))],
    3: [("b1 + b2*x1 + b3*x2", [1.0, 2.0, -1.0], (0.0, 2.0)),
        ("b1 + b2*exp(b3*x1)", [1.0, 2.0, 0.5], (0.0, 3.0))],
}


def rel_err(a, b) -> float:
    """Frobenius-norm relative error of ``a`` against reference ``b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ref = np.linalg.norm(b)
    diff = np.linalg.norm(a - b)
    return diff if ref == 0 else diff / ref


def simulate(text, beta, alpha, n, seed, lo=0.0, hi=2.0, names=("x1", "x2")):
    rng = np.random.default_rng(seed)
    X = rng.uniform(lo, hi, size=(n, len(names)))
    model = parse_model(text, names)
    y = model.mean(X, np.asarray(beta, dtype=float)) + sn_from_normal(
        rng.standard_normal(n), SNParams(alpha)
    )
    return model, Dataset(y, X, names)


def random_triples(count=25, n=30, seed=2024):
    """(theta, model, data) with theta drawn near, but not at, the generating values."""
    rng = np.random.default_rng(seed)
    specs = [s for p in (1, 2, 3) for s in MODELS[p]]
    out = []
    for t in range(count):
        text, beta, (lo, hi) = specs[t % len(specs)]
        alpha = float(rng.uniform(0.3, 1.5))
        model, data = simulate(text, beta, alpha, n, seed=int(rng.integers(1 << 31)), lo=lo, hi=hi)
        b = np.asarray(beta) * (1.0 + rng.normal(0.0, 0.05, len(beta)))
        theta = Theta(b, alpha * rng.uniform(0.8, 1.2))
        out.append((theta, model, data))
    return out
