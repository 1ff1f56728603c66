"""Second-order forward-mode dual numbers.

A ``Dual2`` carries a value together with its gradient and Hessian with
respect to ``k`` seed variables. Values may be arrays, in which case every
row is differentiated independently (``grad`` has a trailing axis of length
``k`` and ``hess`` two trailing axes).
"""

from __future__ import annotations

import numpy as np


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Dual2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, value, shape, k: int) -> "Dual2":
        return cls(
            np.full(shape, float(value)),
            np.zeros(tuple(shape) + (k,)),
            np.zeros(tuple(shape) + (k, k)),
        )

    @classmethod
    def variable(cls, value, index: int, k: int) -> "Dual2":
        value = np.asarray(value, dtype=float)
        grad = np.zeros(value.shape + (k,))
        grad[..., index] = 1.0
        return cls(value, grad, np.zeros(value.shape + (k, k)))

    def __add__(self, other: "Dual2") -> "Dual2":
        return Dual2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Dual2") -> "Dual2":
        return Dual2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __neg__(self) -> "Dual2":
        return Dual2(-self.value, -self.grad, -self.hess)

    def __mul__(self, other: "Dual2") -> "Dual2":
        u, v = self, other
        cross = _outer(u.grad, v.grad)
        return Dual2(
            u.value * v.value,
            u.value[..., None] * v.grad + v.value[..., None] * u.grad,
            u.value[..., None, None] * v.hess
            + v.value[..., None, None] * u.hess
            + cross
            + np.swapaxes(cross, -1, -2),
        )

    def chain(self, f0, f1, f2) -> "Dual2":
        """Apply a scalar function given its value and first two derivatives at ``self.value``."""
        return Dual2(
            f0,
            f1[..., None] * self.grad,
            f1[..., None, None] * self.hess + f2[..., None, None] * _outer(self.grad, self.grad),
        )

    def reciprocal(self) -> "Dual2":
        inv = 1.0 / self.value
        return self.chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other: "Dual2") -> "Dual2":
        return self * other.reciprocal()

    def is_constant(self) -> bool:
        return not (np.any(self.grad) or np.any(self.hess))

    def __repr__(self) -> str:
        return f"Dual2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"
