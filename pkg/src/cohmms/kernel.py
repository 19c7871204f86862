"""Kernels on X x X with pointwise (Hadamard) and mu-convolution products."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .space import FiniteMMS

__all__ = [
    "Kernel",
    "SpaceMismatchError",
    "DomainError",
    "convolve",
    "hadamard",
    "flip",
    "conv_power",
    "conv_powers",
    "entrywise",
    "reciprocal",
    "interval_indicator",
]


class SpaceMismatchError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Kernel:
    space: FiniteMMS
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=object if self.space.exact else float)
        if vals.shape != (self.space.n, self.space.n):
            raise SpaceMismatchError(f"kernel shape {vals.shape} does not fit a {self.space.n}-point space")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    # constructors
    @classmethod
    def ones(cls, space: FiniteMMS) -> "Kernel":
        one = Fraction(1) if space.exact else 1.0
        return cls(space, np.full((space.n, space.n), one, dtype=object if space.exact else float))

    @classmethod
    def distance(cls, space: FiniteMMS) -> "Kernel":
        return cls(space, space.dist)

    @classmethod
    def diagonal(cls, space: FiniteMMS) -> "Kernel":
        return interval_indicator(space, 0, 0)

    @classmethod
    def delta(cls, space: FiniteMMS) -> "Kernel":
        """Convolution unit ``[y = z] / mu[y]``; outside the public algebra."""
        n = space.n
        vals = np.zeros((n, n), dtype=object if space.exact else float)
        if space.exact:
            vals[:] = Fraction(0)
        for i in range(n):
            vals[i, i] = 1 / space.mu[i]
        return cls(space, vals)

    def _check(self, other: "Kernel") -> None:
        if not self.space.same_as(other.space):
            raise SpaceMismatchError("kernels are bound to different spaces")

    # algebra
    def convolve(self, other: "Kernel") -> "Kernel":
        return convolve(self, other)

    def hadamard(self, other: "Kernel") -> "Kernel":
        return hadamard(self, other)

    def flip(self) -> "Kernel":
        return flip(self)

    def __matmul__(self, other: "Kernel") -> "Kernel":
        return convolve(self, other)

    def __add__(self, other: "Kernel") -> "Kernel":
        self._check(other)
        return Kernel(self.space, self.values + other.values)

    def __sub__(self, other: "Kernel") -> "Kernel":
        self._check(other)
        return Kernel(self.space, self.values - other.values)

    def __neg__(self) -> "Kernel":
        return Kernel(self.space, -self.values)

    def scale(self, c) -> "Kernel":
        return Kernel(self.space, self.values * c)

    def allclose(self, other: "Kernel", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        self._check(other)
        if self.space.exact:
            return bool(np.all(self.values == other.values))
        return bool(np.allclose(self.values.astype(float), other.values.astype(float), rtol=rtol, atol=atol))

    def to_csv(self) -> str:
        lab = self.space.labels
        lines = ["," + ",".join(lab)]
        for i, row in enumerate(self.values):
            lines.append(lab[i] + "," + ",".join(str(v) if self.space.exact else repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"


def convolve(f: Kernel, g: Kernel) -> Kernel:
    """``(f*g)[x][z] = sum_y f[x][y] g[y][z] mu[y]``."""
    f._check(g)
    mu = f.space.mu
    return Kernel(f.space, f.values @ (mu[:, None] * g.values))


def hadamard(f: Kernel, g: Kernel) -> Kernel:
    f._check(g)
    return Kernel(f.space, f.values * g.values)


def flip(f: Kernel) -> Kernel:
    return Kernel(f.space, f.values.T)


def conv_power(f: Kernel, k: int) -> Kernel:
    if k < 1:
        raise ValueError("convolution powers start at k = 1")
    out = f
    for _ in range(k - 1):
        out = convolve(out, f)
    return out


def conv_powers(f: Kernel, k_max: int) -> list[Kernel]:
    """``[f, f*f, ..., f^{*k_max}]`` built incrementally."""
    if k_max < 1:
        raise ValueError("convolution powers start at k = 1")
    out = [f]
    for _ in range(k_max - 1):
        out.append(convolve(out[-1], f))
    return out


def entrywise(f: Kernel, fn: Callable) -> Kernel:
    n = f.space.n
    vals = np.empty((n, n), dtype=object if f.space.exact else float)
    for i in range(n):
        for j in range(n):
            try:
                with np.errstate(all="ignore"):
                    v = fn(f.values[i, j])
            except (ArithmeticError, ValueError) as exc:
                raise DomainError(f"function undefined at entry ({i}, {j}) = {f.values[i, j]}") from exc
            if not f.space.exact and not np.isfinite(float(v)):
                raise DomainError(f"function undefined at entry ({i}, {j}) = {f.values[i, j]}")
            vals[i, j] = v
    return Kernel(f.space, vals)


def reciprocal(v):
    if v == 0:
        raise ZeroDivisionError("reciprocal of zero")
    return 1 / v


def interval_indicator(space: FiniteMMS, a, b, of: Kernel | None = None) -> Kernel:
    """``chi_[a,b]`` applied entrywise to ``of`` (default: the distance kernel)."""
    if a > b:
        raise ValueError("empty interval")
    vals = space.dist if of is None else of.values
    one, zero = (Fraction(1), Fraction(0)) if space.exact else (1.0, 0.0)
    ind = np.where((vals >= a) & (vals <= b), one, zero)
    return Kernel(space, ind)
