"""Metric Laplacian with conductances ``c_xy = 1/d(x, y)`` and its coherence checks."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .closure import CoherentPartition, is_constant_on_classes
from .kernel import Kernel, SpaceMismatchError, entrywise, interval_indicator, reciprocal
from .space import FiniteMMS

__all__ = [
    "UnsupportedMeasureError",
    "LaplacianBundle",
    "build_laplacian",
    "variational_check",
    "membership_check",
    "psd_check",
    "hadamard_inverse_identity",
    "interval_census",
    "census_equality",
]


class UnsupportedMeasureError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LaplacianBundle:
    space: FiniteMMS
    conductance: np.ndarray
    T: np.ndarray
    A: np.ndarray
    delta: np.ndarray

    def apply(self, f) -> np.ndarray:
        return self.delta @ np.asarray(f)

    def kernel(self) -> Kernel:
        return Kernel(self.space, self.delta)


def build_laplacian(space: FiniteMMS) -> LaplacianBundle:
    """``delta = T + A`` with ``T`` the conductance degrees and ``A = -c`` off the diagonal.

    The global factor 2 of the variational identity is dropped here.
    """
    if not space.is_uniform(tol=1e-12):
        raise UnsupportedMeasureError("the metric Laplacian is only defined here for the uniform measure")
    n = space.n
    exact = space.exact
    zero = Fraction(0) if exact else 0.0
    c = np.full((n, n), zero, dtype=object if exact else float)
    for x in range(n):
        for y in range(n):
            if x != y:
                c[x, y] = 1 / space.dist[x, y]
    T = np.full((n, n), zero, dtype=c.dtype)
    for x in range(n):
        T[x, x] = sum(c[x, y] for y in range(n) if y != x)
    A = -c
    delta = T + A
    for arr in (c, T, A, delta):
        arr.flags.writeable = False
    return LaplacianBundle(space, c, T, A, delta)


def variational_check(bundle: LaplacianBundle, trials: int = 100, seed: int = 0) -> float:
    """Max relative residual of ``<df, df'> = <f, 2 delta f'>`` over random real f, f'.

    Both inner products average over the uniform measure.  The residual is
    scaled by ``(1/n) sum_{x != y} |df| |df'| c``, the size of the terms
    being summed.
    """
    rng = np.random.default_rng(seed)
    n = bundle.space.n
    c = bundle.conductance.astype(float)
    L = bundle.delta.astype(float)
    worst = 0.0
    for _ in range(trials):
        f = rng.standard_normal(n)
        g = rng.standard_normal(n)
        df = f[:, None] - f[None, :]
        dg = g[:, None] - g[None, :]
        lhs = float((df * dg * c).sum()) / n
        rhs = float(f @ (2.0 * (L @ g))) / n
        scale = float((np.abs(df) * np.abs(dg) * c).sum()) / n
        if scale == 0.0:
            res = abs(lhs - rhs)
        else:
            res = abs(lhs - rhs) / scale
        worst = max(worst, res)
    return worst


def psd_check(bundle: LaplacianBundle) -> tuple[bool, float]:
    """``(min eigenvalue >= -1e-9 ||delta||, min eigenvalue)``."""
    L = bundle.delta.astype(float)
    ev = np.linalg.eigvalsh(L)
    norm = float(np.linalg.norm(L, 2)) if L.size else 0.0
    lo = float(ev.min())
    return lo >= -1e-9 * max(norm, 1e-300), lo


def membership_check(bundle: LaplacianBundle, part: CoherentPartition) -> tuple[bool, int | None]:
    """Is ``delta`` constant on every coherence class?  Returns the first failing class."""
    if not bundle.space.same_as(part.space):
        raise SpaceMismatchError("Laplacian and partition are bound to different spaces")
    for arr in (bundle.T, bundle.A):
        ok, k = is_constant_on_classes(part, arr)
        if not ok:
            return False, k
    return is_constant_on_classes(part, bundle.delta)


def hadamard_inverse_identity(space: FiniteMMS) -> float:
    """Max entrywise gap between ``1/(I + D)`` and ``I + c`` (c the conductance pattern).

    With ``A = -c`` the literal identity ``I + A`` holds only up to the
    off-diagonal sign, so the sign-adjusted form is the one checked.
    """
    bundle = build_laplacian(space)
    I_plus_D = Kernel.diagonal(space) + Kernel.distance(space)
    inv = entrywise(I_plus_D, reciprocal).values
    target = Kernel.diagonal(space).values + np.abs(bundle.A)
    diff = inv - target
    if space.exact:
        return float(max(abs(v) for v in diff.ravel()))
    return float(np.max(np.abs(diff)))


def interval_census(space: FiniteMMS, a, b, weighted: bool = False) -> Kernel:
    """``M @ M`` for ``M = chi_[a,b](d)``; ``M2[x][x]`` counts z with ``d(z, x)`` in [a, b].

    ``weighted=True`` uses the mu-convolution ``M * M`` instead of the plain
    matrix square.
    """
    M = interval_indicator(space, a, b)
    if weighted:
        return M @ M
    return Kernel(space, M.values @ M.values)


def census_equality(space: FiniteMMS, part: CoherentPartition, intervals) -> list[tuple]:
    """Same-class diagonal pairs whose census counts differ, over the given intervals."""
    n = space.n
    bad = []
    for a, b in intervals:
        M2 = interval_census(space, a, b).values
        for x in range(n):
            for y in range(x + 1, n):
                if part.class_of[x, x] == part.class_of[y, y] and M2[x, x] != M2[y, y]:
                    bad.append(((a, b), x, y, M2[x, x], M2[y, y]))
    return bad
