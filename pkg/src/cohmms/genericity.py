"""Separation of cells by convolution powers of the distance kernel.

Note that every power ``d^{*k}`` of a symmetric ``d`` is again symmetric,
so the power signature of (x, y) always equals that of (y, x).  For n >= 2
the signature map is therefore never injective on X x X, and any
``(N, m, p)`` threshold that admits a flipped pair ``2 d(x, y) >= 1/m``
fails.  The functions below report this honestly rather than hiding it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernel import Kernel, conv_powers
from .space import FiniteMMS, NumericPolicy, group_values, _diag_square_injective, _off_diagonal_injective

__all__ = [
    "SeparationCertificate",
    "PowerCache",
    "check_nmp",
    "separation_profile",
    "density_condition",
]


class PowerCache:
    """Convolution powers of ``d`` for one space, grown on demand."""

    def __init__(self, space: FiniteMMS):
        self.space = space
        self._powers: list[Kernel] = [Kernel.distance(space)]

    def get(self, k: int) -> Kernel:
        while len(self._powers) < k:
            self._powers.append(self._powers[-1] @ self._powers[0])
        return self._powers[k - 1]

    def signatures(self, N: int) -> np.ndarray:
        """``(n*n, N)`` array; row ``x*n + y`` holds ``d^{*1..N}(x, y)``."""
        cols = [self.get(k).values.ravel() for k in range(1, N + 1)]
        return np.stack(cols, axis=1)


@dataclass(frozen=True)
class SeparationCertificate:
    satisfied: bool
    N_used: int
    min_margin: float | Fraction
    worst_pair: tuple[tuple[int, int], tuple[int, int]] | None
    params: tuple[int, int, int] | None = None
    pairs_checked: int = 0

    def to_json(self) -> dict:
        mm = self.min_margin
        return {
            "satisfied": self.satisfied,
            "N_used": self.N_used,
            "min_margin": None if mm == math.inf else (str(mm) if isinstance(mm, Fraction) else float(mm)),
            "worst_pair": [list(c) for c in self.worst_pair] if self.worst_pair else None,
            "params": dict(zip(("N", "m", "p"), self.params)) if self.params else None,
            "pairs_checked": self.pairs_checked,
        }


def _scan(S: np.ndarray, n: int, qualify=None):
    """Minimum over (qualifying) ordered cell pairs of the max-coordinate gap.

    Processed one first cell at a time; returns ``(margin, worst, count)``.
    """
    best = math.inf
    worst = None
    count = 0
    cells = n * n
    for a in range(cells):
        gaps = np.abs(S - S[a]).max(axis=1)
        mask = np.ones(cells, dtype=bool)
        mask[a] = False
        if qualify is not None:
            mask &= qualify(a)
        idx = np.nonzero(mask)[0]
        if idx.size == 0:
            continue
        count += idx.size
        sub = gaps[idx]
        j = int(np.argmin(sub)) if S.dtype != object else min(range(idx.size), key=lambda t: sub[t])
        if sub[j] < best:
            best = sub[j]
            b = int(idx[j])
            worst = ((a // n, a % n), (b // n, b % n))
    return best, worst, count


def check_nmp(space: FiniteMMS, N: int, m: int, p: int, cache: PowerCache | None = None) -> SeparationCertificate:
    """Whenever ``d(x,x') + d(y,y') >= 1/m`` some power ``k <= N`` must separate
    (x, y) from (x', y') by more than ``1/p``.  Ordered 4-tuples are scanned."""
    if min(N, m, p) < 1:
        raise ValueError("N, m, p must be >= 1")
    cache = cache or PowerCache(space)
    n = space.n
    D = space.dist
    S = cache.signatures(N)
    inv_m = Fraction(1, m) if space.exact else 1.0 / m
    inv_p = Fraction(1, p) if space.exact else 1.0 / p
    T4 = (D[:, None, :, None] + D[None, :, None, :]).reshape(n * n, n * n)

    def qualify(a):
        return np.asarray(T4[a] >= inv_m, dtype=bool)

    best, worst, count = _scan(S, n, qualify)
    ok = best == math.inf or best > inv_p
    return SeparationCertificate(bool(ok), N, best, worst, (N, m, p), count)


def separation_profile(space: FiniteMMS, N_max: int, policy: NumericPolicy | None = None,
                       cache: PowerCache | None = None) -> tuple[int | None, float | Fraction]:
    """Smallest N with an injective power signature on X x X, and the margin there.

    Equality of signature coordinates uses the same grouping as the closure
    engine.  Returns ``(None, margin at N_max)`` when no N <= N_max works.
    """
    if N_max < 1:
        raise ValueError("N_max must be >= 1")
    policy = NumericPolicy.for_space(space, policy)
    cache = cache or PowerCache(space)
    n = space.n
    labels = []
    for N in range(1, N_max + 1):
        labels.append(group_values(cache.get(N).values.ravel().tolist(), policy))
        sigs = set(zip(*labels))
        if len(sigs) == n * n:
            margin, _, _ = _scan(cache.signatures(N), n)
            return N, margin
    margin, _, _ = _scan(cache.signatures(N_max), n)
    return None, margin


def density_condition(space: FiniteMMS, policy: NumericPolicy | None = None) -> tuple[bool, bool]:
    """``(d injective on unordered off-diagonal pairs, diag of d*d injective)``."""
    policy = NumericPolicy.for_space(space, policy)
    return _off_diagonal_injective(space, policy), _diag_square_injective(space, policy)
