"""Wasserstein distances and the measured-Hausdorff quasimetric D_p.

The transportation problem is solved by the transportation (MODI) simplex
on a spanning-tree basis.  The same code runs on floats and on
``Fraction`` values; in the latter case the optimum is exact.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .space import FiniteMMS

__all__ = [
    "InfeasibleMarginalsError",
    "TransportPlan",
    "solve_transportation",
    "wasserstein",
    "wasserstein_between",
    "MapScore",
    "DpEstimate",
    "score_map",
    "dp_estimate",
    "symmetrized_distance",
]


class InfeasibleMarginalsError(ValueError):
    pass


@dataclass(frozen=True)
class TransportPlan:
    pi: np.ndarray
    cost: float | Fraction
    raw_cost: float | Fraction
    p: float
    u: np.ndarray
    v: np.ndarray
    dual_residual: float
    iterations: int

    def marginal_error(self, mu, nu) -> float:
        rows = [sum(r) for r in self.pi]
        cols = [sum(c) for c in self.pi.T]
        return float(max(max(abs(a - b) for a, b in zip(rows, mu)), max(abs(a - b) for a, b in zip(cols, nu))))


def _is_exact(*arrays) -> bool:
    return all(
        all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in np.asarray(a, dtype=object).ravel())
        for a in arrays
    )


def _northwest_corner(supply: list, demand: list, zero):
    n, m = len(supply), len(demand)
    s, t = list(supply), list(demand)
    flow = {}
    i = j = 0
    while True:
        q = min(s[i], t[j])
        flow[(i, j)] = q
        s[i] -= q
        t[j] -= q
        if i == n - 1 and j == m - 1:
            break
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif s[i] <= t[j]:
            i += 1
        else:
            j += 1
    return flow


def _potentials(cost, basis_adj, n: int, m: int, zero):
    u: list = [None] * n
    v: list = [None] * m
    u[0] = zero
    queue = deque([("r", 0)])
    while queue:
        side, k = queue.popleft()
        for other in basis_adj[(side, k)]:
            if side == "r":
                if v[other] is None:
                    v[other] = cost[k][other] - u[k]
                    queue.append(("c", other))
            else:
                if u[other] is None:
                    u[other] = cost[other][k] - v[k]
                    queue.append(("r", other))
    return u, v


def _tree_path(basis_adj, i0: int, j0: int) -> list[tuple[int, int]]:
    """Cells on the basis-tree path from row ``i0`` to column ``j0``."""
    start, goal = ("r", i0), ("c", j0)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        side, k = node
        for other in basis_adj[node]:
            nxt = ("c", other) if side == "r" else ("r", other)
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    cells = []
    node = goal
    while parent[node] is not None:
        prev = parent[node]
        if node[0] == "c":
            cells.append((prev[1], node[1]))
        else:
            cells.append((node[1], prev[1]))
        node = prev
    cells.reverse()
    return cells


def solve_transportation(cost, supply: Sequence, demand: Sequence, *, tol_mass: float = 1e-9,
                         max_iter: int | None = None):
    """Minimize ``sum cost[i][j] pi[i][j]`` over couplings of ``supply`` and ``demand``.

    Returns ``(pi, raw_cost, u, v, dual_residual, iterations)``.  Entering
    cells follow Dantzig's rule; after a run of degenerate pivots the
    solver switches to Bland's smallest-index rule, which cannot cycle.
    """
    cost_arr = np.asarray(cost, dtype=object)
    exact = _is_exact(cost_arr, supply, demand)
    n, m = cost_arr.shape
    if exact:
        c = [[Fraction(x) for x in row] for row in cost_arr]
        s = [Fraction(x) for x in supply]
        t = [Fraction(x) for x in demand]
        zero = Fraction(0)
    else:
        c = [[float(x) for x in row] for row in cost_arr]
        s = [float(x) for x in supply]
        t = [float(x) for x in demand]
        zero = 0.0
    if any(x < 0 for x in s) or any(x < 0 for x in t):
        raise InfeasibleMarginalsError("negative mass")
    ts, tt = sum(s), sum(t)
    if (ts != tt) if exact else abs(ts - tt) > tol_mass:
        raise InfeasibleMarginalsError(f"total masses differ: {ts} vs {tt}")
    if not exact and tt > 0:
        t = [x * (ts / tt) for x in t]

    flow = _northwest_corner(s, t, zero)
    adj: dict = {("r", i): set() for i in range(n)}
    adj.update({("c", j): set() for j in range(m)})
    for i, j in flow:
        adj[("r", i)].add(j)
        adj[("c", j)].add(i)

    cmax = max((abs(x) for row in c for x in row), default=zero)
    tol = zero if exact else 1e-12 * max(float(cmax), 1.0)
    max_iter = max_iter or 50 * (n + m) * max(n, m) + 100
    degenerate_run = 0
    it = 0
    while True:
        u, v = _potentials(c, adj, n, m, zero)
        bland = degenerate_run > n + m
        enter = None
        best = -tol
        for i in range(n):
            for j in range(m):
                if (i, j) in flow:
                    continue
                rc = c[i][j] - u[i] - v[j]
                if rc < best:
                    enter = (i, j)
                    if bland:
                        break
                    best = rc
            if bland and enter is not None:
                break
        if enter is None:
            break
        it += 1
        if it > max_iter:
            raise RuntimeError("transportation simplex did not converge")
        path = _tree_path(adj, *enter)
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[cell] for cell in minus)
        leave = min((cell for cell in minus if flow[cell] == theta), key=lambda ij: ij[0] * m + ij[1])
        degenerate_run = degenerate_run + 1 if theta == 0 else 0
        for cell in plus:
            flow[cell] += theta
        for cell in minus:
            flow[cell] -= theta
        flow[enter] = theta
        del flow[leave]
        adj[("r", leave[0])].discard(leave[1])
        adj[("c", leave[1])].discard(leave[0])
        adj[("r", enter[0])].add(enter[1])
        adj[("c", enter[1])].add(enter[0])

    pi = np.full((n, m), zero, dtype=object if exact else float)
    for (i, j), q in flow.items():
        pi[i, j] = q if exact or q > 0 else 0.0
    raw = sum(c[i][j] * pi[i, j] for i in range(n) for j in range(m))
    u, v = _potentials(c, adj, n, m, zero)
    min_rc = min(c[i][j] - u[i] - v[j] for i in range(n) for j in range(m))
    dual_residual = float(max(zero, -min_rc))
    return pi, raw, np.array(u, dtype=object if exact else float), np.array(v, dtype=object if exact else float), \
        dual_residual, it


def _int_root(k: int, p: int) -> int | None:
    if k < 0:
        return None
    r = round(k ** (1.0 / p)) if k < 2 ** 1000 else None
    if r is None:
        return None
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** p == k:
            return cand
    return None


def _pth_root(value, p):
    if p == 1:
        return value
    if isinstance(value, Fraction) and float(p).is_integer():
        pi = int(p)
        a, b = _int_root(value.numerator, pi), _int_root(value.denominator, pi)
        if a is not None and b is not None:
            return Fraction(a, b)
    return float(value) ** (1.0 / p)


def _cost_matrix(dist: np.ndarray, p):
    if dist.dtype == object and float(p).is_integer():
        pi = int(p)
        return np.array([[Fraction(x) ** pi for x in row] for row in dist], dtype=object)
    return np.asarray(dist, dtype=float) ** float(p)


def wasserstein_between(dist: np.ndarray, mu, nu, p: float = 1) -> TransportPlan:
    if p < 1:
        raise ValueError("p must be >= 1")
    cost = _cost_matrix(np.asarray(dist), p)
    pi, raw, u, v, res, it = solve_transportation(cost, list(mu), list(nu))
    return TransportPlan(pi, _pth_root(raw, p), raw, p, u, v, res, it)


def wasserstein(space: FiniteMMS, nu, p: float = 1, mu=None, tol_mass: float = 1e-9) -> TransportPlan:
    """W_p between ``mu`` (default: the space's measure) and ``nu`` on one space."""
    mu = space.mu if mu is None else mu
    nu = list(nu)
    if len(nu) != space.n:
        raise InfeasibleMarginalsError(f"nu has {len(nu)} entries for a {space.n}-point space")
    if any(x < 0 for x in nu):
        raise InfeasibleMarginalsError("nu has negative mass")
    total = sum(nu)
    if (total != 1) if _is_exact(nu) else abs(float(total) - 1.0) > tol_mass:
        raise InfeasibleMarginalsError(f"nu sums to {total}, not 1")
    return wasserstein_between(space.dist, list(mu), nu, p)


# ---------------------------------------------------------------------------
# D_p


@dataclass(frozen=True)
class MapScore:
    map: tuple[int, ...]
    distortion: float | Fraction
    covering: float | Fraction
    wp: float | Fraction
    score: float | Fraction

    def to_json(self, X: FiniteMMS | None = None, Y: FiniteMMS | None = None) -> dict:
        def num(v):
            return str(v) if isinstance(v, Fraction) else float(v)

        table = list(self.map)
        if X is not None and Y is not None:
            table = {X.labels[i]: Y.labels[j] for i, j in enumerate(self.map)}
        return {"map": table, "distortion": num(self.distortion), "covering": num(self.covering),
                "wp": num(self.wp), "score": num(self.score)}


@dataclass(frozen=True)
class DpEstimate:
    upper: float | Fraction
    map: MapScore
    exact: bool
    evaluations: int


def _common_arrays(X: FiniteMMS, Y: FiniteMMS):
    if X.exact and Y.exact:
        return X.dist, Y.dist, list(X.mu), list(Y.mu), Fraction(0)
    return X.dist.astype(float), Y.dist.astype(float), [float(v) for v in X.mu], [float(v) for v in Y.mu], 0.0


class _Scorer:
    def __init__(self, X: FiniteMMS, Y: FiniteMMS, p: float):
        self.dX, self.dY, self.muX, self.muY, self.zero = _common_arrays(X, Y)
        self.p = p
        self.nX, self.nY = X.n, Y.n
        self._w: dict = {}
        self.evaluations = 0

    def cheap(self, f: tuple[int, ...]):
        idx = np.array(f)
        distortion = np.abs(self.dY[np.ix_(idx, idx)] - self.dX).max()
        covering = self.dY[:, idx].min(axis=1).max()
        return distortion, covering

    def wp(self, f: tuple[int, ...]):
        push = [self.zero] * self.nY
        for x, y in enumerate(f):
            push[y] = push[y] + self.muX[x]
        key = tuple(push)
        if key not in self._w:
            self._w[key] = wasserstein_between(self.dY, push, self.muY, self.p).cost
        return self._w[key]

    def score(self, f: tuple[int, ...], bound=None) -> MapScore | None:
        """Full score, or ``None`` when the cheap part already reaches ``bound``."""
        self.evaluations += 1
        dist, cov = self.cheap(f)
        if bound is not None and max(dist, cov) >= bound:
            return None
        w = self.wp(f)
        return MapScore(tuple(f), dist, cov, w, max(dist, cov, w))


def score_map(X: FiniteMMS, Y: FiniteMMS, f: Sequence[int], p: float = 1) -> MapScore:
    if len(f) != X.n or any(not 0 <= y < Y.n for y in f):
        raise ValueError("map table must send every point of X to a point of Y")
    return _Scorer(X, Y, p).score(tuple(int(y) for y in f))


def _better(a: MapScore, b: MapScore | None) -> bool:
    if b is None:
        return True
    return a.score < b.score or (a.score == b.score and a.map < b.map)


def dp_estimate(X: FiniteMMS, Y: FiniteMMS, p: float = 1, budget: float = 1e6, seed: int = 0) -> DpEstimate:
    """Minimize ``max(distortion, covering, W_p(f_* mu_X, mu_Y))`` over maps f: X -> Y.

    Exhaustive (and exact) when ``|Y|^|X| <= budget``.  Otherwise restarts of
    single-point reassignment descent run until ``budget`` map evaluations
    are spent; restart 0 starts from ``x -> x mod |Y|`` and restart r > 0
    from a map drawn with seed ``(seed, r)``.  The evaluation sequence does
    not depend on the budget, so a larger budget never gives a worse bound.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    budget = int(budget)
    scorer = _Scorer(X, Y, p)
    nX, nY = X.n, Y.n
    total = nY ** nX
    best: MapScore | None = None
    if total <= budget:
        for f in itertools.product(range(nY), repeat=nX):
            cand = scorer.score(f, None if best is None else best.score)
            if cand is not None and cand.score < (math.inf if best is None else best.score):
                best = cand
        return DpEstimate(best.score, best, True, scorer.evaluations)

    budget = max(budget, 1)
    restart = 0
    while scorer.evaluations < budget:
        if restart == 0:
            f = [x % nY for x in range(nX)]
        else:
            rng = np.random.default_rng([seed, restart])
            f = [int(v) for v in rng.integers(0, nY, size=nX)]
        cur = scorer.score(tuple(f))
        if _better(cur, best):
            best = cur
        improved = True
        while improved and scorer.evaluations < budget:
            improved = False
            for x in range(nX):
                for y in range(nY):
                    if y == f[x] or scorer.evaluations >= budget:
                        continue
                    g = list(f)
                    g[x] = y
                    cand = scorer.score(tuple(g))
                    if _better(cand, best):
                        best = cand
                    if cand.score < cur.score:
                        f, cur, improved = g, cand, True
        restart += 1
    return DpEstimate(best.score, best, False, scorer.evaluations)


def symmetrized_distance(X: FiniteMMS, Y: FiniteMMS, p: float = 1, budget: float = 1e6, seed: int = 0):
    return dp_estimate(X, Y, p, budget, seed).upper + dp_estimate(Y, X, p, budget, seed).upper
