"""Finite metric measure spaces: data model, validation, generators, JSON I/O.

A space is stored in one of two numeric modes.  In float mode ``dist`` and
``mu`` are ``float64`` arrays; in exact mode they are object arrays holding
:class:`fractions.Fraction` values, so every downstream equality test is
exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "FiniteMMS",
    "NumericPolicy",
    "Violation",
    "ValidationReport",
    "StructuralError",
    "SpaceFormatError",
    "PerturbationError",
    "validate",
    "random_euclidean",
    "random_graph_metric",
    "perturb",
    "perturb_with_retries",
    "is_generic",
    "as_exact",
    "as_float",
    "group_values",
    "load_space",
    "dump_space",
    "space_from_json",
    "space_to_json",
]


class StructuralError(ValueError):
    """Array shapes or field structure are inconsistent."""


class SpaceFormatError(StructuralError):
    """A JSON space document is malformed; ``field`` names the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"field {field_name!r}: {message}")
        self.field = field_name


class PerturbationError(RuntimeError):
    pass


@dataclass(frozen=True)
class NumericPolicy:
    """How real values are compared.

    ``tol_group`` is relative: a sorted run of values is split wherever two
    neighbours differ by more than ``tol_group * max|value|``.  All
    tolerances are ignored in exact mode.
    """

    mode: str = "float"
    tol_group: float = 1e-9
    tol_metric: float = 1e-12
    tol_mass: float = 1e-9

    def __post_init__(self):
        if self.mode not in ("float", "exact"):
            raise ValueError(f"unknown numeric mode {self.mode!r}")
        if self.tol_group < 0:
            raise ValueError("tol_group must be >= 0")

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    @classmethod
    def exact_mode(cls) -> "NumericPolicy":
        return cls(mode="exact")

    @classmethod
    def for_space(cls, space: "FiniteMMS", policy: "NumericPolicy | None" = None) -> "NumericPolicy":
        if policy is not None:
            return policy
        return cls.exact_mode() if space.exact else cls()


def _to_array(values: Any, exact: bool) -> np.ndarray:
    if exact:
        arr = np.array(values, dtype=object)
        return np.vectorize(Fraction, otypes=[object])(arr) if arr.size else arr
    return np.array(values, dtype=float)


@dataclass(frozen=True, eq=False)
class FiniteMMS:
    labels: tuple[str, ...]
    dist: np.ndarray
    mu: np.ndarray
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        exact = np.asarray(self.dist).dtype == object or np.asarray(self.mu).dtype == object
        dist = _to_array(self.dist, exact)
        mu = _to_array(self.mu, exact)
        dist.flags.writeable = False
        mu.flags.writeable = False
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def from_arrays(cls, dist, mu=None, labels: Sequence[str] | None = None,
                    name: str | None = None, exact: bool = False) -> "FiniteMMS":
        n = len(dist)
        if mu is None:
            mu = [Fraction(1, n)] * n if exact else [1.0 / n] * n
        if labels is None:
            labels = [str(i) for i in range(n)]
        if exact:
            dist = _to_array(dist, True)
            mu = _to_array(mu, True)
        return cls(tuple(labels), dist, mu, name)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def exact(self) -> bool:
        return self.dist.dtype == object

    def same_as(self, other: "FiniteMMS") -> bool:
        if self is other:
            return True
        return (
            self.dist.shape == other.dist.shape
            and self.mu.shape == other.mu.shape
            and bool(np.all(self.dist == other.dist))
            and bool(np.all(self.mu == other.mu))
        )

    def is_uniform(self, tol: float = 1e-12) -> bool:
        if self.exact:
            return all(m == Fraction(1, self.n) for m in self.mu)
        return bool(np.all(np.abs(self.mu - 1.0 / self.n) <= tol))

    def with_mu(self, mu) -> "FiniteMMS":
        return FiniteMMS(self.labels, self.dist, _to_array(mu, self.exact), self.name)

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"FiniteMMS(n={self.n}, mode={mode}, name={self.name!r})"


# ---------------------------------------------------------------------------
# grouping of real values


def group_values(values: Iterable, policy: NumericPolicy, *, warnings_out: list | None = None) -> np.ndarray:
    """Label each value by its equality class, labels ordered by value.

    Exact mode uses exact equality.  Float mode sorts and splits at gaps
    larger than ``tol_group * scale`` with ``scale = max|v|``.  Gaps that
    fall within a factor 10 of the threshold are appended to
    ``warnings_out`` as ``(low, high, gap)``.
    """
    vals = list(values)
    if not vals:
        return np.zeros(0, dtype=np.int64)
    if policy.exact:
        distinct = sorted(set(vals))
        rank = {v: i for i, v in enumerate(distinct)}
        return np.array([rank[v] for v in vals], dtype=np.int64)
    arr = np.array([float(v) for v in vals])
    order = np.argsort(arr, kind="stable")
    srt = arr[order]
    scale = float(np.max(np.abs(srt)))
    thr = policy.tol_group * scale
    gaps = np.diff(srt)
    breaks = gaps > thr
    if warnings_out is not None and thr > 0:
        near = np.nonzero((gaps > thr) & (gaps <= 10 * thr))[0]
        for k in near:
            warnings_out.append((float(srt[k]), float(srt[k + 1]), float(gaps[k])))
    labels_sorted = np.concatenate([[0], np.cumsum(breaks)])
    labels = np.empty(len(arr), dtype=np.int64)
    labels[order] = labels_sorted
    return labels


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    indices: tuple
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def to_json(self) -> dict:
        return {
            "valid": self.ok,
            "violations": [
                {"kind": v.kind, "indices": list(v.indices), "detail": v.detail} for v in self.violations
            ],
        }


def validate(space: FiniteMMS, policy: NumericPolicy | None = None) -> ValidationReport:
    """Check the metric-measure invariants; every violation is listed with indices."""
    policy = NumericPolicy.for_space(space, policy)
    n = space.n
    d, mu = space.dist, space.mu
    if n < 1:
        raise StructuralError("a space needs at least one point")
    if d.ndim != 2 or d.shape != (n, n):
        raise StructuralError(f"dist has shape {d.shape}, expected {(n, n)}")
    if mu.shape != (n,):
        raise StructuralError(f"mu has shape {mu.shape}, expected {(n,)}")

    exact = policy.exact
    tm = 0 if exact else policy.tol_metric
    out: list[Violation] = []
    for i in range(n):
        if d[i, i] != 0:
            out.append(Violation("diagonal", (i, i), f"d[{i}][{i}] = {d[i, i]}"))
        for j in range(n):
            if j > i and d[i, j] != d[j, i]:
                out.append(Violation("symmetry", (i, j), f"{d[i, j]} != {d[j, i]}"))
            if j != i and not d[i, j] > 0:
                out.append(Violation("positivity", (i, j), f"d[{i}][{j}] = {d[i, j]}"))
    scale = 1 if exact else max(1.0, float(np.max(np.abs(d.astype(float)))))
    for i in range(n):
        for k in range(n):
            if i == k:
                continue
            for j in range(n):
                if j == i or j == k:
                    continue
                if d[i, k] > d[i, j] + d[j, k] + tm * scale:
                    out.append(Violation(
                        "triangle", (i, j, k),
                        f"d[{i}][{k}] = {d[i, k]} > d[{i}][{j}] + d[{j}][{k}] = {d[i, j] + d[j, k]}",
                    ))
    for i in range(n):
        if not mu[i] > 0:
            out.append(Violation("faithfulness", (i,), f"mu[{i}] = {mu[i]}"))
    total = sum(mu)
    if (total != 1) if exact else abs(float(total) - 1.0) > policy.tol_mass:
        out.append(Violation("normalization", (), f"sum(mu) = {total}"))
    return ValidationReport(out)


# ---------------------------------------------------------------------------
# generators


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _simplex_measure(rng: np.random.Generator, n: int) -> np.ndarray:
    w = rng.dirichlet(np.ones(n))
    w = np.maximum(w, 1e-6 / n)
    return w / w.sum()


def random_euclidean(n: int, dim: int = 2, seed: int = 0, measure: str = "uniform") -> FiniteMMS:
    """``n`` i.i.d. uniform points in the unit cube with Euclidean distances."""
    if n < 1 or dim < 1:
        raise ValueError("need n >= 1 and dim >= 1")
    rng = _rng(seed)
    pts = rng.random((n, dim))
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    np.fill_diagonal(dist, 0.0)
    dist = 0.5 * (dist + dist.T)
    if measure == "uniform":
        mu = np.full(n, 1.0 / n)
    elif measure == "random-simplex":
        mu = _simplex_measure(rng, n)
    else:
        raise ValueError(f"unknown measure mode {measure!r}")
    return FiniteMMS(tuple(f"p{i}" for i in range(n)), dist, mu, name=f"euclid-n{n}-d{dim}-s{seed}")


def random_graph_metric(n: int, seed: int = 0, edge_prob: float = 0.5, measure: str = "uniform",
                        exact: bool = True) -> FiniteMMS:
    """Shortest-path metric of a random connected graph.

    Graph metrics take few distinct values, so these spaces typically have
    nontrivial symmetry and coarse coherent partitions.  ``measure`` may be
    ``uniform``, ``random-simplex`` or ``two-level`` (masses drawn from
    {1, 2} and normalized, which keeps some symmetry alive).
    """
    rng = _rng(seed)
    while True:
        adj = np.triu(rng.random((n, n)) < edge_prob, 1)
        adj = adj | adj.T
        dist = _bfs_all_pairs(adj)
        if n == 1 or np.all(dist >= 0):
            break
    if measure == "uniform":
        mu = [Fraction(1, n)] * n
    elif measure == "two-level":
        w = [int(k) for k in rng.integers(1, 3, size=n)]
        mu = [Fraction(k, sum(w)) for k in w]
    elif measure == "random-simplex":
        w = [int(k) for k in rng.integers(1, 10, size=n)]
        mu = [Fraction(k, sum(w)) for k in w]
    else:
        raise ValueError(f"unknown measure mode {measure!r}")
    labels = tuple(f"v{i}" for i in range(n))
    if exact:
        return FiniteMMS.from_arrays([[Fraction(int(v)) for v in row] for row in dist], mu, labels,
                                     name=f"graph-n{n}-s{seed}", exact=True)
    return FiniteMMS(labels, dist.astype(float), np.array([float(m) for m in mu]), name=f"graph-n{n}-s{seed}")


def _bfs_all_pairs(adj: np.ndarray) -> np.ndarray:
    n = len(adj)
    dist = -np.ones((n, n), dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v in np.nonzero(adj[u])[0]:
                    if dist[s, v] < 0:
                        dist[s, v] = dist[s, u] + 1
                        nxt.append(v)
            frontier = nxt
    return dist


def as_exact(space: FiniteMMS, max_denominator: int | None = None) -> FiniteMMS:
    """Exact-rational copy.  Without ``max_denominator`` floats convert exactly.

    Rounding (``max_denominator`` given) may break the triangle inequality;
    callers should re-validate.  Masses are renormalized to sum to 1.
    """
    if space.exact:
        return space

    def conv(x):
        f = Fraction(float(x))
        return f.limit_denominator(max_denominator) if max_denominator else f

    n = space.n
    dist = np.empty((n, n), dtype=object)
    for i in range(n):
        dist[i, i] = Fraction(0)
        for j in range(i + 1, n):
            dist[i, j] = dist[j, i] = conv(space.dist[i, j])
    if space.is_uniform():
        mu = [Fraction(1, n)] * n
    else:
        raw = [conv(m) for m in space.mu]
        raw = [m if m > 0 else Fraction(1, 10 ** 6 * n) for m in raw]
        tot = sum(raw)
        mu = [m / tot for m in raw]
    return FiniteMMS(space.labels, dist, np.array(mu, dtype=object), space.name)


def as_float(space: FiniteMMS) -> FiniteMMS:
    if not space.exact:
        return space
    return FiniteMMS(space.labels, space.dist.astype(float), space.mu.astype(float), space.name)


def _off_diagonal_injective(space: FiniteMMS, policy: NumericPolicy) -> bool:
    iu = np.triu_indices(space.n, 1)
    vals = list(space.dist[iu])
    return len(set(group_values(vals, policy).tolist())) == len(vals)


def _diag_square_injective(space: FiniteMMS, policy: NumericPolicy) -> bool:
    d, mu = space.dist, space.mu
    diag = [sum(d[x, y] * d[y, x] * mu[y] for y in range(space.n)) for x in range(space.n)]
    return len(set(group_values(diag, policy).tolist())) == len(diag)


def is_generic(space: FiniteMMS, policy: NumericPolicy | None = None) -> bool:
    policy = NumericPolicy.for_space(space, policy)
    return _off_diagonal_injective(space, policy) and _diag_square_injective(space, policy)


def perturb(space: FiniteMMS, epsilon: float, seed: int = 0, max_retries: int = 100,
            policy: NumericPolicy | None = None) -> FiniteMMS:
    """Small random move of the distances that makes the space generic.

    See :func:`perturb_with_retries`, which also reports the retry count.
    """
    return perturb_with_retries(space, epsilon, seed, max_retries, policy)[0]


def perturb_with_retries(space: FiniteMMS, epsilon: float, seed: int = 0, max_retries: int = 100,
                         policy: NumericPolicy | None = None) -> tuple[FiniteMMS, int]:
    """Move every off-diagonal distance by at most ``epsilon`` until the space is generic.

    Generic means distances are pairwise distinct on unordered off-diagonal
    pairs and the diagonal of ``d * d`` (mu-convolution) has distinct
    entries.  Offsets are drawn from ``[epsilon/2, epsilon]``: any three such
    offsets satisfy ``o_ik <= o_ij + o_jk``, so the triangle inequality
    survives.  Returns the new space and the number of rejected draws.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    policy = NumericPolicy.for_space(space, policy)
    if epsilon == 0:
        if is_generic(space, policy):
            return space, 0
        raise PerturbationError("epsilon = 0 and the space is not generic")
    rng = _rng(seed)
    n = space.n
    iu = np.triu_indices(n, 1)
    if space.exact:
        eps = Fraction(epsilon) if isinstance(epsilon, (int, Fraction)) else Fraction(repr(float(epsilon)))
    for attempt in range(max_retries):
        u = rng.random(len(iu[0]))
        if space.exact:
            grid = 10 ** 6
            offs = [eps / 2 + eps / 2 * Fraction(int(v * grid), grid) for v in u]
            dist = space.dist.copy()
            for (i, j), o in zip(zip(*iu), offs):
                dist[i, j] = dist[j, i] = space.dist[i, j] + o
        else:
            offs = epsilon / 2 + epsilon / 2 * u
            dist = np.array(space.dist, dtype=float)
            dist[iu] += offs
            dist.T[iu] = dist[iu]
        cand = FiniteMMS(space.labels, dist, space.mu, space.name)
        if validate(cand, policy).ok and is_generic(cand, policy):
            return cand, attempt
    raise PerturbationError(
        f"no generic perturbation within {max_retries} attempts (epsilon={epsilon}); "
        "a uniform two-point space can never be generic"
    )


# ---------------------------------------------------------------------------
# JSON


def _parse_number(value: Any, field_name: str) -> Fraction | float:
    if isinstance(value, bool):
        raise SpaceFormatError(field_name, f"boolean {value!r} is not a number")
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpaceFormatError(field_name, f"cannot parse {value!r} as p/q") from exc
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise SpaceFormatError(field_name, "non-finite value")
        return value
    raise SpaceFormatError(field_name, f"expected number or 'p/q' string, got {type(value).__name__}")


def space_from_json(doc: Any, exact: bool | None = None) -> FiniteMMS:
    """Build a space from a decoded JSON object.

    With ``exact=None`` the mode is exact iff every number is an integer or
    a ``"p/q"`` string.
    """
    if not isinstance(doc, dict):
        raise SpaceFormatError("<root>", "expected a JSON object")
    for key in ("dist", "mu"):
        if key not in doc:
            raise SpaceFormatError(key, "missing")
    dist_raw, mu_raw = doc["dist"], doc["mu"]
    if not isinstance(dist_raw, list) or not all(isinstance(r, list) for r in dist_raw):
        raise SpaceFormatError("dist", "expected an array of arrays")
    if not isinstance(mu_raw, list):
        raise SpaceFormatError("mu", "expected an array")
    n = len(dist_raw)
    if n == 0:
        raise SpaceFormatError("dist", "empty")
    for i, row in enumerate(dist_raw):
        if len(row) != n:
            raise SpaceFormatError("dist", f"row {i} has length {len(row)}, expected {n}")
    if len(mu_raw) != n:
        raise SpaceFormatError("mu", f"length {len(mu_raw)} does not match dist size {n}")
    labels = doc.get("labels", [str(i) for i in range(n)])
    if not isinstance(labels, list) or len(labels) != n:
        raise SpaceFormatError("labels", f"expected an array of {n} strings")
    dist = [[_parse_number(v, f"dist[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(dist_raw)]
    mu = [_parse_number(v, f"mu[{i}]") for i, v in enumerate(mu_raw)]
    if exact is None:
        exact = all(isinstance(v, Fraction) for row in dist for v in row) and all(isinstance(v, Fraction) for v in mu)
    name = doc.get("name")
    if exact:
        return FiniteMMS.from_arrays([[Fraction(v) for v in row] for row in dist], [Fraction(v) for v in mu],
                                     labels, name, exact=True)
    return FiniteMMS(tuple(labels), np.array(dist, dtype=float), np.array(mu, dtype=float), name)


def _num_to_json(v) -> Any:
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def space_to_json(space: FiniteMMS) -> dict:
    doc: dict[str, Any] = {
        "labels": list(space.labels),
        "dist": [[_num_to_json(v) for v in row] for row in space.dist],
        "mu": [_num_to_json(v) for v in space.mu],
    }
    if space.name is not None:
        doc["name"] = space.name
    return doc


def load_space(path: str | Path, exact: bool | None = None) -> FiniteMMS:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpaceFormatError("<root>", f"invalid JSON: {exc}") from exc
    return space_from_json(doc, exact)


def dump_space(space: FiniteMMS, path: str | Path) -> None:
    Path(path).write_text(json.dumps(space_to_json(space), indent=2) + "\n")
