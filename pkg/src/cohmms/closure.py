"""Coherent closure of a finite metric measure space.

The coherent algebra is represented by its partition of X x X into
coherence classes.  :func:`coherent_closure` computes it by weighted pair
refinement; :func:`brute_force_closure` and :func:`isometry_orbitals` are
independent oracles that never look at the refinement.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernel import Kernel, SpaceMismatchError, convolve, flip, hadamard
from .space import FiniteMMS, NumericPolicy, group_values

__all__ = [
    "CoherentPartition",
    "FullnessCertificate",
    "VerificationReport",
    "GroupingWarning",
    "coherent_closure",
    "canonicalize",
    "partition_from_classes",
    "verify_configuration",
    "fullness",
    "BruteForceClosure",
    "brute_force_closure",
    "IsometryGroup",
    "isometry_group",
    "isometry_orbitals",
    "is_constant_on_classes",
    "class_indicator",
]


class GroupingWarning(UserWarning):
    """A float gap sits close to the grouping threshold."""


@dataclass(frozen=True, eq=False)
class CoherentPartition:
    space: FiniteMMS
    class_of: np.ndarray
    r: int
    intersection: np.ndarray
    policy: NumericPolicy
    rounds: int = 0
    history: tuple[int, ...] = ()
    warnings: tuple = ()

    @property
    def class_count(self) -> int:
        return self.r

    def cells(self, k: int) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.class_of == k)
        return list(zip(xs.tolist(), ys.tolist()))

    def classes(self) -> list[list[tuple[int, int]]]:
        return [self.cells(k) for k in range(self.r)]

    def to_json(self) -> dict:
        return {
            "labels": list(self.space.labels),
            "class_of": self.class_of.tolist(),
            "class_count": self.r,
            "full": self.r == self.space.n ** 2,
            "rounds": self.rounds,
        }

    def to_csv(self) -> str:
        lab = self.space.labels
        rows = ["x_label,y_label,class_id"]
        n = self.space.n
        for x in range(n):
            for y in range(n):
                rows.append(f"{lab[x]},{lab[y]},{int(self.class_of[x, y])}")
        return "\n".join(rows) + "\n"


def canonicalize(colors: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel so that class k first appears before class k+1 in row-major order."""
    remap: dict = {}
    flat = colors.ravel()
    out = np.empty(flat.shape, dtype=np.int64)
    for idx, c in enumerate(flat.tolist()):
        if c not in remap:
            remap[c] = len(remap)
        out[idx] = remap[c]
    return out.reshape(colors.shape), len(remap)


def _pair_sums(colors: np.ndarray, mu: np.ndarray, x: int, z: int) -> dict:
    sums: dict = {}
    for y in range(len(mu)):
        key = (colors[x][y], colors[y][z])
        sums[key] = sums.get(key, 0) + mu[y]
    return sums


def coherent_closure(space: FiniteMMS, policy: NumericPolicy | None = None,
                     max_rounds: int | None = None) -> CoherentPartition:
    """Weighted pair refinement started from the level sets of ``d``.

    Each round recolours cell (x, z) by its old colour, the old colour of
    (z, x), and the mu-mass of the middle points y for every ordered colour
    pair ((x, y), (y, z)).  Stops once a round produces no split.
    """
    policy = NumericPolicy.for_space(space, policy)
    n = space.n
    mu = space.mu
    near: list = []

    init = group_values(space.dist.ravel().tolist(), policy, warnings_out=near).reshape(n, n)
    colors, r = canonicalize(init)
    history = [r]
    limit = max(1, n * n) if max_rounds is None else max_rounds
    rounds = 0
    while rounds < limit and r < n * n:
        cl = colors.tolist()
        cell_sums = [[_pair_sums(cl, mu, x, z) for z in range(n)] for x in range(n)]
        flat_vals = [v for row in cell_sums for s in row for v in s.values()]
        labels = iter(group_values(flat_vals, policy, warnings_out=near).tolist())
        sigs = np.empty((n, n), dtype=object)
        for x in range(n):
            for z in range(n):
                prof = tuple(sorted((key, next(labels)) for key in cell_sums[x][z]))
                sigs[x, z] = (colors[x, z], colors[z, x], prof)
        new_colors, new_r = canonicalize(sigs)
        rounds += 1
        if new_r == r:
            break
        colors, r = new_colors, new_r
        history.append(r)

    if near:
        lo, hi, gap = min(near, key=lambda t: t[2])
        warnings.warn(f"float grouping near threshold: {lo!r} vs {hi!r} (gap {gap:.3g})", GroupingWarning,
                      stacklevel=2)
    inter = _intersection_tensor(space, colors, r)
    return CoherentPartition(space, colors, r, inter, policy, rounds, tuple(history), tuple(near))


def partition_from_classes(space: FiniteMMS, class_of, policy: NumericPolicy | None = None) -> CoherentPartition:
    """Wrap an arbitrary partition of X x X (e.g. hand-built) for verification."""
    policy = NumericPolicy.for_space(space, policy)
    arr = np.asarray(class_of)
    if arr.shape != (space.n, space.n):
        raise SpaceMismatchError(f"class array shape {arr.shape} does not fit a {space.n}-point space")
    colors, r = canonicalize(arr)
    return CoherentPartition(space, colors, r, _intersection_tensor(space, colors, r), policy)


def _intersection_tensor(space: FiniteMMS, colors: np.ndarray, r: int) -> np.ndarray:
    n = space.n
    exact = space.exact
    tensor = np.zeros((r, r, r), dtype=object if exact else float)
    if exact:
        tensor[...] = Fraction(0)
    seen = set()
    for x in range(n):
        for z in range(n):
            k = colors[x, z]
            if k in seen:
                continue
            seen.add(k)
            for y in range(n):
                tensor[colors[x, y], colors[y, z], k] += space.mu[y]
    return tensor


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    violations: list[tuple[str, tuple, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def kinds(self) -> set[str]:
        return {v[0] for v in self.violations}


def _close(a, b, policy: NumericPolicy) -> bool:
    if policy.exact:
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= policy.tol_group * max(abs(a), abs(b))


def verify_configuration(part: CoherentPartition) -> VerificationReport:
    """Exhaustively re-check the coherent-configuration axioms.

    The intersection numbers are recomputed from scratch for every cell;
    the partition's stored tensor is only used for the class that the cell
    claims to belong to.
    """
    space, C, r, policy = part.space, part.class_of, part.r, part.policy
    n = space.n
    rep = VerificationReport()

    diag_classes = {int(C[x, x]) for x in range(n)}
    for x in range(n):
        for y in range(n):
            if x != y and int(C[x, y]) in diag_classes:
                rep.violations.append(("diagonal", (x, y), f"off-diagonal cell shares class {C[x, y]} with the diagonal"))

    for k in range(r):
        cells = part.cells(k)
        if not cells:
            rep.violations.append(("empty-class", (k,), "class has no cells"))
            continue
        opp = {int(C[y, x]) for x, y in cells}
        if len(opp) != 1:
            rep.violations.append(("opposite", (k,), f"flipped cells fall in classes {sorted(opp)}"))
            continue
        j = opp.pop()
        if len(part.cells(j)) != len(cells):
            rep.violations.append(("opposite", (k,), f"flip of class {k} is a proper subset of class {j}"))

    zero = Fraction(0) if space.exact else 0.0
    refs: dict[int, dict] = {}
    for x in range(n):
        for z in range(n):
            k = int(C[x, z])
            if k not in refs:
                refs[k] = {(i, j): part.intersection[i, j, k] for i in range(r) for j in range(r)
                           if part.intersection[i, j, k] != 0}
            ref = refs[k]
            local: dict = {}
            for y in range(n):
                key = (int(C[x, y]), int(C[y, z]))
                local[key] = local.get(key, zero) + space.mu[y]
            for key in sorted(set(local) | set(ref)):
                a, b = local.get(key, zero), ref.get(key, zero)
                if not _close(a, b, policy):
                    rep.violations.append((
                        "intersection", (x, z, key[0], key[1]),
                        f"cell {(x, z)} of class {k}: mass {a} for pair {key}, expected {b}",
                    ))
    return rep


# ---------------------------------------------------------------------------
# fullness


@dataclass(frozen=True)
class FullnessCertificate:
    full: bool
    class_count: int
    cell_count: int
    witness: tuple[tuple[int, int], tuple[int, int]] | None = None

    @property
    def statement(self) -> str:
        if self.full:
            return ("coherent algebra is full: every cell is its own class, so the quantum automorphism "
                    "group is trivial and so is the isometry group")
        a, b = self.witness
        return f"not full: cells {a} and {b} share a class ({self.class_count} classes for {self.cell_count} cells)"

    def to_json(self) -> dict:
        return {
            "full": self.full,
            "class_count": self.class_count,
            "cell_count": self.cell_count,
            "witness": [list(self.witness[0]), list(self.witness[1])] if self.witness else None,
            "statement": self.statement,
        }


def fullness(part: CoherentPartition) -> FullnessCertificate:
    n = part.space.n
    if part.r == n * n:
        return FullnessCertificate(True, part.r, n * n)
    seen: dict[int, tuple[int, int]] = {}
    for x in range(n):
        for y in range(n):
            k = int(part.class_of[x, y])
            if k in seen:
                return FullnessCertificate(False, part.r, n * n, (seen[k], (x, y)))
            seen[k] = (x, y)
    raise AssertionError("class count below n^2 but no shared class found")


# ---------------------------------------------------------------------------
# brute-force oracle: linear span closure


class _ExactSpan:
    def __init__(self, size: int):
        self.size = size
        self.rows: list[tuple[int, list]] = []  # (pivot, row) with row[pivot] == 1

    def reduce(self, v: list) -> list:
        v = list(v)
        for piv, row in self.rows:
            c = v[piv]
            if c:
                v = [a - c * b for a, b in zip(v, row)]
        return v

    def add(self, v) -> bool:
        w = self.reduce([Fraction(x) for x in v])
        piv = next((i for i, a in enumerate(w) if a != 0), None)
        if piv is None:
            return False
        c = w[piv]
        w = [a / c for a in w]
        for idx, (p, row) in enumerate(self.rows):
            if row[piv]:
                f = row[piv]
                self.rows[idx] = (p, [a - f * b for a, b in zip(row, w)])
        self.rows.append((piv, w))
        return True

    def residual(self, v) -> float:
        w = self.reduce([Fraction(x) for x in v])
        return 0.0 if all(a == 0 for a in w) else 1.0

    def basis(self) -> list[np.ndarray]:
        return [np.array(row, dtype=object) for _, row in self.rows]


class _FloatSpan:
    def __init__(self, size: int, tol: float):
        self.size = size
        self.tol = tol
        self.q: list[np.ndarray] = []

    def _project_out(self, v: np.ndarray) -> np.ndarray:
        if not self.q:
            return v
        Q = np.array(self.q)
        for _ in range(2):
            v = v - Q.T @ (Q @ v)
        return v

    def residual(self, v) -> float:
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        return float(np.linalg.norm(self._project_out(v / nv)))

    def add(self, v) -> bool:
        v = np.asarray(v, dtype=float)
        nv = np.linalg.norm(v)
        if nv == 0:
            return False
        w = self._project_out(v / nv)
        nw = np.linalg.norm(w)
        if nw <= self.tol:
            return False
        self.q.append(w / nw)
        return True

    def basis(self) -> list[np.ndarray]:
        return list(self.q)


@dataclass
class BruteForceClosure:
    space: FiniteMMS
    dimension: int
    basis: list[np.ndarray]
    _span: object = field(repr=False, default=None)
    member_tol: float = 1e-8

    def residual(self, kernel) -> float:
        vals = kernel.values if isinstance(kernel, Kernel) else np.asarray(kernel)
        return self._span.residual(vals.ravel().tolist() if self.space.exact else vals.ravel())

    def contains(self, kernel) -> bool:
        return self.residual(kernel) <= self.member_tol


def brute_force_closure(space: FiniteMMS, max_n: int = 6, tol: float = 1e-9,
                        member_tol: float = 1e-8) -> BruteForceClosure:
    """Span closure of {all-ones, d} under convolution, Hadamard product and flip.

    Exact spaces use rational row reduction; float spaces keep an
    orthonormal basis and accept a product as new when its relative
    residual exceeds ``tol``.
    """
    n = space.n
    if n > max_n:
        raise ValueError(f"brute-force closure limited to n <= {max_n}, got {n}")
    size = n * n
    span = _ExactSpan(size) if space.exact else _FloatSpan(size, tol)
    elems: list[Kernel] = []

    def push(k: Kernel) -> bool:
        flat = k.values.ravel().tolist() if space.exact else k.values.ravel()
        if span.add(flat):
            elems.append(k)
            return True
        return False

    push(Kernel.ones(space))
    push(Kernel.distance(space))
    done = 0  # elements [0, done) have had all pairwise products taken
    while done < len(elems) and len(elems) < size:
        i = done
        a = elems[i]
        push(flip(a))
        for j in range(i + 1):
            b = elems[j]
            for prod in (convolve(a, b), convolve(b, a), hadamard(a, b)):
                push(prod)
                if len(elems) == size:
                    break
        done += 1
    return BruteForceClosure(space, len(elems), span.basis(), span, member_tol)


# ---------------------------------------------------------------------------
# isometry group oracle


@dataclass(frozen=True)
class IsometryGroup:
    space: FiniteMMS
    elements: tuple[tuple[int, ...], ...]

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def trivial(self) -> bool:
        return self.order == 1


def isometry_group(space: FiniteMMS, policy: NumericPolicy | None = None, max_n: int = 9) -> IsometryGroup:
    """All permutations preserving ``d`` and ``mu`` (backtracking search)."""
    n = space.n
    if n > max_n:
        raise ValueError(f"isometry search limited to n <= {max_n}, got {n}")
    policy = NumericPolicy.for_space(space, policy)
    dl = group_values(space.dist.ravel().tolist(), policy).reshape(n, n)
    ml = group_values(space.mu.tolist(), policy)
    perms: list[tuple[int, ...]] = []
    img = [-1] * n
    used = [False] * n

    def extend(x: int) -> None:
        if x == n:
            perms.append(tuple(img))
            return
        for y in range(n):
            if used[y] or ml[y] != ml[x]:
                continue
            if any(dl[x, w] != dl[y, img[w]] for w in range(x)):
                continue
            img[x], used[y] = y, True
            extend(x + 1)
            img[x], used[y] = -1, False

    extend(0)
    return IsometryGroup(space, tuple(perms))


def isometry_orbitals(space: FiniteMMS, policy: NumericPolicy | None = None, max_n: int = 9) -> np.ndarray:
    """Orbit partition of X x X under the isometry group (canonical ids)."""
    group = isometry_group(space, policy, max_n)
    n = space.n
    parent = list(range(n * n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for g in group.elements:
        for x, y in itertools.product(range(n), repeat=2):
            a, b = find(x * n + y), find(g[x] * n + g[y])
            if a != b:
                parent[max(a, b)] = min(a, b)
    roots = np.array([find(i) for i in range(n * n)]).reshape(n, n)
    return canonicalize(roots)[0]


# ---------------------------------------------------------------------------
# helpers shared with other modules


def class_indicator(part: CoherentPartition, k: int) -> Kernel:
    space = part.space
    one, zero = (Fraction(1), Fraction(0)) if space.exact else (1.0, 0.0)
    return Kernel(space, np.where(part.class_of == k, one, zero))


def is_constant_on_classes(part: CoherentPartition, kernel, rtol: float | None = None):
    """Return ``(True, None)`` or ``(False, k)`` for the first class where the kernel varies.

    Exact spaces compare exactly.  Float spaces allow a spread of
    ``rtol * max|kernel|`` inside a class (default: the policy's tol_group).
    """
    if isinstance(kernel, Kernel):
        if not kernel.space.same_as(part.space):
            raise SpaceMismatchError("kernel and partition are bound to different spaces")
        vals = kernel.values
    else:
        vals = np.asarray(kernel)
    exact = vals.dtype == object and part.space.exact
    if not exact:
        fv = vals.astype(float)
        tol = (part.policy.tol_group if rtol is None else rtol) * max(float(np.max(np.abs(fv))), 1e-300)
    for k in range(part.r):
        mask = part.class_of == k
        sel = vals[mask]
        if exact:
            if any(v != sel[0] for v in sel):
                return False, k
        else:
            s = fv[mask]
            if s.max() - s.min() > tol:
                return False, k
    return True, None
