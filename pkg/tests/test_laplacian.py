from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cohmms.closure import coherent_closure, is_constant_on_classes, partition_from_classes
from cohmms.laplacian import (
    UnsupportedMeasureError,
    build_laplacian,
    census_equality,
    hadamard_inverse_identity,
    interval_census,
    membership_check,
    psd_check,
    variational_check,
)
from cohmms.space import FiniteMMS, random_euclidean, random_graph_metric


def test_two_point_laplacian(two_point):
    b = build_laplacian(two_point)
    assert b.delta.tolist() == [[1, -1], [-1, 1]]
    assert b.apply([1, 1]).tolist() == [0, 0]


def test_equilateral_laplacian(equilateral3):
    b = build_laplacian(equilateral3)
    assert b.delta.tolist() == [[2, -1, -1], [-1, 2, -1], [-1, -1, 2]]
    ok, lo = psd_check(b)
    assert ok and abs(lo) < 1e-12


def test_three_point_laplacian_exact(three_point):
    b = build_laplacian(three_point)
    assert b.conductance[0, 2] == Fraction(5, 6)
    assert b.T[0, 0] == 1 + Fraction(5, 6)
    assert all(sum(row) == 0 for row in b.delta)
    assert variational_check(b) < 1e-12


def test_non_uniform_measure_rejected(three_point):
    with pytest.raises(UnsupportedMeasureError):
        build_laplacian(three_point.with_mu([Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)]))


def test_membership_fails_on_coarse_partition(three_point):
    b = build_laplacian(three_point)
    coarse = partition_from_classes(three_point, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    ok, k = membership_check(b, coarse)
    assert not ok and k is not None
    assert membership_check(b, coherent_closure(three_point)) == (True, None)


def test_hadamard_inverse_identity(three_point, equilateral3):
    assert hadamard_inverse_identity(three_point) == 0
    assert hadamard_inverse_identity(equilateral3) == 0
    assert hadamard_inverse_identity(random_euclidean(6, 2, seed=1)) < 1e-12


def test_census_on_two_point(two_point):
    assert np.diag(interval_census(two_point, 1, 1).values).tolist() == [1, 1]
    w = interval_census(two_point, 1, 1, weighted=True)
    assert np.diag(w.values).tolist() == [Fraction(1, 2), Fraction(1, 2)]


def test_census_counts_neighbours(three_point):
    got = np.diag(interval_census(three_point, 1, 1).values).tolist()
    assert got == [1, 1, 0]


def test_census_equality_detects_bad_partition(three_point):
    merged_diag = partition_from_classes(three_point, [[0, 1, 2], [3, 0, 4], [5, 6, 0]])
    assert census_equality(three_point, merged_diag, [(1, 1)])
    assert census_equality(three_point, coherent_closure(three_point), [(1, 1)]) == []


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 8), graph=st.booleans())
def test_laplacian_properties(seed, n, graph):
    s = random_graph_metric(n, seed) if graph else random_euclidean(n, 2, seed)
    b = build_laplacian(s)
    part = coherent_closure(s)
    assert membership_check(b, part)[0]
    assert variational_check(b, trials=20, seed=seed) <= 1e-10
    assert psd_check(b)[0]
    vals = sorted({float(v) for v in s.dist.ravel()})
    intervals = [(0, vals[len(vals) // 2]), (vals[-1] / 2, vals[-1])]
    for a, c in intervals:
        assert is_constant_on_classes(part, interval_census(s, a, c))[0]
    assert census_equality(s, part, intervals) == []


def test_apply_matches_quadratic_form():
    s = random_euclidean(5, 2, seed=4)
    b = build_laplacian(s)
    f = np.arange(5.0)
    c = b.conductance
    energy = sum(c[x, y] * (f[x] - f[y]) ** 2 for x in range(5) for y in range(5) if x != y) / 2
    assert f @ b.apply(f) == pytest.approx(energy, rel=1e-12)
