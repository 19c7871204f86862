from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cohmms.closure import (
    brute_force_closure,
    class_indicator,
    coherent_closure,
    fullness,
    is_constant_on_classes,
    isometry_group,
    isometry_orbitals,
    partition_from_classes,
    verify_configuration,
)
from cohmms.kernel import Kernel, conv_powers, hadamard
from cohmms.space import FiniteMMS, NumericPolicy, as_exact, random_euclidean, random_graph_metric


def _regular_polygon(n, exact=True):
    d = [[min((i - j) % n, (j - i) % n) for j in range(n)] for i in range(n)]
    return FiniteMMS.from_arrays(d, exact=exact)


def test_two_point_closure(two_point):
    part = coherent_closure(two_point)
    assert part.r == 2
    assert part.class_of.tolist() == [[0, 1], [1, 0]]
    assert part.history == (2,)
    cert = fullness(part)
    assert not cert.full and cert.witness == ((0, 1), (1, 0))


def test_two_point_initial_coloring_is_stable(two_point):
    once = coherent_closure(two_point, max_rounds=1)
    assert np.array_equal(once.class_of, coherent_closure(two_point).class_of)


def test_one_point_closure(one_point):
    part = coherent_closure(one_point)
    assert part.r == 1
    assert fullness(part).full
    assert brute_force_closure(one_point).dimension == 1


@pytest.mark.parametrize("fixture", ["three_point", "three_point_float"])
def test_three_point_is_full(fixture, request):
    space = request.getfixturevalue(fixture)
    part = coherent_closure(space)
    assert part.history == (4, 9)
    assert part.r == 9 and fullness(part).full
    assert brute_force_closure(space).dimension == 9


def test_two_point_brute_force(two_point, two_point_float):
    assert brute_force_closure(two_point).dimension == 2
    assert brute_force_closure(two_point_float).dimension == 2


def test_closure_is_verified(three_point, equilateral3):
    for s in (three_point, equilateral3, _regular_polygon(6)):
        assert verify_configuration(coherent_closure(s)).ok


def test_bad_diagonal_partition_is_caught(three_point):
    # (0,1) shares a class with (0,0)
    rep = verify_configuration(partition_from_classes(three_point, [[0, 0, 1], [1, 2, 1], [1, 1, 2]]))
    assert "diagonal" in rep.kinds()


def test_coarse_partition_breaks_intersection_constancy(three_point):
    coarse = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]
    # with a uniform measure {diagonal, rest} is a valid scheme
    assert verify_configuration(partition_from_classes(three_point, coarse)).ok
    skew = three_point.with_mu([Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)])
    rep = verify_configuration(partition_from_classes(skew, coarse))
    assert rep.kinds() == {"intersection"}


def test_opposite_violation(three_point):
    cls = [[0, 1, 2], [3, 0, 2], [2, 2, 0]]
    rep = verify_configuration(partition_from_classes(three_point, cls))
    assert "opposite" not in rep.kinds()
    # flipping class 1 = {(0,1), (0,2), (1,0)} straddles classes 1 and 2
    cls = [[0, 1, 1], [1, 0, 2], [2, 2, 0]]
    rep = verify_configuration(partition_from_classes(three_point, cls))
    assert "opposite" in rep.kinds()


def test_canonical_ids_by_first_occurrence():
    s = random_graph_metric(6, seed=4)
    C = coherent_closure(s).class_of.ravel().tolist()
    seen = []
    for c in C:
        if c not in seen:
            seen.append(c)
    assert seen == list(range(len(seen)))


def test_mu_asymmetry_splits_two_point_classes(two_point):
    skew = two_point.with_mu([Fraction(1, 3), Fraction(2, 3)])
    part = coherent_closure(skew)
    assert part.r == 4


def test_isometry_group_two_point(two_point):
    g = isometry_group(two_point)
    assert sorted(g.elements) == [(0, 1), (1, 0)]
    assert np.array_equal(isometry_orbitals(two_point), coherent_closure(two_point).class_of)


def test_isometry_group_three_point_trivial(three_point):
    assert isometry_group(three_point).trivial
    assert len(np.unique(isometry_orbitals(three_point))) == 9


def test_distinct_masses_force_trivial_group(equilateral3):
    s = equilateral3.with_mu([Fraction(1, 6), Fraction(2, 6), Fraction(3, 6)])
    assert isometry_group(s).trivial


def test_polygon_group_is_dihedral():
    assert isometry_group(_regular_polygon(6)).order == 12


def test_size_guards():
    with pytest.raises(ValueError):
        brute_force_closure(random_euclidean(7, 2, 0))
    with pytest.raises(ValueError):
        isometry_group(random_euclidean(10, 2, 0))


def test_determinism():
    s = random_graph_metric(7, seed=12, measure="two-level")
    assert np.array_equal(coherent_closure(s).class_of, coherent_closure(s).class_of)


def test_exports(two_point):
    part = coherent_closure(two_point)
    doc = part.to_json()
    assert doc["class_count"] == 2 and doc["full"] is False
    assert part.to_csv().splitlines()[1] == "0,0,0"


def _spaces(seed, n):
    kind = seed % 3
    if kind == 0:
        return random_euclidean(n, 2, seed, "random-simplex" if seed % 2 else "uniform")
    if kind == 1:
        return random_graph_metric(n, seed, measure="two-level")
    return random_graph_metric(n, seed, exact=False)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 7))
def test_refinement_properties(seed, n):
    s = _spaces(seed, n)
    part = coherent_closure(s)
    h = part.history
    assert all(a < b for a, b in zip(h, h[1:]))
    assert part.rounds <= max(1, n * n - 1) + 1
    assert verify_configuration(part).ok
    orb = isometry_orbitals(s)
    for k in np.unique(orb):
        assert len(set(part.class_of[orb == k].tolist())) == 1
    if fullness(part).full:
        assert isometry_group(s).trivial
    d = Kernel.distance(s)
    for kern in conv_powers(d, n * n) + [Kernel.ones(s), hadamard(d, d), hadamard(hadamard(d, d), d)]:
        assert is_constant_on_classes(part, kern, rtol=1e-9)[0]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 5))
def test_oracle_agreement(seed, n):
    s = _spaces(seed, n)
    part = coherent_closure(s)
    bf = brute_force_closure(s)
    assert bf.dimension == part.r
    for k in range(part.r):
        assert bf.contains(class_indicator(part, k))


def test_oracle_agreement_exact_euclidean():
    for seed in range(8):
        s = as_exact(random_euclidean(4, 2, seed, "random-simplex"), max_denominator=1000)
        assert coherent_closure(s).r == brute_force_closure(s).dimension


def test_float_and_exact_agree_on_graph_metrics():
    for seed in range(10):
        e = random_graph_metric(6, seed, measure="two-level")
        f = random_graph_metric(6, seed, measure="two-level", exact=False)
        assert np.array_equal(coherent_closure(e).class_of, coherent_closure(f).class_of)


def test_tolerance_merges_near_equal_distances():
    d = [[0, 1.0, 1.0 + 1e-13], [1.0, 0, 1.0], [1.0 + 1e-13, 1.0, 0]]
    s = FiniteMMS.from_arrays(d)
    assert coherent_closure(s).r == 2
    assert coherent_closure(s, NumericPolicy(tol_group=0.0)).r > 2
