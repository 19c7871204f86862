import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cohmms.genericity import PowerCache, check_nmp, density_condition, separation_profile
from cohmms.kernel import Kernel, conv_power
from cohmms.space import FiniteMMS, random_euclidean, random_graph_metric


def test_one_point_is_trivially_separated(one_point):
    n_min, margin = separation_profile(one_point, 3)
    assert n_min == 1 and margin == math.inf
    cert = check_nmp(one_point, 1, 1, 1)
    assert cert.satisfied and cert.min_margin == math.inf and cert.worst_pair is None


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_powers_of_symmetric_distance_are_symmetric(k):
    s = random_euclidean(5, 2, seed=k, measure="random-simplex")
    v = conv_power(Kernel.distance(s), k).values
    assert np.allclose(v, v.T, rtol=1e-12, atol=0)


def test_three_point_flip_pairs_are_never_separated(three_point):
    n_min, margin = separation_profile(three_point, 9)
    assert n_min is None and margin == 0
    cert = check_nmp(three_point, 9, 1, 10)
    assert not cert.satisfied
    assert cert.min_margin == 0
    (a, b), (c, e) = cert.worst_pair
    assert (c, e) == (b, a)


def test_check_nmp_vacuous_when_threshold_too_high():
    s = FiniteMMS.from_arrays([[0, Fraction(1, 10)], [Fraction(1, 10), 0]], exact=True)
    cert = check_nmp(s, 2, 2, 1)  # 1/m = 1/2 > 2 * 1/10
    assert cert.satisfied and cert.min_margin == math.inf and cert.pairs_checked == 0


def test_check_nmp_margin_is_exact_in_rational_mode(two_point):
    cert = check_nmp(two_point, 2, 1, 1)
    assert isinstance(cert.min_margin, (Fraction, int))
    assert cert.to_json()["params"] == {"N": 2, "m": 1, "p": 1}


def test_two_point_is_not_separated(two_point):
    assert separation_profile(two_point, 4) == (None, 0)


def test_parameter_validation(three_point):
    with pytest.raises(ValueError):
        check_nmp(three_point, 0, 1, 1)
    with pytest.raises(ValueError):
        separation_profile(three_point, 0)


def test_power_cache_signatures(three_point):
    cache = PowerCache(three_point)
    S = cache.signatures(3)
    assert S.shape == (9, 3)
    assert S[1, 1] == conv_power(Kernel.distance(three_point), 2).values[0, 1]


def test_density_condition_examples(three_point, equilateral3, two_point):
    assert density_condition(three_point) == (True, True)
    assert density_condition(equilateral3) == (False, False)
    assert density_condition(two_point) == (True, False)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 6))
def test_margin_monotone_in_N(seed, n):
    s = random_euclidean(n, 2, seed, "random-simplex")
    cache = PowerCache(s)
    margins = [check_nmp(s, N, 4, 1000, cache).min_margin for N in range(1, 5)]
    assert all(b >= a for a, b in zip(margins, margins[1:]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n=st.integers(2, 6))
def test_satisfaction_monotone_in_m_and_p(seed, n):
    s = random_graph_metric(n, seed)
    cache = PowerCache(s)
    for m in (1, 2, 4):
        if check_nmp(s, 3, m + 1, 5, cache).satisfied:
            assert check_nmp(s, 3, m, 5, cache).satisfied
    for p in (2, 4, 8):
        if check_nmp(s, 3, 2, p, cache).satisfied:
            assert check_nmp(s, 3, 2, p + 1, cache).satisfied
