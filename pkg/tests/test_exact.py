from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from parcon.exact import ExactSum, exact_sum

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
# sums of these cannot leave the float range
bounded = st.floats(-1e300, 1e300, allow_nan=False)


def fraction_sum(values):
    return sum((Fraction(v) for v in values), Fraction(0))


@given(st.lists(bounded, max_size=60))
def test_sum_is_correctly_rounded(values):
    assert exact_sum(np.array(values)) == float(fraction_sum(values))


@given(st.lists(finite, min_size=1, max_size=60), st.randoms())
def test_sum_independent_of_order_and_chunking(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    cut = rnd.randrange(len(values) + 1)
    acc = ExactSum(1).add(np.array(shuffled[:cut]).reshape(-1, 1))
    acc.add(np.array(shuffled[cut:]).reshape(-1, 1))
    assert acc == ExactSum(1).add(np.array(values).reshape(-1, 1))


def test_cancellation_is_exact():
    assert exact_sum(np.array([1e308, 1.0, -1e308])) == 1.0
    assert exact_sum(np.array([0.1] * 10)) == float(Fraction(0.1) * 10)


def test_subnormals_survive():
    tiny = 5e-324
    assert exact_sum(np.array([tiny, tiny, -tiny])) == tiny


def test_divided_rounds_once():
    acc = ExactSum(1).add(np.array([[1.0], [2.0], [2.0]]))
    assert acc.divided(3) == (float(Fraction(5, 3)),)


@given(st.lists(st.tuples(finite, st.integers(0, 4)), max_size=80))
def test_grouped_matches_separate_sums(pairs):
    sums = [ExactSum(1) for _ in range(5)]
    if pairs:
        rows = np.array([[v] for v, _ in pairs])
        groups = np.array([g for _, g in pairs])
        ExactSum.add_grouped(sums, rows, groups)
    for g in range(5):
        expect = ExactSum(1).add(np.array([[v] for v, h in pairs if h == g]).reshape(-1, 1))
        assert sums[g] == expect


def test_mean_of_huge_values_does_not_overflow():
    acc = ExactSum(1).add(np.array([[1.7e308], [1.7e308]]))
    assert acc.divided(2) == (1.7e308,)


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        exact_sum(np.array([1.0, np.inf]))
