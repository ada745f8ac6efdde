import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from parcon.errors import DimensionMismatch, EmptyInput, NonfiniteValue
from parcon.measure import (EvalVector, ExtremesResult, HistogramResult, KnnResult, MeanResult,
                            OutlierResult, PValueResult, SortedResult, check_covers, eval_distance,
                            lex_order, measure_from_points)

coord = st.floats(-1e6, 1e6, allow_nan=False)


def test_measure_from_points():
    m = measure_from_points([(1.0,), (2.0,), (3.0,)])
    assert (m.n, m.d) == (3, 1)
    assert m.mass == pytest.approx(1 / 3)


def test_ragged_points_rejected():
    with pytest.raises(DimensionMismatch):
        measure_from_points([(1.0, 2.0), (3.0,)])


def test_empty_rejected():
    with pytest.raises(EmptyInput):
        measure_from_points([])


def test_nonfinite_rejected():
    with pytest.raises(NonfiniteValue):
        measure_from_points([(1.0,), (math.nan,)])
    with pytest.raises(NonfiniteValue):
        measure_from_points([(math.inf,)])


@given(st.integers(1, 4).flatmap(lambda d: st.lists(st.tuples(*[coord] * d), min_size=1, max_size=30)))
def test_points_round_trip(points):
    assert measure_from_points(points).points() == [tuple(p) for p in points]


def test_measure_is_read_only():
    m = measure_from_points([(1.0,), (2.0,)])
    with pytest.raises(ValueError):
        m.data[0, 0] = 5.0


@pytest.mark.parametrize("a, b, expected", [
    ((0, 0), (3, 4), 5.0),
    ((1.5,), (1.5,), 0.0),
    ((1, 1, 1), (2, 2, 2), math.sqrt(3)),
])
def test_eval_distance_examples(a, b, expected):
    assert eval_distance(EvalVector(a), EvalVector(b)) == pytest.approx(expected, rel=1e-15)


def test_eval_distance_length_mismatch():
    with pytest.raises(DimensionMismatch):
        eval_distance((1.0, 2.0), (1.0,))


vec3 = st.tuples(coord, coord, coord)


@given(vec3, vec3, vec3)
def test_eval_distance_is_a_metric(a, b, c):
    dab, dba = eval_distance(a, b), eval_distance(b, a)
    assert dab >= 0 and dab == dba
    assert (dab == 0) == (a == b)
    assert eval_distance(a, c) <= dab + eval_distance(b, c) + 1e-9 * (1 + dab)


def test_result_validators():
    with pytest.raises(ValueError):
        PValueResult(1.5)
    with pytest.raises(ValueError):
        SortedResult(np.array([[2.0], [1.0]]), [0, 1])
    with pytest.raises(ValueError):
        HistogramResult((0.0, 1.0), (-1,))
    with pytest.raises(ValueError):
        HistogramResult((1.0, 0.0), (1,))
    with pytest.raises(ValueError):
        KnnResult(np.zeros((2, 1)), [0.5, 0.1], [0, 1])
    with pytest.raises(ValueError):
        OutlierResult([0, 1], [1], [0.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        MeanResult((1.0,), 0)
    with pytest.raises(DimensionMismatch):
        ExtremesResult((0.0,), (1.0, 2.0))
    with pytest.raises(NonfiniteValue):
        EvalVector((math.nan,))


def test_outlier_cover_check():
    r = OutlierResult([0, 2], [1], [1.0, 2.0], [50.0])
    assert check_covers(r, [0, 1, 2])
    assert not check_covers(r, [0, 1, 2, 3])


def test_lex_order_uses_key_dim_first():
    data = np.array([[1.0, 5.0], [0.0, 9.0], [1.0, 2.0]])
    assert lex_order(data, key_dim=0).tolist() == [1, 2, 0]
    assert lex_order(data, key_dim=1).tolist() == [2, 0, 1]
