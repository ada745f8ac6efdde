import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import ulps_apart
from parcon.engine import (ArraySource, BinaryFileSource, ResidentCounter, chunk_size_for, extend,
                           full_pass_evaluate, read_spill, route_to_parts, run)
from parcon.engine.routing import MemorySink, SpillSink
from parcon.errors import BoundsDoNotCover, InsufficientMemory, InvalidPartitionCount
from parcon.measure import measure_from_points
from parcon.partitioning import PartitionerSpec, PartLocator, sample_partition, subsample_draws
from parcon.solutions import Problem, SolutionSpec, make_solution
from parcon.solutions.base import CombineContext
from parcon.validation import oracle_mean

PARAMS = {
    Problem.MEAN: {},
    Problem.SORT: {},
    Problem.EXTREMES: {},
    Problem.HISTOGRAM: {"edges": [-2.0, -0.5, 0.0, 0.5, 2.0]},
    Problem.TEST: {"mu0": 0.0, "sigma": 1.0},
    Problem.MLE: {"model": "gaussian"},
    Problem.KNN: {"query": [0.25], "k": 5},
    Problem.OUTLIER: {"c": 3.0},
}


def spec_for(problem, L, K=1, seed=0):
    scheme = "range_bounded" if problem is Problem.SORT else "random_balanced"
    return SolutionSpec(problem, PartitionerSpec(scheme, L, seed), K, PARAMS[problem])


def test_mean_matches_full_data_mean(normal_1d):
    rep = run(spec_for(Problem.MEAN, 4), ArraySource(normal_1d))
    full = oracle_mean(measure_from_points(normal_1d)).mean[0]
    assert ulps_apart(rep.final.mean[0], full) <= 8
    assert rep.final.count == 10_000


@pytest.mark.parametrize("problem", list(PARAMS))
@given(seed=st.integers(0, 2**32), values=st.lists(st.floats(-3, 3), min_size=5, max_size=60))
@settings(max_examples=15)
def test_single_part_single_repetition_is_direct(problem, seed, values):
    data = np.array(values).reshape(-1, 1)
    spec = spec_for(problem, 1, seed=seed)
    rep = run(spec, ArraySource(data))
    sol = make_solution(rep.spec)
    m = measure_from_points(data)
    full = sol.rho(m)
    if problem is Problem.MLE:
        # the combiner re-evaluates the single candidate on the full data
        assert rep.final.theta == full.theta
    else:
        assert rep.final == full


@pytest.mark.parametrize("problem", list(PARAMS))
def test_result_independent_of_workers(problem, rng):
    data = rng.normal(size=(3000, 1))
    reports = [run(spec_for(problem, 6, K=3, seed=5), ArraySource(data), workers=w, chunk_size=1000)
               for w in (1, 2, 4, 8)]
    for r in reports[1:]:
        assert r.final == reports[0].final
        assert [e.values for e in r.ev_trace] == [e.values for e in reports[0].ev_trace]


def test_test_problem_workers_1_vs_8(rng):
    from parcon.cli.report import dumps, result_to_dict
    data = rng.normal(size=(2000, 1))
    spec = spec_for(Problem.TEST, 3, K=5, seed=9)
    a = run(spec, ArraySource(data), workers=1)
    b = run(spec, ArraySource(data), workers=8)
    assert dumps(result_to_dict(a.final)) == dumps(result_to_dict(b.final))


def test_result_independent_of_chunk_size(rng):
    data = rng.normal(size=(5000, 2))
    spec = SolutionSpec("mean", PartitionerSpec("random_balanced", 7, 1), 2)
    results = {run(spec, ArraySource(data), chunk_size=c).final.mean for c in (1, 13, 1000, 5000)}
    assert len(results) == 1


# ------------------------------------------------------------- routing

class Recorder(MemorySink):
    pass


def sinks(L, d=1):
    counter = ResidentCounter()
    return [Recorder(d, counter) for _ in range(L)], counter


def delivered(s):
    return np.concatenate(s._index) if s._index else np.empty(0, dtype=np.int64)


def test_partition_routing_delivers_each_index_once():
    data = np.arange(1000, dtype=float).reshape(-1, 1)
    spec = PartitionerSpec("random_balanced", 4, 3)
    out, _ = sinks(4)
    route_to_parts(PartLocator(spec, 1000, 0), ArraySource(data), out, chunk_size=77)
    got = np.sort(np.concatenate([delivered(s) for s in out]))
    assert np.array_equal(got, np.arange(1000))


def test_subsample_routing_keeps_multiplicity():
    data = np.arange(10, dtype=float).reshape(-1, 1)
    draws = [np.array([1, 3, 3, 7])]
    out, _ = sinks(1)
    route_to_parts(draws, ArraySource(data), out, chunk_size=4)
    assert sorted(delivered(out[0]).tolist()) == [1, 3, 3, 7]
    assert np.vstack(out[0]._rows)[:, 0].tolist().count(3.0) == 2


def test_spill_files_reproduce_assignment(tmp_path):
    n = 100_000
    data = np.arange(n, dtype=float).reshape(-1, 1)
    spec = PartitionerSpec("random_balanced", 2, 77)
    out = [SpillSink(str(tmp_path), f"p{j}", 1) for j in range(2)]
    route_to_parts(PartLocator(spec, n, 0), ArraySource(data), out, chunk_size=1000)
    assignment = sample_partition(spec, measure_from_points(data), 0)
    for s, part in zip(out, assignment.parts):
        index, rows = read_spill(s.path, 1)
        assert np.array_equal(np.sort(index), np.sort(part))
        assert np.array_equal(rows[:, 0], index.astype(float))


def test_spill_file_layout(tmp_path):
    s = SpillSink(str(tmp_path), "x", 2)
    s.accept(np.array([5]), np.array([[1.5, -2.0]]))
    raw = (tmp_path / "x.bin").read_bytes()
    assert len(raw) == 24
    assert int.from_bytes(raw[:8], "little") == 5
    assert np.frombuffer(raw[8:], "<f8").tolist() == [1.5, -2.0]


# ------------------------------------------------------- memory and spill

def test_spill_path_matches_in_memory(rng, tmp_path, monkeypatch):
    monkeypatch.setenv("PARCON_TMPDIR", str(tmp_path))
    data = rng.normal(size=(4000, 1))
    spec = SolutionSpec("knn", PartitionerSpec("random_balanced", 8, 2), 2, {"query": [0.0], "k": 4})
    small = run(spec, ArraySource(data), chunk_size=600)
    big = run(spec, ArraySource(data), chunk_size=10_000)
    assert small.final == big.final
    assert list(tmp_path.iterdir()) == []


def test_sort_too_few_parts_for_budget(rng):
    data = rng.normal(size=(5000, 1))
    spec = SolutionSpec("sort", PartitionerSpec("range_bounded", 2), 1)
    with pytest.raises(InsufficientMemory, match="raise L"):
        run(spec, ArraySource(data), memory_budget=20_000)


def test_resident_points_stay_bounded(rng):
    data = rng.normal(size=(20_000, 1))
    spec = SolutionSpec("sort", PartitionerSpec("range_bounded", 16), 1)
    budget = 16 * 2000 * 3
    rep = run(spec, ArraySource(data), workers=2, memory_budget=budget)
    chunk = chunk_size_for(budget, 1, 2)
    assert rep.engine["peak_resident_points"] <= chunk * 3 + chunk
    assert rep.final.run[:, 0].tolist() == sorted(data[:, 0].tolist())


def test_chunk_size_never_below_one():
    assert chunk_size_for(1, 5, 8) == 1


def test_too_many_parts():
    with pytest.raises(InvalidPartitionCount):
        run(spec_for(Problem.MEAN, 10), ArraySource(np.zeros((5, 1))))


def test_errors_carry_repetition():
    spec = SolutionSpec("histogram", PartitionerSpec("range_bounded", 1, bounds=(0.0, 1.0)), 1,
                        {"edges": [0.0, 1.0]})
    with pytest.raises(BoundsDoNotCover) as info:
        run(spec, ArraySource(np.array([[0.5], [2.0]])))
    assert info.value.repetition == 0 and "k=0" in str(info.value)


# ------------------------------------------------------------ full pass

def test_full_pass_single_point():
    v = full_pass_evaluate((0.0, 1.0), "gaussian", ArraySource(np.zeros((1, 1))))
    assert v == -0.5 * math.log(2 * math.pi)


def test_full_pass_additive(rng):
    x = rng.normal(size=(777, 1))
    once = full_pass_evaluate((0.3, 1.7), "gaussian", ArraySource(x), chunk_size=50)
    twice = full_pass_evaluate((0.3, 1.7), "gaussian", ArraySource(np.vstack([x, x])), chunk_size=64)
    assert twice == 2 * once


def test_full_pass_matches_in_memory_sum(rng):
    x = rng.normal(1.0, 3.0, size=(1000, 1))
    mu, var = 0.8, 8.5
    ref = math.fsum(-0.5 * math.log(2 * math.pi * var) - (v - mu) ** 2 / (2 * var) for v in x[:, 0])
    got = full_pass_evaluate((mu, var), "gaussian", ArraySource(x), chunk_size=33)
    assert got == pytest.approx(ref, rel=1e-10)


def test_full_pass_from_binary_file(rng, tmp_path):
    x = rng.normal(size=(500, 1))
    path = tmp_path / "x.bin"
    x.astype("<f8").tofile(path)
    a = full_pass_evaluate((0.0, 1.0), "gaussian", BinaryFileSource(path, 1), chunk_size=7)
    b = full_pass_evaluate((0.0, 1.0), "gaussian", ArraySource(x))
    assert a == b


# --------------------------------------------------------------- extend

def test_extend_keeps_earlier_repetitions(rng):
    data = rng.normal(size=(1000, 1))
    spec = SolutionSpec("test", PartitionerSpec("random_balanced", 4, 8), 3, {"mu0": 0.0, "sigma": 1.0})
    first = run(spec, ArraySource(data))
    grown = np.vstack([data, rng.normal(size=(200, 1))])
    more = extend(first, ArraySource(grown), 2)
    assert more.K == 5 and more.per_rep[:3] == first.per_rep
    again = run(spec.replace(K=5), ArraySource(grown))
    assert more.per_rep[3:] == again.per_rep[3:]


def test_subsample_draws_are_reproducible():
    spec = PartitionerSpec("subsample", 3, 5, part_size=10)
    a = subsample_draws(spec, 100, 4)
    b = subsample_draws(spec, 100, 4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_mle_combiner_sees_full_data(rng):
    data = rng.normal(2.0, 1.5, size=(4000, 1))
    spec = SolutionSpec("mle", PartitionerSpec("random_balanced", 8, 3), 1, {"model": "gaussian"})
    rep = run(spec, ArraySource(data), keep_parts=True)
    cands = rep.per_part[0]
    full = [full_pass_evaluate(c.theta, "gaussian", ArraySource(data)) for c in cands]
    assert rep.final.loglik == max(full)
    assert all(rep.final.loglik >= f for f in full)


def test_context_defaults():
    ctx = CombineContext(n=3, d=1)
    assert ctx.full_objective is None and ctx.warnings == []
