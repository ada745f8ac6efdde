"""Problems solved exactly by partitioning: mean, sort, extremes, histogram."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

import numpy as np

from ..errors import BinMismatch, DimensionMismatch, EmptyInput, IndexOutOfRange, NonViableCombiner
from ..exact import ExactSum
from ..measure import (EmpiricalMeasure, EvalVector, ExtremesResult, HistogramResult, MeanResult,
                       SortedResult, count_descents, lex_order)
from ..partitioning import Scheme
from .base import CombineContext, Folder, Solution


# ------------------------------------------------------------------ mean

class _MeanFolder(Folder):
    def __init__(self) -> None:
        self.total: ExactSum | None = None
        self.count = 0

    def update(self, rows: np.ndarray, index: np.ndarray) -> None:
        if rows.shape[0] == 0:
            return
        if self.total is None:
            self.total = ExactSum(rows.shape[1])
        self.total.add(rows)
        self.count += rows.shape[0]

    @classmethod
    def update_grouped(cls, folders, rows, index, groups):
        if rows.shape[0] == 0:
            return
        for f in folders:
            if f.total is None:
                f.total = ExactSum(rows.shape[1])
        ExactSum.add_grouped([f.total for f in folders], rows, groups)
        for f, c in zip(folders, np.bincount(groups, minlength=len(folders)).tolist()):
            f.count += c

    def result(self) -> MeanResult:
        if self.total is None or self.count == 0:
            raise EmptyInput("mean of an empty part")
        return MeanResult(self.total.divided(self.count), self.count, self.total)


def rho_mean(part: EmpiricalMeasure) -> MeanResult:
    f = _MeanFolder()
    f.update(part.data, part.parent_index)
    return f.result()


def _exact_total(r: MeanResult) -> list[Fraction]:
    if r.total is not None:
        return r.total.fractions()
    return [Fraction(m) * r.count for m in r.mean]


def combine_mean_L(results: Sequence[MeanResult]) -> MeanResult:
    """Count-weighted mean of part means and the total count.

    The weighted sum is formed in exact rational arithmetic, so the result
    equals the full-data mean whenever the parts partition the data.
    """
    if not results:
        raise EmptyInput("nothing to combine")
    d = len(results[0].mean)
    if any(len(r.mean) != d for r in results):
        raise DimensionMismatch("part means differ in dimension")
    count = sum(r.count for r in results)
    sums = [sum(col, Fraction(0)) for col in zip(*(_exact_total(r) for r in results))]
    mean = tuple(float(s / count) for s in sums)
    total = None
    if all(r.total is not None for r in results):
        total = results[0].total
        for r in results[1:]:
            total = total.merge(r.total)
    return MeanResult(mean, count, total)


class MeanSolution(Solution):
    name = "mean"
    streaming = True

    def folder(self) -> Folder:
        return _MeanFolder()

    def combine_parts(self, results, ctx):
        return combine_mean_L(results)

    def combine_repetitions(self, results, ctx):
        pooled = combine_mean_L(results)
        count = round(sum(r.count for r in results) / len(results))
        return MeanResult(pooled.mean, count, None)

    def ev(self, result: MeanResult) -> EvalVector:
        return EvalVector(result.mean + (float(result.count),))

    def ev_length(self, d):
        return d + 1


# ------------------------------------------------------------------ sort

def rho_sort(part: EmpiricalMeasure, key_dim: int = 0) -> SortedResult:
    order = lex_order(part.data, key_dim, part.parent_index)
    return SortedResult(part.data[order], part.parent_index[order], key_dim)


def combine_sort_L(results: Sequence[SortedResult], ctx: CombineContext | None = None,
                   range_bounded: bool = True) -> SortedResult:
    """Concatenate sorted runs in part order."""
    if not range_bounded:
        raise NonViableCombiner("concatenating sorted parts needs a range-bounded partition")
    if not results:
        raise EmptyInput("nothing to combine")
    key_dim = results[0].key_dim
    run = np.concatenate([r.run for r in results])
    index = np.concatenate([r.index for r in results])
    return SortedResult(run, index, key_dim)


class SortSolution(Solution):
    name = "sort"

    def __init__(self, key_dim: int = 0) -> None:
        self.key_dim = key_dim

    def check_dimension(self, d):
        if self.key_dim >= d:
            raise IndexOutOfRange(f"sort key_dim {self.key_dim} out of range for d={d}")

    def rho(self, part):
        return rho_sort(part, self.key_dim)

    def combine_parts(self, results, ctx):
        return combine_sort_L(results, ctx, range_bounded=ctx.scheme is Scheme.RANGE_BOUNDED)

    def combine_repetitions(self, results, ctx):
        # range partitions are degenerate: every repetition is the same run
        return results[0]

    def ev(self, result: SortedResult) -> EvalVector:
        keys = result.run[:, result.key_dim]
        n = keys.shape[0]
        return EvalVector((float(n), float(keys[0]), float(keys[(n - 1) // 2]), float(keys[-1]),
                           float(count_descents(result.run, result.key_dim))))

    def ev_length(self, d):
        return 5


# -------------------------------------------------------------- extremes

def _lex_extreme(rows: np.ndarray, largest: bool) -> np.ndarray:
    order = lex_order(rows)
    return rows[order[-1] if largest else order[0]]


class _ExtremesFolder(Folder):
    def __init__(self) -> None:
        self.lo: np.ndarray | None = None
        self.hi: np.ndarray | None = None

    def update(self, rows, index):
        if rows.shape[0] == 0:
            return
        lo, hi = _lex_extreme(rows, False), _lex_extreme(rows, True)
        if self.lo is not None:
            lo = _lex_extreme(np.vstack([self.lo, lo]), False)
            hi = _lex_extreme(np.vstack([self.hi, hi]), True)
        self.lo, self.hi = lo, hi

    def result(self):
        if self.lo is None:
            raise EmptyInput("extremes of an empty part")
        return ExtremesResult(tuple(self.lo.tolist()), tuple(self.hi.tolist()))


def rho_extremes(part: EmpiricalMeasure) -> ExtremesResult:
    f = _ExtremesFolder()
    f.update(part.data, part.parent_index)
    return f.result()


def combine_extremes(results: Sequence[ExtremesResult]) -> ExtremesResult:
    """Minimum of minima and maximum of maxima (lexicographic for d > 1)."""
    if not results:
        raise EmptyInput("nothing to combine")
    lows = np.array([r.min for r in results])
    highs = np.array([r.max for r in results])
    return ExtremesResult(tuple(_lex_extreme(lows, False).tolist()),
                          tuple(_lex_extreme(highs, True).tolist()))


class ExtremesSolution(Solution):
    name = "extremes"
    streaming = True

    def folder(self):
        return _ExtremesFolder()

    def combine_parts(self, results, ctx):
        return combine_extremes(results)

    def combine_repetitions(self, results, ctx):
        return combine_extremes(results)

    def ev(self, result):
        return EvalVector(result.min + result.max)

    def ev_length(self, d):
        return 2 * d


# ------------------------------------------------------------- histogram

def bin_counts(keys: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Counts per bin ``[e_j, e_{j+1})``; the first and last bins are open-ended."""
    nbins = edges.shape[0] - 1
    b = np.searchsorted(edges, keys, side="right") - 1
    np.clip(b, 0, nbins - 1, out=b)
    return np.bincount(b, minlength=nbins)


class _HistogramFolder(Folder):
    def __init__(self, edges: np.ndarray, key_dim: int) -> None:
        self.edges = edges
        self.key_dim = key_dim
        self.counts = np.zeros(edges.shape[0] - 1, dtype=np.int64)

    def update(self, rows, index):
        if rows.shape[0]:
            self.counts += bin_counts(rows[:, self.key_dim], self.edges)

    def result(self):
        return HistogramResult(tuple(self.edges.tolist()), tuple(self.counts.tolist()))


def rho_histogram(part: EmpiricalMeasure, edges: Sequence[float], key_dim: int = 0) -> HistogramResult:
    f = _HistogramFolder(np.asarray(edges, dtype=np.float64), key_dim)
    f.update(part.data, part.parent_index)
    return f.result()


def combine_histogram(results: Sequence[HistogramResult]) -> HistogramResult:
    """Bin-wise sum of counts; all parts must share one edge sequence."""
    if not results:
        raise EmptyInput("nothing to combine")
    edges = results[0].edges
    if any(r.edges != edges for r in results):
        raise BinMismatch("parts report different histogram edges")
    counts = np.sum([r.counts for r in results], axis=0)
    return HistogramResult(edges, tuple(int(c) for c in counts))


class HistogramSolution(Solution):
    name = "histogram"
    streaming = True

    def __init__(self, edges: Sequence[float], key_dim: int = 0) -> None:
        self.edges = HistogramResult(tuple(edges), (0,) * (len(edges) - 1)).edges
        self.key_dim = key_dim

    def check_dimension(self, d):
        if self.key_dim >= d:
            raise IndexOutOfRange(f"histogram key_dim {self.key_dim} out of range for d={d}")

    def folder(self):
        return _HistogramFolder(np.asarray(self.edges), self.key_dim)

    def combine_parts(self, results, ctx):
        return combine_histogram(results)

    def combine_repetitions(self, results, ctx):
        # bin-wise lower median; equals the common value when repetitions agree
        combine_histogram(results)
        counts = np.array([r.counts for r in results])
        med = np.sort(counts, axis=0)[(len(results) - 1) // 2]
        return HistogramResult(results[0].edges, tuple(int(c) for c in med))

    def ev(self, result):
        return EvalVector(tuple(float(c) for c in result.counts))

    def ev_length(self, d):
        return len(self.edges) - 1

