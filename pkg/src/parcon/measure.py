"""Datasets as uniformly weighted empirical measures, plus the result types.

A dataset of ``n`` points in ``d`` dimensions is an :class:`EmpiricalMeasure`
giving mass ``1/n`` to each row.  The weights are implicit.  Row indices are
stable for the lifetime of a run; sub-measures produced by partitioning
remember the parent index of every row.

Results of an analysis are one of the ``*Result`` variants.  Each variant
validates its own invariants at construction, and each can be mapped to an
:class:`EvalVector` by the owning solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NonfiniteValue
from .exact import ExactSum

DataPoint = tuple[float, ...]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class EmpiricalMeasure:
    """Immutable (n, d) float64 point set with uniform mass."""

    __slots__ = ("_data", "_parent")

    def __init__(self, data: np.ndarray, parent_index: np.ndarray | None = None,
                 *, validate: bool = True) -> None:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if validate:
            if data.ndim != 2:
                raise DimensionMismatch(f"expected a 2-D array, got {data.ndim}-D")
            if data.shape[0] == 0:
                raise EmptyInput("an empirical measure needs at least one point")
            if data.shape[1] == 0:
                raise DimensionMismatch("points must have at least one coordinate")
            if not np.isfinite(data).all():
                raise NonfiniteValue("coordinates must be finite")
        if data.flags.writeable:
            data = data.copy()
        self._data = _readonly(data)
        if parent_index is None:
            self._parent = None
        else:
            parent = np.asarray(parent_index, dtype=np.int64)
            if parent.shape != (data.shape[0],):
                raise DimensionMismatch("parent index must have one entry per point")
            if parent.flags.writeable:
                parent = parent.copy()
            self._parent = _readonly(parent)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def d(self) -> int:
        return self._data.shape[1]

    @property
    def parent_index(self) -> np.ndarray:
        """Index of every row in the measure this one was restricted from."""
        if self._parent is None:
            return np.arange(self.n, dtype=np.int64)
        return self._parent

    @property
    def mass(self) -> float:
        return 1.0 / self.n

    def point(self, i: int) -> DataPoint:
        return tuple(self._data[i].tolist())

    def points(self) -> list[DataPoint]:
        return [tuple(row) for row in self._data.tolist()]

    def __len__(self) -> int:
        return self.n

    def __iter__(self):
        return iter(self.points())

    def __repr__(self) -> str:
        return f"EmpiricalMeasure(n={self.n}, d={self.d})"


def measure_from_points(points: Sequence[Sequence[float]] | np.ndarray) -> EmpiricalMeasure:
    """Build a measure from a sequence of points, indices in input order."""
    if isinstance(points, np.ndarray):
        if points.size == 0:
            raise EmptyInput("no points")
        return EmpiricalMeasure(points)
    rows = [tuple(float(v) for v in p) for p in points]
    if not rows:
        raise EmptyInput("no points")
    d = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != d:
            raise DimensionMismatch(f"point {i} has {len(row)} coordinates, expected {d}")
    return EmpiricalMeasure(np.array(rows, dtype=np.float64))


def lex_order(data: np.ndarray, key_dim: int = 0, tiebreak: np.ndarray | None = None) -> np.ndarray:
    """Argsort rows by ``key_dim`` first, then the remaining coordinates in order.

    ``tiebreak`` (typically parent indices) settles rows with equal values.
    """
    d = data.shape[1]
    keys: list[np.ndarray] = []
    if tiebreak is not None:
        keys.append(tiebreak)
    keys.extend(data[:, j] for j in reversed(range(d)) if j != key_dim)
    keys.append(data[:, key_dim])
    return np.lexsort(keys)


# ----------------------------------------------------------------- results

def _finite_vector(values: Iterable[float], what: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not all(math.isfinite(v) for v in out):
        raise NonfiniteValue(f"{what} must be finite")
    return out


@dataclass(frozen=True, eq=False)
class MeanResult:
    """Coordinate-wise mean of ``count`` points.

    ``total`` optionally carries the exact coordinate sums so that weighted
    recombination rounds only once.
    """

    mean: tuple[float, ...]
    count: int
    total: ExactSum | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", _finite_vector(self.mean, "mean"))
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"count must be a positive integer, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        if self.total is not None and self.total.width != len(self.mean):
            raise DimensionMismatch("exact total width does not match mean")

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, MeanResult) and self.mean == other.mean
                and self.count == other.count)


@dataclass(frozen=True, eq=False)
class SortedResult:
    run: np.ndarray
    index: np.ndarray
    key_dim: int = 0

    def __post_init__(self) -> None:
        run = np.asarray(self.run, dtype=np.float64)
        if run.ndim == 1:
            run = run.reshape(-1, 1)
        index = np.asarray(self.index, dtype=np.int64)
        if index.shape != (run.shape[0],):
            raise DimensionMismatch("index must have one entry per row of the run")
        if run.shape[0] > 1 and count_descents(run, self.key_dim) != 0:
            raise ValueError("run is not sorted under the ordering key")
        object.__setattr__(self, "run", _readonly(run))
        object.__setattr__(self, "index", _readonly(index))

    def __len__(self) -> int:
        return self.run.shape[0]

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, SortedResult) and self.run.shape == other.run.shape
                and bool(np.array_equal(self.run, other.run)))


def count_descents(run: np.ndarray, key_dim: int = 0) -> int:
    """Number of adjacent pairs out of order under the lexicographic key."""
    if run.shape[0] < 2:
        return 0
    a, b = run[:-1], run[1:]
    cols = [key_dim] + [j for j in range(run.shape[1]) if j != key_dim]
    greater = np.zeros(a.shape[0], dtype=bool)
    undecided = np.ones(a.shape[0], dtype=bool)
    for j in cols:
        greater |= undecided & (a[:, j] > b[:, j])
        undecided &= a[:, j] == b[:, j]
    return int(greater.sum())


@dataclass(frozen=True)
class ExtremesResult:
    min: DataPoint
    max: DataPoint

    def __post_init__(self) -> None:
        lo = _finite_vector(self.min, "min")
        hi = _finite_vector(self.max, "max")
        if len(lo) != len(hi):
            raise DimensionMismatch("min and max differ in dimension")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)


@dataclass(frozen=True)
class HistogramResult:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        edges = _finite_vector(self.edges, "edges")
        counts = tuple(int(c) for c in self.counts)
        if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("histogram edges must be strictly ascending, at least two")
        if len(counts) != len(edges) - 1:
            raise DimensionMismatch("need one count per bin")
        if any(c < 0 for c in counts):
            raise ValueError("histogram counts must be non-negative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class PValueResult:
    p: float

    def __post_init__(self) -> None:
        p = float(self.p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value must lie in [0, 1], got {p}")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class MleResult:
    theta: tuple[float, ...]
    loglik: float
    model: str = "gaussian"
    converged: bool = True
    iterations: int = 0
    source_part: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", _finite_vector(self.theta, "theta"))
        object.__setattr__(self, "loglik", float(self.loglik))


@dataclass(frozen=True, eq=False)
class KnnResult:
    """Nearest neighbours of a query, closest first."""

    points: np.ndarray
    distances: np.ndarray
    index: np.ndarray
    truncated: bool = False

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        dist = np.asarray(self.distances, dtype=np.float64)
        idx = np.asarray(self.index, dtype=np.int64)
        if pts.ndim != 2 or dist.shape != (pts.shape[0],) or idx.shape != dist.shape:
            raise DimensionMismatch("neighbour arrays disagree in length")
        if (dist < 0).any() or not np.isfinite(dist).all():
            raise ValueError("distances must be finite and non-negative")
        if (np.diff(dist) < 0).any():
            raise ValueError("distances must be non-decreasing")
        object.__setattr__(self, "points", _readonly(pts))
        object.__setattr__(self, "distances", _readonly(dist))
        object.__setattr__(self, "index", _readonly(idx))

    @property
    def k(self) -> int:
        return self.distances.shape[0]

    def neighbors(self) -> list[tuple[DataPoint, float]]:
        return [(tuple(p), float(dd)) for p, dd in zip(self.points.tolist(), self.distances.tolist())]

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, KnnResult) and np.array_equal(self.index, other.index)
                and np.array_equal(self.distances, other.distances))


@dataclass(frozen=True, eq=False)
class OutlierResult:
    """Split of a (1-D) point set into a data section and an outlier section.

    Index arrays are parent indices; the value arrays are aligned with them.
    """

    data_idx: np.ndarray
    outlier_idx: np.ndarray
    data_values: np.ndarray
    outlier_values: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        for name, dtype in (("data_idx", np.int64), ("outlier_idx", np.int64),
                            ("data_values", np.float64), ("outlier_values", np.float64)):
            arrays[name] = np.asarray(getattr(self, name), dtype=dtype).reshape(-1)
        if arrays["data_idx"].shape != arrays["data_values"].shape:
            raise DimensionMismatch("data_idx and data_values differ in length")
        if arrays["outlier_idx"].shape != arrays["outlier_values"].shape:
            raise DimensionMismatch("outlier_idx and outlier_values differ in length")
        if np.intersect1d(arrays["data_idx"], arrays["outlier_idx"]).size:
            raise ValueError("data and outlier sections must be disjoint")
        for name, a in arrays.items():
            object.__setattr__(self, name, _readonly(a))

    @property
    def outliers(self) -> frozenset[int]:
        return frozenset(self.outlier_idx.tolist())

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, OutlierResult)
                and set(self.outlier_idx.tolist()) == set(other.outlier_idx.tolist())
                and set(self.data_idx.tolist()) == set(other.data_idx.tolist()))


ResultValue = Union[MeanResult, SortedResult, ExtremesResult, HistogramResult,
                    PValueResult, MleResult, KnnResult, OutlierResult]


def check_covers(result: OutlierResult, indices: Iterable[int]) -> bool:
    """True when the two sections together cover exactly ``indices``."""
    seen = set(result.data_idx.tolist()) | set(result.outlier_idx.tolist())
    return seen == set(int(i) for i in indices)


# --------------------------------------------------------------- ev vectors

@dataclass(frozen=True)
class EvalVector:
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _finite_vector(self.values, "ev entries"))

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


def eval_distance(a: EvalVector | Sequence[float], b: EvalVector | Sequence[float]) -> float:
    """Euclidean distance between two evaluation vectors."""
    av = tuple(a)
    bv = tuple(b)
    if len(av) != len(bv):
        raise DimensionMismatch(f"ev lengths differ: {len(av)} vs {len(bv)}")
    return math.dist(av, bv)

