"""k nearest neighbours per part, merged to the global k nearest."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, EmptyInput, InvalidK, LabelMissing
from ..measure import EmpiricalMeasure, EvalVector, KnnResult
from .base import Solution


def distances_to(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = rows - query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _select(points: np.ndarray, dist: np.ndarray, index: np.ndarray, k: int) -> KnnResult:
    # nearest first; equal distances resolved by lower parent index
    order = np.lexsort((index, dist))[:k]
    return KnnResult(points[order], dist[order], index[order], truncated=order.size < k)


def rho_knn(part: EmpiricalMeasure, query: Sequence[float], k: int, labeled: bool = False) -> KnnResult:
    """Exact k nearest points of ``part`` to ``query``.

    With ``labeled`` the last coordinate is a class label and is left out of
    the distance.  A part smaller than k returns all of its points, flagged
    as truncated.
    """
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    q = np.asarray(query, dtype=np.float64)
    features = part.data[:, :-1] if labeled else part.data
    if q.shape != (features.shape[1],):
        raise DimensionMismatch(f"query has {q.size} coordinates, data features have {features.shape[1]}")
    return _select(part.data, distances_to(features, q), part.parent_index, k)


def combine_knn(lists: Sequence[KnnResult], k: int) -> KnnResult:
    """Global k nearest among the candidates of every part."""
    if k < 1:
        raise InvalidK(f"k must be >= 1, got {k}")
    if not lists:
        raise EmptyInput("nothing to combine")
    points = np.vstack([r.points for r in lists])
    dist = np.concatenate([r.distances for r in lists])
    index = np.concatenate([r.index for r in lists])
    # the same point may arrive from several subsamples
    _, first = np.unique(index, return_index=True)
    first.sort()
    return _select(points[first], dist[first], index[first], k)


def classify_knn(neighbors: KnnResult, labels: Sequence[int] | np.ndarray | None = None) -> int:
    """Majority label among the neighbours.

    Ties go to the class with the smaller summed distance, then to the
    smaller label.  Without explicit ``labels`` the last coordinate of each
    neighbour is used.
    """
    if labels is None:
        if neighbors.points.shape[1] < 2:
            raise LabelMissing("neighbours carry no label column")
        labels = neighbors.points[:, -1]
    lab = np.asarray(labels)
    if lab.shape != (neighbors.k,):
        raise LabelMissing("need exactly one label per neighbour")
    if neighbors.k == 0:
        raise EmptyInput("no neighbours to vote")
    if not np.all(lab == np.round(lab)):
        raise LabelMissing("labels must be integers")
    lab = lab.astype(np.int64)
    best = None
    for c in np.unique(lab):
        mask = lab == c
        key = (-int(mask.sum()), float(neighbors.distances[mask].sum()), int(c))
        if best is None or key < best:
            best = key
    return best[2]


class KnnSolution(Solution):
    name = "knn"

    def __init__(self, query: Sequence[float], k: int, labeled: bool = False) -> None:
        if k < 1:
            raise InvalidK(f"k must be >= 1, got {k}")
        self.query = tuple(float(v) for v in query)
        self.k = int(k)
        self.labeled = bool(labeled)

    def check_dimension(self, d):
        feats = d - 1 if self.labeled else d
        if feats != len(self.query):
            raise DimensionMismatch(f"query has {len(self.query)} coordinates, data features have {feats}")

    def rho(self, part):
        return rho_knn(part, self.query, self.k, self.labeled)

    def combine_parts(self, results, ctx):
        return combine_knn(results, self.k)

    def combine_repetitions(self, results, ctx):
        return combine_knn(results, self.k)

    def ev(self, result):
        dist = list(result.distances.tolist())
        # pad short lists so ev keeps its declared length
        dist += [dist[-1] if dist else 0.0] * (self.k - len(dist))
        return EvalVector(dist)

    def ev_length(self, d):
        return self.k
