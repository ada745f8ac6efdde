"""Robust z-score outlier detection with cross-part checking and repetition voting.

Per part a point is an outlier when ``|x - median| / (1.4826 MAD) > c``.  A
part whose MAD is zero reports no outliers.

The first-stage combiner demotes a flagged point back to data when it is
unremarkable against the pooled data sections of the other parts, then
re-runs the detector on all surviving outliers together: if a large enough
group of them looks like ordinary data among themselves, that group is
demoted as well.  The second stage keeps points flagged in at least
``ceil(tau K)`` repetitions.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, EmptyInput, InvalidSpec
from ..exact import ExactSum
from ..measure import EmpiricalMeasure, EvalVector, OutlierResult
from .base import CombineContext, Solution

MAD_SCALE = 1.4826


def robust_scores(values: np.ndarray, reference: np.ndarray | None = None) -> np.ndarray:
    """Scaled MAD z-scores of ``values`` against ``reference`` (default: themselves)."""
    ref = values if reference is None else reference
    med = np.median(ref)
    mad = np.median(np.abs(ref - med))
    if mad == 0.0:
        return np.zeros(values.shape[0])
    return np.abs(values - med) / (mad * MAD_SCALE)


def _split(values: np.ndarray, index: np.ndarray, flagged: np.ndarray) -> OutlierResult:
    return OutlierResult(index[~flagged], index[flagged], values[~flagged], values[flagged])


def rho_outlier(part: EmpiricalMeasure, c: float = 3.5) -> OutlierResult:
    if part.d != 1:
        raise DimensionMismatch("the outlier detector expects 1-D data")
    values = part.data[:, 0]
    return _split(values, part.parent_index, robust_scores(values) > c)


def _dedup(index: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    idx, first = np.unique(index, return_index=True)
    return idx, values[first]


def combine_outlier_L(splits: Sequence[OutlierResult], n: int, c: float = 3.5,
                      pool_min: int = 3, pool_fraction: float = 0.02) -> OutlierResult:
    """Merge the per-part splits of one repetition."""
    if not splits:
        raise EmptyInput("nothing to combine")
    if len(splits) == 1:
        # no other part to cross-check against
        return splits[0]
    data_parts = [s.data_values for s in splits]
    kept_idx, kept_val, demoted_idx, demoted_val = [], [], [], []
    for l, s in enumerate(splits):
        if s.outlier_idx.size == 0:
            continue
        others = [v for j, v in enumerate(data_parts) if j != l and v.size]
        if others:
            ok = robust_scores(s.outlier_values, np.concatenate(others)) <= c
        else:
            ok = np.zeros(s.outlier_idx.size, dtype=bool)
        demoted_idx.append(s.outlier_idx[ok])
        demoted_val.append(s.outlier_values[ok])
        kept_idx.append(s.outlier_idx[~ok])
        kept_val.append(s.outlier_values[~ok])

    pool_idx = np.concatenate(kept_idx) if kept_idx else np.empty(0, dtype=np.int64)
    pool_val = np.concatenate(kept_val) if kept_val else np.empty(0)
    threshold = max(pool_min, math.ceil(pool_fraction * n))
    if pool_idx.size >= threshold:
        section = robust_scores(pool_val) <= c
        if section.sum() >= threshold:
            demoted_idx.append(pool_idx[section])
            demoted_val.append(pool_val[section])
            pool_idx, pool_val = pool_idx[~section], pool_val[~section]

    data_idx = np.concatenate([s.data_idx for s in splits] + demoted_idx)
    data_val = np.concatenate([s.data_values for s in splits] + demoted_val)
    data_idx, data_val = _dedup(data_idx, data_val)
    out_idx, out_val = _dedup(pool_idx, pool_val)
    # overlapping subsamples: a point seen as data anywhere stays data
    keep = ~np.isin(out_idx, data_idx)
    return OutlierResult(data_idx, out_idx[keep], data_val, out_val[keep])


def vote_threshold(tau: float, K: int) -> int:
    return max(1, math.ceil(round(tau * K, 9)))


def combine_outlier_K(splits: Sequence[OutlierResult], tau: float = 0.5) -> OutlierResult:
    """Keep outliers flagged in at least ``ceil(tau K)`` repetitions."""
    if not splits:
        raise EmptyInput("nothing to combine")
    if not 0.0 < tau <= 1.0:
        raise InvalidSpec(f"tau must lie in (0, 1], got {tau}")
    need = vote_threshold(tau, len(splits))
    flagged = np.concatenate([s.outlier_idx for s in splits])
    idx, votes = np.unique(flagged, return_counts=True)
    stable = idx[votes >= need]
    all_idx = np.concatenate([np.concatenate([s.data_idx, s.outlier_idx]) for s in splits])
    all_val = np.concatenate([np.concatenate([s.data_values, s.outlier_values]) for s in splits])
    all_idx, all_val = _dedup(all_idx, all_val)
    is_out = np.isin(all_idx, stable)
    return OutlierResult(all_idx[~is_out], all_idx[is_out], all_val[~is_out], all_val[is_out])


class OutlierSolution(Solution):
    name = "outlier"

    def __init__(self, c: float = 3.5, tau: float = 0.5, pool_min: int = 3,
                 pool_fraction: float = 0.02) -> None:
        if c <= 0:
            raise InvalidSpec("c must be positive")
        if not 0.0 < tau <= 1.0:
            raise InvalidSpec("tau must lie in (0, 1]")
        self.c = float(c)
        self.tau = float(tau)
        self.pool_min = int(pool_min)
        self.pool_fraction = float(pool_fraction)

    def check_dimension(self, d):
        if d != 1:
            raise DimensionMismatch("the outlier detector expects 1-D data")

    def rho(self, part):
        return rho_outlier(part, self.c)

    def combine_parts(self, results, ctx: CombineContext):
        return combine_outlier_L(results, ctx.n, self.c, self.pool_min, self.pool_fraction)

    def combine_repetitions(self, results, ctx):
        return combine_outlier_K(results, self.tau)

    def ev(self, result):
        count = result.outlier_values.size
        mean = ExactSum(1).add(result.outlier_values).divided(count)[0] if count else 0.0
        return EvalVector((float(count), mean))

    def ev_length(self, d):
        return 2
