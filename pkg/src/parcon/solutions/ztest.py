"""Known-variance z-test per part, combined by min over parts then median over repetitions."""

from __future__ import annotations

import enum
import math
import statistics
from typing import Sequence

from ..errors import DimensionMismatch, EmptyInput, InvalidSpec
from ..measure import EmpiricalMeasure, EvalVector, MeanResult, PValueResult
from .base import Folder, Solution
from .descriptive import _MeanFolder


class Adjust(str, enum.Enum):
    NONE = "none"
    BONFERRONI = "bonferroni"


def z_pvalue(mean: float, count: int, mu0: float, sigma: float) -> float:
    """Two-sided p-value ``2 (1 - Phi(|z|))`` of ``z = sqrt(n) (mean - mu0) / sigma``."""
    z = math.sqrt(count) * (mean - mu0) / sigma
    # erfc keeps precision in the far tail where 1 - Phi underflows
    return min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))


def rho_test(part: EmpiricalMeasure, mu0: float, sigma: float) -> PValueResult:
    if part.d != 1:
        raise DimensionMismatch("the z-test expects 1-D data")
    f = _MeanFolder()
    f.update(part.data, part.parent_index)
    m = f.result()
    return PValueResult(z_pvalue(m.mean[0], m.count, mu0, sigma))


def combine_min(pvalues: Sequence[float], adjust: Adjust | str = Adjust.NONE) -> float:
    """First stage: smallest p-value, optionally multiplied by L and clamped to 1."""
    if not pvalues:
        raise EmptyInput("no p-values to combine")
    p = min(pvalues)
    if Adjust(adjust) is Adjust.BONFERRONI:
        p = min(1.0, p * len(pvalues))
    return p


def combine_test(per_rep: Sequence[Sequence[float]], adjust: Adjust | str = Adjust.NONE) -> PValueResult:
    """Min over the L p-values of each repetition, then median over repetitions."""
    if not per_rep:
        raise EmptyInput("no repetitions to combine")
    for ps in per_rep:
        for p in ps:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p-value outside [0, 1]: {p}")
    firsts = [combine_min(ps, adjust) for ps in per_rep]
    return PValueResult(statistics.median(firsts))


class _TestFolder(Folder):
    def __init__(self, mu0: float, sigma: float) -> None:
        self.mean = _MeanFolder()
        self.mu0 = mu0
        self.sigma = sigma

    def update(self, rows, index):
        self.mean.update(rows, index)

    @classmethod
    def update_grouped(cls, folders, rows, index, groups):
        _MeanFolder.update_grouped([f.mean for f in folders], rows, index, groups)

    def result(self):
        m: MeanResult = self.mean.result()
        return PValueResult(z_pvalue(m.mean[0], m.count, self.mu0, self.sigma))


class TestSolution(Solution):
    name = "test"
    streaming = True
    __test__ = False  # keep pytest from collecting this class

    def __init__(self, mu0: float = 0.0, sigma: float = 1.0, adjust: Adjust | str = Adjust.NONE) -> None:
        if not (math.isfinite(mu0) and math.isfinite(sigma)) or sigma <= 0:
            raise InvalidSpec("the z-test needs a finite mu0 and sigma > 0")
        self.mu0 = float(mu0)
        self.sigma = float(sigma)
        self.adjust = Adjust(adjust)

    def check_dimension(self, d):
        if d != 1:
            raise DimensionMismatch("the z-test expects 1-D data")

    def folder(self):
        return _TestFolder(self.mu0, self.sigma)

    def combine_parts(self, results, ctx):
        return PValueResult(combine_min([r.p for r in results], self.adjust))

    def combine_repetitions(self, results, ctx):
        return PValueResult(statistics.median([r.p for r in results]))

    def ev(self, result):
        return EvalVector((result.p,))

    def ev_length(self, d):
        return 1


