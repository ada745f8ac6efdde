"""Shared protocol for solutions.

A solution bundles a per-part analysis (``rho``), a first-stage combiner
over the L parts of one repetition (``combine_parts``), a second-stage
combiner over K repetitions (``combine_repetitions``) and an evaluation map
``ev`` into a fixed-length real vector.

Solutions whose analysis can be folded over a stream of chunks set
``streaming = True`` and provide ``folder()``; the engine then never
materialises their parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, ClassVar, Sequence

import numpy as np

from ..measure import EmpiricalMeasure, EvalVector, ResultValue
from ..partitioning import Mode, Scheme


@dataclass
class CombineContext:
    """What a combiner may know about the run beyond the part results."""

    n: int
    d: int
    mode: Mode = Mode.PARTITION
    scheme: Scheme = Scheme.RANDOM_BALANCED
    repetition: int = 0
    # streamed full-data objective; only the MLE combiner uses it
    full_objective: Callable[[Sequence[float]], float] | None = None
    warnings: list[str] = field(default_factory=list)


class Folder:
    """Incremental ``rho`` over chunks of one part."""

    def update(self, rows: np.ndarray, index: np.ndarray) -> None:
        raise NotImplementedError

    def result(self) -> ResultValue:
        raise NotImplementedError

    @classmethod
    def update_grouped(cls, folders: Sequence["Folder"], rows: np.ndarray, index: np.ndarray,
                       groups: np.ndarray) -> None:
        """Feed row ``i`` to ``folders[groups[i]]``; rows of one group keep their order."""
        order = np.argsort(groups, kind="stable")
        cuts = np.searchsorted(groups[order], np.arange(len(folders) + 1))
        for j, f in enumerate(folders):
            sel = order[cuts[j]:cuts[j + 1]]
            if sel.size:
                f.update(rows[sel], index[sel])


class Solution:
    name: ClassVar[str]
    streaming: ClassVar[bool] = False

    def check_dimension(self, d: int) -> None:
        """Raise if the solution cannot run on d-dimensional data."""

    def rho(self, part: EmpiricalMeasure) -> ResultValue:
        if self.streaming:
            f = self.folder()
            f.update(part.data, part.parent_index)
            return f.result()
        raise NotImplementedError

    def folder(self) -> Folder:
        raise NotImplementedError

    def combine_parts(self, results: Sequence[ResultValue], ctx: CombineContext) -> ResultValue:
        raise NotImplementedError

    def combine_repetitions(self, results: Sequence[ResultValue], ctx: CombineContext) -> ResultValue:
        raise NotImplementedError

    def ev(self, result: ResultValue) -> EvalVector:
        raise NotImplementedError

    def ev_length(self, d: int) -> int:
        raise NotImplementedError

