"""Order-independent exact summation of float64 values.

Every finite double is an integer multiple of ``2**-1074``.  ``ExactSum``
keeps the running total as a Python integer in units of ``2**-_SCALE`` so
additions never round; the single rounding happens when the caller asks
for a float.  The consequence the engine relies on: totals do not depend
on chunk boundaries, part order or worker count.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

import numpy as np

# frexp mantissas are scaled to 53-bit integers; the smallest exponent
# frexp reports for a subnormal is -1073.
_SCALE = 1074 + 52
_HALF = 26
_LO_MASK = (1 << _HALF) - 1


def _integer_total(x: np.ndarray) -> int:
    """Exact sum of a 1-D float64 array, in units of 2**-_SCALE."""
    if x.size == 0:
        return 0
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot sum non-finite values exactly")
    mant, expo = np.frexp(x)
    ints = (mant * 2.0**53).astype(np.int64)
    if x.size == 1:
        return int(ints[0]) << int(expo[0] + 1073)
    order = np.argsort(expo, kind="stable")
    expo = expo[order]
    ints = ints[order]
    starts = np.concatenate(([0], np.flatnonzero(expo[1:] != expo[:-1]) + 1))
    # split into 26-bit halves so the int64 group sums cannot overflow
    hi = np.add.reduceat(ints >> _HALF, starts)
    lo = np.add.reduceat(ints & _LO_MASK, starts)
    total = 0
    for h, l, e in zip(hi.tolist(), lo.tolist(), expo[starts].tolist()):
        total += ((h << _HALF) + l) << (e + 1073)
    return total


def _grouped_integer_totals(x: np.ndarray, groups: np.ndarray, ngroups: int) -> list[int]:
    """Exact per-group sums of ``x``, in units of 2**-_SCALE."""
    totals = [0] * ngroups
    if x.size == 0:
        return totals
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot sum non-finite values exactly")
    mant, expo = np.frexp(x)
    ints = (mant * 2.0**53).astype(np.int64)
    order = np.lexsort((expo, groups))
    g, expo, ints = groups[order], expo[order], ints[order]
    change = (g[1:] != g[:-1]) | (expo[1:] != expo[:-1])
    starts = np.concatenate(([0], np.flatnonzero(change) + 1))
    hi = np.add.reduceat(ints >> _HALF, starts)
    lo = np.add.reduceat(ints & _LO_MASK, starts)
    for gg, h, l, e in zip(g[starts].tolist(), hi.tolist(), lo.tolist(), expo[starts].tolist()):
        totals[gg] += ((h << _HALF) + l) << (e + 1073)
    return totals


class ExactSum:
    """Exact accumulator for a vector of ``width`` running sums."""

    __slots__ = ("_acc",)

    def __init__(self, width: int = 1, acc: Iterable[int] | None = None) -> None:
        self._acc = list(acc) if acc is not None else [0] * width

    @property
    def width(self) -> int:
        return len(self._acc)

    def add(self, rows: np.ndarray) -> "ExactSum":
        """Fold a (rows, width) or (rows,) array into the totals."""
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows.reshape(-1, 1) if self.width == 1 else rows.reshape(1, -1)
        if rows.shape[1] != self.width:
            raise ValueError(f"expected width {self.width}, got {rows.shape[1]}")
        for j in range(self.width):
            self._acc[j] += _integer_total(np.ascontiguousarray(rows[:, j]))
        return self

    @staticmethod
    def add_grouped(sums: "list[ExactSum]", rows: np.ndarray, groups: np.ndarray) -> None:
        """Fold row ``i`` into ``sums[groups[i]]`` for every row, in one vectorised pass."""
        rows = np.asarray(rows, dtype=np.float64)
        groups = np.asarray(groups, dtype=np.int64)
        width = sums[0].width
        if rows.ndim != 2 or rows.shape[1] != width:
            raise ValueError(f"expected rows of width {width}")
        for j in range(width):
            totals = _grouped_integer_totals(np.ascontiguousarray(rows[:, j]), groups, len(sums))
            for acc, t in zip(sums, totals):
                acc._acc[j] += t

    def merge(self, other: "ExactSum") -> "ExactSum":
        if other.width != self.width:
            raise ValueError("width mismatch")
        return ExactSum(acc=[a + b for a, b in zip(self._acc, other._acc)])

    def scaled(self, factor: int) -> "ExactSum":
        return ExactSum(acc=[a * factor for a in self._acc])

    def fractions(self) -> list[Fraction]:
        return [Fraction(a, 1 << _SCALE) for a in self._acc]

    def totals(self) -> tuple[float, ...]:
        """Correctly rounded sums."""
        return tuple(float(f) for f in self.fractions())

    def divided(self, denominator: int) -> tuple[float, ...]:
        """Correctly rounded ``sum / denominator`` per component."""
        return tuple(float(Fraction(a, denominator << _SCALE)) for a in self._acc)

    @property
    def raw(self) -> tuple[int, ...]:
        return tuple(self._acc)

    @classmethod
    def from_floats(cls, values: Iterable[float]) -> "ExactSum":
        arr = np.asarray(list(values), dtype=np.float64)
        return cls(acc=[_integer_total(np.array([v])) for v in arr])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ExactSum) and self._acc == other._acc

    def __repr__(self) -> str:
        return f"ExactSum({self.totals()})"


def exact_sum(values: np.ndarray) -> float:
    """Correctly rounded sum of a 1-D array."""
    return ExactSum(1).add(np.asarray(values, dtype=np.float64).reshape(-1, 1)).totals()[0]
