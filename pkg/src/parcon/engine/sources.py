"""Rewindable chunked point sources.

A source yields ``(start, rows)`` pairs: ``rows`` is a float64 array of at
most ``chunk_size`` points whose global indices are ``start, start+1, ...``.
Every pass over a source yields the same stream.
"""

from __future__ import annotations

import csv
import json
import math
import os
import threading
from typing import Iterator, Sequence

import numpy as np

from ..errors import DimensionMismatch, EmptyInput, IoError, NonfiniteValue, ParseError
from ..measure import EmpiricalMeasure


class ResidentCounter:
    """Tracks how many point rows the engine holds in memory at once."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.current = 0
        self.peak = 0

    def acquire(self, rows: int) -> None:
        with self._lock:
            self.current += rows
            self.peak = max(self.peak, self.current)

    def release(self, rows: int) -> None:
        with self._lock:
            self.current -= rows


class ChunkSource:
    n: int
    d: int

    def chunks(self, chunk_size: int) -> Iterator[tuple[int, np.ndarray]]:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__, "n": self.n, "d": self.d}

    def to_measure(self) -> EmpiricalMeasure:
        rows = [r for _, r in self.chunks(max(1, self.n))]
        return EmpiricalMeasure(np.vstack(rows))


class ArraySource(ChunkSource):
    """Source over an in-memory array."""

    def __init__(self, data: np.ndarray | EmpiricalMeasure) -> None:
        if isinstance(data, EmpiricalMeasure):
            arr = data.data
        else:
            arr = EmpiricalMeasure(np.asarray(data, dtype=np.float64)).data
        self._data = arr
        self.n, self.d = arr.shape

    def chunks(self, chunk_size):
        for start in range(0, self.n, chunk_size):
            yield start, self._data[start:start + chunk_size]

    def to_measure(self):
        return EmpiricalMeasure(self._data)


def _reorder(rows: np.ndarray, label_column: int | None) -> np.ndarray:
    if label_column is None:
        return rows
    cols = [j for j in range(rows.shape[1]) if j != label_column] + [label_column]
    return rows[:, cols]


def _check_finite(rows: np.ndarray, first_row: int) -> None:
    bad = ~np.isfinite(rows)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise NonfiniteValue(f"row {first_row + r + 1}, column {c + 1}: non-finite value")


class BinaryFileSource(ChunkSource):
    """Little-endian float64, row-major, ``d`` values per point."""

    def __init__(self, path: str | os.PathLike, d: int, label_column: int | None = None) -> None:
        if d < 1:
            raise DimensionMismatch("d must be positive")
        self.path = os.fspath(path)
        self.d = d
        self.label_column = label_column
        try:
            size = os.path.getsize(self.path)
        except OSError as exc:
            raise IoError(str(exc)) from exc
        if size % (8 * d):
            raise DimensionMismatch(f"{size} bytes is not a whole number of {d}-dimensional rows")
        self.n = size // (8 * d)
        if self.n == 0:
            raise EmptyInput(f"{self.path} holds no points")

    def chunks(self, chunk_size):
        dtype = np.dtype("<f8")
        try:
            with open(self.path, "rb") as fh:
                for start in range(0, self.n, chunk_size):
                    count = min(chunk_size, self.n - start)
                    flat = np.fromfile(fh, dtype=dtype, count=count * self.d)
                    if flat.size != count * self.d:
                        raise IoError(f"{self.path} was truncated while reading")
                    rows = flat.astype(np.float64).reshape(count, self.d)
                    _check_finite(rows, start)
                    yield start, _reorder(rows, self.label_column)
        except OSError as exc:
            raise IoError(str(exc)) from exc

    def describe(self):
        return {"kind": "f64le", "path": self.path, "n": self.n, "d": self.d}


class _TextSource(ChunkSource):
    """Shared scanning logic for line-oriented formats."""

    def __init__(self, path: str | os.PathLike, label_column: int | None = None) -> None:
        self.path = os.fspath(path)
        self.label_column = label_column
        n, d = 0, None
        for _, rows in self._parse(1 << 14, expected_d=None):
            n += rows.shape[0]
            d = rows.shape[1]
        if n == 0:
            raise EmptyInput(f"{self.path} holds no points")
        self.n, self.d = n, d
        if label_column is not None and not 0 <= label_column < d:
            raise DimensionMismatch(f"label_column {label_column} out of range for {d} columns")

    def _records(self, fh) -> Iterator[tuple[int, Sequence]]:
        raise NotImplementedError

    def _parse(self, chunk_size: int, expected_d: int | None):
        d = expected_d
        buf: list[list[float]] = []
        start = 0
        try:
            fh = open(self.path, newline="")
        except OSError as exc:
            raise IoError(str(exc)) from exc
        with fh:
            for lineno, fields in self._records(fh):
                row = []
                for col, text in enumerate(fields, start=1):
                    try:
                        v = float(text)
                    except (TypeError, ValueError):
                        raise ParseError(f"row {lineno}, column {col}: cannot parse {text!r} as a number",
                                         row=lineno, column=col) from None
                    if not math.isfinite(v):
                        raise NonfiniteValue(f"row {lineno}, column {col}: non-finite value")
                    row.append(v)
                if d is None:
                    d = len(row)
                    if d == 0:
                        raise DimensionMismatch(f"row {lineno} is empty")
                elif len(row) != d:
                    raise DimensionMismatch(f"row {lineno} has {len(row)} columns, expected {d}")
                buf.append(row)
                if len(buf) == chunk_size:
                    yield start, np.array(buf, dtype=np.float64)
                    start += len(buf)
                    buf = []
        if buf:
            yield start, np.array(buf, dtype=np.float64)

    def chunks(self, chunk_size):
        for start, rows in self._parse(chunk_size, self.d):
            yield start, _reorder(rows, self.label_column)


class CsvSource(_TextSource):
    def __init__(self, path, has_header: bool = False, label_column: int | None = None) -> None:
        self.has_header = has_header
        super().__init__(path, label_column)

    def _records(self, fh):
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if lineno == 1 and self.has_header:
                continue
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            yield lineno, [f.strip() for f in fields]

    def describe(self):
        return {"kind": "csv", "path": self.path, "n": self.n, "d": self.d}


class JsonlSource(_TextSource):
    def _records(self, fh):
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                value = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"row {lineno}: invalid JSON ({exc.msg})", row=lineno) from None
            if not isinstance(value, list):
                raise ParseError(f"row {lineno}: expected an array of numbers", row=lineno)
            if any(isinstance(v, (bool, str)) or v is None for v in value):
                bad = next(i for i, v in enumerate(value) if isinstance(v, (bool, str)) or v is None)
                raise ParseError(f"row {lineno}, column {bad + 1}: {value[bad]!r} is not a number",
                                 row=lineno, column=bad + 1)
            yield lineno, value

    def describe(self):
        return {"kind": "jsonl", "path": self.path, "n": self.n, "d": self.d}
