"""Delivering streamed points to the parts of one sampled partition."""

from __future__ import annotations

import os
import tempfile
from typing import Sequence

import numpy as np

from ..errors import InsufficientMemory, IoError
from ..measure import EmpiricalMeasure
from ..partitioning import PartitionAssignment, PartLocator
from ..solutions.base import Folder
from .sources import ChunkSource, ResidentCounter


def spill_dtype(d: int) -> np.dtype:
    return np.dtype([("index", "<u8"), ("x", "<f8", (d,))])


def write_spill(path: str, index: np.ndarray, rows: np.ndarray) -> None:
    rec = np.empty(index.shape[0], dtype=spill_dtype(rows.shape[1]))
    rec["index"] = index
    rec["x"] = rows
    with open(path, "ab") as fh:
        rec.tofile(fh)


def read_spill(path: str, d: int) -> tuple[np.ndarray, np.ndarray]:
    rec = np.fromfile(path, dtype=spill_dtype(d))
    return rec["index"].astype(np.int64), rec["x"].reshape(-1, d).astype(np.float64)


class PartSink:
    rows = 0

    def accept(self, index: np.ndarray, rows: np.ndarray) -> None:
        raise NotImplementedError


class FoldSink(PartSink):
    """Folds rows straight into a streaming analysis."""

    def __init__(self, folder: Folder) -> None:
        self.folder = folder

    def accept(self, index, rows):
        self.folder.update(rows, index)
        self.rows += rows.shape[0]


class MemorySink(PartSink):
    def __init__(self, d: int, counter: ResidentCounter) -> None:
        self.d = d
        self.counter = counter
        self._index: list[np.ndarray] = []
        self._rows: list[np.ndarray] = []

    def accept(self, index, rows):
        self.counter.acquire(rows.shape[0])
        self._index.append(np.array(index, dtype=np.int64))
        self._rows.append(np.array(rows, dtype=np.float64))
        self.rows += rows.shape[0]

    def load(self, counter: ResidentCounter) -> EmpiricalMeasure:
        # rows are already counted as resident
        index = np.concatenate(self._index)
        rows = np.vstack(self._rows)
        return EmpiricalMeasure(rows, index, validate=False)

    def discard(self, counter: ResidentCounter) -> None:
        counter.release(self.rows)
        self._index, self._rows = [], []


class SpillSink(PartSink):
    """Appends rows to a per-part binary file: (u64 index, d x f64) per row, little-endian."""

    def __init__(self, directory: str, label: str, d: int) -> None:
        self.d = d
        self.path = os.path.join(directory, f"{label}.bin")
        open(self.path, "wb").close()

    def accept(self, index, rows):
        try:
            write_spill(self.path, index, rows)
        except OSError as exc:
            raise IoError(str(exc)) from exc
        self.rows += rows.shape[0]

    def load(self, counter: ResidentCounter) -> EmpiricalMeasure:
        counter.acquire(self.rows)
        try:
            index, rows = read_spill(self.path, self.d)
        except OSError as exc:
            counter.release(self.rows)
            raise IoError(str(exc)) from exc
        return EmpiricalMeasure(rows, index, validate=False)

    def discard(self, counter: ResidentCounter) -> None:
        counter.release(self.rows)
        try:
            os.remove(self.path)
        except FileNotFoundError:
            pass


def spill_directory() -> str:
    return tempfile.mkdtemp(prefix="parcon-", dir=os.environ.get("PARCON_TMPDIR") or None)


def route_to_parts(assignment: PartitionAssignment | PartLocator | Sequence[np.ndarray],
                   source: ChunkSource, sinks: Sequence[PartSink], chunk_size: int,
                   counter: ResidentCounter | None = None) -> Sequence[PartSink]:
    """Stream ``source`` once, handing every point to the parts that contain it.

    ``assignment`` is either a locator (partition mode, evaluated per chunk
    without an index table), explicit sorted index draws (subsample mode;
    repeated indices are delivered repeatedly), or a materialised
    :class:`PartitionAssignment`.
    """
    counter = counter or ResidentCounter()
    if isinstance(assignment, PartitionAssignment):
        if assignment.mode.value == "subsample":
            draws = [np.sort(p) for p in assignment.parts]
            locator = None
        else:
            labels = np.empty(assignment.n, dtype=np.int64)
            for j, p in enumerate(assignment.parts):
                labels[p] = j
            locator = _TableLocator(labels)
            draws = None
    elif isinstance(assignment, PartLocator):
        locator, draws = assignment, None
    else:
        locator, draws = None, list(assignment)
    folding = bool(sinks) and all(isinstance(s, FoldSink) for s in sinks)
    for start, rows in source.chunks(chunk_size):
        counter.acquire(rows.shape[0])
        try:
            stop = start + rows.shape[0]
            if locator is not None:
                index = np.arange(start, stop, dtype=np.int64)
                part = locator.part_of(index, rows)
            else:
                pieces = []
                for drawn in draws:
                    lo, hi = np.searchsorted(drawn, [start, stop])
                    pieces.append(drawn[lo:hi])
                part = np.repeat(np.arange(len(pieces)), [p.size for p in pieces])
                index = np.concatenate(pieces) if pieces else np.empty(0, dtype=np.int64)
                rows = rows[index - start]
            if folding:
                _fold(sinks, rows, index, part)
            else:
                order = np.argsort(part, kind="stable")
                cuts = np.searchsorted(part[order], np.arange(len(sinks) + 1))
                for j, sink in enumerate(sinks):
                    sel = order[cuts[j]:cuts[j + 1]]
                    if sel.size:
                        sink.accept(index[sel], rows[sel])
        finally:
            counter.release(stop - start)
    return sinks


def _fold(sinks: Sequence["FoldSink"], rows: np.ndarray, index: np.ndarray, part: np.ndarray) -> None:
    folders = [s.folder for s in sinks]
    type(folders[0]).update_grouped(folders, rows, index, part)
    for s, c in zip(sinks, np.bincount(part, minlength=len(sinks)).tolist()):
        s.rows += c


class _TableLocator:
    def __init__(self, labels: np.ndarray) -> None:
        self.labels = labels

    def part_of(self, index, rows=None):
        return self.labels[index]


def check_fits(sink_rows: int, chunk_size: int, part: int, problem: str) -> None:
    if sink_rows > chunk_size:
        raise InsufficientMemory(
            f"part {part} holds {sink_rows} points but the memory budget allows {chunk_size} "
            f"per part for {problem!r}; raise L or the memory budget", part=part)
