"""Sampling partitions of a dataset into L parts.

Three families of partition distributions are provided:

* ``RandomBalanced`` -- a keyed pseudorandom permutation of ``0..n-1`` cut
  into L contiguous blocks whose sizes differ by at most one.
* ``RangeBounded`` -- deterministic split by ascending bounds on one
  coordinate (every repetition gives the same partition).
* ``Subsample`` -- L independent draws of ``part_size`` indices with
  replacement (bootstrap style; parts may overlap).

Each repetition mixes its index into the base seed, so repetitions are
independent draws yet fully reproducible.  The random balanced permutation
is evaluated positionally (``part_of``), so routing a stream of points never
needs a global index table.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (BoundsDoNotCover, EmptyInput, EmptyPart, IndexOutOfRange,
                     InvalidPartitionCount, InvalidSpec)
from .measure import EmpiricalMeasure

_FEISTEL_ROUNDS = 6
_U64 = np.uint64


class Scheme(str, enum.Enum):
    RANDOM_BALANCED = "random_balanced"
    RANGE_BOUNDED = "range_bounded"
    SUBSAMPLE = "subsample"


class Mode(str, enum.Enum):
    PARTITION = "partition"
    SUBSAMPLE = "subsample"


@dataclass(frozen=True)
class PartitionerSpec:
    scheme: Scheme
    L: int
    base_seed: int = 0
    bounds: tuple[float, ...] | None = None
    key_dim: int = 0
    part_size: int | None = None
    sample_budget: int = 100_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not isinstance(self.L, (int, np.integer)) or self.L < 1:
            raise InvalidSpec(f"L must be a positive integer, got {self.L!r}")
        if not 0 <= int(self.base_seed) < 2**64:
            raise InvalidSpec("base_seed must fit in an unsigned 64-bit integer")
        if self.key_dim < 0:
            raise InvalidSpec("key_dim must be non-negative")
        if self.scheme is Scheme.RANGE_BOUNDED and self.bounds is not None:
            b = tuple(float(v) for v in self.bounds)
            if len(b) != self.L + 1:
                raise InvalidSpec(f"range bounds need L+1 = {self.L + 1} entries, got {len(b)}")
            if any(hi <= lo for lo, hi in zip(b, b[1:])):
                raise InvalidSpec("range bounds must be strictly increasing")
            object.__setattr__(self, "bounds", b)
        if self.scheme is Scheme.SUBSAMPLE:
            if self.part_size is None or self.part_size < 1:
                raise InvalidSpec("subsample scheme needs a positive part_size")

    @property
    def mode(self) -> Mode:
        return Mode.SUBSAMPLE if self.scheme is Scheme.SUBSAMPLE else Mode.PARTITION

    def with_bounds(self, bounds: tuple[float, ...]) -> "PartitionerSpec":
        return PartitionerSpec(self.scheme, len(bounds) - 1, self.base_seed, tuple(bounds),
                               self.key_dim, self.part_size, self.sample_budget)

    def with_seed(self, seed: int) -> "PartitionerSpec":
        return PartitionerSpec(self.scheme, self.L, seed, self.bounds, self.key_dim,
                               self.part_size, self.sample_budget)


@dataclass(frozen=True, eq=False)
class PartitionAssignment:
    parts: tuple[np.ndarray, ...]
    mode: Mode
    seed: int
    repetition: int = 0
    n: int = field(default=0)

    @property
    def L(self) -> int:
        return len(self.parts)

    def sizes(self) -> list[int]:
        return [p.size for p in self.parts]

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, PartitionAssignment) and self.mode == other.mode
                and self.L == other.L
                and all(np.array_equal(a, b) for a, b in zip(self.parts, other.parts)))


# ------------------------------------------------------------- seeding

def repetition_seed(base_seed: int, repetition_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), int(repetition_index)])


def _mix(x: np.ndarray, key: np.uint64) -> np.ndarray:
    # splitmix64 finaliser
    with np.errstate(over="ignore"):
        z = x + key + _U64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))


class KeyedPermutation:
    """Pseudorandom bijection of ``0..n-1`` evaluated pointwise.

    A balanced Feistel network over the smallest even bit width covering
    ``n``, restricted to ``0..n-1`` by cycle walking.
    """

    def __init__(self, n: int, seed: np.random.SeedSequence) -> None:
        if n < 1:
            raise EmptyInput("permutation domain must be non-empty")
        self.n = n
        bits = max(2, int(n - 1).bit_length())
        bits += bits % 2
        self._half = _U64(bits // 2)
        self._mask = _U64((1 << (bits // 2)) - 1)
        self._keys = [_U64(k) for k in seed.generate_state(_FEISTEL_ROUNDS, dtype=np.uint64)]

    def _encrypt(self, x: np.ndarray) -> np.ndarray:
        left = x >> self._half
        right = x & self._mask
        for key in self._keys:
            left, right = right, left ^ (_mix(right, key) & self._mask)
        return (left << self._half) | right

    def __call__(self, index: np.ndarray) -> np.ndarray:
        x = np.asarray(index, dtype=np.uint64)
        out = self._encrypt(x)
        n = _U64(self.n)
        pending = out >= n
        while pending.any():
            out[pending] = self._encrypt(out[pending])
            pending = out >= n
        return out.astype(np.int64)


class PartLocator:
    """Maps point indices to part numbers for one sampled repetition.

    Partition mode only; subsample draws are explicit index lists.
    """

    def __init__(self, spec: PartitionerSpec, n: int, repetition_index: int) -> None:
        self.spec = spec
        self.n = n
        if spec.scheme is Scheme.RANDOM_BALANCED:
            if spec.L > n:
                raise InvalidPartitionCount(f"L={spec.L} exceeds n={n}")
            self._perm = KeyedPermutation(n, repetition_seed(spec.base_seed, repetition_index))
            q, r = divmod(n, spec.L)
            self._q, self._r = q, r
        elif spec.scheme is Scheme.RANGE_BOUNDED:
            if spec.bounds is None:
                raise InvalidSpec("range bounded partitioner has no bounds")
            self._bounds = np.asarray(spec.bounds, dtype=np.float64)
        else:
            raise InvalidSpec("subsample scheme has no part locator")

    def part_of(self, index: np.ndarray, rows: np.ndarray | None = None) -> np.ndarray:
        if self.spec.scheme is Scheme.RANDOM_BALANCED:
            pos = self._perm(index)
            big = self._r * (self._q + 1)
            return np.where(pos < big, pos // (self._q + 1),
                            self._r + (pos - big) // max(self._q, 1)).astype(np.int64)
        keys = rows[:, self.spec.key_dim]
        part = np.searchsorted(self._bounds, keys, side="right") - 1
        outside = (part < 0) | (part >= self.spec.L)
        if outside.any():
            bad = int(np.asarray(index)[np.argmax(outside)])
            raise BoundsDoNotCover(
                f"point {bad} (key {keys[np.argmax(outside)]!r}) lies outside "
                f"[{self._bounds[0]!r}, {self._bounds[-1]!r})")
        return part.astype(np.int64)


def subsample_draws(spec: PartitionerSpec, n: int, repetition_index: int) -> tuple[np.ndarray, ...]:
    """Sorted index draws (with replacement) for each of the L subsamples."""
    rng = np.random.default_rng(repetition_seed(spec.base_seed, repetition_index))
    draws = np.sort(rng.integers(0, n, size=(spec.L, spec.part_size)), axis=1)
    return tuple(draws)


def sample_partition(spec: PartitionerSpec, m: EmpiricalMeasure,
                     repetition_index: int = 0) -> PartitionAssignment:
    """Draw the ``repetition_index``-th partition of ``m``."""
    n = m.n
    if spec.mode is Mode.SUBSAMPLE:
        parts = subsample_draws(spec, n, repetition_index)
    else:
        locator = PartLocator(spec, n, repetition_index)
        idx = np.arange(n, dtype=np.int64)
        labels = locator.part_of(idx, m.data)
        order = np.argsort(labels, kind="stable")
        cuts = np.searchsorted(labels[order], np.arange(1, spec.L))
        parts = tuple(np.split(order, cuts))
        for j, p in enumerate(parts):
            if p.size == 0:
                raise EmptyPart(f"part {j} is empty", part=j)
    for p in parts:
        p.setflags(write=False)
    return PartitionAssignment(parts, spec.mode, int(spec.base_seed), repetition_index, n)


def quantile_bounds(m: EmpiricalMeasure | np.ndarray, L: int, key_dim: int = 0,
                    sample_budget: int = 100_000, seed: int = 0) -> tuple[float, ...]:
    """Bounds giving L parts of roughly equal size on coordinate ``key_dim``.

    Interior bounds are empirical quantiles ``j/L`` (linear interpolation) of
    a seeded sample of at most ``sample_budget`` points.  Intervals holding
    no sampled point are merged away, so the returned sequence may describe
    fewer than L parts.
    """
    if L < 1:
        raise InvalidSpec("L must be positive")
    data = m.data if isinstance(m, EmpiricalMeasure) else np.asarray(m, dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.shape[0] == 0:
        raise EmptyInput("cannot compute bounds of an empty dataset")
    if not 0 <= key_dim < data.shape[1]:
        raise IndexOutOfRange(f"key_dim {key_dim} out of range for d={data.shape[1]}")
    keys = data[:, key_dim]
    lo, hi = float(keys.min()), float(keys.max())
    if keys.size > sample_budget:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5157]))
        sample = keys[rng.choice(keys.size, size=sample_budget, replace=False)]
    else:
        sample = keys
    return bounds_from_sample(np.sort(sample), L, lo, hi)


def bounds_from_sample(sorted_sample: np.ndarray, L: int, lo: float, hi: float) -> tuple[float, ...]:
    eps = 4 * np.finfo(np.float64).eps * max(1.0, abs(lo), abs(hi))
    first, last = lo - eps, hi + eps
    interior = np.quantile(sorted_sample, np.arange(1, L) / L) if L > 1 else np.empty(0)
    candidate = np.unique(np.concatenate([[first], interior, [last]]))
    # drop bounds that open an interval with no sampled point
    counts = np.diff(np.searchsorted(sorted_sample, candidate, side="left"))
    keep = [candidate[0]]
    for b, c in zip(candidate[1:-1], counts[:-1]):
        if c > 0:
            keep.append(b)
        # else: interval [keep[-1], b) empty -> merge it into the next one
    keep.append(candidate[-1])
    # the final interval may also be empty (interior bound above every sample)
    while len(keep) > 2 and not (sorted_sample >= keep[-2]).any():
        keep.pop(-2)
    return tuple(float(b) for b in keep)


def restrict(m: EmpiricalMeasure, part: np.ndarray | list[int]) -> EmpiricalMeasure:
    """Sub-measure holding the rows in ``part``, in the given order."""
    idx = np.asarray(part, dtype=np.int64).reshape(-1)
    if idx.size == 0:
        raise EmptyPart("cannot restrict to an empty part")
    if idx.min() < 0 or idx.max() >= m.n:
        raise IndexOutOfRange(f"part index out of range for n={m.n}")
    return EmpiricalMeasure(m.data[idx], m.parent_index[idx], validate=False)
