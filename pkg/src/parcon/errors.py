"""Exception hierarchy.

Every error raised by the package derives from :class:`ParconError`, so
callers (the CLI in particular) can separate expected failures from bugs.
Errors raised inside a repetition carry the ``(repetition, part)``
coordinates where they happened.
"""

from __future__ import annotations


class ParconError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str = "", *, repetition: int | None = None,
                 part: int | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.repetition = repetition
        self.part = part

    def annotate(self, repetition: int | None = None, part: int | None = None) -> "ParconError":
        if self.repetition is None:
            self.repetition = repetition
        if self.part is None:
            self.part = part
        return self

    def __str__(self) -> str:
        where = []
        if self.repetition is not None:
            where.append(f"k={self.repetition}")
        if self.part is not None:
            where.append(f"l={self.part}")
        if where:
            return f"[{', '.join(where)}] {self.message}"
        return self.message


# input validation

class EmptyInput(ParconError, ValueError):
    pass


class DimensionMismatch(ParconError, ValueError):
    pass


class NonfiniteValue(ParconError, ValueError):
    pass


class IndexOutOfRange(ParconError, IndexError):
    pass


# partitioning

class InvalidPartitionCount(ParconError, ValueError):
    pass


class BoundsDoNotCover(ParconError, ValueError):
    pass


class EmptyPart(ParconError, ValueError):
    pass


# solutions

class InvalidSpec(ParconError, ValueError):
    """A solution or partitioner specification violates its constraints."""


class NonViableCombiner(ParconError, ValueError):
    pass


class BinMismatch(ParconError, ValueError):
    pass


class SingularHessian(ParconError, ArithmeticError):
    pass


class DegenerateVariance(ParconError, ArithmeticError):
    pass


class NoViableCandidate(ParconError, RuntimeError):
    pass


class InvalidK(ParconError, ValueError):
    pass


class LabelMissing(ParconError, ValueError):
    pass


# engine / validation / io

class InsufficientMemory(ParconError, MemoryError):
    pass


class IoError(ParconError, OSError):
    pass


class TooLargeForOracle(ParconError, ValueError):
    pass


class ParseError(ParconError, ValueError):
    def __init__(self, message: str, *, row: int | None = None, column: int | None = None) -> None:
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(ParconError, ValueError):
    """Invalid run configuration; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key
