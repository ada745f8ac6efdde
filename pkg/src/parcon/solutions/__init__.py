"""Solution registry and the solution specification."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import InvalidSpec
from ..partitioning import PartitionerSpec, Scheme
from .base import CombineContext, Folder, Solution
from .descriptive import ExtremesSolution, HistogramSolution, MeanSolution, SortSolution
from .knn import KnnSolution
from .mle import MleSolution
from .outlier import OutlierSolution
from .ztest import TestSolution


class Problem(str, enum.Enum):
    MEAN = "mean"
    SORT = "sort"
    EXTREMES = "extremes"
    HISTOGRAM = "histogram"
    TEST = "test"
    MLE = "mle"
    KNN = "knn"
    OUTLIER = "outlier"


# identifiers held for combiners that are not shipped
RESERVED = ("clustering", "decision_tree")

_PARAMS: dict[Problem, tuple[str, ...]] = {
    Problem.MEAN: (),
    Problem.SORT: ("key_dim",),
    Problem.EXTREMES: (),
    Problem.HISTOGRAM: ("edges", "key_dim"),
    Problem.TEST: ("mu0", "sigma"),
    Problem.MLE: ("model", "init", "max_iter", "tol"),
    Problem.KNN: ("query", "k", "labeled"),
    Problem.OUTLIER: ("c",),
}

_COMBINER_OPTIONS: dict[Problem, tuple[str, ...]] = {
    Problem.TEST: ("adjust",),
    Problem.OUTLIER: ("tau", "pool_min", "pool_fraction"),
}


def parse_problem(name: str) -> Problem:
    if name in RESERVED:
        raise InvalidSpec(f"problem {name!r} is reserved but no combiner is shipped for it")
    try:
        return Problem(name)
    except ValueError:
        raise InvalidSpec(f"unknown problem {name!r}; choose from {[p.value for p in Problem]}") from None


@dataclass(frozen=True)
class SolutionSpec:
    """A problem, how to partition for it, and how many repetitions to run."""

    problem: Problem
    partitioner: PartitionerSpec
    K: int = 1
    params: Mapping[str, Any] = field(default_factory=dict)
    combiner_options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not isinstance(self.problem, Problem):
            object.__setattr__(self, "problem", parse_problem(str(self.problem)))
        object.__setattr__(self, "params", dict(self.params))
        object.__setattr__(self, "combiner_options", dict(self.combiner_options))
        if not isinstance(self.K, int) or self.K < 1:
            raise InvalidSpec(f"K must be a positive integer, got {self.K!r}")
        for key in self.params:
            if key not in _PARAMS[self.problem]:
                raise InvalidSpec(f"unknown parameter {key!r} for problem {self.problem.value!r}")
        for key in self.combiner_options:
            if key not in _COMBINER_OPTIONS.get(self.problem, ()):
                raise InvalidSpec(f"unknown combiner option {key!r} for problem {self.problem.value!r}")
        if self.problem is Problem.SORT:
            if self.partitioner.scheme is not Scheme.RANGE_BOUNDED:
                raise InvalidSpec("sorting needs a range_bounded partitioner")
            if self.params.get("key_dim", self.partitioner.key_dim) != self.partitioner.key_dim:
                raise InvalidSpec("sort key_dim must match the partitioner key_dim")
        make_solution(self)

    def replace(self, **changes: Any) -> "SolutionSpec":
        fields = dict(problem=self.problem, partitioner=self.partitioner, K=self.K,
                      params=self.params, combiner_options=self.combiner_options)
        fields.update(changes)
        return SolutionSpec(**fields)


def make_solution(spec: SolutionSpec) -> Solution:
    p, opts = spec.params, spec.combiner_options
    problem = spec.problem
    if problem is Problem.MEAN:
        return MeanSolution()
    if problem is Problem.SORT:
        return SortSolution(int(p.get("key_dim", spec.partitioner.key_dim)))
    if problem is Problem.EXTREMES:
        return ExtremesSolution()
    if problem is Problem.HISTOGRAM:
        if "edges" not in p:
            raise InvalidSpec("histogram needs edges")
        return HistogramSolution(p["edges"], int(p.get("key_dim", 0)))
    if problem is Problem.TEST:
        return TestSolution(float(p.get("mu0", 0.0)), float(p.get("sigma", 1.0)), opts.get("adjust", "none"))
    if problem is Problem.MLE:
        return MleSolution(p.get("model", "gaussian"), p.get("init"), int(p.get("max_iter", 100)),
                           float(p.get("tol", 1e-10)))
    if problem is Problem.KNN:
        if "query" not in p or "k" not in p:
            raise InvalidSpec("knn needs query and k")
        return KnnSolution(p["query"], int(p["k"]), bool(p.get("labeled", False)))
    if problem is Problem.OUTLIER:
        return OutlierSolution(float(p.get("c", 3.5)), float(opts.get("tau", 0.5)),
                               int(opts.get("pool_min", 3)), float(opts.get("pool_fraction", 0.02)))
    raise InvalidSpec(f"no solution for {problem}")


__all__ = ["CombineContext", "Folder", "Problem", "RESERVED", "Solution", "SolutionSpec",
           "make_solution", "parse_problem"]
