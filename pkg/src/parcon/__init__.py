"""Partition-repetition analytics: run a statistical analysis on parts of a
dataset, combine the part results, and repeat over random partitions."""

from .errors import ParconError
from .measure import EmpiricalMeasure, EvalVector, eval_distance, measure_from_points
from .partitioning import PartitionerSpec, Scheme, sample_partition
from .solutions import Problem, SolutionSpec, make_solution

__version__ = "0.1.0"

__all__ = ["EmpiricalMeasure", "EvalVector", "ParconError", "PartitionerSpec", "Problem", "Scheme",
           "SolutionSpec", "__version__", "eval_distance", "make_solution", "measure_from_points",
           "sample_partition"]
