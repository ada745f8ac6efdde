"""Out-of-core execution of partition-repetition runs."""

from .routing import read_spill, route_to_parts, spill_dtype, write_spill
from .runner import (DEFAULT_MEMORY_BUDGET, Engine, RunReport, chunk_size_for, extend,
                     full_pass_evaluate, quantile_bounds_from_source, run)
from .sources import (ArraySource, BinaryFileSource, ChunkSource, CsvSource, JsonlSource,
                      ResidentCounter)

__all__ = ["ArraySource", "BinaryFileSource", "ChunkSource", "CsvSource", "DEFAULT_MEMORY_BUDGET",
           "Engine", "JsonlSource", "ResidentCounter", "RunReport", "chunk_size_for", "extend",
           "full_pass_evaluate", "quantile_bounds_from_source", "read_spill", "route_to_parts",
           "run", "spill_dtype", "write_spill"]
