"""Running a solution end to end: K repetitions of partition, analyse, combine."""

from __future__ import annotations

import logging
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ..errors import (EmptyInput, EmptyPart, InvalidPartitionCount, InvalidSpec, NonfiniteValue,
                      ParconError)
from ..exact import ExactSum
from ..measure import EvalVector, ResultValue
from ..partitioning import (Mode, PartitionerSpec, PartLocator, Scheme, bounds_from_sample,
                            subsample_draws)
from ..solutions import Problem, Solution, SolutionSpec, make_solution
from ..solutions.base import CombineContext
from ..solutions.mle import get_model
from .routing import (FoldSink, MemorySink, PartSink, SpillSink, check_fits, route_to_parts,
                      spill_directory)
from .sources import ChunkSource, ResidentCounter

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 64 * 2**20


def chunk_size_for(memory_budget: int, d: int, workers: int) -> int:
    """Points per chunk so that (workers + 1) chunks of (index, row) fit the budget."""
    per_point = 8 * (d + 1)
    return max(1, memory_budget // (per_point * (workers + 1)))


@dataclass
class RunReport:
    spec: SolutionSpec
    final: ResultValue | None
    per_rep: list[ResultValue]
    ev_trace: list[EvalVector]
    per_part: list[list[ResultValue]] | None = None
    warnings: list[str] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)
    engine: dict[str, Any] = field(default_factory=dict)

    @property
    def K(self) -> int:
        return len(self.per_rep)


@dataclass
class RepetitionOutcome:
    combined: ResultValue
    parts: list[ResultValue]


class Engine:
    """Executes repetitions of one solution against one source."""

    def __init__(self, spec: SolutionSpec, source: ChunkSource, workers: int = 1,
                 memory_budget: int = DEFAULT_MEMORY_BUDGET, chunk_size: int | None = None) -> None:
        if workers < 1:
            raise InvalidSpec("workers must be >= 1")
        if source.n < 1:
            raise EmptyInput("source holds no points")
        self.source = source
        self.workers = workers
        self.memory_budget = memory_budget
        self.chunk_size = chunk_size or chunk_size_for(memory_budget, source.d, workers)
        self.counter = ResidentCounter()
        self.warnings: list[str] = []
        self.timing: dict[str, float] = {}
        self.spec = self._resolve_bounds(spec)
        self.solution: Solution = make_solution(self.spec)
        self.solution.check_dimension(source.d)
        part = self.spec.partitioner
        if part.mode is Mode.PARTITION and part.scheme is Scheme.RANDOM_BALANCED and part.L > source.n:
            raise InvalidPartitionCount(f"L={part.L} exceeds n={source.n}")
        if part.scheme is Scheme.RANGE_BOUNDED and part.key_dim >= source.d:
            raise InvalidSpec(f"key_dim {part.key_dim} out of range for d={source.d}")
        self._model = get_model(self.spec.params.get("model", "gaussian")) \
            if self.spec.problem is Problem.MLE else None

    def _tick(self, phase: str, since: float) -> float:
        now = time.perf_counter()
        self.timing[phase] = self.timing.get(phase, 0.0) + now - since
        return now

    # ---------------------------------------------------------- bounds

    def _resolve_bounds(self, spec: SolutionSpec) -> SolutionSpec:
        part = spec.partitioner
        if part.scheme is not Scheme.RANGE_BOUNDED or part.bounds is not None:
            return spec
        bounds = quantile_bounds_from_source(self.source, part.L, part.key_dim, part.sample_budget,
                                             part.base_seed, self.chunk_size, self.counter)
        if len(bounds) - 1 < part.L:
            self.warnings.append(f"range bounds collapsed: L reduced from {part.L} to {len(bounds) - 1}")
        return spec.replace(partitioner=part.with_bounds(bounds))

    # ----------------------------------------------------- full passes

    def full_loglik(self, theta: Sequence[float]) -> float:
        return full_pass_evaluate(theta, self._model, self.source, self.chunk_size, self.counter)

    # ----------------------------------------------------- repetitions

    def _sinks(self, L: int, total_rows: int, spill_dir_holder: list) -> list[PartSink]:
        sol = self.solution
        if sol.streaming:
            return [FoldSink(sol.folder()) for _ in range(L)]
        if total_rows <= self.chunk_size:
            return [MemorySink(self.source.d, self.counter) for _ in range(L)]
        if not spill_dir_holder:
            spill_dir_holder.append(spill_directory())
        return [SpillSink(spill_dir_holder[0], f"part{l:05d}", self.source.d) for l in range(L)]

    def run_repetition(self, k: int, spec: PartitionerSpec | None = None) -> RepetitionOutcome:
        """Sample partition ``k``, analyse every part and combine them."""
        pspec = spec or self.spec.partitioner
        n = self.source.n
        t = time.perf_counter()
        if pspec.mode is Mode.SUBSAMPLE:
            route: Any = subsample_draws(pspec, n, k)
            L, total = pspec.L, pspec.L * pspec.part_size
        else:
            route = PartLocator(pspec, n, k)
            L, total = pspec.L, n
        t = self._tick("partition", t)

        spill_dir: list[str] = []
        sinks = self._sinks(L, total, spill_dir)
        ok = False
        try:
            try:
                route_to_parts(route, self.source, sinks, self.chunk_size, self.counter)
            except ParconError as exc:
                raise exc.annotate(k)
            t = self._tick("route", t)
            for l, sink in enumerate(sinks):
                if sink.rows == 0:
                    raise EmptyPart(f"part {l} received no points", repetition=k, part=l)
            parts = self._analyse(k, sinks)
            t = self._tick("rho", t)
            ctx = CombineContext(n=n, d=self.source.d, mode=pspec.mode, scheme=pspec.scheme,
                                 repetition=k, full_objective=self.full_loglik if self._model else None,
                                 warnings=self.warnings)
            try:
                combined = self.solution.combine_parts(parts, ctx)
            except ParconError as exc:
                raise exc.annotate(k)
            self._tick("combine_parts", t)
            ok = True
            return RepetitionOutcome(combined, parts)
        finally:
            if spill_dir:
                if ok:
                    shutil.rmtree(spill_dir[0], ignore_errors=True)
                else:
                    log.warning("spill files retained for debugging in %s", spill_dir[0])

    def _analyse(self, k: int, sinks: Sequence[PartSink]) -> list[ResultValue]:
        sol = self.solution
        if sol.streaming:
            out = []
            for l, sink in enumerate(sinks):
                try:
                    out.append(sink.folder.result())
                except ParconError as exc:
                    raise exc.annotate(k, l)
            return out
        for l, sink in enumerate(sinks):
            if isinstance(sink, SpillSink):
                try:
                    check_fits(sink.rows, self.chunk_size, l, self.spec.problem.value)
                except ParconError as exc:
                    raise exc.annotate(k)

        def task(item):
            l, sink = item
            part = sink.load(self.counter)
            try:
                return sol.rho(part)
            except ParconError as exc:
                raise exc.annotate(k, l)
            finally:
                sink.discard(self.counter)

        if self.workers == 1:
            return [task(item) for item in enumerate(sinks)]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(task, enumerate(sinks)))

    def combine_repetitions(self, results: Sequence[ResultValue]) -> ResultValue:
        ctx = CombineContext(n=self.source.n, d=self.source.d, mode=self.spec.partitioner.mode,
                             scheme=self.spec.partitioner.scheme, warnings=self.warnings)
        return self.solution.combine_repetitions(results, ctx)

    def engine_info(self) -> dict[str, Any]:
        return {"workers": self.workers, "memory_budget": self.memory_budget,
                "chunk_size": self.chunk_size, "peak_resident_points": self.counter.peak,
                "source": self.source.describe()}


def run(spec: SolutionSpec, source: ChunkSource, workers: int = 1,
        memory_budget: int = DEFAULT_MEMORY_BUDGET, chunk_size: int | None = None,
        keep_parts: bool = False) -> RunReport:
    """Run all K repetitions of ``spec`` on ``source``.

    The result does not depend on ``workers`` or on the chunk size.
    """
    eng = Engine(spec, source, workers, memory_budget, chunk_size)
    per_rep, per_part = [], [] if keep_parts else None
    for k in range(eng.spec.K):
        outcome = eng.run_repetition(k)
        per_rep.append(outcome.combined)
        if per_part is not None:
            per_part.append(outcome.parts)
    t = time.perf_counter()
    final = eng.combine_repetitions(per_rep)
    eng._tick("combine_repetitions", t)
    return RunReport(eng.spec, final, per_rep, [eng.solution.ev(r) for r in per_rep], per_part,
                     eng.warnings, eng.timing, eng.engine_info())


def extend(report: RunReport, source: ChunkSource, additional_K: int, workers: int = 1,
           memory_budget: int = DEFAULT_MEMORY_BUDGET, chunk_size: int | None = None) -> RunReport:
    """Add repetitions to a finished run, e.g. after new data was appended to ``source``.

    Earlier repetitions are kept as they were; only the new ones see the
    current contents of ``source``.
    """
    if additional_K < 1:
        raise InvalidSpec("additional_K must be >= 1")
    spec = report.spec.replace(K=report.K + additional_K)
    eng = Engine(spec, source, workers, memory_budget, chunk_size)
    per_rep = list(report.per_rep)
    for k in range(report.K, spec.K):
        per_rep.append(eng.run_repetition(k).combined)
    final = eng.combine_repetitions(per_rep)
    return RunReport(spec, final, per_rep, [eng.solution.ev(r) for r in per_rep], None,
                     list(report.warnings) + eng.warnings, eng.timing, eng.engine_info())


def full_pass_evaluate(theta: Sequence[float], model: Any, source: ChunkSource,
                       chunk_size: int = 1 << 16, counter: ResidentCounter | None = None) -> float:
    """Total log-likelihood of ``theta`` over every point of ``source``.

    Per-point terms are summed exactly, so the value is independent of the
    chunking.
    """
    if isinstance(model, str):
        model = get_model(model)
    total = ExactSum(1)
    for _, rows in source.chunks(chunk_size):
        if counter is not None:
            counter.acquire(rows.shape[0])
        try:
            terms = model.loglik_terms(rows, theta)
            if not np.all(np.isfinite(terms)):
                raise NonfiniteValue("log-likelihood term is not finite")
            total.add(terms)
        finally:
            if counter is not None:
                counter.release(rows.shape[0])
    return total.totals()[0]


def quantile_bounds_from_source(source: ChunkSource, L: int, key_dim: int, sample_budget: int,
                                seed: int, chunk_size: int,
                                counter: ResidentCounter | None = None) -> tuple[float, ...]:
    """Streaming version of :func:`parcon.partitioning.quantile_bounds`."""
    n = source.n
    if n > sample_budget:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5157]))
        chosen = np.sort(rng.choice(n, size=sample_budget, replace=False))
    else:
        chosen = None
    lo, hi = np.inf, -np.inf
    picked = []
    for start, rows in source.chunks(chunk_size):
        if counter is not None:
            counter.acquire(rows.shape[0])
        keys = rows[:, key_dim]
        lo, hi = min(lo, float(keys.min())), max(hi, float(keys.max()))
        if chosen is None:
            picked.append(keys.copy())
        else:
            a, b = np.searchsorted(chosen, [start, start + rows.shape[0]])
            picked.append(keys[chosen[a:b] - start])
        if counter is not None:
            counter.release(rows.shape[0])
    return bounds_from_sample(np.sort(np.concatenate(picked)), L, lo, hi)
