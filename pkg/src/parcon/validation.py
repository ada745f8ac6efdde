"""Full-data oracles and the statistical checks built on them.

The oracles compute each problem directly on the whole dataset with code
paths independent of the per-part analyses (stdlib exact arithmetic,
exhaustive scans, plain gradient ascent).  On top of them:

* :func:`estimate_viability` -- Monte Carlo estimate of the expected
  evaluation vector of the first-stage combined result, compared with the
  oracle's, with a three standard error verdict.
* :func:`trace_convergence` -- distance between the second-stage combined
  evaluation vector and the oracle's as repetitions are added.
"""

from __future__ import annotations

import bisect
import enum
import math
import statistics
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .engine.runner import DEFAULT_MEMORY_BUDGET, Engine
from .engine.sources import ArraySource, ChunkSource
from .errors import DimensionMismatch, InvalidSpec, TooLargeForOracle
from .exact import ExactSum
from .measure import (EmpiricalMeasure, EvalVector, ExtremesResult, HistogramResult, KnnResult,
                      MeanResult, MleResult, OutlierResult, PValueResult, ResultValue, SortedResult,
                      eval_distance)
from .solutions import Problem, SolutionSpec, make_solution, parse_problem
from .solutions.outlier import MAD_SCALE

ORACLE_LIMIT = 10**6
K_MIN = 30


class Verdict(str, enum.Enum):
    VIABLE = "viable"
    NOT_VIABLE = "not_viable"
    INCONCLUSIVE = "inconclusive"


class SecondStage(str, enum.Enum):
    MEAN_OF_EV = "mean_of_ev"
    MEDIAN_OF_EV = "median_of_ev"
    ORACLE_ARGMIN = "oracle_argmin"


# ------------------------------------------------------------------ oracles

def _tuples(m: EmpiricalMeasure) -> list[tuple[float, ...]]:
    return m.points()


def oracle_mean(m: EmpiricalMeasure) -> MeanResult:
    cols = m.data.T.tolist()
    return MeanResult(tuple(statistics.mean(c) for c in cols), m.n)


def oracle_sort(m: EmpiricalMeasure, key_dim: int = 0) -> SortedResult:
    pts = _tuples(m)
    order = sorted(range(m.n), key=lambda i: (pts[i][key_dim],)
                   + tuple(v for j, v in enumerate(pts[i]) if j != key_dim) + (i,))
    return SortedResult(np.array([pts[i] for i in order]), np.array(order), key_dim)


def oracle_extremes(m: EmpiricalMeasure) -> ExtremesResult:
    pts = _tuples(m)
    return ExtremesResult(min(pts), max(pts))


def oracle_histogram(m: EmpiricalMeasure, edges: Sequence[float], key_dim: int = 0) -> HistogramResult:
    edges = [float(e) for e in edges]
    counts = [0] * (len(edges) - 1)
    for v in m.data[:, key_dim].tolist():
        b = bisect.bisect_right(edges, v) - 1
        counts[min(max(b, 0), len(counts) - 1)] += 1
    return HistogramResult(tuple(edges), tuple(counts))


def oracle_test(m: EmpiricalMeasure, mu0: float, sigma: float) -> PValueResult:
    if m.d != 1:
        raise DimensionMismatch("the z-test expects 1-D data")
    z = math.sqrt(m.n) * (statistics.mean(m.data[:, 0].tolist()) - mu0) / sigma
    return PValueResult(min(1.0, math.erfc(abs(z) / math.sqrt(2.0))))


def gaussian_loglik(values: Sequence[float], mu: float, var: float) -> float:
    var = max(var, 1e-12)
    c = -0.5 * math.log(2.0 * math.pi * var)
    return math.fsum(c - (x - mu) ** 2 / (2.0 * var) for x in values)


def logistic_loglik(X: np.ndarray, y: np.ndarray, theta: np.ndarray) -> float:
    eta = X @ theta
    return math.fsum((y * eta - np.logaddexp(0.0, eta)).tolist())


def logistic_gradient_ascent(X: np.ndarray, y: np.ndarray, max_iter: int = 2_000_000,
                             tol: float = 1e-12) -> np.ndarray:
    """Plain fixed-step gradient ascent on the logistic log-likelihood.

    The step is ``4 / lambda_max(X'X)``, the inverse Lipschitz constant of the
    gradient, which guarantees monotone ascent.
    """
    step = 4.0 / np.linalg.eigvalsh(X.T @ X)[-1]
    theta = np.zeros(X.shape[1])
    for _ in range(max_iter):
        prob = 1.0 / (1.0 + np.exp(-(X @ theta)))
        grad = X.T @ (y - prob)
        if np.linalg.norm(grad) < tol:
            break
        theta = theta + step * grad
    return theta


def oracle_mle(m: EmpiricalMeasure, model: str = "gaussian") -> MleResult:
    if model == "gaussian":
        if m.d != 1:
            raise DimensionMismatch("the Gaussian model expects 1-D data")
        values = m.data[:, 0].tolist()
        mu = statistics.mean(values)
        var = statistics.pvariance(values, mu)
        return MleResult((mu, var), gaussian_loglik(values, mu, var), "gaussian")
    if model == "logistic":
        X = np.hstack([np.ones((m.n, 1)), m.data[:, :-1]])
        y = m.data[:, -1]
        theta = logistic_gradient_ascent(X, y)
        return MleResult(tuple(theta.tolist()), logistic_loglik(X, y, theta), "logistic")
    raise InvalidSpec(f"unknown model {model!r}")


def oracle_knn(m: EmpiricalMeasure, query: Sequence[float], k: int, labeled: bool = False) -> KnnResult:
    """Exhaustive scan, nearest first, ties by index."""
    pts = _tuples(m)
    q = tuple(float(v) for v in query)
    dists = [(math.dist(p[:-1] if labeled else p, q), i) for i, p in enumerate(pts)]
    dists.sort()
    top = dists[:k]
    return KnnResult(np.array([pts[i] for _, i in top]), np.array([dd for dd, _ in top]),
                     np.array([i for _, i in top]), truncated=len(top) < k)


def oracle_outlier(m: EmpiricalMeasure, c: float = 3.5) -> OutlierResult:
    if m.d != 1:
        raise DimensionMismatch("the outlier detector expects 1-D data")
    values = m.data[:, 0].tolist()
    med = statistics.median(values)
    mad = statistics.median([abs(v - med) for v in values])
    out = [mad > 0 and abs(v - med) / (mad * MAD_SCALE) > c for v in values]
    idx = np.arange(m.n)
    mask = np.array(out, dtype=bool)
    arr = np.array(values)
    return OutlierResult(idx[~mask], idx[mask], arr[~mask], arr[mask])


def oracle(problem: Problem | str, params: Mapping[str, Any], m: EmpiricalMeasure) -> ResultValue:
    """Direct full-data computation of the problem on ``m``."""
    if m.n > ORACLE_LIMIT:
        raise TooLargeForOracle(f"n={m.n} exceeds the oracle limit of {ORACLE_LIMIT}")
    problem = problem if isinstance(problem, Problem) else parse_problem(problem)
    p = dict(params)
    if problem is Problem.MEAN:
        return oracle_mean(m)
    if problem is Problem.SORT:
        return oracle_sort(m, int(p.get("key_dim", 0)))
    if problem is Problem.EXTREMES:
        return oracle_extremes(m)
    if problem is Problem.HISTOGRAM:
        return oracle_histogram(m, p["edges"], int(p.get("key_dim", 0)))
    if problem is Problem.TEST:
        return oracle_test(m, float(p.get("mu0", 0.0)), float(p.get("sigma", 1.0)))
    if problem is Problem.MLE:
        return oracle_mle(m, p.get("model", "gaussian"))
    if problem is Problem.KNN:
        return oracle_knn(m, p["query"], int(p["k"]), bool(p.get("labeled", False)))
    if problem is Problem.OUTLIER:
        return oracle_outlier(m, float(p.get("c", 3.5)))
    raise InvalidSpec(f"no oracle for {problem}")


def oracle_for(spec: SolutionSpec, source: ChunkSource) -> ResultValue:
    if source.n > ORACLE_LIMIT:
        raise TooLargeForOracle(f"n={source.n} exceeds the oracle limit of {ORACLE_LIMIT}")
    params = dict(spec.params)
    if spec.problem is Problem.SORT:
        params.setdefault("key_dim", spec.partitioner.key_dim)
    return oracle(spec.problem, params, source.to_measure())


def _as_source(source: ChunkSource | EmpiricalMeasure | np.ndarray) -> ChunkSource:
    return source if isinstance(source, ChunkSource) else ArraySource(source)


# ---------------------------------------------------------------- viability

@dataclass
class ViabilityReport:
    problem: str
    estimate: EvalVector
    target: EvalVector
    bias: tuple[float, ...]
    se: tuple[float, ...]
    K: int
    verdict: Verdict
    samples: list[EvalVector] = field(default_factory=list, repr=False)


def _mean_rows(rows: np.ndarray) -> np.ndarray:
    # shifted so that K identical draws average to exactly that value
    base = rows[0]
    return base + np.array(ExactSum(rows.shape[1]).add(rows - base).divided(rows.shape[0]))


def verdict_for(bias: Sequence[float], se: Sequence[float], K: int) -> Verdict:
    if all(math.isfinite(s) and abs(b) <= 3.0 * s for b, s in zip(bias, se)):
        return Verdict.VIABLE
    if any(not math.isfinite(s) for s in se):
        return Verdict.INCONCLUSIVE
    if K < K_MIN and any(s == 0.0 and b != 0.0 for b, s in zip(bias, se)):
        return Verdict.INCONCLUSIVE
    return Verdict.NOT_VIABLE


def estimate_viability(spec: SolutionSpec, source: ChunkSource | EmpiricalMeasure | np.ndarray,
                       K: int = 100, seed: int = 0, workers: int = 1,
                       memory_budget: int = DEFAULT_MEMORY_BUDGET) -> ViabilityReport:
    """Compare the average first-stage evaluation vector over K draws with the oracle's."""
    if K < 1:
        raise InvalidSpec("K must be >= 1")
    source = _as_source(source)
    target_result = oracle_for(spec, source)
    spec = spec.replace(partitioner=spec.partitioner.with_seed(seed))
    eng = Engine(spec, source, workers, memory_budget)
    target = eng.solution.ev(target_result)
    samples = [eng.solution.ev(eng.run_repetition(k).combined) for k in range(K)]
    rows = np.array([s.values for s in samples])
    estimate = _mean_rows(rows)
    bias = estimate - target.as_array()
    if K > 1:
        se = np.std(rows, axis=0, ddof=1) / math.sqrt(K)
        # identical draws have no spread; keep rounding noise out of the verdict
        se[np.all(rows == rows[0], axis=0)] = 0.0
    else:
        se = np.full(rows.shape[1], np.nan)
    return ViabilityReport(spec.problem.value, EvalVector(estimate.tolist()), target,
                           tuple(bias.tolist()), tuple(se.tolist()), K,
                           verdict_for(bias.tolist(), se.tolist(), K), samples)


# -------------------------------------------------------------- convergence

@dataclass
class ConvergenceTrace:
    combiner: SecondStage
    distances: list[float]
    target: EvalVector
    chosen: list[int] = field(default_factory=list)

    @property
    def K_max(self) -> int:
        return len(self.distances)


def trace_convergence(spec: SolutionSpec, source: ChunkSource | EmpiricalMeasure | np.ndarray,
                      K_max: int = 50, combiner: SecondStage | str = SecondStage.MEAN_OF_EV,
                      seed: int = 0, workers: int = 1,
                      memory_budget: int = DEFAULT_MEMORY_BUDGET) -> ConvergenceTrace:
    """Distance to the oracle's evaluation vector after each added repetition.

    ``ORACLE_ARGMIN`` keeps the repetition whose evaluation vector is nearest
    the oracle's; it needs the oracle and is a test device only.
    """
    if K_max < 2:
        raise InvalidSpec("K_max must be >= 2")
    combiner = SecondStage(combiner)
    source = _as_source(source)
    target = make_solution(spec).ev(oracle_for(spec, source))
    spec = spec.replace(partitioner=spec.partitioner.with_seed(seed))
    eng = Engine(spec, source, workers, memory_budget)
    mu = target.values
    running = ExactSum(len(mu))
    evs: list[tuple[float, ...]] = []
    distances: list[float] = []
    chosen: list[int] = []
    best = (math.inf, -1)
    for k in range(K_max):
        y = eng.solution.ev(eng.run_repetition(k).combined).values
        evs.append(y)
        if combiner is SecondStage.MEAN_OF_EV:
            running.add(np.array([y]))
            z = running.divided(k + 1)
        elif combiner is SecondStage.MEDIAN_OF_EV:
            z = tuple(np.median(np.array(evs), axis=0).tolist())
        else:
            dist = eval_distance(y, mu)
            if dist < best[0]:
                best = (dist, k)
            z = evs[best[1]]
            chosen.append(best[1])
        distances.append(eval_distance(z, mu))
    return ConvergenceTrace(combiner, distances, target, chosen)
