"""JSON report documents.

Results are tagged with a ``"type"`` field and decode back to equal
objects.  Floats are written with Python's shortest round-tripping repr, so
a written report re-reads bit-exactly.
"""

from __future__ import annotations

import json
import math
import os
from typing import Any, Mapping

import numpy as np

from .. import __version__
from ..errors import IoError
from ..measure import (EvalVector, ExtremesResult, HistogramResult, KnnResult, MeanResult,
                       MleResult, OutlierResult, PValueResult, ResultValue, SortedResult)
from ..validation import ConvergenceTrace, ViabilityReport

# sections that legitimately differ between otherwise identical runs
VOLATILE = ("timing", "engine")


def _f(x: float) -> float | str:
    # JSON has no infinities; spell them out
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _unf(x: float | str) -> float:
    return float(x)


def result_to_dict(r: ResultValue) -> dict[str, Any]:
    if isinstance(r, MeanResult):
        return {"type": "mean", "mean": list(r.mean), "count": r.count}
    if isinstance(r, SortedResult):
        return {"type": "sorted", "key_dim": r.key_dim, "run": r.run.tolist(), "index": r.index.tolist()}
    if isinstance(r, ExtremesResult):
        return {"type": "extremes", "min": list(r.min), "max": list(r.max)}
    if isinstance(r, HistogramResult):
        return {"type": "histogram", "edges": list(r.edges), "counts": list(r.counts)}
    if isinstance(r, PValueResult):
        return {"type": "pvalue", "p": r.p}
    if isinstance(r, MleResult):
        return {"type": "mle", "model": r.model, "theta": list(r.theta), "loglik": _f(r.loglik),
                "converged": r.converged, "iterations": r.iterations, "source_part": r.source_part}
    if isinstance(r, KnnResult):
        return {"type": "knn", "points": r.points.tolist(), "distances": r.distances.tolist(),
                "index": r.index.tolist(), "truncated": r.truncated}
    if isinstance(r, OutlierResult):
        return {"type": "outlier", "outlier_idx": r.outlier_idx.tolist(),
                "outlier_values": r.outlier_values.tolist(), "data_idx": r.data_idx.tolist(),
                "data_values": r.data_values.tolist()}
    raise TypeError(f"cannot serialize {type(r).__name__}")


def result_from_dict(doc: Mapping[str, Any]) -> ResultValue:
    kind = doc["type"]
    if kind == "mean":
        return MeanResult(tuple(doc["mean"]), doc["count"])
    if kind == "sorted":
        d = max(1, len(doc["run"][0])) if doc["run"] else 1
        return SortedResult(np.array(doc["run"], dtype=np.float64).reshape(-1, d), doc["index"],
                            doc["key_dim"])
    if kind == "extremes":
        return ExtremesResult(tuple(doc["min"]), tuple(doc["max"]))
    if kind == "histogram":
        return HistogramResult(tuple(doc["edges"]), tuple(doc["counts"]))
    if kind == "pvalue":
        return PValueResult(doc["p"])
    if kind == "mle":
        return MleResult(tuple(doc["theta"]), _unf(doc["loglik"]), doc["model"], doc["converged"],
                         doc["iterations"], doc["source_part"])
    if kind == "knn":
        pts = np.array(doc["points"], dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(0, 1)
        return KnnResult(pts, doc["distances"], doc["index"], doc["truncated"])
    if kind == "outlier":
        return OutlierResult(doc["data_idx"], doc["outlier_idx"], doc["data_values"],
                             doc["outlier_values"])
    raise ValueError(f"unknown result type {kind!r}")


def viability_to_dict(v: ViabilityReport) -> dict[str, Any]:
    return {"problem": v.problem, "K": v.K, "verdict": v.verdict.value,
            "estimate": list(v.estimate.values), "target": list(v.target.values),
            "bias": list(v.bias), "se": [_f(s) for s in v.se],
            "samples": [list(s.values) for s in v.samples]}


def convergence_to_dict(t: ConvergenceTrace) -> dict[str, Any]:
    return {"combiner": t.combiner.value, "K_max": t.K_max, "target": list(t.target.values),
            "distances": list(t.distances), "chosen": list(t.chosen)}


def new_report(command: str, config: Mapping[str, Any] | None, config_checksum: str | None) -> dict:
    return {"version": __version__, "command": command, "config": config,
            "config_checksum": config_checksum, "warnings": [], "error": None,
            "timing": {}, "engine": {}}


def run_section(final: ResultValue | None, per_rep: list[ResultValue], ev_trace: list[EvalVector],
                per_part: list[list[ResultValue]] | None = None) -> dict[str, Any]:
    out = {"final": result_to_dict(final) if final is not None else None,
           "per_rep": [result_to_dict(r) for r in per_rep],
           "ev_trace": [list(e.values) for e in ev_trace]}
    if per_part is not None:
        out["per_part"] = [[result_to_dict(r) for r in row] for row in per_part]
    return out


def dumps(report: Mapping[str, Any]) -> str:
    return json.dumps(report, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_report(report: Mapping[str, Any], path: str | os.PathLike) -> None:
    text = dumps(report)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {os.fspath(path)}: {exc.strerror or exc}") from exc


def read_report(path: str | os.PathLike) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def stable_view(report: Mapping[str, Any]) -> dict[str, Any]:
    """The report without its volatile sections."""
    return {k: v for k, v in report.items() if k not in VOLATILE}
