"""Run configuration files.

A configuration is a JSON object::

    {
      "data": {"path": "points.csv", "format": "csv", "has_header": false,
               "d": null, "key_dim": 0, "label_column": null},
      "problem": {"id": "histogram", "edges": [0, 1, 2]},
      "partitioner": {"scheme": "random_balanced", "L": 4, "base_seed": 0},
      "K": 10,
      "combiner": {"adjust": "none", "second_stage": "mean_of_ev"},
      "validation": {"K": 100, "K_max": 50, "seed": 0},
      "engine": {"workers": 1, "memory_budget": 67108864, "chunk_size": null},
      "output": "report.json"
    }

Loading checks every entry and reports problems by dotted key path.
:meth:`RunConfig.normalized` gives the fully defaulted form that reports
echo back; feeding that echo to the loader reproduces the run.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Any, Mapping

from ..engine import DEFAULT_MEMORY_BUDGET, BinaryFileSource, ChunkSource, CsvSource, JsonlSource
from ..errors import ConfigError, InvalidSpec
from ..partitioning import PartitionerSpec, Scheme
from ..solutions import Problem, SolutionSpec, parse_problem
from ..solutions.ztest import Adjust
from ..validation import SecondStage

FORMATS = ("csv", "jsonl", "f64le-binary")

_TOP = ("data", "problem", "partitioner", "K", "combiner", "validation", "engine", "output")
_DATA = ("path", "format", "has_header", "d", "key_dim", "label_column")
_PARTITIONER = ("scheme", "L", "bounds", "part_size", "base_seed", "key_dim", "sample_budget")
_PROBLEM = {
    Problem.MEAN: (),
    Problem.SORT: ("key_dim",),
    Problem.EXTREMES: (),
    Problem.HISTOGRAM: ("edges", "key_dim"),
    Problem.TEST: ("mu0", "sigma"),
    Problem.MLE: ("model", "init", "max_iter", "tol"),
    Problem.KNN: ("query", "k", "labeled"),
    Problem.OUTLIER: ("c",),
}
_COMBINER = ("adjust", "tau", "pool_min", "pool_fraction", "c", "second_stage")
_VALIDATION = ("K", "K_max", "seed")
_ENGINE = ("workers", "memory_budget", "chunk_size")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def checksum(normalized: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a normalized configuration."""
    return hashlib.sha256(canonical_json(normalized).encode()).hexdigest()


# ------------------------------------------------------------ field checks

def _block(raw: Mapping[str, Any], key: str, allowed: tuple[str, ...], required: bool = True) -> dict:
    if key not in raw:
        if required:
            raise ConfigError(key, "missing required block")
        return {}
    value = raw[key]
    if not isinstance(value, dict):
        raise ConfigError(key, "must be a JSON object")
    for k in value:
        if k not in allowed:
            raise ConfigError(f"{key}.{k}", "unknown key")
    return value


def _int(block: Mapping, key: str, path: str, default: Any = ..., minimum: int | None = None) -> Any:
    if key not in block or block[key] is None:
        if default is ...:
            raise ConfigError(path, "missing required key")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {v}")
    return v


def _num(block: Mapping, key: str, path: str, default: Any = ...) -> Any:
    if key not in block or block[key] is None:
        if default is ...:
            raise ConfigError(path, "missing required key")
        return default
    v = block[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"must be a number, got {v!r}")
    return float(v)


def _numbers(block: Mapping, key: str, path: str, default: Any = ...) -> Any:
    if key not in block or block[key] is None:
        if default is ...:
            raise ConfigError(path, "missing required key")
        return default
    v = block[key]
    if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(path, "must be an array of numbers")
    return [float(x) for x in v]


def _bool(block: Mapping, key: str, path: str, default: bool) -> bool:
    v = block.get(key, default)
    if v is None:
        return default
    if not isinstance(v, bool):
        raise ConfigError(path, f"must be true or false, got {v!r}")
    return v


def _choice(block: Mapping, key: str, path: str, choices: tuple[str, ...], default: Any = ...) -> Any:
    if key not in block or block[key] is None:
        if default is ...:
            raise ConfigError(path, "missing required key")
        return default
    v = block[key]
    if v not in choices:
        raise ConfigError(path, f"must be one of {list(choices)}, got {v!r}")
    return v


# ------------------------------------------------------------- the config

@dataclass(frozen=True)
class DataConfig:
    path: str
    format: str
    has_header: bool = False
    d: int | None = None
    key_dim: int = 0
    label_column: int | None = None

    def open(self) -> ChunkSource:
        return ingest(self.path, self.format, {"has_header": self.has_header, "d": self.d,
                                               "label_column": self.label_column})


@dataclass(frozen=True)
class RunConfig:
    data: DataConfig
    spec: SolutionSpec
    second_stage: SecondStage = SecondStage.MEAN_OF_EV
    validation_K: int = 100
    K_max: int = 50
    validation_seed: int = 0
    workers: int = 1
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    chunk_size: int | None = None
    output: str | None = None

    def normalized(self, execution: bool = True) -> dict[str, Any]:
        """Fully defaulted config.  ``execution=False`` leaves out the engine
        and output blocks, which cannot change any result."""
        spec = self.spec
        part = spec.partitioner
        problem = {"id": spec.problem.value}
        problem.update(spec.params)
        combiner = dict(spec.combiner_options)
        combiner["second_stage"] = self.second_stage.value
        out = {
            "data": {"path": self.data.path, "format": self.data.format,
                     "has_header": self.data.has_header, "d": self.data.d,
                     "key_dim": self.data.key_dim, "label_column": self.data.label_column},
            "problem": problem,
            "partitioner": {"scheme": part.scheme.value, "L": part.L,
                            "bounds": list(part.bounds) if part.bounds is not None else None,
                            "part_size": part.part_size, "base_seed": int(part.base_seed),
                            "key_dim": part.key_dim, "sample_budget": part.sample_budget},
            "K": spec.K,
            "combiner": combiner,
            "validation": {"K": self.validation_K, "K_max": self.K_max, "seed": self.validation_seed},
        }
        if execution:
            out["engine"] = {"workers": self.workers, "memory_budget": self.memory_budget,
                             "chunk_size": self.chunk_size}
            out["output"] = self.output
        return out

    @property
    def checksum(self) -> str:
        return checksum(self.normalized(execution=False))


def parse_config(raw: Any, base_dir: str | None = None) -> RunConfig:
    """Validate a decoded JSON configuration.

    Relative data and output paths are resolved against ``base_dir``.
    """
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    for k in raw:
        if k not in _TOP:
            raise ConfigError(k, "unknown key")

    def resolve(path: str) -> str:
        if base_dir is not None and not os.path.isabs(path):
            return os.path.normpath(os.path.join(base_dir, path))
        return path

    d = _block(raw, "data", _DATA)
    if not isinstance(d.get("path"), str) or not d["path"]:
        raise ConfigError("data.path", "missing required key" if "path" not in d else "must be a non-empty string")
    fmt = _choice(d, "format", "data.format", FORMATS)
    dim = _int(d, "d", "data.d", None, minimum=1)
    if fmt == "f64le-binary" and dim is None:
        raise ConfigError("data.d", "required for the f64le-binary format")
    data = DataConfig(resolve(d["path"]), fmt, _bool(d, "has_header", "data.has_header", False), dim,
                      _int(d, "key_dim", "data.key_dim", 0, minimum=0),
                      _int(d, "label_column", "data.label_column", None, minimum=0))

    pb = raw.get("problem")
    if not isinstance(pb, dict):
        raise ConfigError("problem", "missing required block" if pb is None else "must be a JSON object")
    if not isinstance(pb.get("id"), str):
        raise ConfigError("problem.id", "missing required key")
    try:
        problem = parse_problem(pb["id"])
    except InvalidSpec as exc:
        raise ConfigError("problem.id", str(exc)) from None
    params = _problem_params(problem, pb, data)

    p = _block(raw, "partitioner", _PARTITIONER)
    scheme = _choice(p, "scheme", "partitioner.scheme", tuple(s.value for s in Scheme))
    L = _int(p, "L", "partitioner.L", minimum=1)
    bounds = _numbers(p, "bounds", "partitioner.bounds", None)
    part_size = _int(p, "part_size", "partitioner.part_size", None, minimum=1)
    if scheme == Scheme.SUBSAMPLE.value and part_size is None:
        raise ConfigError("partitioner.part_size", "required for the subsample scheme")
    if bounds is not None and scheme != Scheme.RANGE_BOUNDED.value:
        raise ConfigError("partitioner.bounds", "only the range_bounded scheme takes bounds")
    base_seed = _int(p, "base_seed", "partitioner.base_seed", 0, minimum=0)
    key_default = params.get("key_dim", data.key_dim) if problem is Problem.SORT else data.key_dim
    key_dim = _int(p, "key_dim", "partitioner.key_dim", key_default, minimum=0)
    budget = _int(p, "sample_budget", "partitioner.sample_budget", 100_000, minimum=1)
    try:
        part = PartitionerSpec(scheme, L, base_seed, tuple(bounds) if bounds is not None else None,
                               key_dim, part_size, budget)
    except InvalidSpec as exc:
        raise ConfigError("partitioner", str(exc)) from None

    K = _int(raw, "K", "K", 1, minimum=1)
    c = _block(raw, "combiner", _COMBINER, required=False)
    options: dict[str, Any] = {}
    if "adjust" in c:
        if problem is not Problem.TEST:
            raise ConfigError("combiner.adjust", "only the test problem takes an adjustment")
        options["adjust"] = _choice(c, "adjust", "combiner.adjust", tuple(a.value for a in Adjust))
    for key in ("tau", "pool_fraction"):
        if key in c:
            if problem is not Problem.OUTLIER:
                raise ConfigError(f"combiner.{key}", "only the outlier problem takes this option")
            options[key] = _num(c, key, f"combiner.{key}")
    if "pool_min" in c:
        if problem is not Problem.OUTLIER:
            raise ConfigError("combiner.pool_min", "only the outlier problem takes this option")
        options["pool_min"] = _int(c, "pool_min", "combiner.pool_min", minimum=1)
    if "c" in c:
        if problem is not Problem.OUTLIER:
            raise ConfigError("combiner.c", "only the outlier problem takes a threshold")
        if "c" in params and params["c"] != _num(c, "c", "combiner.c"):
            raise ConfigError("combiner.c", "conflicts with problem.c")
        params["c"] = _num(c, "c", "combiner.c")
    second = SecondStage(_choice(c, "second_stage", "combiner.second_stage",
                                 tuple(s.value for s in SecondStage), SecondStage.MEAN_OF_EV.value))

    try:
        spec = SolutionSpec(problem, part, K, params, options)
    except InvalidSpec as exc:
        raise ConfigError("problem", str(exc)) from None

    v = _block(raw, "validation", _VALIDATION, required=False)
    e = _block(raw, "engine", _ENGINE, required=False)
    out = raw.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output", "must be a path string or null")
    return RunConfig(
        data, spec, second,
        validation_K=_int(v, "K", "validation.K", 100, minimum=1),
        K_max=_int(v, "K_max", "validation.K_max", 50, minimum=2),
        validation_seed=_int(v, "seed", "validation.seed", 0, minimum=0),
        workers=_int(e, "workers", "engine.workers", 1, minimum=1),
        memory_budget=_int(e, "memory_budget", "engine.memory_budget", DEFAULT_MEMORY_BUDGET, minimum=1),
        chunk_size=_int(e, "chunk_size", "engine.chunk_size", None, minimum=1),
        output=resolve(out) if out else None,
    )


def _problem_params(problem: Problem, pb: Mapping[str, Any], data: DataConfig) -> dict[str, Any]:
    allowed = _PROBLEM[problem]
    for k in pb:
        if k != "id" and k not in allowed:
            raise ConfigError(f"problem.{k}", f"unknown parameter for {problem.value!r}")
    params: dict[str, Any] = {}
    if problem in (Problem.SORT, Problem.HISTOGRAM):
        params["key_dim"] = _int(pb, "key_dim", "problem.key_dim", data.key_dim, minimum=0)
    if problem is Problem.HISTOGRAM:
        params["edges"] = _numbers(pb, "edges", "problem.edges")
    if problem is Problem.TEST:
        params["mu0"] = _num(pb, "mu0", "problem.mu0", 0.0)
        params["sigma"] = _num(pb, "sigma", "problem.sigma", 1.0)
        if params["sigma"] <= 0:
            raise ConfigError("problem.sigma", "must be positive")
    if problem is Problem.MLE:
        params["model"] = _choice(pb, "model", "problem.model", ("gaussian", "logistic"), "gaussian")
        init = _numbers(pb, "init", "problem.init", None)
        if init is not None:
            params["init"] = init
        params["max_iter"] = _int(pb, "max_iter", "problem.max_iter", 100, minimum=1)
        params["tol"] = _num(pb, "tol", "problem.tol", 1e-10)
    if problem is Problem.KNN:
        params["query"] = _numbers(pb, "query", "problem.query")
        params["k"] = _int(pb, "k", "problem.k", minimum=1)
        params["labeled"] = _bool(pb, "labeled", "problem.labeled", False)
    if problem is Problem.OUTLIER and "c" in pb:
        params["c"] = _num(pb, "c", "problem.c")
    return params


def load_config(path: str | os.PathLike, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read, override and validate a configuration file.

    ``overrides`` maps dotted keys (``"engine.workers"``) to replacement values.
    """
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            raw = json.loads(fh.read())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror or exc}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from None
    if isinstance(raw, dict):
        for dotted, value in (overrides or {}).items():
            target = raw
            *heads, last = dotted.split(".")
            for h in heads:
                target = target.setdefault(h, {})
                if not isinstance(target, dict):
                    raise ConfigError(h, "must be a JSON object")
            target[last] = value
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))


def ingest(path: str | os.PathLike, format: str, options: Mapping[str, Any] | None = None) -> ChunkSource:
    """Open a dataset file as a chunked source with stable, file-order indices."""
    options = dict(options or {})
    label = options.get("label_column")
    if format == "csv":
        return CsvSource(path, bool(options.get("has_header", False)), label)
    if format == "jsonl":
        return JsonlSource(path, label)
    if format == "f64le-binary":
        if not options.get("d"):
            raise ConfigError("data.d", "required for the f64le-binary format")
        return BinaryFileSource(path, int(options["d"]), label)
    raise ConfigError("data.format", f"must be one of {list(FORMATS)}, got {format!r}")


__all__ = ["FORMATS", "DataConfig", "RunConfig", "canonical_json", "checksum",
           "ingest", "load_config", "parse_config"]
