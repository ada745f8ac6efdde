"""Command-line entry point: ``parcon run|oracle|viability|converge``.

Exit codes: 0 success, 1 viability verdict NotViable, 2 any error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Any, Callable, Sequence

from ..engine import run
from ..errors import ConfigError, ParconError
from ..solutions import make_solution
from ..validation import Verdict, estimate_viability, oracle_for, trace_convergence
from .config import RunConfig, load_config
from .report import (convergence_to_dict, new_report, result_to_dict, run_section,
                     viability_to_dict, write_report)

EXIT_OK, EXIT_NOT_VIABLE, EXIT_ERROR = 0, 1, 2


def _run(cfg: RunConfig, doc: dict) -> int:
    source = cfg.data.open()
    rep = run(cfg.spec, source, cfg.workers, cfg.memory_budget, cfg.chunk_size)
    doc["result"] = run_section(rep.final, rep.per_rep, rep.ev_trace)
    doc["warnings"] = list(rep.warnings)
    doc["timing"].update(rep.timing)
    doc["engine"] = rep.engine
    return EXIT_OK


def _oracle(cfg: RunConfig, doc: dict) -> int:
    source = cfg.data.open()
    r = oracle_for(cfg.spec, source)
    doc["oracle"] = {"result": result_to_dict(r), "ev": list(make_solution(cfg.spec).ev(r).values)}
    return EXIT_OK


def _viability(cfg: RunConfig, doc: dict) -> int:
    source = cfg.data.open()
    v = estimate_viability(cfg.spec, source, cfg.validation_K, cfg.validation_seed, cfg.workers,
                           cfg.memory_budget)
    doc["viability"] = viability_to_dict(v)
    return EXIT_NOT_VIABLE if v.verdict is Verdict.NOT_VIABLE else EXIT_OK


def _converge(cfg: RunConfig, doc: dict) -> int:
    source = cfg.data.open()
    t = trace_convergence(cfg.spec, source, cfg.K_max, cfg.second_stage, cfg.validation_seed,
                          cfg.workers, cfg.memory_budget)
    doc["convergence"] = convergence_to_dict(t)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, dict], int]] = {
    "run": _run, "oracle": _oracle, "viability": _viability, "converge": _converge,
}


def execute(command: str, cfg: RunConfig) -> tuple[int, dict]:
    """Run one command and return its exit code and report document."""
    doc = new_report(command, cfg.normalized(execution=False), cfg.checksum)
    t = time.perf_counter()
    try:
        code = COMMANDS[command](cfg, doc)
    except Exception as exc:  # every failure becomes a report entry and exit code 2
        doc["error"] = _error(exc)
        code = EXIT_ERROR
    doc["timing"]["total"] = time.perf_counter() - t
    return code, doc


def _error(exc: BaseException) -> dict[str, Any]:
    out: dict[str, Any] = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        out["key"] = exc.key
    for attr in ("repetition", "part", "row", "column"):
        if getattr(exc, attr, None) is not None:
            out[attr] = getattr(exc, attr)
    return out


def summarize(code: int, doc: dict) -> str:
    if doc.get("error"):
        return f"error: {doc['error']['message']}"
    lines = [f"{doc['command']}: ok"]
    if "result" in doc:
        final = doc["result"]["final"]
        lines.append(f"K={len(doc['result']['per_rep'])} final={_short(final)}")
    if "oracle" in doc:
        lines.append(f"oracle ev={_short(doc['oracle']['ev'])}")
    if "viability" in doc:
        v = doc["viability"]
        lines[0] = f"viability: {v['verdict']}"
        lines.append(f"K={v['K']} bias={_short(v['bias'])} se={_short(v['se'])}")
    if "convergence" in doc:
        c = doc["convergence"]["distances"]
        lines.append(f"{doc['convergence']['combiner']}: |Z_1-mu|={c[0]:.6g} |Z_K-mu|={c[-1]:.6g}")
    for w in doc.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines)


def _short(value: Any, limit: int = 200) -> str:
    text = str(value)
    return text if len(text) <= limit else text[:limit] + "..."


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parcon", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--workers", type=int, help="override engine.workers")
    parser.add_argument("--seed", type=int, help="override partitioner.base_seed and validation.seed")
    parser.add_argument("--out", help="override the output report path")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides: dict[str, Any] = {}
    if args.workers is not None:
        overrides["engine.workers"] = args.workers
    if args.seed is not None:
        overrides["partitioner.base_seed"] = args.seed
        overrides["validation.seed"] = args.seed
    if args.out is not None:
        overrides["output"] = os.path.abspath(args.out)
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if args.out:
            doc = new_report(args.command, None, None)
            doc["error"] = _error(exc)
            try:
                write_report(doc, args.out)
            except ParconError:
                pass
        return EXIT_ERROR
    return _dispatch(args.command, cfg)


def cmd_run(cfg: RunConfig) -> int:
    return _dispatch("run", cfg)


def cmd_oracle(cfg: RunConfig) -> int:
    return _dispatch("oracle", cfg)


def cmd_viability(cfg: RunConfig) -> int:
    return _dispatch("viability", cfg)


def cmd_converge(cfg: RunConfig) -> int:
    return _dispatch("converge", cfg)


def _dispatch(command: str, cfg: RunConfig) -> int:
    code, doc = execute(command, cfg)
    if cfg.output:
        try:
            write_report(doc, cfg.output)
        except ParconError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    print(summarize(code, doc), file=sys.stderr if code == EXIT_ERROR else sys.stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
