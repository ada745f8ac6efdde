"""Command-line front end, configuration files and JSON reports."""

from .config import RunConfig, checksum, ingest, load_config, parse_config
from .main import cmd_converge, cmd_oracle, cmd_run, cmd_viability, execute, main
from .report import read_report, result_from_dict, result_to_dict, stable_view, write_report

__all__ = ["RunConfig", "checksum", "cmd_converge", "cmd_oracle", "cmd_run", "cmd_viability",
           "execute", "ingest", "load_config", "main", "parse_config", "read_report",
           "result_from_dict", "result_to_dict", "stable_view", "write_report"]
