import json
import struct

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import ulps_apart
from parcon.cli import (execute, ingest, load_config, main, read_report, result_from_dict,
                        result_to_dict, stable_view)
from parcon.cli.config import checksum, parse_config
from parcon.errors import ConfigError, DimensionMismatch, NonfiniteValue, ParseError
from parcon.measure import (ExtremesResult, HistogramResult, KnnResult, MeanResult, MleResult,
                            OutlierResult, PValueResult, SortedResult)


@pytest.fixture
def dataset(tmp_path):
    x = np.random.default_rng(42).normal(2.0, 1.0, size=(2000, 1))
    path = tmp_path / "x.csv"
    np.savetxt(path, x, delimiter=",", fmt="%.17g")
    return path, x


def write_config(tmp_path, name="cfg.json", **blocks):
    cfg = {"data": {"path": "x.csv", "format": "csv"},
           "problem": {"id": "mean"},
           "partitioner": {"scheme": "random_balanced", "L": 4},
           "K": 2}
    cfg.update(blocks)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


# ------------------------------------------------------------- ingestion

def chunks_of(source, size=3):
    return [(s, r.tolist()) for s, r in source.chunks(size)]


def test_csv_two_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1.0,2.0\n3.0,4.0")
    s = ingest(p, "csv")
    assert (s.n, s.d) == (2, 2)
    assert chunks_of(s) == [(0, [[1.0, 2.0], [3.0, 4.0]])]


def test_csv_parse_error_names_row(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1.0\nabc\n")
    with pytest.raises(ParseError, match="row 2") as info:
        ingest(p, "csv")
    assert info.value.row == 2 and info.value.column == 1


def test_csv_header_and_label(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("y,x1,x2\n1,0.5,0.25\n0,1.5,2\n")
    s = ingest(p, "csv", {"has_header": True, "label_column": 0})
    assert chunks_of(s) == [(0, [[0.5, 0.25, 1.0], [1.5, 2.0, 0.0]])]


def test_csv_ragged(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(DimensionMismatch, match="row 2"):
        ingest(p, "csv")


def test_csv_nonfinite(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1\nnan\n")
    with pytest.raises(NonfiniteValue):
        ingest(p, "csv")


def test_binary_round_trip(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(struct.pack("<2d", 0.1, -7.25))
    s = ingest(p, "f64le-binary", {"d": 2})
    assert s.n == 1 and chunks_of(s) == [(0, [[0.1, -7.25]])]


def test_binary_bad_length(tmp_path):
    p = tmp_path / "a.bin"
    p.write_bytes(b"\0" * 12)
    with pytest.raises(DimensionMismatch):
        ingest(p, "f64le-binary", {"d": 1})


def test_jsonl(tmp_path):
    p = tmp_path / "a.jsonl"
    p.write_text("[1, 2.5]\n[3, 4]\n")
    s = ingest(p, "jsonl")
    assert chunks_of(s, 1) == [(0, [[1.0, 2.5]]), (1, [[3.0, 4.0]])]
    p.write_text('[1, 2]\n[3, "x"]\n')
    with pytest.raises(ParseError, match="row 2, column 2"):
        ingest(p, "jsonl")


def test_ingestion_is_deterministic(dataset):
    path, _ = dataset
    assert chunks_of(ingest(path, "csv"), 77) == chunks_of(ingest(path, "csv"), 77)


# --------------------------------------------------------------- commands

def test_run_matches_oracle(dataset, tmp_path):
    write_config(tmp_path)
    assert main(["run", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "r.json")]) == 0
    assert main(["oracle", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o.json")]) == 0
    r, o = read_report(tmp_path / "r.json"), read_report(tmp_path / "o.json")
    assert ulps_apart(r["result"]["final"]["mean"][0], o["oracle"]["result"]["mean"][0]) <= 8
    assert r["config_checksum"] == o["config_checksum"]


def test_viability_sort_exit_zero(dataset, tmp_path, capsys):
    cfg = write_config(tmp_path, problem={"id": "sort"},
                       partitioner={"scheme": "range_bounded", "L": 4}, validation={"K": 30})
    assert main(["viability", "--config", str(cfg), "--out", str(tmp_path / "v.json")]) == 0
    assert read_report(tmp_path / "v.json")["viability"]["verdict"] == "viable"
    assert "viable" in capsys.readouterr().out


def test_viability_not_viable_exit_one(tmp_path):
    x = np.random.default_rng(0).normal(size=(2000, 1))
    np.savetxt(tmp_path / "x.csv", x, delimiter=",", fmt="%.17g")
    cfg = write_config(tmp_path, problem={"id": "test", "mu0": 0.0, "sigma": 1.0},
                       validation={"K": 100, "seed": 1})
    assert main(["viability", "--config", str(cfg)]) == 1


def test_missing_L_names_key(dataset, tmp_path, capsys):
    cfg = write_config(tmp_path, partitioner={"scheme": "random_balanced"})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "e.json")]) == 2
    assert "partitioner.L" in capsys.readouterr().err
    assert read_report(tmp_path / "e.json")["error"]["key"] == "partitioner.L"


def test_engine_errors_land_in_report(tmp_path):
    (tmp_path / "x.csv").write_text("1\n2\n")
    cfg = write_config(tmp_path, partitioner={"scheme": "random_balanced", "L": 5})
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "e.json")]) == 2
    assert read_report(tmp_path / "e.json")["error"]["type"] == "InvalidPartitionCount"


def test_flags_override_config(dataset, tmp_path):
    cfg = write_config(tmp_path)
    main(["run", "--config", str(cfg), "--seed", "11", "--workers", "3", "--out", str(tmp_path / "r.json")])
    rep = read_report(tmp_path / "r.json")
    assert rep["config"]["partitioner"]["base_seed"] == 11
    assert rep["engine"]["workers"] == 3


def test_converge_command(dataset, tmp_path):
    cfg = write_config(tmp_path, partitioner={"scheme": "subsample", "L": 20, "part_size": 100},
                       validation={"K_max": 5}, combiner={"second_stage": "oracle_argmin"})
    assert main(["converge", "--config", str(cfg), "--out", str(tmp_path / "c.json")]) == 0
    d = read_report(tmp_path / "c.json")["convergence"]["distances"]
    assert len(d) == 5 and all(b <= a for a, b in zip(d, d[1:]))


def test_spec_echo_reproduces_report(dataset, tmp_path):
    cfg = load_config(write_config(tmp_path, problem={"id": "histogram", "edges": [0, 1, 2, 3]}, K=3))
    code, first = execute("run", cfg)
    echo = tmp_path / "echo.json"
    echo.write_text(json.dumps(first["config"]))
    again = load_config(echo)
    code2, second = execute("run", again)
    assert code == code2 == 0
    assert stable_view(first) == stable_view(second)
    assert first["config_checksum"] == checksum(json.loads(echo.read_text()))


def test_relative_paths_resolve_against_config(dataset, tmp_path, monkeypatch):
    monkeypatch.chdir("/")
    cfg = load_config(write_config(tmp_path))
    assert cfg.data.path == str(tmp_path / "x.csv")


def test_config_key_paths():
    base = {"data": {"path": "x", "format": "csv"}, "problem": {"id": "mean"},
            "partitioner": {"scheme": "random_balanced", "L": 2}}
    cases = [
        ({"data": {"path": "x", "format": "xml"}}, "data.format"),
        ({"problem": {"id": "knn", "k": 2}}, "problem.query"),
        ({"problem": {"id": "mean", "k": 2}}, "problem.k"),
        ({"partitioner": {"scheme": "subsample", "L": 2}}, "partitioner.part_size"),
        ({"partitioner": {"scheme": "random_balanced", "L": 0}}, "partitioner.L"),
        ({"partitioner": {"scheme": "random_balanced", "L": True}}, "partitioner.L"),
        ({"K": 0}, "K"),
        ({"engine": {"workers": 0}}, "engine.workers"),
        ({"combiner": {"adjust": "bonferroni"}}, "combiner.adjust"),
        ({"extra": 1}, "extra"),
        ({"data": {"path": "x", "format": "f64le-binary"}}, "data.d"),
    ]
    for change, key in cases:
        raw = {**base, **change}
        with pytest.raises(ConfigError) as info:
            parse_config(raw)
        assert info.value.key == key, (change, info.value)


# --------------------------------------------------- exit-code contract

def _mutations():
    leaf = st.one_of(st.none(), st.booleans(), st.integers(-3, 3), st.text(max_size=4),
                     st.floats(allow_nan=True), st.lists(st.integers(), max_size=2))
    return st.lists(st.tuples(st.sampled_from(["data", "problem", "partitioner", "K", "combiner",
                                               "validation", "engine"]),
                              st.sampled_from(["path", "format", "id", "L", "scheme", "k", "edges",
                                               "workers", "K", "adjust", "d", "part_size", "bounds",
                                               None]),
                              leaf), min_size=1, max_size=3)


@settings(max_examples=60, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(mutations=_mutations(), command=st.sampled_from(["run", "oracle", "viability", "converge"]))
def test_faulty_configs_exit_cleanly(tmp_path, mutations, command):
    np.savetxt(tmp_path / "x.csv", np.arange(40.0).reshape(-1, 1), delimiter=",")
    cfg = {"data": {"path": "x.csv", "format": "csv"}, "problem": {"id": "mean"},
           "partitioner": {"scheme": "random_balanced", "L": 4}, "K": 2,
           "validation": {"K": 3, "K_max": 3}}
    for block, key, value in mutations:
        if key is None or not isinstance(cfg.get(block), dict):
            cfg[block] = value
        else:
            cfg[block][key] = value
    (tmp_path / "f.json").write_text(json.dumps(cfg))
    code = main([command, "--config", str(tmp_path / "f.json")])
    assert code in (0, 1, 2)


@pytest.mark.parametrize("content", ["", "{", "[]", '{"data": 3}', "\xff"])
def test_unreadable_configs(tmp_path, content):
    (tmp_path / "f.json").write_text(content, encoding="latin-1")
    assert main(["run", "--config", str(tmp_path / "f.json")]) == 2


def test_missing_config_file(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2


def test_bad_data_file_is_error(tmp_path):
    (tmp_path / "x.csv").write_text("1\nfoo\n")
    cfg = write_config(tmp_path)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "e.json")]) == 2
    err = read_report(tmp_path / "e.json")["error"]
    assert err["type"] == "ParseError" and err["row"] == 2


# ------------------------------------------------------- result encoding

RESULTS = [
    MeanResult((1.0, 0.1), 3),
    SortedResult(np.array([[1.0, 2.0], [3.0, 0.5]]), [4, 1]),
    ExtremesResult((0.0,), (1e300,)),
    HistogramResult((0.0, 1.0, 2.0), (3, 0)),
    PValueResult(0.123456789012345),
    MleResult((0.5, 2.25), -1234.5678, "gaussian", True, 0, 2),
    KnnResult(np.array([[0.1], [0.3]]), [0.05, 0.15], [7, 2], False),
    OutlierResult([0, 2], [1], [1.0, 1.5], [99.0]),
]


@pytest.mark.parametrize("result", RESULTS, ids=lambda r: type(r).__name__)
def test_results_round_trip(result):
    doc = json.loads(json.dumps(result_to_dict(result)))
    back = result_from_dict(doc)
    assert back == result
    assert result_to_dict(back) == result_to_dict(result)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_bitwise(v):
    back = result_from_dict(json.loads(json.dumps(result_to_dict(PValueResult(abs(v) % 1.0)))))
    assert back.p == abs(v) % 1.0
