import csv
import json

import numpy as np
import pytest

from povm_squeeze import cli
from povm_squeeze.io import (
    ConfigError,
    load_config,
    matrix_from_json,
    matrix_to_json,
    parse_config,
    parse_problem,
    problem_to_json,
    to_jsonable,
)
from povm_squeeze.problems import classical_triple, generic_qubit
from povm_squeeze.runner import CSV_COLUMNS, fmt


def write_config(path, problem, **extra):
    obj = {"problem": problem, "grid": {"l": [2, 3], "delta": [2.0, 3.0], "seeds": [0, 1]}}
    obj.update(extra)
    path.write_text(json.dumps(obj))
    return str(path)


def generic_problem():
    rho, a = generic_qubit()
    return problem_to_json(a, rho=rho)


def test_matrix_roundtrip():
    M = np.array([[1, 2j], [-2j, 3]])
    assert np.array_equal(matrix_from_json(matrix_to_json(M)), M)


@pytest.mark.parametrize("obj, msg", [
    ({"dim": 2}, "entries"),
    ({"dim": 0, "entries": []}, "dim"),
    ({"dim": 2, "entries": [[1, 0]] * 3}, "4"),
    ({"dim": 1, "entries": [[1, "x"]]}, r"entries\[0\]"),
])
def test_matrix_errors(obj, msg):
    with pytest.raises(ConfigError, match=msg):
        matrix_from_json(obj, "m")


def test_parse_problem_completeness_error():
    rho, _ = generic_qubit()
    bad = problem_to_json([0.9 * np.eye(2)], rho=rho)
    with pytest.raises(ConfigError, match="completeness"):
        parse_problem(bad)


def test_parse_problem_negative_probability():
    e, a = classical_triple()
    obj = problem_to_json(a, ensemble=e)
    obj["ensemble"]["probs"] = [1.2, -0.2]
    with pytest.raises(ConfigError, match="negative probability"):
        parse_problem(obj)


def test_parse_problem_mismatches():
    rho, a = generic_qubit()
    with pytest.raises(ConfigError, match="dimensions"):
        parse_problem(problem_to_json(a, rho=np.eye(3) / 3))
    with pytest.raises(ConfigError, match="needs"):
        parse_problem({"povm": [matrix_to_json(np.eye(2))]})
    e, a2 = classical_triple()
    with pytest.raises(ConfigError, match="fidelity"):
        parse_problem(problem_to_json(a2, ensemble=e, fidelity=np.ones((3, 2))))
    with pytest.raises(ConfigError, match="ensemble average"):
        parse_problem(problem_to_json(a2, rho=np.eye(2) / 2, ensemble=e))


def test_parse_config_grid_errors():
    p = generic_problem()
    with pytest.raises(ConfigError, match="grid.l"):
        parse_config({"problem": p, "grid": {"l": [0]}})
    with pytest.raises(ConfigError, match="distinct"):
        parse_config({"problem": p, "grid": {"seeds": [1, 1]}})
    with pytest.raises(ConfigError, match="grid.delta"):
        parse_config({"problem": p, "grid": {"delta": []}})
    cfg = parse_config({"problem": p, "grid": {"l": [2]}, "caps": {"dim": 64}, "eta": 0.5})
    assert cfg.cap_dim == 64 and cfg.eta == 0.5 and cfg.delta == [3.0]


def test_load_config_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "grid": {,}\n}')
    with pytest.raises(ConfigError, match="line 2"):
        load_config(str(path))


def test_to_jsonable():
    out = to_jsonable({"a": np.arange(2), "b": np.float64(np.nan), "c": np.bool_(True), 1: (np.int64(3),)})
    assert out == {"a": [0, 1], "b": "nan", "c": True, "1": [3]}


def test_fmt():
    assert fmt(None) == "" and fmt(True) == "1" and fmt(3) == "3"
    assert fmt(0.1 + 0.2) == "0.3" and fmt(1 / 3) == "0.333333333333"


def test_cli_validate_ok(tmp_path, capsys):
    assert cli.main(["validate", "--config", write_config(tmp_path / "c.json", generic_problem())]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_validate_incomplete_povm(tmp_path, capsys):
    rho, _ = generic_qubit()
    path = write_config(tmp_path / "c.json", problem_to_json([0.9 * np.eye(2)], rho=rho))
    assert cli.main(["validate", "--config", path]) == 2
    assert "completeness" in capsys.readouterr().err


def test_cli_validate_negative_probability(tmp_path, capsys):
    e, a = classical_triple()
    obj = problem_to_json(a, ensemble=e)
    obj["ensemble"]["probs"] = [1.2, -0.2]
    assert cli.main(["validate", "--config", write_config(tmp_path / "c.json", obj)]) == 2
    assert "probability" in capsys.readouterr().err


def test_cli_missing_config(capsys):
    assert cli.main(["compress"]) == 2
    assert cli.main(["validate", "--config", "/nonexistent/x.json"]) == 1


def test_cli_compress_csv_bit_identical(tmp_path):
    path = write_config(tmp_path / "c.json", generic_problem())
    assert cli.main(["compress", "--config", path, "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["compress", "--config", path, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    a = (tmp_path / "a" / "compress.csv").read_bytes()
    b = (tmp_path / "b" / "compress.csv").read_bytes()
    assert a == b
    rows = list(csv.DictReader(a.decode().splitlines()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 8
    assert [(r["l"], r["delta"], r["seed"]) for r in rows[:2]] == [("2", "2", "0"), ("2", "2", "1")]
    report = json.loads((tmp_path / "a" / "compress.json").read_text())
    assert report["environment"]["kernel_backend"] in ("cython", "python")


def test_cli_seed_env_override(tmp_path, monkeypatch):
    path = write_config(tmp_path / "c.json", generic_problem())
    monkeypatch.setenv(cli.SEED_ENV, "7")
    assert cli.main(["compress", "--config", path, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "compress.csv").read_text().splitlines()))
    assert {r["seed"] for r in rows} == {"7"}


def test_cli_cap_exceeded_recorded_per_cell(tmp_path, capsys):
    path = write_config(tmp_path / "c.json", generic_problem())
    assert cli.main(["compress", "--config", path, "--out", str(tmp_path / "o"), "--cap-dim", "4"]) == 0
    rows = list(csv.DictReader((tmp_path / "o" / "compress.csv").read_text().splitlines()))
    # l = 2 fits in dimension 4, l = 3 does not
    assert {r["success"] for r in rows if r["l"] == "2"} == {"1"}
    assert {r["success"] for r in rows if r["l"] == "3"} == {"0"}
    assert "CapExceeded" in capsys.readouterr().err


def test_cli_suite_corrupted_fixture(tmp_path, capsys):
    rho, _ = generic_qubit()
    path = write_config(tmp_path / "c.json", problem_to_json([0.9 * np.eye(2)], rho=rho),
                        suite={"chernoff_trials": 50})
    assert cli.main(["suite", "--config", path]) == 3
    out = capsys.readouterr().out
    assert "problem_povm" in out and "FAIL" in out


def test_cli_holevo(tmp_path, capsys):
    e, a = classical_triple()
    path = write_config(tmp_path / "c.json", problem_to_json(a, ensemble=e), holevo={"l": 2, "delta": 3.0})
    assert cli.main(["holevo", "--config", path, "--out", str(tmp_path / "h")]) == 0
    out = capsys.readouterr().out
    assert "dual triple: ok" in out and "chain: holds" in out
    rep = json.loads((tmp_path / "h" / "holevo.json").read_text())
    assert rep["holevo"]["slack_ensemble"] == pytest.approx(0.0, abs=1e-12)


def test_cli_holevo_needs_ensemble(tmp_path):
    assert cli.main(["holevo", "--config", write_config(tmp_path / "c.json", generic_problem())]) == 2


def test_cli_chernoff(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"chernoff": {"grid": [[2, 0.5, 0.2, 32]], "trials": 200, "seed": 1}}))
    assert cli.main(["chernoff-mc", "--config", str(path), "--out", str(tmp_path / "o")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "dimK,s,eta,M,trials,empirical_tail,bound" and len(lines) == 2
    assert (tmp_path / "o" / "chernoff.csv").read_text().strip().splitlines() == lines


def test_shipped_configs_validate():
    import glob
    import os

    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    paths = glob.glob(os.path.join(here, "configs", "*.json"))
    assert paths
    for p in paths:
        load_config(p)
