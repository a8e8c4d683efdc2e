"""Command-line runner and report emitters."""

import json

import polars as pl
import pytest

from src.cohomolib import __version__
from src.cohomolib.cli import main, validate_config
from src.cohomolib.errors import (
    EXIT_CONFIG,
    EXIT_OK,
    CertificateFailed,
    ConfigParse,
    NoQualifyingLevel,
    exit_code_for,
)
from src.cohomolib.models import ExperimentConfig, NumericsConfig
from src.cohomolib.output import envelope, format_float, render_json, rows_to_frame


def test_cf_prints_envelope(capsys):
    code = main(["cf", "--alpha", "golden", "--depth", "10", "--json"])
    assert code == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["version"] == __version__
    assert result["command"] == "cf"
    assert result["config"]["depth"] == 10
    assert result["checks"] == {"closest_returns": True}
    assert result["passed"] is True
    assert result["report"]["liouville_levels"] is not None


def test_empty_config_rejected(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("{}")
    assert main(["cf", "--config", str(path)]) == EXIT_CONFIG


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "extra.json"
    path.write_text(json.dumps({"command": "cf", "alpah": "golden"}))
    assert main(["cf", "--config", str(path)]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["cf", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_validate_config_reports_fields():
    with pytest.raises(ConfigParse) as info:
        validate_config(json.dumps({"command": "cf", "depth": "deep"}))
    assert "depth" in info.value.context["fields"]
    with pytest.raises(ConfigParse):
        validate_config(json.dumps({"command": "plot"}))


def test_config_file_drives_run(tmp_path, capsys):
    path = tmp_path / "cf.json"
    config = ExperimentConfig(command="cf", alpha="silver", depth=12)
    path.write_text(config.model_dump_json())
    assert main(["cf", "--config", str(path), "--json"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["config"]["alpha"] == "silver"


def test_dk_csv(tmp_path):
    out = tmp_path / "dk.csv"
    code = main(["dk", "--map", "rotation:rho=golden", "--phi", "cos", "--grid", "1024",
                 "--csv", str(out)])
    assert code == EXIT_OK
    frame = pl.read_csv(out)
    assert frame.height > 0
    sup_dev = frame["sup_dev"].cast(pl.Float64)
    assert sup_dev.max() <= 4.0


def test_json_output_is_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["herman", "--map", "rotation:rho=golden", "--grid", "1024"]
    assert main(argv + ["--json-path", str(first)]) == EXIT_OK
    assert main(argv + ["--json-path", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()


def test_coboundary_with_explicit_levels(capsys):
    code = main(["coboundary", "--map", "rotation:rho=golden", "--phi", "cos", "--r", "11",
                 "--levels", "3", "4", "--epsilon", "1", "--grid", "1024", "--json"])
    assert code == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["checks"]["certificate"] is True
    assert [level["n"] for level in result["report"]["levels"]] == [3, 4]


def test_calculus_print_pr(capsys):
    assert main(["calculus", "--print-pr", "3", "--json"]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["report"]["r"] == 3
    assert result["report"]["terms"] == 3


def test_config_round_trip():
    config = ExperimentConfig(
        command="coboundary", levels=[3, 4], numerics=NumericsConfig(grid_size=512)
    )
    again = ExperimentConfig.model_validate_json(config.model_dump_json())
    assert again == config


def test_format_float():
    assert format_float(float("inf")) == "inf"
    assert format_float(float("-inf")) == "-inf"
    assert format_float(float("nan")) == "nan"
    assert float(format_float(0.1)) == 0.1
    assert format_float(0.1) == "0.10000000000000001"


def test_rows_to_frame_renders_values():
    frame = rows_to_frame([{"n": 1, "x": 0.5, "ok": True, "z": [0, 3]}])
    assert frame["x"][0] == "0.5"
    assert frame["z"][0] == "0;3"
    assert frame["n"][0] == 1


def test_envelope_fails_with_any_check():
    config = ExperimentConfig(command="cf")
    result = envelope({"a": 1}, config, {"one": True, "two": False})
    assert result.passed is False
    assert json.loads(render_json(result))["checks"] == {"one": True, "two": False}


def test_error_to_dict_is_json():
    error = CertificateFailed("clause a failed", clause="a", level=4, points=(0.1, 0.2))
    data = json.loads(json.dumps(error.to_dict()))
    assert data["error"] == "CertificateFailed"
    assert data["context"] == {"clause": "a", "level": 4, "points": [0.1, 0.2]}


def test_exit_codes():
    assert exit_code_for(ConfigParse("bad")) == 4
    assert exit_code_for(NoQualifyingLevel("none")) == 3
    assert exit_code_for(CertificateFailed("no")) == 2


def test_corollary_c_needs_a_level_past_one(capsys):
    code = main(["corollary-c", "--map", "rotation:rho=golden", "--phi", "cos", "--levels", "1",
                 "--grid", "1024"])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    error = json.loads(err[err.index("{\n"):])
    assert error["error"] == "ConfigParse"
    assert error["context"]["fields"] == ["levels"]


def test_threads_from_environment_apply_to_config_files(tmp_path, capsys, monkeypatch):
    path = tmp_path / "cf.json"
    path.write_text(ExperimentConfig(command="cf", depth=8).model_dump_json())
    monkeypatch.setenv("COHOMOLIB_THREADS", "3")
    assert main(["cf", "--config", str(path), "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["config"]["numerics"]["threads"] == 3
    assert main(["cf", "--depth", "8", "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["config"]["numerics"]["threads"] == 3
    monkeypatch.setenv("COHOMOLIB_THREADS", "many")
    assert main(["cf", "--config", str(path)]) == EXIT_CONFIG


def test_renorm_seed_is_reproducible(tmp_path):
    argv = ["renorm", "--map", "rotation:rho=golden", "--phi", "cos", "--level", "4",
            "--grid", "1024", "--seed", "7"]
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["--json-path", str(first)]) == EXIT_OK
    assert main(argv + ["--json-path", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    sample = json.loads(first.read_text())["report"]["sample_points"]
    assert sample == {"seed": 7, "random": 256, "total": 513}
