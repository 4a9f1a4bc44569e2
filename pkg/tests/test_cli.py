"""Tests for CLI commands."""

import inspect
import json

import pytest

from wbansim import config as config_module
from wbansim.cli import app, config_command, main, presets, run, sweep
from wbansim.experiments import CSV_HEADER, parse_csv
from wbansim.trace import read_trace


@pytest.fixture(autouse=True)
def isolated_config(tmp_path, monkeypatch):
    """Keep the user's real config file out of every CLI test."""
    path = tmp_path / "home" / "config.json"
    monkeypatch.setattr(config_module, "CONFIG_FILE", path)
    monkeypatch.delenv(config_module.CONFIG_ENV_VAR, raising=False)
    return path


def test_app_exists():
    """App should be properly configured."""
    assert app is not None
    assert app.help is not None


def test_run_function_exists():
    """Run should accept a config file, overrides and a trace path."""
    sig = inspect.signature(run)
    for name in ("config", "set_", "scheme", "seed", "superframes", "trace"):
        assert name in sig.parameters


def test_sweep_function_exists():
    """Sweep should take a preset name and an output path."""
    sig = inspect.signature(sweep)
    assert "name" in sig.parameters
    assert "output" in sig.parameters
    assert "replications" in sig.parameters
    assert "workers" in sig.parameters


def test_presets_function_exists():
    """Presets takes no arguments."""
    assert len(inspect.signature(presets).parameters) == 0


def test_config_function_exists():
    """Config should have an action parameter defaulting to show."""
    sig = inspect.signature(config_command)
    assert sig.parameters["action"].default == "show"


def test_presets_lists_all(capsys):
    """Listing presets prints every preset name."""
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in ("exp1", "exp2", "exp3", "exp4", "exp5"):
        assert name in out


def test_run_prints_summary(capsys):
    """A short run prints the metrics table."""
    code = main(["run", "--superframes", "2", "--set", "n_wbans=2", "--set", "k_sensors=2"])
    assert code == 0
    assert "pr_avchs" in capsys.readouterr().out


def test_run_writes_trace(tmp_path):
    """--trace writes JSON-lines records of the run."""
    trace = tmp_path / "trace.jsonl"
    code = main(
        ["run", "--scheme", "ssa", "--superframes", "1", "--set", "n_wbans=2", "--trace", str(trace)]
    )
    assert code == 0
    records = read_trace(trace)
    assert records and {r.scheme for r in records} == {"SSA"}


def test_run_rejects_bad_override(capsys):
    """Invalid configuration exits with code 2."""
    assert main(["run", "--set", "n_wbans=0"]) == 2
    assert "Error" in capsys.readouterr().out


def test_run_rejects_missing_config_file(tmp_path):
    """A named config file that does not exist exits with code 2."""
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_sweep_writes_csv(tmp_path):
    """A tiny sweep writes the result table."""
    output = tmp_path / "results.csv"
    code = main(
        [
            "sweep", "exp3",
            "--output", str(output),
            "--replications", "1",
            "--values", "2",
            "--scheme", "csim",
            "--set", "n_wbans=2",
            "--set", "superframes_per_run=2",
        ]
    )
    assert code == 0
    assert output.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    (row,) = parse_csv(output)
    assert (row.axis, row.value, row.scheme) == ("sensors_per_wban", 2, "CSIM")


def test_sweep_unknown_preset():
    """Unknown presets exit with code 2."""
    assert main(["sweep", "exp9"]) == 2


def test_config_init_and_show(isolated_config, capsys):
    """Init writes the defaults once; show prints the resolved configuration."""
    assert main(["config", "init"]) == 0
    assert isolated_config.exists()
    saved = json.loads(isolated_config.read_text())
    assert saved["n_wbans"] == 10

    assert main(["config", "init"]) == 0
    assert "already exists" in capsys.readouterr().out

    assert main(["config", "show", "--set", "seed=4"]) == 0
    assert '"seed": 4' in capsys.readouterr().out


def test_config_path(isolated_config, capsys):
    """Path prints the file the configuration is read from."""
    assert main(["config", "path"]) == 0
    assert isolated_config.name in capsys.readouterr().out


def test_config_unknown_action():
    """Unknown actions exit with code 2."""
    assert main(["config", "frobnicate"]) == 2
