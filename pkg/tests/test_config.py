"""Tests for configuration loading, overrides and validation."""

import json

import pytest

from wbansim import config as config_module
from wbansim.config import (
    ConfigError,
    ScenarioConfig,
    Scheme,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    get_config_path,
    load_config,
    resolve_config,
    save_config,
    validate_config,
)
from wbansim.metrics import ReuseDefinition


@pytest.fixture
def isolated_config(tmp_path, monkeypatch):
    """Point the default config file into a temp dir and clear the env var."""
    path = tmp_path / "home" / "config.json"
    monkeypatch.setattr(config_module, "CONFIG_FILE", path)
    monkeypatch.delenv(config_module.CONFIG_ENV_VAR, raising=False)
    return path


def test_defaults_are_valid():
    """The default scenario should pass validation."""
    validate_config(ScenarioConfig())


def test_config_path_priority(tmp_path, isolated_config, monkeypatch):
    """Explicit path beats the env var, which beats the default file."""
    assert get_config_path() == (isolated_config, False)

    env_file = tmp_path / "env.json"
    monkeypatch.setenv(config_module.CONFIG_ENV_VAR, str(env_file))
    assert get_config_path() == (env_file, True)

    explicit = tmp_path / "explicit.json"
    assert get_config_path(explicit) == (explicit, True)


def test_missing_default_file_gives_defaults(isolated_config):
    """No config file means an empty document."""
    assert load_config() == {}
    assert resolve_config() == ScenarioConfig()


def test_missing_explicit_file_is_an_error(tmp_path, isolated_config):
    """A named file that does not exist is a ConfigError."""
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")


def test_malformed_json_is_an_error(tmp_path, isolated_config):
    """Unparseable files are reported as ConfigError."""
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_save_and_load_round_trip(isolated_config):
    """Saving the defaults and loading them back gives the same scenario."""
    save_config(config_to_dict(ScenarioConfig()))
    assert isolated_config.exists()
    assert config_from_dict(load_config()) == ScenarioConfig()


def test_nested_sections_merge_with_defaults():
    """Partial sections keep the defaults of keys they do not mention."""
    config = config_from_dict({"scheme": "SSA", "radio": {"snr_threshold_db": -30}})
    assert config.scheme is Scheme.SSA
    assert config.radio.snr_threshold_db == -30.0
    assert config.radio.noise_floor_dbm == ScenarioConfig().radio.noise_floor_dbm


def test_unknown_keys_are_rejected():
    """Typos surface as ConfigError naming the dotted key."""
    with pytest.raises(ConfigError, match="radio.snr_treshold_db"):
        config_from_dict({"radio": {"snr_treshold_db": -30}})


def test_overrides_coerce_types():
    """Dotted overrides are coerced to the type of the default."""
    config = apply_overrides(
        ScenarioConfig(),
        [
            "n_wbans=20",
            "radio.collision_prob=0.5",
            "metrics.reuse_definition=wbans_per_channel",
            "noise.scales=" + ",".join(["2"] * 16),
        ],
    )
    assert config.n_wbans == 20
    assert config.radio.collision_prob == 0.5
    assert config.metrics.reuse_definition is ReuseDefinition.WBANS_PER_CHANNEL
    assert config.noise.scales == (2.0,) * 16


def test_bad_override_values_are_rejected():
    """Malformed overrides and values raise ConfigError."""
    with pytest.raises(ConfigError):
        apply_overrides(ScenarioConfig(), ["n_wbans"])
    with pytest.raises(ConfigError):
        apply_overrides(ScenarioConfig(), ["n_wbans=many"])
    with pytest.raises(ConfigError):
        apply_overrides(ScenarioConfig(), ["n_wbans=2.5"])
    with pytest.raises(ConfigError):
        apply_overrides(ScenarioConfig(), ["scheme=TDMA"])
    with pytest.raises(ConfigError):
        apply_overrides(ScenarioConfig(), ["radio=3"])


def test_validation_lists_every_problem():
    """All violated constraints are reported together."""
    config = apply_overrides(
        ScenarioConfig(), ["n_wbans=0", "noise.lambda1=5", "radio.collision_prob=2"]
    )
    with pytest.raises(ConfigError) as excinfo:
        validate_config(config)
    message = str(excinfo.value)
    assert "n_wbans" in message
    assert "lambda1" in message
    assert "collision_prob" in message


def test_config_file_and_overrides_compose(tmp_path, isolated_config):
    """Overrides are applied on top of the file."""
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"n_wbans": 12, "seed": 3}))
    config = resolve_config(path, ["seed=9"])
    assert config.n_wbans == 12
    assert config.seed == 9
