"""Scenario configuration: defaults, JSON files and dotted command-line overrides."""

import json
import os
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, Optional, Sequence

from .engine import ContractError, SimulationError
from .metrics import EnergyModel, MetricsParams
from .protocol import ProtocolParams
from .spectrum import NoiseModel
from .world import BackgroundParams, Geometry, RadioParams

CONFIG_DIR = Path.home() / ".wbansim"
CONFIG_FILE = CONFIG_DIR / "config.json"
CONFIG_ENV_VAR = "WBANSIM_CONFIG"


class ConfigError(SimulationError, ValueError):
    """Invalid configuration, override or unreadable config file."""


class Scheme(str, Enum):
    CSIM = "CSIM"
    SSA = "SSA"


class ClusterParams(NamedTuple):
    """Cluster composition used when a sweep sets the cluster size."""

    iot_per_wban: int = 3


class ScenarioConfig(NamedTuple):
    """Everything one simulation run depends on."""

    scheme: Scheme = Scheme.CSIM
    n_wbans: int = 10
    k_sensors: int = 10
    n_iot_devices: int = 0
    seed: int = 1
    superframes_per_run: int = 100
    replications: int = 30
    radio: RadioParams = RadioParams()
    noise: NoiseModel = NoiseModel()
    protocol: ProtocolParams = ProtocolParams()
    background: BackgroundParams = BackgroundParams()
    geometry: Geometry = Geometry()
    energy: EnergyModel = EnergyModel()
    metrics: MetricsParams = MetricsParams()
    cluster: ClusterParams = ClusterParams()


def get_config_path(path: Optional[Path] = None) -> tuple[Path, bool]:
    """Resolve which config file to read.

    Priority:
    1. `path` (from --config)
    2. WBANSIM_CONFIG env var (if set)
    3. Default: ~/.wbansim/config.json

    Returns
    -------
    tuple[Path, bool]
        The path and whether it was named explicitly (missing explicit files are errors).
    """
    if path is not None:
        return Path(path).expanduser(), True

    env_path = os.getenv(CONFIG_ENV_VAR)
    if env_path:
        return Path(env_path).expanduser(), True

    return CONFIG_FILE, False


def load_config(path: Optional[Path] = None) -> dict[str, Any]:
    """Load the raw configuration document.

    Returns an empty dict if the default file doesn't exist.
    """
    config_path, explicit = get_config_path(path)
    if not config_path.exists():
        if explicit:
            raise ConfigError(f"config file not found: {config_path}")
        return {}

    try:
        with open(config_path, "r") as f:
            data = json.load(f)
    except (json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"cannot read config file {config_path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {config_path} must hold a JSON object")
    return data


def save_config(data: dict[str, Any], path: Optional[Path] = None) -> None:
    """Save a configuration document (defaults to ~/.wbansim/config.json)."""
    target = Path(path) if path is not None else CONFIG_FILE
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w") as f:
        json.dump(data, f, indent=2)


def _is_record(value: Any) -> bool:
    return isinstance(value, tuple) and hasattr(value, "_fields")


_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _coerce(key: str, value: Any, default: Any) -> Any:
    try:
        if isinstance(default, Enum):
            return type(default)(value)
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            if str(value).lower() in _TRUE:
                return True
            if str(value).lower() in _FALSE:
                return False
            raise ValueError(value)
        if isinstance(default, int):
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if isinstance(default, str):
            return str(value)
        if isinstance(default, tuple):
            items = value.split(",") if isinstance(value, str) else list(value)
            return tuple(float(item) for item in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key}: {value!r}") from exc
    raise ConfigError(f"cannot set {key}")


def _merge(record: Any, data: dict[str, Any], prefix: str = "") -> Any:
    updates = {}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in record._fields:
            raise ConfigError(f"unknown configuration key: {dotted}")
        current = getattr(record, key)
        if _is_record(current):
            if not isinstance(value, dict):
                raise ConfigError(f"{dotted} is a section; expected an object")
            updates[key] = _merge(current, value, dotted + ".")
        else:
            updates[key] = _coerce(dotted, value, current)
    return record._replace(**updates)


def config_from_dict(data: dict[str, Any]) -> ScenarioConfig:
    """Build a ScenarioConfig; missing keys keep their defaults."""
    return _merge(ScenarioConfig(), data)


def config_to_dict(record: Any) -> Any:
    """JSON-ready form of a config record (enums as their values)."""
    if _is_record(record):
        return {name: config_to_dict(getattr(record, name)) for name in record._fields}
    if isinstance(record, Enum):
        return record.value
    if isinstance(record, tuple):
        return list(record)
    return record


def apply_overrides(config: ScenarioConfig, overrides: Sequence[str]) -> ScenarioConfig:
    """Apply `key=value` overrides where key is a dotted path, e.g. radio.snr_threshold_db=-30."""
    for override in overrides:
        key, sep, value = override.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {override!r}")
        nested: dict[str, Any] = {}
        cursor = nested
        parts = key.split(".")
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
        cursor[parts[-1]] = value.strip()
        config = _merge(config, nested)
    return config


def validate_config(config: ScenarioConfig) -> None:
    """Raise ConfigError listing every violated constraint."""
    problems = []

    def require(condition: bool, message: str) -> None:
        if not condition:
            problems.append(message)

    require(config.n_wbans >= 1, "n_wbans must be >= 1")
    require(config.k_sensors >= 1, "k_sensors must be >= 1")
    require(config.n_iot_devices >= 0, "n_iot_devices must be >= 0")
    require(config.seed >= 0, "seed must be >= 0")
    require(config.superframes_per_run >= 1, "superframes_per_run must be >= 1")
    require(config.replications >= 1, "replications must be >= 1")

    try:
        config.noise.check()
    except ContractError as exc:
        problems.append(f"noise: {exc}")

    radio = config.radio
    require(radio.path_loss_exponent > 0, "radio.path_loss_exponent must be > 0")
    require(0.0 <= radio.collision_prob <= 1.0, "radio.collision_prob must be in [0, 1]")
    require(radio.ble_range_m > 0, "radio.ble_range_m must be > 0")
    require(radio.slot_duration_s > 0, "radio.slot_duration_s must be > 0")

    protocol = config.protocol
    require(protocol.fcs_length >= 2, "protocol.fcs_length must be >= 2")
    require(protocol.inactive_length >= 0, "protocol.inactive_length must be >= 0")
    require(
        0.0 <= protocol.stability_threshold <= 1.0,
        "protocol.stability_threshold must be in [0, 1]",
    )
    require(protocol.occupancy_gain >= 0, "protocol.occupancy_gain must be >= 0")
    require(protocol.ble_period >= 1, "protocol.ble_period must be >= 1")

    background = config.background
    require(0.0 <= background.wifi_fraction <= 1.0, "background.wifi_fraction must be in [0, 1]")
    require(0.0 <= background.duty_cycle <= 1.0, "background.duty_cycle must be in [0, 1]")
    require(background.epoch_superframes >= 1, "background.epoch_superframes must be >= 1")

    geometry = config.geometry
    require(geometry.body_radius_m >= 0, "geometry.body_radius_m must be >= 0")
    for name in ("room_x", "room_y", "room_z"):
        require(
            getattr(geometry, name) > 2 * geometry.body_radius_m,
            f"geometry.{name} must exceed twice the body radius",
        )

    energy = config.energy
    for name in ("e_idle", "e_ble_rx", "e_scan", "e_cr"):
        require(getattr(energy, name) >= 0, f"energy.{name} must be >= 0")
    require(energy.scan_period_wo >= 1, "energy.scan_period_wo must be >= 1")

    require(config.cluster.iot_per_wban >= 0, "cluster.iot_per_wban must be >= 0")

    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))


def resolve_config(
    path: Optional[Path] = None, overrides: Sequence[str] = ()
) -> ScenarioConfig:
    """File (or defaults), then overrides, then validation."""
    config = apply_overrides(config_from_dict(load_config(path)), overrides)
    validate_config(config)
    return config
