"""Experiment harness: sweep presets, replications and CSV result tables."""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

from .config import ConfigError, Scheme, ScenarioConfig, validate_config
from .engine import ContractError, replication_seed
from .metrics import RunSummary
from .simulation import run_simulation

logger = logging.getLogger(__name__)

Number = Union[int, float]

CSV_HEADER = ("axis", "value", "scheme", "metric", "mean", "std", "replications", "seed")
METRICS = RunSummary._fields


class SweepAxis(str, Enum):
    CLUSTER_SIZE = "cluster_size"
    SNR_THRESHOLD = "snr_threshold"
    SENSORS_PER_WBAN = "sensors_per_wban"
    INTERFERENCE_THRESHOLD = "interference_threshold"

    @property
    def integral(self) -> bool:
        return self in (SweepAxis.CLUSTER_SIZE, SweepAxis.SENSORS_PER_WBAN)


class SweepSpec(NamedTuple):
    """One experiment: an axis, its values, the fixed scenario and what to report."""

    name: str
    axis: SweepAxis
    values: tuple[Number, ...]
    fixed: ScenarioConfig
    schemes: tuple[Scheme, ...] = (Scheme.CSIM, Scheme.SSA)
    metrics: tuple[str, ...] = ("pr_avchs",)
    description: str = ""

    def check(self) -> None:
        """Raise ConfigError unless the sweep can run."""
        if not self.values:
            raise ConfigError(f"sweep {self.name} has no axis values")
        steps = np.diff(np.asarray(self.values, dtype=float))
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError(f"sweep {self.name}: axis values must be strictly monotone")
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown:
            raise ConfigError(f"sweep {self.name}: unknown metrics {', '.join(unknown)}")
        if not self.schemes:
            raise ConfigError(f"sweep {self.name} has no schemes")


class ResultRow(NamedTuple):
    axis: str
    value: Number
    scheme: str
    metric: str
    mean: float
    std: float
    replications: int
    seed: int


def cluster_composition(cluster_size: int, iot_per_wban: int) -> tuple[int, int]:
    """Split a cluster of Ω devices into (WBANs, IoT devices) at 1 : iot_per_wban."""
    if cluster_size < 1:
        raise ConfigError(f"cluster size must be >= 1, got {cluster_size}")
    n_wbans = max(1, cluster_size // (1 + iot_per_wban))
    return n_wbans, cluster_size - n_wbans


def apply_axis(config: ScenarioConfig, axis: SweepAxis, value: Number) -> ScenarioConfig:
    """Return the scenario of one sweep point."""
    if axis is SweepAxis.CLUSTER_SIZE:
        n_wbans, n_iot = cluster_composition(int(value), config.cluster.iot_per_wban)
        return config._replace(n_wbans=n_wbans, n_iot_devices=n_iot)
    if axis is SweepAxis.SENSORS_PER_WBAN:
        return config._replace(k_sensors=int(value))
    # Both threshold axes drive the SINR decision threshold.
    return config._replace(radio=config.radio._replace(snr_threshold_db=float(value)))


def _exp1(base: ScenarioConfig) -> SweepSpec:
    return SweepSpec(
        name="exp1",
        axis=SweepAxis.CLUSTER_SIZE,
        values=tuple(range(5, 61, 5)),
        fixed=base._replace(k_sensors=10),
        description="Channel availability vs cluster size (WBANs and background devices 1:3)",
    )


def _exp2(base: ScenarioConfig) -> SweepSpec:
    return SweepSpec(
        name="exp2",
        axis=SweepAxis.SNR_THRESHOLD,
        values=tuple(float(v) for v in range(-50, -9, 5)),
        fixed=base._replace(n_wbans=10, k_sensors=10, n_iot_devices=0),
        description="Channel availability vs SNR threshold, 10 WBANs",
    )


def _exp3(base: ScenarioConfig) -> SweepSpec:
    return SweepSpec(
        name="exp3",
        axis=SweepAxis.SENSORS_PER_WBAN,
        values=tuple(range(2, 21, 2)),
        fixed=base._replace(n_wbans=10, n_iot_devices=0),
        description="Channel availability vs sensors per WBAN, 10 WBANs",
    )


def _exp4(base: ScenarioConfig) -> SweepSpec:
    return SweepSpec(
        name="exp4",
        axis=SweepAxis.INTERFERENCE_THRESHOLD,
        values=tuple(float(v) for v in range(-40, -4, 5)),
        fixed=base._replace(
            n_wbans=10,
            k_sensors=10,
            n_iot_devices=0,
        ),
        metrics=("avg_reuse_factor",),
        description="Average reuse factor vs interference threshold",
    )


def _exp5(base: ScenarioConfig) -> SweepSpec:
    return SweepSpec(
        name="exp5",
        axis=SweepAxis.INTERFERENCE_THRESHOLD,
        values=tuple(float(v) for v in range(-40, -4, 5)),
        fixed=base._replace(n_wbans=10, k_sensors=10, n_iot_devices=30),
        schemes=(Scheme.CSIM,),
        metrics=("avg_energy_w_mw", "avg_energy_wo_mw"),
        description="Coordinator energy with and without BLE alerts vs interference threshold",
    )


PRESETS: dict[str, Callable[[ScenarioConfig], SweepSpec]] = {
    "exp1": _exp1,
    "exp2": _exp2,
    "exp3": _exp3,
    "exp4": _exp4,
    "exp5": _exp5,
}


def preset(name: str, base: Optional[ScenarioConfig] = None) -> SweepSpec:
    """Build a preset sweep on top of `base` (defaults when omitted)."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")
    return PRESETS[name](base if base is not None else ScenarioConfig())


def run_replication(config: ScenarioConfig) -> RunSummary:
    return run_simulation(config).summary


def sweep_points(spec: SweepSpec, replications: int) -> list[tuple[Number, Scheme, int, ScenarioConfig]]:
    """Every (value, scheme, replication) job in reduction order, validated up front."""
    points = []
    for value in spec.values:
        for scheme in spec.schemes:
            scenario = apply_axis(spec.fixed, spec.axis, value)._replace(
                scheme=scheme, replications=replications
            )
            validate_config(scenario)
            for r in range(replications):
                points.append(
                    (value, scheme, r, scenario._replace(seed=replication_seed(spec.fixed.seed, r)))
                )
    return points


def _aggregate(samples: list[float]) -> tuple[float, float]:
    values = np.asarray(samples, dtype=float)
    std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), std


def run_experiment(
    spec: SweepSpec, replications: Optional[int] = None, workers: int = 1
) -> list[ResultRow]:
    """Run every sweep point and replication, then reduce to mean and sample std.

    Parameters
    ----------
    spec : SweepSpec
        The sweep to run.
    replications : int, optional
        Overrides `spec.fixed.replications`.
    workers : int
        Processes to use; results do not depend on it.

    Returns
    -------
    list[ResultRow]
        One row per (axis value, scheme, metric), in that order.
    """
    spec.check()
    reps = replications if replications is not None else spec.fixed.replications
    if reps < 1:
        raise ConfigError(f"replications must be >= 1, got {reps}")
    points = sweep_points(spec, reps)
    configs = [p[3] for p in points]

    logger.info(
        "%s: %d points x %d schemes x %d replications (%d runs)",
        spec.name,
        len(spec.values),
        len(spec.schemes),
        reps,
        len(configs),
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(run_replication, configs))
    else:
        summaries = []
        for i, config in enumerate(configs):
            summaries.append(run_replication(config))
            if (i + 1) % reps == 0:
                value, scheme = points[i][0], points[i][1]
                logger.info("%s: %s=%s %s done", spec.name, spec.axis.value, value, scheme.value)

    rows = []
    for start in range(0, len(points), reps):
        value, scheme = points[start][0], points[start][1]
        batch = summaries[start : start + reps]
        for metric in spec.metrics:
            samples = [getattr(s, metric) for s in batch]
            if any(sample is None for sample in samples):
                continue
            mean, std = _aggregate(samples)
            rows.append(
                ResultRow(spec.axis.value, value, scheme.value, metric, mean, std, reps, spec.fixed.seed)
            )
    return rows


def _format(value: Number) -> str:
    return str(value) if isinstance(value, int) else repr(float(value))


def emit_csv(rows: Sequence[ResultRow], path: Path) -> None:
    """Write result rows with the fixed header; floats keep full precision."""
    if not rows:
        raise ContractError("refusing to write an empty result table")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow(
                    [
                        row.axis,
                        _format(row.value),
                        row.scheme,
                        row.metric,
                        _format(row.mean),
                        _format(row.std),
                        str(row.replications),
                        str(row.seed),
                    ]
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    logger.info("wrote %d rows to %s", len(rows), path)


def _parse_number(text: str) -> Number:
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_csv(path: Path) -> list[ResultRow]:
    """Read a table written by `emit_csv`."""
    with open(path, "r", newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ConfigError(f"{path} does not have the result-table header")
        return [
            ResultRow(
                axis=record["axis"],
                value=_parse_number(record["value"]),
                scheme=record["scheme"],
                metric=record["metric"],
                mean=float(record["mean"]),
                std=float(record["std"]),
                replications=int(record["replications"]),
                seed=int(record["seed"]),
            )
            for record in reader
        ]
