"""Command-line interface for wbansim."""

import json
import logging
import sys
from pathlib import Path
from typing import Annotated, NoReturn, Optional

import cyclopts
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .config import (
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
from .experiments import PRESETS, emit_csv, preset, run_experiment
from .simulation import Simulation
from .trace import TraceWriter

console = Console()
logger = logging.getLogger(__name__)

SetOption = Annotated[Optional[list[str]], cyclopts.Parameter(name="--set")]

app = cyclopts.App(
    help="Discrete-event simulator of body area networks sharing the 2.4 GHz band with IoT devices."
)


def _configure_logging(verbose: bool) -> None:
    package_logger = logging.getLogger("wbansim")
    package_logger.handlers[:] = [
        RichHandler(console=Console(stderr=True), show_path=False, show_time=False)
    ]
    package_logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def _fail(message: str, code: int) -> NoReturn:
    console.print(f"[red]Error: {message}[/red]", soft_wrap=True)
    sys.exit(code)


def _overrides(
    set_: Optional[list[str]],
    scheme: Optional[str] = None,
    seed: Optional[int] = None,
    superframes: Optional[int] = None,
) -> list[str]:
    overrides = list(set_ or [])
    if scheme is not None:
        overrides.append(f"scheme={scheme.upper()}")
    if seed is not None:
        overrides.append(f"seed={seed}")
    if superframes is not None:
        overrides.append(f"superframes_per_run={superframes}")
    return overrides


def _format(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


@app.command
def run(
    config: Optional[Path] = None,
    set_: SetOption = None,
    scheme: Optional[str] = None,
    seed: Optional[int] = None,
    superframes: Optional[int] = None,
    trace: Optional[Path] = None,
    verbose: bool = False,
) -> None:
    """Run one scenario and print its metrics.

    Parameters
    ----------
    config : Path, optional
        JSON config file. Defaults to $WBANSIM_CONFIG, then ~/.wbansim/config.json.
    set_ : list[str], optional
        Dotted overrides such as radio.snr_threshold_db=-30 (repeatable).
    scheme : str, optional
        CSIM or SSA.
    seed : int, optional
        Base seed of the run.
    superframes : int, optional
        Number of superframes to simulate.
    trace : Path, optional
        Write one JSON record per protocol event to this file.
    verbose : bool
        Log per-superframe details.
    """
    _configure_logging(verbose)
    try:
        scenario = resolve_config(config, _overrides(set_, scheme, seed, superframes))
    except ConfigError as e:
        _fail(str(e), 2)

    if trace:
        try:
            with TraceWriter(trace) as writer:
                result = Simulation(scenario, trace=writer).run()
        except OSError as e:
            _fail(str(e), 1)
        logger.info("wrote %d trace records to %s", writer.written, trace)
    else:
        result = Simulation(scenario).run()

    table = Table(
        title=f"{scenario.scheme.value}: {scenario.n_wbans} WBANs x {scenario.k_sensors} sensors, "
        f"{scenario.n_iot_devices} IoT devices, seed {scenario.seed}",
        border_style="blue",
    )
    table.add_column("Metric", style="cyan")
    table.add_column("Value", justify="right", style="green")
    for name, value in result.summary._asdict().items():
        table.add_row(name, _format(value))
    table.add_row("events", str(result.events_processed))
    console.print(table)


@app.command
def sweep(
    name: str,
    output: Path = Path("results.csv"),
    replications: Optional[int] = None,
    seed: Optional[int] = None,
    scheme: Optional[str] = None,
    values: Optional[list[float]] = None,
    workers: int = 1,
    config: Optional[Path] = None,
    set_: SetOption = None,
    verbose: bool = False,
) -> None:
    """Run a preset sweep and write its result table as CSV.

    Parameters
    ----------
    name : str
        Preset name (see `wbansim presets`).
    output : Path
        CSV file to write.
    replications : int, optional
        Replications per point (default from config, 30).
    seed : int, optional
        Base seed; replication seeds derive from it.
    scheme : str, optional
        Restrict the sweep to CSIM or SSA.
    values : list[float], optional
        Replace the preset's axis values.
    workers : int
        Worker processes.
    config : Path, optional
        JSON config file the preset builds on.
    set_ : list[str], optional
        Dotted overrides applied after the preset (repeatable).
    verbose : bool
        Log every simulation run.
    """
    _configure_logging(verbose)
    try:
        base = config_from_dict(load_config(config))
        spec = preset(name, base)
        fixed = apply_overrides(spec.fixed, _overrides(set_, seed=seed))
        validate_config(fixed)
        spec = spec._replace(fixed=fixed)
        if scheme is not None:
            try:
                spec = spec._replace(schemes=(Scheme(scheme.upper()),))
            except ValueError:
                raise ConfigError(f"unknown scheme {scheme!r}; use CSIM or SSA") from None
        if values:
            spec = spec._replace(
                values=tuple(int(v) if spec.axis.integral else float(v) for v in values)
            )
        spec.check()
    except ConfigError as e:
        _fail(str(e), 2)

    try:
        rows = run_experiment(spec, replications=replications, workers=workers)
    except ConfigError as e:
        _fail(str(e), 2)
    try:
        emit_csv(rows, output)
    except OSError as e:
        _fail(str(e), 1)

    table = Table(title=f"{spec.name}: {spec.description}", border_style="blue")
    table.add_column(spec.axis.value, style="cyan", justify="right")
    table.add_column("Scheme", style="magenta")
    table.add_column("Metric")
    table.add_column("Mean", justify="right", style="green")
    table.add_column("Std", justify="right", style="dim")
    for row in rows:
        table.add_row(_format(row.value), row.scheme, row.metric, _format(row.mean), _format(row.std))
    console.print(table)
    console.print(f"[green]✓ Results written to {output}[/green]")


@app.command
def presets() -> None:
    """List the preset experiments."""
    table = Table(title="Preset Experiments", border_style="blue")
    table.add_column("Name", style="cyan")
    table.add_column("Axis", style="green")
    table.add_column("Values")
    table.add_column("Schemes", style="magenta")
    table.add_column("Metrics")
    table.add_column("Description", style="dim")

    for key in PRESETS:
        spec = preset(key)
        table.add_row(
            spec.name,
            spec.axis.value,
            f"{_format(spec.values[0])} .. {_format(spec.values[-1])} ({len(spec.values)})",
            ", ".join(s.value for s in spec.schemes),
            ", ".join(spec.metrics),
            spec.description,
        )

    console.print(table)


@app.command(name="config")
def config_command(
    action: str = "show",
    config: Optional[Path] = None,
    set_: SetOption = None,
) -> None:
    """Inspect or initialise the configuration.

    Parameters
    ----------
    action : str
        'show' prints the resolved configuration, 'path' the file it comes
        from, 'init' writes the defaults to that file.
    config : Path, optional
        JSON config file to use instead of the default location.
    set_ : list[str], optional
        Dotted overrides applied before showing (repeatable).
    """
    action = action.lower()

    if action == "show":
        try:
            scenario = resolve_config(config, _overrides(set_))
        except ConfigError as e:
            _fail(str(e), 2)
        console.print_json(json.dumps(config_to_dict(scenario)))

    elif action == "path":
        path, _ = get_config_path(config)
        console.print(str(path), soft_wrap=True)

    elif action == "init":
        path, _ = get_config_path(config)
        if path.exists():
            console.print(f"[yellow]{path} already exists; leaving it untouched.[/yellow]", soft_wrap=True)
            return
        try:
            save_config(config_to_dict(ScenarioConfig()), path)
        except OSError as e:
            _fail(f"cannot write {path}: {e}", 1)
        console.print(f"[green]✓ Default configuration written to {path}[/green]")

    else:
        _fail(f"unknown action '{action}'. Use 'show', 'path' or 'init'", 2)


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point.

    Parameters
    ----------
    argv : list[str], optional
        Command line arguments (defaults to sys.argv[1:]).

    Returns
    -------
    int
        Exit code.
    """
    if argv is None:
        argv = sys.argv[1:]

    try:
        app(argv)
        return 0
    except SystemExit as e:
        # Cyclopts raises SystemExit for help/version/errors
        return e.code if isinstance(e.code, int) else 1
