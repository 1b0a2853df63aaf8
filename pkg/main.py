"""
Quench - Main Entry Point
Command-line surface: full pipeline, reconfiguration only, placement on a
given configuration, and fault scans.
"""

from __future__ import annotations

import sys
from pathlib import Path

# Add project root to sys.path to ensure local modules are discoverable
project_root = Path(__file__).parent.resolve()
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from contextlib import contextmanager
from typing import Iterator, Optional

import typer

from config import RunConfig, load_run_config
from core.network import Network, SwitchConfig, load_grid
from core.pipeline import run_pipeline
from core.placement import PlacementProblem, build_study, place
from core.report import RunReport, emit_report
from core.short_circuit import SfclDevice
from exceptions import ConfigValidationError, PipelineStageError, QuenchError
from logging_config import get_logger, log_exception, set_log_dir, setup_logging
from ui.console import PlannerConsole, create_console

logger = get_logger(__name__)

EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


# ============================================================================
# Helpers
# ============================================================================

def parse_open_switches(text: str | None, network: Network) -> SwitchConfig:
    """``"s33,s34,35"`` style lists; None selects the normally open ties."""
    if text is None or not text.strip():
        return network.base_config()
    ids = []
    for token in text.split(","):
        token = token.strip().lower().removeprefix("s")
        if not token.isdigit():
            raise ConfigValidationError(f"invalid switch '{token}' in --open", config_key="open")
        ids.append(int(token))
    return SwitchConfig.of(ids)


def parse_sfcls(values: list[str], problem: PlacementProblem) -> list[SfclDevice]:
    """``branch:ohm`` pairs, e.g. ``1:1.2``."""
    devices = []
    for value in values:
        branch, _, ohm = value.partition(":")
        try:
            devices.append(problem.device(int(branch), float(ohm)))
        except ValueError as e:
            raise ConfigValidationError(f"invalid --sfcl '{value}', expected branch:ohm", cause=e) from e
    return devices


def _settings(
    config_path: Optional[Path],
    grid: Optional[Path],
    seed: Optional[int],
    out: Optional[Path],
    *,
    need_seed: bool,
) -> RunConfig:
    run_config = load_run_config(config_path, {"grid_path": grid, "seed": seed, "output_dir": out})
    if need_seed:
        return run_config.require_valid()
    issues = [i for i in run_config.validate() if not i.startswith("seed")]
    if issues:
        raise ConfigValidationError(issues[0], details={"issues": len(issues)})
    return run_config


def _start_logging(verbose: bool, log_dir: Optional[Path]) -> None:
    if log_dir is not None:
        set_log_dir(log_dir)
    setup_logging(verbose=verbose)


def _emit(ui: PlannerConsole, report: RunReport, output_dir: Path) -> None:
    paths = emit_report(report, output_dir)
    ui.render_info(f"Report written to {paths[0].parent} ({len(paths)} files)", title="Output")


@contextmanager
def _guard(ui: PlannerConsole) -> Iterator[None]:
    """Render failures, log the traceback and map them to exit code 1."""
    try:
        yield
    except typer.Exit:
        raise
    except PipelineStageError as e:
        log_exception(logger, f"Pipeline failed at {e.stage}", e)
        ui.render_error(str(e), title=f"Failed at {e.stage}")
        raise typer.Exit(EXIT_ERROR)
    except QuenchError as e:
        log_exception(logger, "Command failed", e)
        ui.render_error(str(e), title=type(e).__name__)
        raise typer.Exit(EXIT_ERROR)
    except Exception as e:
        logger.critical(f"Fatal error: {e}", exc_info=True)
        ui.render_error(f"{type(e).__name__}: {e}", title="Fatal error")
        raise typer.Exit(EXIT_ERROR)


# ============================================================================
# CLI Entry Point
# ============================================================================

app = typer.Typer(
    name="quench",
    help="Quench - distribution network reconfiguration and SFCL placement planner",
    add_completion=False,
)

GridOption = typer.Option(None, "--grid", "-g", help="Grid JSON file (defaults to the bundled 33-bus feeder)")
ConfigOption = typer.Option(None, "--config", "-c", help="Run configuration JSON file")
SeedOption = typer.Option(None, "--seed", "-s", min=0, help="Unsigned 64-bit run seed")
OutOption = typer.Option(None, "--out", "-o", help="Output directory for report files")
VerboseOption = typer.Option(False, "--verbose", "-v", help="Enable verbose logging")
LogDirOption = typer.Option(None, "--log-dir", help="Directory for quench.log (default: QUENCH_LOG_DIR or ~/.quench/logs)")
OpenOption = typer.Option(None, "--open", help="Open switches, e.g. s7,s9,s14,s32,s37 (default: tie switches)")


@app.command()
def run(
    grid: Optional[Path] = GridOption,
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    verbose: bool = VerboseOption,
    log_dir: Optional[Path] = LogDirOption,
) -> None:
    """Reconfigure every load level, place SFCLs and aggregate the plan."""
    _start_logging(verbose, log_dir)
    ui = create_console()
    with _guard(ui):
        run_config = _settings(config, grid, seed, out, need_seed=True)
        output_dir = run_config.output_dir
        ui.render_header(run_config)
        try:
            with ui.progress("Optimizing load levels..."):
                report = run_pipeline(run_config)
        except PipelineStageError as e:
            if e.partial is not None:
                try:
                    _emit(ui, e.partial, output_dir)
                except QuenchError as io_error:
                    log_exception(logger, "Partial report not written", io_error)
            raise
        _emit(ui, report, output_dir)
        ui.render_report(report)

    if not report.feasible:
        ui.render_warning("No SFCL plan keeps every breaker within rating.", title="Infeasible")
        raise typer.Exit(EXIT_INFEASIBLE)
    ui.render_success("Aggregated plan verified on every load level.")


@app.command()
def reconfig(
    grid: Optional[Path] = GridOption,
    config: Optional[Path] = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[Path] = OutOption,
    verbose: bool = VerboseOption,
    log_dir: Optional[Path] = LogDirOption,
) -> None:
    """Optimize the switch configuration of every load level."""
    _start_logging(verbose, log_dir)
    ui = create_console()
    with _guard(ui):
        run_config = _settings(config, grid, seed, out, need_seed=True)
        ui.render_header(run_config)
        with ui.progress("Optimizing load levels..."):
            report = run_pipeline(run_config, place_sfcls=False)
        _emit(ui, report, run_config.output_dir)
        ui.render_levels(report)
        ui.render_faults(report)


@app.command("place")
def place_cmd(
    open_switches: Optional[str] = OpenOption,
    grid: Optional[Path] = GridOption,
    config: Optional[Path] = ConfigOption,
    verbose: bool = VerboseOption,
    log_dir: Optional[Path] = LogDirOption,
) -> None:
    """Place and size SFCLs on one switch configuration."""
    _start_logging(verbose, log_dir)
    ui = create_console()
    with _guard(ui):
        run_config = _settings(config, grid, None, None, need_seed=False)
        network = load_grid(run_config.grid_path)
        switch_config = parse_open_switches(open_switches, network)
        problem = PlacementProblem.for_network(network, run_config.placement, run_config.fault)
        result = place(problem, network, switch_config)
        ui.render_placement(result, title=f"SFCL placement ({switch_config.label})")

    if not result.feasible:
        raise typer.Exit(EXIT_INFEASIBLE)


@app.command()
def faultscan(
    open_switches: Optional[str] = OpenOption,
    sfcl: list[str] = typer.Option([], "--sfcl", help="Installed SFCL as branch:ohm, repeatable"),
    grid: Optional[Path] = GridOption,
    config: Optional[Path] = ConfigOption,
    verbose: bool = VerboseOption,
    log_dir: Optional[Path] = LogDirOption,
) -> None:
    """Worst breaker currents over the fault set of one configuration."""
    _start_logging(verbose, log_dir)
    ui = create_console()
    with _guard(ui):
        run_config = _settings(config, grid, None, None, need_seed=False)
        network = load_grid(run_config.grid_path)
        switch_config = parse_open_switches(open_switches, network)
        problem = PlacementProblem.for_network(network, run_config.placement, run_config.fault)
        scan = build_study(problem, network, switch_config).scan(parse_sfcls(sfcl, problem))
        ui.render_scan(scan, title=f"Fault scan ({switch_config.label})")


def run_cli():
    """Entry point for the console script."""
    app()


if __name__ == "__main__":
    app()
