import logging
from pathlib import Path
from typing import Optional

import typer

from src.catalog.constants import EntryId
from src.catalog.service import list_entries
from src.common.exception_handler import handle_cli_errors
from src.common.exceptions import ConfigException
from src.common.logger import get_logger, set_log_level
from src.experiment.constants import SUITE_TRIALS, Task
from src.experiment.schemas import PointSpec
from src.experiment.service import (
    default_config,
    dump_record,
    emit_plot_data,
    load_config,
    read_report,
    run,
    suite as run_suite,
)

app = typer.Typer(help="Check lift properties, synthesize witness costs and run second-order solvers.")
logger = get_logger(__name__)

CONFIG = typer.Option(None, "--config", "-c", help="TOML experiment config.")
ENTRY = typer.Option(None, "--entry", "-e", help="Catalog entry to use when no config is given.")
REGIME = typer.Option(None, "--regime", "-r", help="Regime to sample points from when no config is given.")
SEED = typer.Option(None, "--seed", "-s", help="Seed overriding the config.")
TRIALS = typer.Option(None, "--trials", "-t", min=1, help="Number of trials overriding the config.")
OUT = typer.Option(None, "--out", "-o", help="Report path (JSON lines) overriding the config.")
VERBOSE = typer.Option(False, "--verbose", "-v", help="Log debug messages.")
TIMING = typer.Option(False, "--timing", help="Record wall-clock time in the summary.")


def _configure(verbose: bool) -> None:
    if verbose:
        set_log_level(logging.DEBUG)


def _execute(task: Task, config_path, entry, regime, seed, trials, out, verbose, timing) -> None:
    _configure(verbose)
    overrides = {"seed": seed, "trials": trials, "output": None if out is None else str(out)}
    if config_path is not None:
        config = load_config(config_path)
        config = config.model_copy(update={"tasks": [task], **{k: v for k, v in overrides.items() if v is not None}})
    elif entry is not None:
        point = PointSpec(regime=regime) if regime else PointSpec()
        config = default_config(entry, [task], point=point, **overrides)
    else:
        raise ConfigException("Pass --config or --entry")
    trials_out, summary = run(config, timing=timing)
    if config.output is None:
        for record in trials_out:
            typer.echo(dump_record(record))
    typer.echo(dump_record(summary))
    if not summary.passed:
        raise typer.Exit(code=1)


@app.command()
@handle_cli_errors
def check(config: Optional[Path] = CONFIG, entry: Optional[EntryId] = ENTRY, regime: Optional[str] = REGIME,
          seed: Optional[int] = SEED, trials: Optional[int] = TRIALS, out: Optional[Path] = OUT,
          verbose: bool = VERBOSE, timing: bool = TIMING):
    """Property verdicts and the 2=>1 chain at sampled points."""
    _execute(Task.CHECK, config, entry, regime, seed, trials, out, verbose, timing)


@app.command()
@handle_cli_errors
def witness(config: Optional[Path] = CONFIG, entry: Optional[EntryId] = ENTRY, regime: Optional[str] = REGIME,
            seed: Optional[int] = SEED, trials: Optional[int] = TRIALS, out: Optional[Path] = OUT,
            verbose: bool = VERBOSE, timing: bool = TIMING):
    """Witness costs for the properties that fail."""
    _execute(Task.WITNESS, config, entry, regime, seed, trials, out, verbose, timing)


@app.command()
@handle_cli_errors
def optimize(config: Optional[Path] = CONFIG, entry: Optional[EntryId] = ENTRY, regime: Optional[str] = REGIME,
             seed: Optional[int] = SEED, trials: Optional[int] = TRIALS, out: Optional[Path] = OUT,
             verbose: bool = VERBOSE, timing: bool = TIMING):
    """Second-order solver runs with downstream stationarity gaps."""
    _execute(Task.OPTIMIZE, config, entry, regime, seed, trials, out, verbose, timing)


@app.command()
@handle_cli_errors
def taylor(config: Optional[Path] = CONFIG, entry: Optional[EntryId] = ENTRY, regime: Optional[str] = REGIME,
           seed: Optional[int] = SEED, trials: Optional[int] = TRIALS, out: Optional[Path] = OUT,
           verbose: bool = VERBOSE, timing: bool = TIMING):
    """Taylor residual slopes of the lift and finite-difference checks of grad/hess g."""
    _execute(Task.TAYLOR, config, entry, regime, seed, trials, out, verbose, timing)


@app.command("slp-evidence")
@handle_cli_errors
def slp_evidence(config: Optional[Path] = CONFIG, entry: Optional[EntryId] = ENTRY, regime: Optional[str] = REGIME,
                 seed: Optional[int] = SEED, trials: Optional[int] = TRIALS, out: Optional[Path] = OUT,
                 verbose: bool = VERBOSE, timing: bool = TIMING):
    """local=>local verdicts with pathological-sequence evidence."""
    _execute(Task.SLP_EVIDENCE, config, entry, regime, seed, trials, out, verbose, timing)


@app.command()
@handle_cli_errors
def suite(seed: int = typer.Option(0, "--seed", "-s", help="Suite seed."),
          trials: int = typer.Option(SUITE_TRIALS, "--trials", "-t", min=1, help="Trials per config."),
          out: Path = typer.Option(Path("reports/suite.jsonl"), "--out", "-o", help="Report path."),
          verbose: bool = VERBOSE, timing: bool = TIMING):
    """Run the acceptance matrix over the whole catalog."""
    _configure(verbose)
    summaries = run_suite(seed, out, trials, timing)
    failed = [s for s in summaries if not s.passed]
    typer.echo(f"{len(summaries) - len(failed)} of {len(summaries)} configs passed; report at {out}")
    for summary in failed:
        typer.echo(f"failed: {summary.config.entry.value} {summary.config.tasks[0].value} "
                   f"{summary.config.point.regime or ''}", err=True)
    if failed:
        raise typer.Exit(code=1)


@app.command("plot-data")
@handle_cli_errors
def plot_data(report: Path = typer.Option(..., "--report", "-i", help="Report written by a task command."),
              task: Task = typer.Option(Task.TAYLOR, "--task", help="taylor or optimize."),
              trial: int = typer.Option(0, "--trial", min=0, help="Trial index."),
              out: Path = typer.Option(..., "--out", "-o", help="CSV destination."),
              verbose: bool = VERBOSE):
    """CSV of Taylor residuals or solver traces from a report."""
    _configure(verbose)
    path = emit_plot_data(read_report(report), out, task, trial)
    typer.echo(f"Plot data written to {path}")


@app.command()
@handle_cli_errors
def catalog():
    """List catalog entries with their regimes and default parameters."""
    for item in list_entries():
        typer.echo(f"{item['id']}: regimes={','.join(item['regimes'])} defaults={item['defaults']}")


if __name__ == "__main__":
    app()
