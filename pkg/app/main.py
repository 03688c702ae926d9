"""
Command-line entry point.

    ror-switching calibrate  --config run.toml
    ror-switching simulate   --config run.toml [--forecast-day K]
    ror-switching plan       --config run.toml --date 2015-04-13 --flow 11.2 --mode 0
    ror-switching backtest   --config run.toml
    ror-switching sweep      --config run.toml
    ror-switching synthesize data/flows.csv

Exit codes: 0 success, 2 configuration, 3 data, 4 solver convergence.
"""

from __future__ import annotations

from datetime import datetime
from pathlib import Path
from typing import Callable, Optional, TypeVar

import structlog
import typer

from app.v1.core.config import RunConfig, load_config
from app.v1.core.exceptions import RorSwitchingError
from app.v1.core.logging import configure_logging
from app.v1.services import backtest

logger = structlog.get_logger(__name__)

cli = typer.Typer(
    name="ror-switching",
    help="Plan and backtest start/stop schedules for run-of-river hydropower plants.",
    no_args_is_help=True,
    add_completion=False,
)

T = TypeVar("T")

ConfigOption = typer.Option(None, "--config", "-c", help="TOML run file", exists=True, dir_okay=False)
OutputOption = typer.Option(None, "--output-dir", "-o", help="Overrides OUTPUT_DIR")


def _run(command: str, config_path: Optional[Path], action: Callable[[RunConfig], T], **overrides: object) -> T:
    """Load config, set up logging, run ``action`` and map domain errors to exit codes."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command)
    try:
        config = load_config(config_path, **overrides)
        configure_logging(config.LOG_LEVEL, config.LOG_JSON)
        return action(config)
    except RorSwitchingError as exc:
        configure_logging()
        logger.error("command_failed", category=exc.category, error=str(exc))
        typer.echo(f"error ({exc.category}): {exc}", err=True)
        raise typer.Exit(code=exc.exit_code) from exc


@cli.command()
def calibrate(
    config: Optional[Path] = ConfigOption,
    output_dir: Optional[Path] = OutputOption,
) -> None:
    """Estimate the seasonal log-mean and the residual κ, σ."""
    record = _run("calibrate", config, backtest.cmd_calibrate, output_dir=output_dir)
    typer.echo(f"kappa={record.kappa:.6f} sigma={record.sigma:.6f}")


@cli.command()
def simulate(
    config: Optional[Path] = ConfigOption,
    output_dir: Optional[Path] = OutputOption,
    forecast_day: Optional[int] = typer.Option(
        None, "--forecast-day", help="Also export the forecast-blended mean seen from this day (0-based)"
    ),
) -> None:
    """Simulate flow paths over one year."""
    paths = _run(
        "simulate",
        config,
        lambda cfg: backtest.cmd_simulate(cfg, forecast_day),
        output_dir=output_dir,
    )
    typer.echo(f"wrote {paths.n_paths} paths of {paths.n_steps} days")


@cli.command()
def plan(
    on: datetime = typer.Option(..., "--date", formats=["%Y-%m-%d"], help="Today's date"),
    flow: float = typer.Option(..., "--flow", help="Today's flow, m³/s"),
    mode: int = typer.Option(0, "--mode", help="Current production mode"),
    forecast: Optional[list[float]] = typer.Option(
        None, "--forecast", help="Forecast flow for the following days, repeat per day"
    ),
    config: Optional[Path] = ConfigOption,
    output_dir: Optional[Path] = OutputOption,
) -> None:
    """Decide whether to stay or switch today."""
    decision = _run(
        "plan",
        config,
        lambda cfg: backtest.cmd_plan(cfg, on.date(), flow, mode, forecast),
        output_dir=output_dir,
    )
    if decision.action == "switch":
        typer.echo(f"switch {decision.current} -> {decision.target}")
    else:
        typer.echo(f"stay in {decision.current}")


@cli.command("backtest")
def run_backtest(
    config: Optional[Path] = ConfigOption,
    output_dir: Optional[Path] = OutputOption,
) -> None:
    """Benchmark the PDE, naive and hindsight controllers per year."""
    report = _run("backtest", config, backtest.cmd_backtest, output_dir=output_dir)
    for row in report.long_term_averages():
        typer.echo(f"{row.strategy:<10} l={row.forecast_days:<3} gamma={row.mean_gamma:.4f}")
    if report.failures:
        typer.echo(f"{len(report.failures)} cell(s) failed, see the report", err=True)


@cli.command()
def sweep(
    config: Optional[Path] = ConfigOption,
    output_dir: Optional[Path] = OutputOption,
) -> None:
    """γ of every controller as a function of C/D."""
    report = _run("sweep", config, backtest.cmd_sweep, output_dir=output_dir)
    typer.echo(f"wrote {len(report.cells)} cells")


@cli.command()
def synthesize(
    path: Path = typer.Argument(..., help="Flow CSV to write"),
    first_year: int = typer.Option(1980, "--first-year"),
    last_year: int = typer.Option(2018, "--last-year"),
    kappa: Optional[float] = typer.Option(None, "--kappa"),
    sigma: Optional[float] = typer.Option(None, "--sigma"),
    config: Optional[Path] = ConfigOption,
) -> None:
    """Generate a synthetic daily flow record."""
    flows = _run(
        "synthesize",
        config,
        lambda cfg: backtest.cmd_synthesize(cfg, path, first_year, last_year, kappa, sigma),
    )
    typer.echo(f"wrote {len(flows)} days to {path}")


if __name__ == "__main__":
    cli()
