"""
Experiment orchestration behind the CLI commands.

Each ``cmd_*`` function takes a RunConfig, does its work through the
calibration, dynamics, solver and strategy services, writes its artefacts
into ``OUTPUT_DIR`` and returns the in-memory result.

Backtests fan independent cells out to a process pool: one cell runs the
PDE controller for one (year, l, C/D), another the naive and hindsight
controllers for one (year, C/D). A failing cell is recorded with its error
and the run continues. Cells come back in submission order, so reports do
not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from datetime import date
from pathlib import Path
from typing import Literal

import numpy as np
import structlog
from pydantic import Field

from app.v1.core.config import RunConfig
from app.v1.core.exceptions import ConfigError, DataError, RorSwitchingError
from app.v1.models.base import ArrayModel
from app.v1.models.flow import DAYS_PER_YEAR, FlowSeries, OUParams, SeasonalProfile, day_of_year, is_leap_day
from app.v1.models.forecast import ForecastSpec, PathSet
from app.v1.models.plant import PlantSpec
from app.v1.models.report import BacktestCell, BacktestReport
from app.v1.models.schedule import EvaluationResult, ModeSchedule
from app.v1.models.solver import SolverSettings, SwitchDecision
from app.v1.repositories import exports
from app.v1.repositories.calibration_repository import (
    CalibrationRecord,
    read_calibration,
    write_calibration,
)
from app.v1.repositories.flow_repository import read_flow_csv, write_flow_csv
from app.v1.services import strategies, vi_solver
from app.v1.services.calibration import calibrate, clean_series
from app.v1.services.dynamics import blended_mean_flow, build_drift, simulate_paths
from app.v1.services.payoff import capacity_benchmark, payoff_table
from app.v1.services.synthetic import synthesize_flows

logger = structlog.get_logger(__name__)


# ==================== Shared Setup ====================


def build_plant(config: RunConfig, cost_ratio: float | None = None) -> tuple[PlantSpec, float, float]:
    """
    Plant with its switching costs, D, and the C/D the costs correspond to.

    An explicit SWITCH_COSTS matrix wins over ``cost_ratio``; its C/D is then
    reported as c_01 / D.
    """
    base = PlantSpec.build(config.units, 0.0, delta_grid_size=config.DELTA_GRID_SIZE)
    benchmark = capacity_benchmark(base, config.PRICE, config.CAPACITY_AT_TOTAL_FLOW)
    if config.SWITCH_COSTS is not None:
        plant = PlantSpec(
            units=base.units,
            switch_costs=tuple(tuple(row) for row in config.SWITCH_COSTS),
            delta_grid_size=config.DELTA_GRID_SIZE,
            allow_negative_costs=config.ALLOW_NEGATIVE_COSTS,
        )
        return plant, benchmark, float(plant.cost_matrix[0, 1]) / benchmark
    ratio = config.COST_RATIO if cost_ratio is None else cost_ratio
    return base.with_cost(ratio * benchmark), benchmark, ratio


def load_flows(config: RunConfig) -> FlowSeries:
    """Read and clean FLOW_CSV; cleaning errors carry the file path."""
    config.require_inputs("FLOW_CSV")
    path = str(config.FLOW_CSV)
    raw = read_flow_csv(path)
    try:
        return clean_series(raw)
    except DataError as exc:
        raise DataError(str(exc), date=exc.date, path=path) from exc


def load_model(config: RunConfig) -> tuple[SeasonalProfile, OUParams]:
    config.require_inputs("CALIBRATION_FILE")
    record = read_calibration(config.CALIBRATION_FILE)
    return record.profile(), record.ou()


def year_flows(flows: FlowSeries, year: int) -> FlowSeries:
    selected = flows.year(year)
    if len(selected) != DAYS_PER_YEAR:
        raise DataError(f"year {year} holds {len(selected)} days, expected {DAYS_PER_YEAR}")
    return selected


# ==================== calibrate ====================


def cmd_calibrate(config: RunConfig) -> CalibrationRecord:
    """Calibrate r_t, κ and σ on CALIBRATION_YEARS and write the calibration file."""
    flows = load_flows(config)
    first, last = config.CALIBRATION_YEARS
    subset = flows.between_years(first, last)
    if len(subset) == 0:
        raise DataError(f"no observations in calibration years {first}..{last}", path=str(config.FLOW_CSV))
    profile, ou = calibrate(subset, config.WINDOW_DAYS, config.MAX_LAG_DAYS)
    record = CalibrationRecord.from_model(profile, ou, config.MAX_LAG_DAYS, (first, last))
    write_calibration(record, config.CALIBRATION_FILE)
    logger.info("calibration_done", kappa=ou.kappa, sigma=ou.sigma, years=f"{first}-{last}")
    return record


# ==================== simulate ====================


def cmd_simulate(config: RunConfig, forecast_day: int | None = None) -> PathSet:
    """
    Simulate N_PATHS flow paths over one year from the 1 January flow.

    The start flow is the observed flow of SIMULATE_YEAR when FLOW_CSV is
    set, else the seasonal mean e^{r_0}. With ``forecast_day`` k the
    forecast-blended mean seen from day k (true flow as forecast, the longest
    configured l) is written next to the seasonal mean.
    """
    profile, ou = load_model(config)
    flows = None
    if config.FLOW_CSV is not None:
        year = config.SIMULATE_YEAR or config.BACKTEST_YEARS[0]
        flows = year_flows(load_flows(config), year).flows
    q0 = float(flows[0]) if flows is not None else float(np.exp(profile.log_mean[0]))

    spec = build_drift(0, q0, ForecastSpec.none(0), profile, ou)
    paths = simulate_paths(q0, spec, config.N_PATHS, DAYS_PER_YEAR + 1, seed=config.SEED)
    exports.write_paths(paths, config.OUTPUT_DIR / "simulated_paths.csv")

    if forecast_day is not None:
        if flows is None:
            raise DataError("forecast curves need FLOW_CSV for the true flow")
        if not 0 <= forecast_day < DAYS_PER_YEAR:
            raise DataError(f"forecast day {forecast_day} outside 0..{DAYS_PER_YEAR - 1}")
        length = min(max(config.FORECAST_LENGTHS, default=0), DAYS_PER_YEAR - 1 - forecast_day)
        forecast = ForecastSpec(
            start_index=forecast_day,
            values=flows[forecast_day + 1 : forecast_day + 1 + length],
            relaxation_days=config.RELAXATION_DAYS,
        )
        blended = build_drift(forecast_day, float(flows[forecast_day]), forecast, profile, ou)
        days, mean, seasonal = blended_mean_flow(blended, DAYS_PER_YEAR - forecast_day)
        exports.write_forecast_curve(days, mean, seasonal, config.OUTPUT_DIR / "forecast_curve.csv")

    logger.info("simulation_done", n_paths=paths.n_paths, q0=q0, seed=config.SEED)
    return paths


# ==================== plan ====================


def cmd_plan(
    config: RunConfig,
    on: date,
    flow: float,
    mode: int,
    forecast: list[float] | None = None,
) -> SwitchDecision:
    """
    Single-day decision: stay or switch, given today's date, flow and mode.

    Solves the switching system from today to the end of the year, with
    ``forecast`` as the flow forecast for the following days, and writes the
    value function and payoff curves for inspection.
    """
    profile, ou = load_model(config)
    plant, benchmark, _ = build_plant(config)
    if not 0 <= mode < plant.n_modes:
        raise DataError(f"mode {mode} outside 0..{plant.n_modes - 1}")
    if not flow > 0.0:
        raise DataError(f"flow must be positive, got {flow}")
    day = np.array([on], dtype="datetime64[D]")
    if is_leap_day(day)[0]:
        raise DataError("29 February has no day index", date=on)
    k = int(day_of_year(day)[0])

    spec = build_drift(
        k,
        flow,
        ForecastSpec(start_index=k, values=forecast or [], relaxation_days=config.RELAXATION_DAYS),
        profile,
        ou,
    )
    settings = config.solver_settings()
    grid = vi_solver.build_grid(
        profile,
        ou,
        k,
        DAYS_PER_YEAR,
        n_nodes=settings.grid_nodes,
        width_sd=settings.grid_width_sd,
        cover=np.log([flow]),
    )
    table = payoff_table(grid.x_nodes, config.PRICE, plant)
    spatial_tol, total_tol = settings.absolute_tolerances(benchmark)
    values = vi_solver.solve(
        grid,
        spec,
        table,
        plant.cost_matrix,
        spatial_tol=spatial_tol,
        total_tol=total_tol,
        max_outer=settings.max_outer_iterations,
        max_inner=settings.max_inner_iterations,
    )
    decision = vi_solver.switch_decision(values, float(np.log(flow)), k, mode)
    exports.write_value_function(values, config.OUTPUT_DIR, stem=f"value_day{k + 1}")
    exports.write_payoff_table(table, config.OUTPUT_DIR / "payoff_curves.csv")
    logger.info(
        "plan_decided",
        date=on.isoformat(),
        day=k + 1,
        action=decision.action,
        target=decision.target,
    )
    return decision


# ==================== backtest / sweep ====================


class CellJob(ArrayModel):
    """Everything one worker needs to evaluate a cell on its own."""

    kind: Literal["pde", "benchmarks"]
    year: int
    flows: np.ndarray
    plant: PlantSpec
    profile: SeasonalProfile
    ou: OUParams
    forecast_days: int = 0
    relaxation_days: int = 20
    cost_ratio: float
    benchmark: float = Field(gt=0.0)
    price: float
    settings: SolverSettings
    seed: int


def _cell(job: CellJob, strategy: str, forecast_days: int, **result: object) -> BacktestCell:
    spatial_tol, total_tol = job.settings.absolute_tolerances(job.benchmark)
    return BacktestCell(
        year=job.year,
        strategy=strategy,
        forecast_days=forecast_days,
        relaxation_days=job.relaxation_days,
        cost_ratio=job.cost_ratio,
        capacity_benchmark=job.benchmark,
        seed=job.seed,
        grid_nodes=job.settings.grid_nodes,
        spatial_tol=spatial_tol,
        total_tol=total_tol,
        **result,
    )


def _scored(job: CellJob, schedule: ModeSchedule) -> BacktestCell:
    return _cell(
        job,
        schedule.strategy,
        schedule.forecast_days,
        payoff=schedule.realized_payoff,
        gamma=strategies.gamma(schedule.realized_payoff, job.benchmark),
        events=schedule.events_table,
    )


def run_cell(job: CellJob) -> tuple[list[BacktestCell], list[ModeSchedule]]:
    """
    Evaluate one job.

    Returns the scored cells and the schedules behind them, labelled with
    the job's year and C/D. A failure becomes cells carrying the error and
    no schedules.
    """
    structlog.contextvars.bind_contextvars(year=job.year, cost_ratio=job.cost_ratio)
    try:
        if job.kind == "pde":
            schedule = strategies.run_pde_strategy(
                job.flows,
                job.plant,
                job.profile,
                job.ou,
                job.forecast_days,
                job.relaxation_days,
                price=job.price,
                settings=job.settings,
                benchmark=job.benchmark,
            )
            schedules = [schedule]
        else:
            schedules = [
                strategies.run_naive_strategy(job.flows, job.plant, job.price),
                strategies.run_hindsight_optimal(job.flows, job.plant, job.price),
            ]
        labels = {"year": job.year, "cost_ratio": job.cost_ratio}
        schedules = [s.model_copy(update=labels) for s in schedules]
        return [_scored(job, s) for s in schedules], schedules
    except (RorSwitchingError, ValueError) as exc:
        logger.error("cell_failed", kind=job.kind, forecast_days=job.forecast_days, error=str(exc))
        names = ["pde"] if job.kind == "pde" else ["naive", "hindsight"]
        return [_cell(job, name, job.forecast_days, error=str(exc)) for name in names], []
    finally:
        structlog.contextvars.unbind_contextvars("year", "cost_ratio")


def _jobs(config: RunConfig, ratios: list[float] | None) -> list[CellJob]:
    flows = load_flows(config)
    profile, ou = load_model(config)
    settings = config.solver_settings()
    first, last = config.BACKTEST_YEARS
    per_year = {year: year_flows(flows, year).flows for year in range(first, last + 1)}

    jobs: list[CellJob] = []
    for ratio in ratios if ratios is not None else [None]:
        plant, benchmark, effective_ratio = build_plant(config, ratio)
        common = dict(
            plant=plant,
            profile=profile,
            ou=ou,
            relaxation_days=config.RELAXATION_DAYS,
            cost_ratio=effective_ratio,
            benchmark=benchmark,
            price=config.PRICE,
            settings=settings,
            seed=config.SEED,
        )
        for year, values in per_year.items():
            jobs.append(CellJob(kind="benchmarks", year=year, flows=values, **common))
            for length in config.FORECAST_LENGTHS:
                jobs.append(
                    CellJob(kind="pde", year=year, flows=values, forecast_days=length, **common)
                )
    return jobs


def _execute(jobs: list[CellJob], max_workers: int) -> tuple[list[BacktestCell], list[ModeSchedule]]:
    if max_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            batches = list(pool.map(run_cell, jobs))
    else:
        batches = [run_cell(job) for job in jobs]
    cells = [cell for batch, _ in batches for cell in batch]
    schedules = [schedule for _, batch in batches for schedule in batch]
    return cells, schedules


def _check_dominance(cells: list[BacktestCell]) -> None:
    """Validate every (year, C/D, l) triple through EvaluationResult."""
    index = {(c.year, c.cost_ratio, c.strategy, c.forecast_days): c for c in cells}
    for cell in cells:
        if cell.strategy != "pde" or cell.payoff is None:
            continue
        naive = index.get((cell.year, cell.cost_ratio, "naive", 0))
        best = index.get((cell.year, cell.cost_ratio, "hindsight", 0))
        if naive is None or best is None or naive.payoff is None or best.payoff is None:
            continue
        payoffs = {"pde": cell.payoff, "naive": naive.payoff, "hindsight": best.payoff}
        EvaluationResult(
            year=cell.year,
            capacity_benchmark=cell.capacity_benchmark,
            payoffs=payoffs,
            gammas={k: strategies.gamma(v, cell.capacity_benchmark) for k, v in payoffs.items()},
        )


def _report(config: RunConfig, ratios: list[float] | None) -> tuple[BacktestReport, list[ModeSchedule]]:
    jobs = _jobs(config, ratios)
    logger.info("backtest_started", cells=len(jobs), workers=config.MAX_WORKERS)
    cells, schedules = _execute(jobs, config.MAX_WORKERS)
    _check_dominance(cells)
    report = BacktestReport(
        cells=tuple(cells),
        plant_modes=build_plant(config)[0].n_modes,
        price=config.PRICE,
        cost_at_total_capacity=config.CAPACITY_AT_TOTAL_FLOW,
    )
    if report.failures:
        logger.warning("backtest_cells_failed", failures=len(report.failures))
    return report, schedules


def cmd_backtest(config: RunConfig) -> BacktestReport:
    """
    All three controllers on every BACKTEST_YEARS year and every l.

    Writes per-cell and long-term-average CSVs, a JSON summary, one mode
    schedule per (year, strategy, l) under ``schedules/`` and the table of
    switching events.
    """
    report, schedules = _report(config, None)
    exports.write_report(report, config.OUTPUT_DIR, "backtest")
    for schedule in schedules:
        name = f"{schedule.year}_{schedule.strategy}_l{schedule.forecast_days}.csv"
        exports.write_schedule(schedule, config.OUTPUT_DIR / "schedules" / name)
    exports.write_events(schedules, config.OUTPUT_DIR / "backtest_events.csv")
    for row in report.long_term_averages():
        logger.info(
            "long_term_average",
            strategy=row.strategy,
            forecast_days=row.forecast_days,
            mean_gamma=row.mean_gamma,
        )
    return report


def cmd_sweep(config: RunConfig) -> BacktestReport:
    """γ of every controller as a function of C/D over SWEEP_RATIOS."""
    if config.SWITCH_COSTS is not None:
        logger.warning("sweep_ignores_explicit_costs")
        config = config.model_copy(update={"SWITCH_COSTS": None})
    report, _ = _report(config, list(config.SWEEP_RATIOS))
    exports.write_report(report, config.OUTPUT_DIR, "sweep")
    exports.write_gamma_curves(report, config.OUTPUT_DIR / "gamma_curves.csv")
    return report


# ==================== synthesize ====================


def cmd_synthesize(
    config: RunConfig,
    path: str | Path,
    first_year: int = 1980,
    last_year: int = 2018,
    kappa: float | None = None,
    sigma: float | None = None,
) -> FlowSeries:
    """Write a synthetic flow CSV seeded with SEED."""
    kwargs = {k: v for k, v in {"kappa": kappa, "sigma": sigma}.items() if v is not None}
    try:
        flows = synthesize_flows(first_year, last_year, seed=config.SEED, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_flow_csv(flows, path)
    return flows
