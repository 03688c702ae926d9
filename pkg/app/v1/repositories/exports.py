"""
CSV and JSON exports.

Plot output is data only: one CSV per figure-style artefact (simulated
paths, payoff curves, forecast-blended mean, γ curves), plus schedule and
value-function dumps for inspection.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import structlog

from app.v1.models.forecast import PathSet
from app.v1.models.plant import PayoffTable
from app.v1.models.report import BacktestReport, ReportSummary
from app.v1.models.schedule import ModeSchedule
from app.v1.models.solver import ValueFunction

logger = structlog.get_logger(__name__)


def _write(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    logger.debug("csv_written", path=str(path), rows=len(frame))
    return path


def write_paths(paths: PathSet, path: str | Path) -> Path:
    """One row per step: ``day`` then ``path_0..path_{n-1}`` in m³/s."""
    days = paths.start_index + paths.dt * np.arange(paths.n_steps)
    frame = pd.DataFrame(paths.paths.T, columns=[f"path_{p}" for p in range(paths.n_paths)])
    frame.insert(0, "day", days)
    return _write(frame, path)


def write_payoff_table(table: PayoffTable, path: str | Path) -> Path:
    """Payoff curves per mode against flow, m.u./day."""
    frame = pd.DataFrame({"log_flow": table.x_nodes, "flow": np.exp(table.x_nodes)})
    for mode, row in enumerate(table.values):
        frame[f"mode_{mode}"] = row
    return _write(frame, path)


def write_forecast_curve(
    days: np.ndarray, blended: np.ndarray, seasonal: np.ndarray, path: str | Path
) -> Path:
    """Forecast-blended mean flow e^g next to the seasonal mean e^r."""
    frame = pd.DataFrame({"day": days, "blended_mean": blended, "seasonal_mean": seasonal})
    return _write(frame, path)


def write_value_function(values: ValueFunction, directory: str | Path, stem: str = "value") -> list[Path]:
    """One CSV per mode: rows are x nodes, columns t nodes."""
    written = []
    for mode in range(values.n_modes):
        frame = pd.DataFrame(
            values.u[mode], columns=[f"t_{int(t)}" for t in values.grid.t_nodes]
        )
        frame.insert(0, "x", values.grid.x_nodes)
        written.append(_write(frame, Path(directory) / f"{stem}_mode_{mode}.csv"))
    return written


def write_schedule(schedule: ModeSchedule, path: str | Path) -> Path:
    """``(day, mode)`` rows with 1-based days."""
    frame = pd.DataFrame({"day": np.arange(1, schedule.n_days + 1), "mode": schedule.modes})
    return _write(frame, path)


def write_events(schedules: list[ModeSchedule], path: str | Path) -> Path:
    """Events table in "(Day of action, Move to state)" form, one row per schedule."""
    frame = pd.DataFrame(
        {
            "year": [s.year for s in schedules],
            "strategy": [s.strategy for s in schedules],
            "forecast_days": [s.forecast_days for s in schedules],
            "cost_ratio": [s.cost_ratio for s in schedules],
            "actions": [s.events_table for s in schedules],
            "payoff": [s.realized_payoff for s in schedules],
        }
    )
    return _write(frame, path)


def write_report(report: BacktestReport, directory: str | Path, command: str) -> dict[str, Path]:
    """
    Per-cell CSV, long-term averages CSV and JSON summary.

    Returns:
        Mapping of artefact name to written path.
    """
    directory = Path(directory)
    cells = pd.DataFrame([c.model_dump() for c in report.cells])
    averages = pd.DataFrame([a.model_dump() for a in report.long_term_averages()])
    paths = {
        "cells": _write(cells, directory / f"{command}_cells.csv"),
        "averages": _write(averages, directory / f"{command}_averages.csv"),
    }
    summary = directory / f"{command}_summary.json"
    summary.write_text(
        ReportSummary.from_report(command, report).model_dump_json(indent=2), encoding="utf-8"
    )
    paths["summary"] = summary
    logger.info("report_written", command=command, directory=str(directory), cells=len(report.cells))
    return paths


def write_gamma_curves(report: BacktestReport, path: str | Path) -> Path:
    """γ against C/D, one column per (strategy, l) series, one row per (year, C/D)."""
    frame = pd.DataFrame(
        [
            {
                "year": c.year,
                "cost_ratio": c.cost_ratio,
                "series": f"{c.strategy}_l{c.forecast_days}",
                "gamma": c.gamma,
            }
            for c in report.cells
        ]
    )
    if frame.empty:
        return _write(frame, path)
    wide = frame.pivot_table(
        index=["year", "cost_ratio"], columns="series", values="gamma", aggfunc="first", dropna=False
    ).reset_index()
    wide.columns.name = None
    return _write(wide, path)
