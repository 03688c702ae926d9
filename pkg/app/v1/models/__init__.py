"""
Domain models of the switching planner.

All models are immutable pydantic records; array-valued fields are stored as
read-only numpy arrays.

Models:
    - FlowSeries, SeasonalProfile, OUParams, ResidualSeries: flow data and its calibrated model
    - ForecastSpec, DriftSpec, PathSet: forecast-blended dynamics and simulated paths
    - UnitSpec, PlantSpec, PayoffTable: production units, modes and payoffs
    - Grid, TerminalCondition, ValueFunction, SwitchDecision, SolverSettings: VI solver input and output
    - ModeSchedule, SwitchEvent, EvaluationResult: realized strategies
    - BacktestCell, AverageRow, BacktestReport, ReportSummary: backtest reports

Example:
    from app.v1.models import PlantSpec, UnitSpec

    plant = PlantSpec.build([UnitSpec(), UnitSpec()], cost=40_000.0)
"""

from app.v1.models.flow import FlowSeries, OUParams, ResidualSeries, SeasonalProfile
from app.v1.models.forecast import DriftSpec, ForecastSpec, PathSet
from app.v1.models.plant import PayoffTable, PlantSpec, UnitSpec
from app.v1.models.report import AverageRow, BacktestCell, BacktestReport, ReportSummary
from app.v1.models.schedule import EvaluationResult, ModeSchedule, SwitchEvent
from app.v1.models.solver import (
    ConvergenceReport,
    Grid,
    SolverSettings,
    SwitchDecision,
    TerminalCondition,
    ValueFunction,
)

__all__ = [
    # Flow data
    "FlowSeries",
    "OUParams",
    "ResidualSeries",
    "SeasonalProfile",
    # Dynamics
    "DriftSpec",
    "ForecastSpec",
    "PathSet",
    # Plant
    "PayoffTable",
    "PlantSpec",
    "UnitSpec",
    # Solver
    "ConvergenceReport",
    "Grid",
    "SolverSettings",
    "SwitchDecision",
    "TerminalCondition",
    "ValueFunction",
    # Strategies and reports
    "AverageRow",
    "BacktestCell",
    "BacktestReport",
    "EvaluationResult",
    "ModeSchedule",
    "ReportSummary",
    "SwitchEvent",
]
