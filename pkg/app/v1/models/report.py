"""Backtest report records."""

from __future__ import annotations

from statistics import fmean

from pydantic import Field

from app.v1.models.base import DomainModel


class BacktestCell(DomainModel):
    """
    One (year, strategy, l, C/D) result with enough metadata to rerun it alone.

    ``payoff`` and ``gamma`` are None when the strategy failed; ``error``
    then holds the failure message.
    """

    year: int
    strategy: str
    forecast_days: int
    relaxation_days: int
    cost_ratio: float
    capacity_benchmark: float = Field(description="D, m.u.")
    payoff: float | None = None
    gamma: float | None = None
    events: str = ""
    error: str | None = None
    seed: int
    grid_nodes: int
    spatial_tol: float
    total_tol: float


class AverageRow(DomainModel):
    """Mean γ over the years of one (strategy, l, C/D) series."""

    strategy: str
    forecast_days: int
    cost_ratio: float
    mean_gamma: float
    mean_payoff: float
    n_years: int


class BacktestReport(DomainModel):
    """All cells of a backtest or sweep."""

    cells: tuple[BacktestCell, ...]
    plant_modes: int
    price: float
    cost_at_total_capacity: bool = True

    def long_term_averages(self) -> list[AverageRow]:
        """Arithmetic mean of the successful yearly cells per series."""
        groups: dict[tuple[str, int, float], list[BacktestCell]] = {}
        for cell in self.cells:
            if cell.gamma is None or cell.payoff is None:
                continue
            key = (cell.strategy, cell.forecast_days, cell.cost_ratio)
            groups.setdefault(key, []).append(cell)
        rows = []
        for (strategy, l, ratio), cells in sorted(groups.items()):
            rows.append(
                AverageRow(
                    strategy=strategy,
                    forecast_days=l,
                    cost_ratio=ratio,
                    mean_gamma=fmean(c.gamma for c in cells if c.gamma is not None),
                    mean_payoff=fmean(c.payoff for c in cells if c.payoff is not None),
                    n_years=len(cells),
                )
            )
        return rows

    @property
    def failures(self) -> list[BacktestCell]:
        return [c for c in self.cells if c.error is not None]


class ReportSummary(DomainModel):
    """Machine-readable summary written next to the report CSVs."""

    command: str
    plant_modes: int
    price: float
    cost_at_total_capacity: bool
    day_convention: str = Field(default="1-based day of year")
    initial_switch_charged: bool = Field(default=True, description="Cost of leaving mode 0 on day 1 is charged")
    n_cells: int
    n_failures: int
    averages: list[AverageRow]
    cells: list[BacktestCell]

    @classmethod
    def from_report(cls, command: str, report: BacktestReport) -> ReportSummary:
        return cls(
            command=command,
            plant_modes=report.plant_modes,
            price=report.price,
            cost_at_total_capacity=report.cost_at_total_capacity,
            n_cells=len(report.cells),
            n_failures=len(report.failures),
            averages=report.long_term_averages(),
            cells=list(report.cells),
        )
