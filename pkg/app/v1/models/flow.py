"""
Flow observations and the calibrated flow model.

Types:
    - FlowSeries: dated daily flow observations (m³/s)
    - SeasonalProfile: day-of-year log-mean r_t and its derivative r'_t
    - OUParams: mean-reversion rate κ and volatility σ of the log-residual
    - ResidualSeries: log-flow minus seasonal log-mean, per observation

Day-of-year indices are 0-based on a 365-day calendar: Feb 29 has no index
and every date after it in a leap year shares the index of the same calendar
date in a common year.
"""

from __future__ import annotations

from datetime import date
from typing import Iterable

import numpy as np
import pandas as pd
from pydantic import Field, field_validator, model_validator

from app.v1.models.base import ArrayModel, DomainModel, readonly_array

DAYS_PER_YEAR = 365


def day_of_year(dates: np.ndarray) -> np.ndarray:
    """
    Leap-day-free 0-based day-of-year for each date.

    Args:
        dates: Array of ``datetime64[D]`` values.

    Returns:
        Integer array in 0..364.
    """
    index = pd.DatetimeIndex(dates)
    doy = np.asarray(index.dayofyear, dtype=np.int64) - 1
    after_leap_day = np.asarray(index.is_leap_year) & (np.asarray(index.month) > 2)
    return doy - after_leap_day.astype(np.int64)


def is_leap_day(dates: np.ndarray) -> np.ndarray:
    """Boolean mask of Feb 29 entries."""
    index = pd.DatetimeIndex(dates)
    return (np.asarray(index.month) == 2) & (np.asarray(index.day) == 29)


class FlowSeries(ArrayModel):
    """
    Dated daily flow observations.

    A raw series may contain anything a CSV can hold; ``clean_series`` turns
    it into one whose flows are strictly positive, whose dates strictly
    increase and that holds no Feb 29 records.

    Example:
        >>> series = FlowSeries.from_records([(date(2015, 1, 1), 3.2)])
        >>> len(series)
        1
    """

    dates: np.ndarray = Field(description="Observation dates, datetime64[D]")
    flows: np.ndarray = Field(description="Daily mean flow in m³/s")

    # ==================== Validators ====================

    @field_validator("dates", mode="before")
    @classmethod
    def _coerce_dates(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype="datetime64[D]")

    @field_validator("flows", mode="before")
    @classmethod
    def _coerce_flows(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check_shapes(self) -> FlowSeries:
        if self.dates.ndim != 1 or self.flows.ndim != 1:
            raise ValueError("dates and flows must be one-dimensional")
        if self.dates.shape != self.flows.shape:
            raise ValueError(
                f"dates ({self.dates.size}) and flows ({self.flows.size}) differ in length"
            )
        return self

    # ==================== Constructors ====================

    @classmethod
    def from_records(cls, records: Iterable[tuple[date, float]]) -> FlowSeries:
        """Build a series from ``(date, flow)`` pairs."""
        pairs = list(records)
        dates = np.array([d for d, _ in pairs], dtype="datetime64[D]")
        flows = np.array([q for _, q in pairs], dtype=np.float64)
        return cls(dates=dates, flows=flows)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> FlowSeries:
        """Build a series from a frame with ``date`` and ``flow`` columns."""
        dates = pd.to_datetime(frame["date"]).to_numpy(dtype="datetime64[D]")
        return cls(dates=dates, flows=frame["flow"].to_numpy(dtype=np.float64))

    # ==================== Computed Properties ====================

    @property
    def day_index(self) -> np.ndarray:
        """Leap-day-free day-of-year of every record."""
        return day_of_year(self.dates)

    @property
    def years(self) -> np.ndarray:
        """Calendar year of every record."""
        return np.asarray(pd.DatetimeIndex(self.dates).year, dtype=np.int64)

    @property
    def log_flows(self) -> np.ndarray:
        return np.log(self.flows)

    # ==================== Instance Methods ====================

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": pd.DatetimeIndex(self.dates), "flow": self.flows})

    def between_years(self, first: int, last: int) -> FlowSeries:
        """Records whose calendar year lies in ``[first, last]``."""
        mask = (self.years >= first) & (self.years <= last)
        return FlowSeries(dates=self.dates[mask], flows=self.flows[mask])

    def year(self, year: int) -> FlowSeries:
        return self.between_years(year, year)

    def complete_years(self) -> list[int]:
        """Years holding all 365 leap-day-free days."""
        years, counts = np.unique(self.years, return_counts=True)
        return [int(y) for y, n in zip(years, counts) if n == DAYS_PER_YEAR]

    def __len__(self) -> int:
        return int(self.flows.size)


class SeasonalProfile(ArrayModel):
    """
    Seasonal log-mean r_t and its derivative, one value per day of year.

    ``log_mean_derivative`` is the circular central difference of
    ``log_mean`` with a one-day step.
    """

    log_mean: np.ndarray = Field(description="r_d, log m³/s, d = 0..364")
    log_mean_derivative: np.ndarray = Field(description="r'_d, per day")
    window_days: int = Field(default=7, ge=1, description="Moving-average width used")

    @field_validator("log_mean", "log_mean_derivative", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check_length(self) -> SeasonalProfile:
        for name in ("log_mean", "log_mean_derivative"):
            values = getattr(self, name)
            if values.shape != (DAYS_PER_YEAR,):
                raise ValueError(f"{name} must hold {DAYS_PER_YEAR} values, got {values.shape}")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name} contains non-finite values")
        return self

    def at(self, day: np.ndarray | int) -> tuple[np.ndarray, np.ndarray]:
        """
        Look up (r, r') for absolute day indices, wrapping every 365 days.

        Args:
            day: Day index or array of day indices (day 365 is next year's day 0).

        Returns:
            Tuple of arrays (log-mean, log-mean derivative).
        """
        index = np.mod(np.asarray(day, dtype=np.int64), DAYS_PER_YEAR)
        return self.log_mean[index], self.log_mean_derivative[index]


class OUParams(DomainModel):
    """
    Ornstein–Uhlenbeck parameters of the log-flow residual.

    Estimated parameters are strictly positive; zero is accepted so that
    degenerate dynamics (pure drift, pure relaxation) can be expressed.
    """

    kappa: float = Field(ge=0.0, description="Mean-reversion rate, per day")
    sigma: float = Field(ge=0.0, description="Volatility, per sqrt(day)")
    lags_used: tuple[int, ...] = Field(default=(), description="ACF lags entering the κ fit")
    sample_variance: float | None = Field(default=None, description="Residual variance used for σ")

    @property
    def asymptotic_variance(self) -> float:
        """σ²/(2κ); infinite when κ = 0."""
        if self.kappa == 0.0:
            return float("inf")
        return self.sigma**2 / (2.0 * self.kappa)

    @property
    def stationary_sd(self) -> float:
        return float(np.sqrt(self.asymptotic_variance))


class ResidualSeries(ArrayModel):
    """Log-flow residuals s = log Q − r_doy, one per cleaned observation."""

    dates: np.ndarray
    day_index: np.ndarray
    values: np.ndarray

    @field_validator("dates", mode="before")
    @classmethod
    def _coerce_dates(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype="datetime64[D]")

    @field_validator("day_index", mode="before")
    @classmethod
    def _coerce_index(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.int64)

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check_lengths(self) -> ResidualSeries:
        if not (self.dates.shape == self.day_index.shape == self.values.shape):
            raise ValueError("dates, day_index and values must have equal length")
        return self

    def __len__(self) -> int:
        return int(self.values.size)
