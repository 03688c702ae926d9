"""
Synthetic daily flow records.

Generates flow data from the calibrated-model family itself: a seasonal
log-mean with a spring flood and an autumn peak, plus an Ornstein–Uhlenbeck
residual sampled with its exact transition law. Used wherever real gauge
data is not at hand, including the test suite.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
import structlog

from app.v1.models.flow import DAYS_PER_YEAR, FlowSeries, is_leap_day

logger = structlog.get_logger(__name__)

BASE_LOG_FLOW = float(np.log(3.0))
SPRING_PEAK_DAY = 125
SPRING_AMPLITUDE = 2.5
SPRING_WIDTH_DAYS = 20.0
AUTUMN_PEAK_DAY = 290
AUTUMN_AMPLITUDE = 1.0
AUTUMN_WIDTH_DAYS = 30.0

DEFAULT_KAPPA = 0.0208
DEFAULT_SIGMA = 0.1018


def _bump(days: np.ndarray, centre: int, width: float) -> np.ndarray:
    offset = (days - centre + DAYS_PER_YEAR // 2) % DAYS_PER_YEAR - DAYS_PER_YEAR // 2
    return np.exp(-0.5 * (offset / width) ** 2)


def seasonal_curve() -> np.ndarray:
    """Log-mean flow per day of year: low winter base, spring flood, autumn rise."""
    days = np.arange(DAYS_PER_YEAR)
    return (
        BASE_LOG_FLOW
        + SPRING_AMPLITUDE * _bump(days, SPRING_PEAK_DAY, SPRING_WIDTH_DAYS)
        + AUTUMN_AMPLITUDE * _bump(days, AUTUMN_PEAK_DAY, AUTUMN_WIDTH_DAYS)
    )


def ou_residuals(
    n: int,
    kappa: float,
    sigma: float,
    seed: int,
    start: float | None = None,
) -> np.ndarray:
    """
    Exact daily samples of dS = −κS dt + σ dW.

    Args:
        n: Number of samples.
        kappa: Mean-reversion rate, per day (> 0).
        sigma: Volatility, per sqrt(day).
        seed: Seed of the generator.
        start: Initial value; drawn from the stationary law when omitted.
    """
    if not kappa > 0.0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    rng = np.random.default_rng(seed)
    decay = np.exp(-kappa)
    step_sd = sigma * np.sqrt((1.0 - decay**2) / (2.0 * kappa))
    stationary_sd = sigma / np.sqrt(2.0 * kappa)
    shocks = rng.standard_normal(n)
    values = np.empty(n)
    values[0] = start if start is not None else stationary_sd * shocks[0]
    for i in range(1, n):
        values[i] = decay * values[i - 1] + step_sd * shocks[i]
    return values


def synthesize_flows(
    first_year: int = 1980,
    last_year: int = 2018,
    *,
    kappa: float = DEFAULT_KAPPA,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 20200615,
    log_mean: np.ndarray | None = None,
) -> FlowSeries:
    """
    Daily flows for every leap-day-free date of ``first_year..last_year``.

    Example:
        >>> flows = synthesize_flows(2000, 2001, seed=1)
        >>> len(flows)
        730
    """
    if last_year < first_year:
        raise ValueError(f"last_year {last_year} precedes first_year {first_year}")
    log_mean = seasonal_curve() if log_mean is None else np.asarray(log_mean, dtype=np.float64)
    if log_mean.shape != (DAYS_PER_YEAR,):
        raise ValueError(f"log_mean must hold {DAYS_PER_YEAR} values")

    dates = pd.date_range(f"{first_year}-01-01", f"{last_year}-12-31", freq="D").to_numpy(
        dtype="datetime64[D]"
    )
    dates = dates[~is_leap_day(dates)]
    noise = ou_residuals(dates.size, kappa, sigma, seed)
    day = np.tile(np.arange(DAYS_PER_YEAR), last_year - first_year + 1)
    flows = np.exp(log_mean[day] + noise)
    logger.info(
        "synthetic_flows_generated",
        first_year=first_year,
        last_year=last_year,
        kappa=kappa,
        sigma=sigma,
        seed=seed,
    )
    return FlowSeries(dates=dates, flows=flows)
