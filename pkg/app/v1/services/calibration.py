"""
Calibration of the seasonal log-flow model.

Pipeline: clean_series -> seasonal_log_mean -> residuals -> estimate_ou.

The seasonal log-mean pools log-flows across all calibration years per
day of year and smooths them with a centered moving window that wraps
around the year boundary. The residual is modelled as an Ornstein–Uhlenbeck
process whose autocorrelation e^{-κτ} and stationary variance σ²/(2κ) give
the two parameters.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
import structlog
from scipy import ndimage, stats
from statsmodels.tsa.stattools import acf

from app.v1.core.exceptions import CalibrationError, DataError
from app.v1.models.flow import (
    DAYS_PER_YEAR,
    FlowSeries,
    OUParams,
    ResidualSeries,
    SeasonalProfile,
    is_leap_day,
)

logger = structlog.get_logger(__name__)

DEFAULT_WINDOW_DAYS = 7
DEFAULT_MAX_LAG_DAYS = 30


def clean_series(raw: FlowSeries) -> FlowSeries:
    """
    Validate raw observations and drop leap days.

    Records are sorted by date. Feb 29 is removed so every year has the
    same 365-day calendar.

    Args:
        raw: Observations as read from disk.

    Returns:
        Series with strictly increasing dates, strictly positive flows, no
        Feb 29 and no missing day inside any year.

    Raises:
        DataError: Empty input or result, duplicate date, missing or
            non-positive flow (the first offending date is named), or a gap
            inside a year.
    """
    if len(raw) == 0:
        raise DataError("flow series is empty")

    order = np.argsort(raw.dates, kind="stable")
    dates = raw.dates[order]
    flows = raw.flows[order]

    duplicated = np.flatnonzero(np.diff(dates) == np.timedelta64(0, "D"))
    if duplicated.size:
        day = pd.Timestamp(dates[duplicated[0]]).date()
        raise DataError(f"duplicate date {day}", date=day)

    missing = np.flatnonzero(~np.isfinite(flows))
    if missing.size:
        day = pd.Timestamp(dates[missing[0]]).date()
        raise DataError(f"missing flow on {day}", date=day)

    non_positive = np.flatnonzero(flows <= 0.0)
    if non_positive.size:
        day = pd.Timestamp(dates[non_positive[0]]).date()
        raise DataError(f"non-positive flow {flows[non_positive[0]]} on {day}", date=day)

    keep = ~is_leap_day(dates)
    dates = dates[keep]
    flows = flows[keep]
    if dates.size == 0:
        raise DataError("no records left after removing leap days")

    cleaned = FlowSeries(dates=dates, flows=flows)
    _check_contiguous(cleaned)
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        logger.debug("leap_days_dropped", count=dropped)
    return cleaned


def _check_contiguous(series: FlowSeries) -> None:
    """Within one year, consecutive records must be consecutive days of the 365-day calendar."""
    years = series.years
    doy = series.day_index
    same_year = years[1:] == years[:-1]
    gaps = same_year & (np.diff(doy) != 1)
    if np.any(gaps):
        position = int(np.flatnonzero(gaps)[0]) + 1
        day = pd.Timestamp(series.dates[position]).date()
        raise DataError(f"gap in observations before {day}", date=day)


def seasonal_log_mean(data: FlowSeries, window_days: int = DEFAULT_WINDOW_DAYS) -> SeasonalProfile:
    """
    Day-of-year log-mean r_d and its derivative.

    r_d is the mean of log-flow over every calibration year and over the
    days d - h..d + h (h = window_days // 2), wrapping across the year
    boundary. Observations are pooled, so years with missing days weigh in
    proportionally to what they contribute. r'_d is the circular central
    difference (r_{d+1} - r_{d-1}) / 2.

    Raises:
        DataError: Even window, or some day of year has no observation.
    """
    if window_days < 1 or window_days % 2 == 0:
        raise DataError(f"window_days must be a positive odd integer, got {window_days}")
    if len(data) < DAYS_PER_YEAR:
        raise DataError(f"need at least one full year of data, got {len(data)} records")

    doy = data.day_index
    sums = np.bincount(doy, weights=data.log_flows, minlength=DAYS_PER_YEAR)
    counts = np.bincount(doy, minlength=DAYS_PER_YEAR).astype(np.float64)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"insufficient data: day of year {empty + 1} never observed")

    kernel = np.ones(window_days)
    window_sums = ndimage.convolve1d(sums, kernel, mode="wrap")
    window_counts = ndimage.convolve1d(counts, kernel, mode="wrap")
    log_mean = window_sums / window_counts
    derivative = (np.roll(log_mean, -1) - np.roll(log_mean, 1)) / 2.0

    return SeasonalProfile(
        log_mean=log_mean,
        log_mean_derivative=derivative,
        window_days=window_days,
    )


def residuals(data: FlowSeries, profile: SeasonalProfile) -> ResidualSeries:
    """s_i = log(flow_i) − r_{doy(i)} for every record."""
    doy = data.day_index
    return ResidualSeries(
        dates=data.dates,
        day_index=doy,
        values=data.log_flows - profile.log_mean[doy],
    )


def estimate_ou(res: ResidualSeries, max_lag_days: int = DEFAULT_MAX_LAG_DAYS) -> OUParams:
    """
    Fit κ and σ from the residual autocorrelation and variance.

    The residuals are de-meaned; κ is minus the least-squares slope of
    log ACF(τ) against τ over lags 1..max_lag_days with positive ACF, and
    σ = sqrt(2·κ·variance) so that σ²/(2κ) equals the sample variance.

    Raises:
        CalibrationError: Too few residuals, zero variance, no usable lag,
            or a non-decaying autocorrelation.
    """
    if max_lag_days < 1:
        raise CalibrationError(f"max_lag_days must be positive, got {max_lag_days}")
    values = np.asarray(res.values, dtype=np.float64)
    if values.size < 10 * max_lag_days:
        raise CalibrationError(
            f"need at least {10 * max_lag_days} residuals for {max_lag_days} lags, got {values.size}"
        )

    centred = values - values.mean()
    variance = float(np.mean(centred**2))
    if np.ptp(values) == 0.0 or not variance > 0.0:
        raise CalibrationError("residual variance is zero; κ and σ are not identifiable")

    correlation = acf(centred, nlags=max_lag_days, fft=True)
    lags = np.arange(1, max_lag_days + 1)
    usable = correlation[1:] > 0.0
    if np.count_nonzero(usable) < 2:
        raise CalibrationError("autocorrelation is non-positive at all usable lags")

    fit = stats.linregress(lags[usable], np.log(correlation[1:][usable]))
    kappa = -float(fit.slope)
    if not kappa > 0.0:
        raise CalibrationError(f"autocorrelation does not decay (slope {fit.slope:.4g})")
    sigma = float(np.sqrt(2.0 * kappa * variance))

    logger.info(
        "ou_estimated",
        kappa=kappa,
        sigma=sigma,
        variance=variance,
        lags=int(np.count_nonzero(usable)),
        r_value=float(fit.rvalue),
    )
    return OUParams(
        kappa=kappa,
        sigma=sigma,
        lags_used=tuple(int(t) for t in lags[usable]),
        sample_variance=variance,
    )


def calibrate(
    data: FlowSeries,
    window_days: int = DEFAULT_WINDOW_DAYS,
    max_lag_days: int = DEFAULT_MAX_LAG_DAYS,
) -> tuple[SeasonalProfile, OUParams]:
    """Full pipeline on raw observations."""
    cleaned = clean_series(data)
    profile = seasonal_log_mean(cleaned, window_days)
    ou = estimate_ou(residuals(cleaned, profile), max_lag_days)
    return profile, ou
