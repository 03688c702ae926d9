from __future__ import annotations

import numpy as np
import pytest
from statsmodels.tsa.stattools import acovf

from app.v1.core.exceptions import DataError
from app.v1.models.flow import DAYS_PER_YEAR, OUParams, SeasonalProfile
from app.v1.models.forecast import ForecastSpec
from app.v1.services.dynamics import (
    blended_mean_flow,
    build_drift,
    coefficients_log,
    drift_q,
    simulate_paths,
)


@pytest.fixture
def flat_profile() -> SeasonalProfile:
    return SeasonalProfile(
        log_mean=np.full(DAYS_PER_YEAR, np.log(5.0)),
        log_mean_derivative=np.zeros(DAYS_PER_YEAR),
    )


# ==================== build_drift ====================


def test_no_forecast_uses_the_seasonal_profile(profile, ou):
    spec = build_drift(40, 8.0, ForecastSpec.none(40), profile, ou)
    assert not spec.has_forecast
    days = np.arange(40, 120)
    mean, slope = spec.mean_and_slope(days)
    expected_mean, expected_slope = profile.at(days)
    np.testing.assert_array_equal(mean, expected_mean)
    np.testing.assert_array_equal(slope, expected_slope)


def test_forecast_window_follows_forecast_then_relaxes(profile, ou):
    forecast = ForecastSpec(start_index=100, values=[10.0, 12.0, 14.0], relaxation_days=4)
    spec = build_drift(100, 20.0, forecast, profile, ou)
    assert spec.window_end == 107
    assert spec.g[0] == np.log(20.0)
    np.testing.assert_array_equal(spec.g[1:4], np.log([10.0, 12.0, 14.0]))
    # the relaxation ends exactly on the seasonal mean
    assert spec.g[-1] == profile.at(107)[0]

    mean, slope = spec.mean_and_slope(np.array([101, 103, 107]))
    assert mean[0] == np.log(10.0)
    assert slope[0] == pytest.approx(np.log(10.0) - np.log(20.0))
    assert mean[1] == np.log(14.0)
    assert mean[2] == profile.at(107)[0]


def test_relaxation_is_linear(profile, ou):
    forecast = ForecastSpec(start_index=10, values=[6.0], relaxation_days=5)
    spec = build_drift(10, 6.0, forecast, profile, ou)
    steps = np.diff(spec.g[1:])
    np.testing.assert_allclose(steps, steps[0], rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(spec.g_slope[1:], np.diff(spec.g))


def test_drift_outside_window_reverts_to_profile(profile, ou):
    forecast = ForecastSpec(start_index=200, values=[30.0, 31.0], relaxation_days=3)
    spec = build_drift(200, 29.0, forecast, profile, ou)
    for day in (150, 200, 206, 400):
        mean, slope = spec.mean_and_slope(day)
        expected = profile.at(day)
        assert float(mean) == expected[0]
        assert float(slope) == expected[1]


@pytest.mark.parametrize(
    ("q_now", "forecast"),
    [
        (0.0, ForecastSpec.none(3)),
        (-2.0, ForecastSpec.none(3)),
        (5.0, ForecastSpec.none(4)),
        (5.0, ForecastSpec(start_index=3, values=[4.0, 0.0])),
    ],
)
def test_build_drift_rejects_bad_inputs(q_now, forecast, profile, ou):
    with pytest.raises(DataError):
        build_drift(3, q_now, forecast, profile, ou)


# ==================== coefficients ====================


def test_drift_q_is_ito_transform_of_log_drift(profile, ou):
    spec = build_drift(0, 10.0, ForecastSpec.none(0), profile, ou)
    q = np.array([1.0, 5.0, 20.0, 80.0])
    mu_x, diffusion = coefficients_log(np.log(q), 130, spec)
    np.testing.assert_allclose(drift_q(q, 130, spec), (mu_x + 0.5 * diffusion) * q, rtol=1e-13)
    np.testing.assert_array_equal(diffusion, np.full(4, ou.sigma**2))


def test_flow_at_seasonal_mean_drifts_with_the_season(profile, ou):
    spec = build_drift(0, 10.0, ForecastSpec.none(0), profile, ou)
    r, r_prime = profile.at(120)
    q = np.exp(r)
    assert float(drift_q(q, 120, spec)) == pytest.approx((r_prime + 0.5 * ou.sigma**2) * q)


# ==================== simulate_paths ====================


def test_paths_are_reproducible_per_seed(profile, ou):
    spec = build_drift(0, 4.0, ForecastSpec.none(0), profile, ou)
    first = simulate_paths(4.0, spec, 3, 60, seed=42)
    second = simulate_paths(4.0, spec, 3, 60, seed=42)
    np.testing.assert_array_equal(first.paths, second.paths)
    other = simulate_paths(4.0, spec, 3, 60, seed=43)
    assert not np.array_equal(first.paths, other.paths)


def test_path_does_not_depend_on_number_of_paths(profile, ou):
    spec = build_drift(0, 4.0, ForecastSpec.none(0), profile, ou)
    few = simulate_paths(4.0, spec, 2, 50, seed=5)
    many = simulate_paths(4.0, spec, 6, 50, seed=5)
    np.testing.assert_allclose(many.paths[:2], few.paths, rtol=1e-12)


def test_paths_start_at_q0_and_stay_positive(profile, ou):
    spec = build_drift(30, 7.5, ForecastSpec.none(30), profile, ou)
    paths = simulate_paths(7.5, spec, 4, 365, seed=1)
    assert paths.paths.shape == (4, 365)
    assert paths.start_index == 30
    np.testing.assert_allclose(paths.paths[:, 0], 7.5, rtol=1e-14)
    assert np.all(paths.paths > 0.0)


def test_zero_volatility_relaxes_geometrically(flat_profile):
    ou = OUParams(kappa=0.1, sigma=0.0)
    spec = build_drift(0, 20.0, ForecastSpec.none(0), flat_profile, ou)
    paths = simulate_paths(20.0, spec, 2, 30, seed=0)
    steps = np.arange(30)
    expected = np.exp(np.log(5.0) + (np.log(20.0) - np.log(5.0)) * 0.9**steps)
    np.testing.assert_allclose(paths.paths[0], expected, rtol=1e-12)
    np.testing.assert_array_equal(paths.paths[0], paths.paths[1])


def test_no_dynamics_keeps_flow_constant(flat_profile):
    spec = build_drift(0, 5.0, ForecastSpec.none(0), flat_profile, OUParams(kappa=0.0, sigma=0.0))
    paths = simulate_paths(5.0, spec, 1, 20, seed=0)
    np.testing.assert_allclose(paths.paths, 5.0, rtol=1e-14)


def test_long_run_log_variance_matches_discrete_ou(flat_profile):
    kappa, sigma = 0.1, 0.2
    spec = build_drift(0, 5.0, ForecastSpec.none(0), flat_profile, OUParams(kappa=kappa, sigma=sigma))
    paths = simulate_paths(5.0, spec, 2000, 200, seed=8)
    final = np.log(paths.paths[:, -1])
    # Euler–Maruyama AR(1) coefficient is 1 − κ
    stationary = sigma**2 / (1.0 - (1.0 - kappa) ** 2)
    assert np.var(final) == pytest.approx(stationary, rel=0.1)
    assert np.mean(final) == pytest.approx(np.log(5.0), abs=0.05)


def test_log_residual_autocorrelation_decays_exponentially(flat_profile):
    kappa, steps_per_day = 0.05, 4
    spec = build_drift(0, 5.0, ForecastSpec.none(0), flat_profile, OUParams(kappa=kappa, sigma=0.2))
    paths = simulate_paths(5.0, spec, 100, 8000, dt=1.0 / steps_per_day, seed=13)
    residuals = np.log(paths.paths[:, 400:]) - np.log(5.0)
    lags = np.array([1, 5, 10])
    max_lag = int(lags.max()) * steps_per_day
    covariances = np.mean(
        [acovf(row, adjusted=True, demean=False, fft=True, nlag=max_lag) for row in residuals], axis=0
    )
    observed = covariances[lags * steps_per_day] / covariances[0]
    np.testing.assert_allclose(observed, np.exp(-kappa * lags), atol=0.015)


def test_single_step_returns_initial_column(profile, ou):
    spec = build_drift(0, 3.0, ForecastSpec.none(0), profile, ou)
    paths = simulate_paths(3.0, spec, 3, 1, seed=0)
    np.testing.assert_allclose(paths.paths, np.full((3, 1), 3.0), rtol=1e-14)


@pytest.mark.parametrize(("q0", "n_paths", "dt"), [(0.0, 1, 1.0), (3.0, 0, 1.0), (3.0, 1, 0.0)])
def test_simulate_rejects_bad_arguments(q0, n_paths, dt, profile, ou):
    spec = build_drift(0, 3.0, ForecastSpec.none(0), profile, ou)
    with pytest.raises(DataError):
        simulate_paths(q0, spec, n_paths, 10, dt=dt)


# ==================== blended_mean_flow ====================


def test_blended_mean_equals_seasonal_without_forecast(profile, ou):
    spec = build_drift(50, 9.0, ForecastSpec.none(50), profile, ou)
    days, blended, seasonal = blended_mean_flow(spec, 30)
    np.testing.assert_array_equal(days, np.arange(50, 80))
    np.testing.assert_array_equal(blended, seasonal)


def test_blended_mean_follows_forecast_inside_window(profile, ou):
    forecast = ForecastSpec(start_index=50, values=[40.0, 41.0], relaxation_days=2)
    spec = build_drift(50, 39.0, forecast, profile, ou)
    days, blended, seasonal = blended_mean_flow(spec, 10)
    assert blended[1] == pytest.approx(40.0)
    assert blended[2] == pytest.approx(41.0)
    np.testing.assert_allclose(blended[5:], seasonal[5:], rtol=1e-14)
