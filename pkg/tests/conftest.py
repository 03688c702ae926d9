"""Shared fixtures: a seasonal flow model, synthetic records and the reference plants."""

from __future__ import annotations

import numpy as np
import pytest

from app.v1.models.flow import OUParams, SeasonalProfile
from app.v1.models.plant import PlantSpec, UnitSpec
from app.v1.models.solver import SolverSettings
from app.v1.services.payoff import capacity_benchmark
from app.v1.services.synthetic import DEFAULT_KAPPA, DEFAULT_SIGMA, seasonal_curve, synthesize_flows


@pytest.fixture(scope="session")
def profile() -> SeasonalProfile:
    log_mean = seasonal_curve()
    derivative = (np.roll(log_mean, -1) - np.roll(log_mean, 1)) / 2.0
    return SeasonalProfile(log_mean=log_mean, log_mean_derivative=derivative)


@pytest.fixture(scope="session")
def ou() -> OUParams:
    return OUParams(kappa=DEFAULT_KAPPA, sigma=DEFAULT_SIGMA)


@pytest.fixture(scope="session")
def synthetic_flows():
    return synthesize_flows(2000, 2003, seed=7)


@pytest.fixture(scope="session")
def plant_one() -> PlantSpec:
    base = PlantSpec.build([UnitSpec()])
    return base.with_cost(0.01 * capacity_benchmark(base, 1.0))


@pytest.fixture(scope="session")
def plant_two() -> PlantSpec:
    base = PlantSpec.build([UnitSpec(), UnitSpec()])
    return base.with_cost(0.01 * capacity_benchmark(base, 1.0))


@pytest.fixture(scope="session")
def coarse_settings() -> SolverSettings:
    return SolverSettings(grid_nodes=81, spatial_tol_rel=1e-9, total_tol_rel=1e-7)
