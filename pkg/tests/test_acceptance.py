"""Full-size runs on the reference plants: minutes, not seconds."""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from app.v1.models.forecast import ForecastSpec
from app.v1.models.solver import SolverSettings
from app.v1.services import vi_solver
from app.v1.services.dynamics import build_drift, simulate_paths
from app.v1.services.calibration import calibrate
from app.v1.services.payoff import capacity_benchmark, payoff_table
from app.v1.services.strategies import (
    evaluate_year,
    optimal_modes,
    run_hindsight_optimal,
    run_naive_strategy,
    run_pde_strategy,
    schedule_payoff,
)
from app.v1.services.synthetic import synthesize_flows

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def long_record():
    return synthesize_flows(1990, 2009, seed=21)


def _enumerated_payoffs(payoffs: np.ndarray, costs: np.ndarray) -> np.ndarray:
    n_days, m = payoffs.shape
    paths = np.array(list(itertools.product(range(m), repeat=n_days)))
    previous = np.hstack([np.zeros((paths.shape[0], 1), dtype=paths.dtype), paths[:, :-1]])
    earned = payoffs[np.arange(n_days), paths].sum(axis=1)
    charged = costs[previous, paths].sum(axis=1)
    return earned - charged


def test_dynamic_programme_matches_enumeration_up_to_ten_days():
    rng = np.random.default_rng(10)
    for _ in range(100):
        m = int(rng.integers(2, 4))
        n_days = int(rng.integers(1, 11))
        payoffs = rng.normal(0.0, 10.0, size=(n_days, m))
        costs = rng.uniform(0.0, 15.0, size=(m, m))
        np.fill_diagonal(costs, 0.0)

        modes, value = optimal_modes(payoffs, costs)
        assert value == pytest.approx(_enumerated_payoffs(payoffs, costs).max(), rel=1e-12, abs=1e-9)
        assert schedule_payoff(modes, payoffs, costs) == value


def test_full_year_two_unit_solution_respects_obstacles(plant_two, profile, ou):
    settings = SolverSettings()
    scale = capacity_benchmark(plant_two, 1.0)
    spatial_tol, total_tol = settings.absolute_tolerances(scale)
    grid = vi_solver.build_grid(profile, ou, 0, 365, n_nodes=settings.grid_nodes)
    spec = build_drift(0, float(np.exp(profile.log_mean[0])), ForecastSpec.none(0), profile, ou)
    table = payoff_table(grid.x_nodes, 1.0, plant_two)
    result = vi_solver.solve(
        grid, spec, table, plant_two.cost_matrix, spatial_tol=spatial_tol, total_tol=total_tol
    )
    assert result.obstacle_gap().min() >= -1e-6 * scale


def test_value_function_bounds_naive_mean_payoff(plant_one, profile, ou, coarse_settings):
    scale = capacity_benchmark(plant_one, 1.0)
    spatial_tol, total_tol = coarse_settings.absolute_tolerances(scale)
    q0 = float(np.exp(profile.log_mean[0]))
    spec = build_drift(0, q0, ForecastSpec.none(0), profile, ou)
    grid = vi_solver.build_grid(profile, ou, 0, 365, n_nodes=coarse_settings.grid_nodes)
    values = vi_solver.solve(
        grid,
        spec,
        payoff_table(grid.x_nodes, 1.0, plant_one),
        plant_one.cost_matrix,
        spatial_tol=spatial_tol,
        total_tol=total_tol,
    )

    paths = simulate_paths(q0, spec, n_paths=200, n_steps=365, seed=5)
    realized = np.array([run_naive_strategy(path, plant_one).realized_payoff for path in paths.paths])
    standard_error = realized.std(ddof=1) / np.sqrt(realized.size)
    bound = vi_solver.value_at(values, np.log(q0), 0, 0)
    assert realized.mean() <= bound + 2.0 * standard_error + 0.01 * scale


def test_free_switching_controllers_agree(plant_one, profile, ou, long_record):
    # fine nodes keep the interpolated rule sharp at the q_min payoff jump
    settings = SolverSettings(grid_nodes=801)
    free = plant_one.with_cost(0.0)
    for year in range(1990, 2010):
        flows = long_record.year(year)
        naive = run_naive_strategy(flows, free)
        assert run_hindsight_optimal(flows, free).realized_payoff == naive.realized_payoff
        pde = run_pde_strategy(flows, free, profile, ou, settings=settings)
        assert pde.realized_payoff == pytest.approx(naive.realized_payoff, rel=5e-3)


@pytest.mark.parametrize("forecast_days", [0, 5])
def test_hindsight_dominates_every_year(
    forecast_days, plant_one, plant_two, profile, ou, coarse_settings, synthetic_flows
):
    for plant in (plant_one, plant_two):
        for year in (2001, 2002):
            result, _ = evaluate_year(
                synthetic_flows.year(year), plant, profile, ou, forecast_days, settings=coarse_settings
            )
            assert result.gammas["hindsight"] >= result.gammas["pde"]
            assert result.gammas["hindsight"] >= result.gammas["naive"]


# ==================== ten-day forecasts on a long record ====================


@pytest.fixture(scope="module")
def generated_record():
    """39 generated years; the first 35 calibrate the model, the rest are backtested."""
    record = synthesize_flows(1980, 2018)
    profile, ou = calibrate(record.between_years(1980, 2014))
    return record, profile, ou


@pytest.mark.parametrize("plant_name, max_gap", [("plant_one", 0.05), ("plant_two", 0.08)])
def test_ten_day_forecasts_stay_close_to_hindsight(plant_name, max_gap, generated_record, request):
    record, profile, ou = generated_record
    plant = request.getfixturevalue(plant_name)
    pde, hindsight = [], []
    for year in range(2015, 2019):
        result, _ = evaluate_year(record.year(year), plant, profile, ou, 10, settings=SolverSettings())
        assert result.gammas["hindsight"] >= result.gammas["pde"]
        pde.append(result.gammas["pde"])
        hindsight.append(result.gammas["hindsight"])
    gap = (np.mean(hindsight) - np.mean(pde)) / np.mean(hindsight)
    assert gap <= max_gap


def test_full_year_with_ten_day_forecasts_runs_in_minutes(plant_two, generated_record):
    record, profile, ou = generated_record
    flows = record.year(2015)
    began = time.perf_counter()
    schedule = run_pde_strategy(flows, plant_two, profile, ou, 10, settings=SolverSettings())
    elapsed = time.perf_counter() - began
    assert len(schedule.modes) == 365
    assert schedule.realized_payoff <= run_hindsight_optimal(flows, plant_two).realized_payoff
    assert elapsed < 600.0


def test_halving_the_grid_step_barely_moves_the_result(plant_one, generated_record):
    record, profile, ou = generated_record
    flows = record.year(2016)
    base = SolverSettings()
    fine = SolverSettings(
        grid_nodes=2 * base.grid_nodes - 1,
        spatial_tol_rel=base.spatial_tol_rel / 2.0,
        total_tol_rel=base.total_tol_rel / 2.0,
    )
    scale = capacity_benchmark(plant_one, 1.0)
    q0 = float(flows.flows[0])
    spec = build_drift(0, q0, ForecastSpec.none(0), profile, ou)

    payoffs, initial_values = [], []
    for settings in (base, fine):
        payoffs.append(run_pde_strategy(flows, plant_one, profile, ou, settings=settings).realized_payoff)
        grid = vi_solver.build_grid(
            profile, ou, 0, 365, n_nodes=settings.grid_nodes, cover=np.log(flows.flows)
        )
        spatial_tol, total_tol = settings.absolute_tolerances(scale)
        values = vi_solver.solve(
            grid,
            spec,
            payoff_table(grid.x_nodes, 1.0, plant_one),
            plant_one.cost_matrix,
            spatial_tol=spatial_tol,
            total_tol=total_tol,
        )
        initial_values.append(vi_solver.value_at(values, np.log(q0), 0, 0))

    assert payoffs[1] == pytest.approx(payoffs[0], rel=0.01)
    assert initial_values[1] == pytest.approx(initial_values[0], rel=0.01)
