from __future__ import annotations

import numpy as np
import pytest

from app.v1.models.plant import PlantSpec, UnitSpec
from app.v1.services.payoff import (
    capacity_benchmark,
    efficiency,
    fit_efficiency_curve,
    mode_payoff_hourly,
    payoff_matrix,
    payoff_single,
    payoff_table,
    payoff_two,
    payoff_vector,
)

UNIT = UnitSpec()
# c·η(q_max)·q_max/1000 − c_run with c = ρgh = 49 100 W per m³/s
SATURATED_HOURLY = 49.1 * 0.8795 * 13.0 - 100.0


# ==================== single unit ====================


def test_efficiency_peaks_at_design_flow():
    assert float(efficiency(10.0, UNIT)) == pytest.approx(0.92)
    assert float(efficiency(13.0, UNIT)) == pytest.approx(0.8795)
    assert float(efficiency(5.0, UNIT)) == pytest.approx(0.8075)


def test_payoff_at_saturation():
    assert float(payoff_single(13.0, 1.0, UNIT)) == pytest.approx(SATURATED_HOURLY, rel=1e-12)
    assert float(payoff_single(13.0, 1.0, UNIT)) == pytest.approx(461.38485, abs=1e-6)


def test_payoff_saturates_above_q_max():
    flows = np.array([13.0, 14.0, 20.0, 500.0])
    np.testing.assert_allclose(payoff_single(flows, 1.0, UNIT), SATURATED_HOURLY, rtol=1e-12)


def test_payoff_below_q_min_pays_low_flow_cost():
    np.testing.assert_array_equal(payoff_single(np.array([0.1, 4.99]), 3.0, UNIT), -1100.0)


def test_payoff_scales_revenue_but_not_running_cost():
    assert float(payoff_single(10.0, 1.0, UNIT)) == pytest.approx(351.72)
    assert float(payoff_single(10.0, 2.0, UNIT)) == pytest.approx(803.44)


def test_payoff_at_q_min_is_producing():
    assert float(payoff_single(5.0, 1.0, UNIT)) == pytest.approx(49.1 * 0.8075 * 5.0 - 100.0)


def test_payoff_increases_on_operating_range():
    flows = np.linspace(5.0, 13.0, 200)
    assert np.all(np.diff(payoff_single(flows, 1.0, UNIT)) > 0.0)


def test_fit_recovers_efficiency_curve():
    q = np.linspace(5.0, 13.0, 40)
    alpha, beta = fit_efficiency_curve(q, efficiency(q, UNIT), UNIT.q_d)
    assert alpha == pytest.approx(0.92, rel=1e-10)
    assert beta == pytest.approx(0.45, rel=1e-10)


# ==================== two units ====================


def test_two_saturated_units_split_evenly():
    value, delta = payoff_two(26.0, 1.0, UNIT, UNIT)
    assert value == pytest.approx(2.0 * SATURATED_HOURLY, rel=1e-12)
    assert delta == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("q", [6.0, 8.0, 12.0, 16.0, 21.0, 30.0])
def test_two_unit_payoff_dominates_the_grid(q):
    value, delta = payoff_two(q, 1.0, UNIT, UNIT)
    deltas = np.linspace(0.0, 1.0, 101)
    grid = payoff_single(deltas * q, 1.0, UNIT) + payoff_single((1.0 - deltas) * q, 1.0, UNIT)
    assert value >= grid.max() - 1e-9
    joint = payoff_single(delta * q, 1.0, UNIT) + payoff_single((1.0 - delta) * q, 1.0, UNIT)
    assert float(joint) == pytest.approx(value, rel=1e-12)


def test_two_unit_payoff_is_symmetric_in_units():
    other = UnitSpec(q_min=4.0, q_max=15.0, q_d=11.0)
    forward, delta = payoff_two(18.0, 1.0, UNIT, other)
    backward, flipped = payoff_two(18.0, 1.0, other, UNIT)
    assert forward == pytest.approx(backward, rel=1e-6)
    assert delta * 18.0 == pytest.approx((1.0 - flipped) * 18.0, abs=1e-3)


def test_two_units_on_low_flow_pay_for_one_idle_unit():
    value, _ = payoff_two(8.0, 1.0, UNIT, UNIT)
    assert value == pytest.approx(float(payoff_single(8.0, 1.0, UNIT)) - 1100.0, rel=1e-12)


# ==================== modes ====================


def test_mode_zero_pays_nothing(plant_one, plant_two):
    for q in (0.5, 10.0, 40.0):
        assert mode_payoff_hourly(q, 1.0, plant_one, 0) == 0.0
        assert mode_payoff_hourly(q, 1.0, plant_two, 0) == 0.0


def test_payoff_vector_is_daily(plant_one):
    vector = payoff_vector(13.0, 1.0, plant_one)
    assert vector[0] == 0.0
    assert vector[1] == pytest.approx(24.0 * SATURATED_HOURLY, rel=1e-12)


def test_payoff_vector_covers_every_mode_of_plant_two(plant_two):
    vector = payoff_vector(26.0, 1.0, plant_two)
    assert vector.shape == (3,)
    assert vector[1] == pytest.approx(24.0 * SATURATED_HOURLY, rel=1e-12)
    assert vector[2] == pytest.approx(48.0 * SATURATED_HOURLY, rel=1e-12)


def test_heterogeneous_plant_has_four_modes():
    plant = PlantSpec.build([UNIT, UnitSpec(q_min=3.0, q_max=9.0, q_d=7.0)], cost=10.0)
    vector = payoff_vector(9.0, 1.0, plant)
    assert vector.shape == (4,)
    assert vector[2] == pytest.approx(24.0 * float(payoff_single(9.0, 1.0, plant.units[1])))


def test_payoff_matrix_accepts_daily_prices(plant_one):
    flows = np.array([4.0, 10.0, 13.0])
    matrix = payoff_matrix(flows, np.array([1.0, 2.0, 1.0]), plant_one)
    assert matrix.shape == (3, 2)
    np.testing.assert_array_equal(matrix[:, 0], 0.0)
    assert matrix[0, 1] == pytest.approx(-1100.0 * 24.0)
    assert matrix[1, 1] == pytest.approx(803.44 * 24.0)


def test_payoff_table_on_log_nodes(plant_one):
    x = np.log(np.array([2.0, 10.0, 13.0]))
    table = payoff_table(x, 1.0, plant_one)
    assert table.values.shape == (2, 3)
    assert table.values[1, 1] == pytest.approx(351.72 * 24.0, rel=1e-10)


# ==================== capacity benchmark ====================


def test_capacity_benchmark_single_unit(plant_one):
    assert capacity_benchmark(plant_one, 1.0) == pytest.approx(SATURATED_HOURLY * 24.0 * 365.0, rel=1e-12)


def test_capacity_benchmark_two_units_at_total_capacity(plant_two, plant_one):
    assert capacity_benchmark(plant_two, 1.0) == pytest.approx(2.0 * capacity_benchmark(plant_one, 1.0), rel=1e-12)


def test_capacity_benchmark_at_first_unit_flow_is_lower(plant_two):
    assert capacity_benchmark(plant_two, 1.0, at_total_capacity=False) < capacity_benchmark(plant_two, 1.0)
