"""
Running payoffs of production modes.

A unit fed with flow q earns P·c·η(q)·q (converted from W to kW) minus its
running cost, saturates at q_max and pays the extra c_low below q_min. Two
running units share the flow with the split δ that maximizes their joint
payoff, which turns the two-unit plant into a pure switching problem.

Hourly values are m.u./h; the solver and the strategies work in m.u./day.
"""

from __future__ import annotations

import numpy as np
import structlog
from scipy import optimize, stats

from app.v1.models.plant import PayoffTable, PlantSpec, UnitSpec

logger = structlog.get_logger(__name__)

HOURS_PER_DAY = 24.0
DAYS_PER_YEAR = 365
WATTS_PER_KILOWATT = 1000.0
DELTA_TOLERANCE = 1e-7


def efficiency(q: np.ndarray | float, u: UnitSpec) -> np.ndarray:
    """η(q) = alpha − beta·(q/q_d − 1)², without clamping."""
    q = np.asarray(q, dtype=np.float64)
    return u.alpha - u.beta * (q / u.q_d - 1.0) ** 2


def fit_efficiency_curve(q: np.ndarray, eta: np.ndarray, q_d: float) -> tuple[float, float]:
    """
    Least-squares (alpha, beta) of the quadratic efficiency curve.

    Args:
        q: Measured flows.
        eta: Measured efficiencies at those flows.
        q_d: Design flow of the unit.
    """
    z = (np.asarray(q, dtype=np.float64) / q_d - 1.0) ** 2
    fit = stats.linregress(z, np.asarray(eta, dtype=np.float64))
    return float(fit.intercept), float(-fit.slope)


def payoff_single(q: np.ndarray | float, p: np.ndarray | float, u: UnitSpec) -> np.ndarray:
    """
    Hourly payoff of one running unit, m.u./h.

    Args:
        q: Flow through the unit, m³/s.
        p: Electricity price, m.u./kWh (scalar or broadcastable to q).
        u: Unit description.
    """
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    c = u.energy_factor / WATTS_PER_KILOWATT
    saturated = c * float(efficiency(u.q_max, u)) * u.q_max
    producing = np.where(q < u.q_max, c * efficiency(q, u) * q, saturated)
    revenue = np.where(q < u.q_min, -u.c_low, p * producing)
    return revenue - u.c_run


def payoff_two(
    q: float,
    p: float,
    u1: UnitSpec,
    u2: UnitSpec,
    grid: int = 101,
) -> tuple[float, float]:
    """
    Best joint hourly payoff of two running units sharing flow q.

    Searches δ (the share sent to ``u1``) on ``grid`` equally spaced points,
    preferring the point closest to δ = 0.5 among ties, then refines with a
    bounded scalar search inside the neighbouring grid cells.

    Returns:
        (payoff in m.u./h, optimal δ).
    """
    deltas = np.linspace(0.0, 1.0, grid)

    def joint(delta: np.ndarray | float) -> np.ndarray:
        return payoff_single(delta * q, p, u1) + payoff_single((1.0 - delta) * q, p, u2)

    values = joint(deltas)
    best = float(values.max())
    slack = 1e-12 * max(1.0, abs(best))
    ties = np.flatnonzero(values >= best - slack)
    pick = int(ties[np.argmin(np.abs(deltas[ties] - 0.5))])
    delta = float(deltas[pick])

    step = 1.0 / (grid - 1)
    lower, upper = max(0.0, delta - step), min(1.0, delta + step)
    result = optimize.minimize_scalar(
        lambda d: -float(joint(d)),
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": DELTA_TOLERANCE},
    )
    if result.success and -result.fun > best + slack:
        return float(-result.fun), float(result.x)
    return best, delta


def mode_payoff_hourly(q: float, p: float, plant: PlantSpec, mode: int) -> float:
    """Hourly payoff of one mode at a scalar flow."""
    running = plant.modes[mode]
    if not running:
        return 0.0
    if len(running) == 1:
        return float(payoff_single(q, p, plant.units[running[0]]))
    value, _ = payoff_two(q, p, plant.units[0], plant.units[1], plant.delta_grid_size)
    return value


def payoff_vector(q: float, p: float, plant: PlantSpec) -> np.ndarray:
    """Payoff of every mode at flow q, m.u./day; mode 0 is always 0."""
    return np.array(
        [mode_payoff_hourly(q, p, plant, i) * HOURS_PER_DAY for i in range(plant.n_modes)]
    )


def payoff_matrix(
    flows: np.ndarray, price: np.ndarray | float, plant: PlantSpec
) -> np.ndarray:
    """
    Daily payoffs for a flow path, shape (N, n_modes), m.u./day.

    Args:
        flows: Daily flows Q_0..Q_{N-1}.
        price: Constant price or one price per day.
        plant: Plant description.
    """
    flows = np.asarray(flows, dtype=np.float64)
    prices = np.broadcast_to(np.asarray(price, dtype=np.float64), flows.shape)
    return np.stack([payoff_vector(q, p, plant) for q, p in zip(flows, prices)])


def payoff_table(x_nodes: np.ndarray, price: float, plant: PlantSpec) -> PayoffTable:
    """Per-mode payoff on log-flow nodes for the VI solver."""
    flows = np.exp(np.asarray(x_nodes, dtype=np.float64))
    values = payoff_matrix(flows, price, plant).T
    return PayoffTable(x_nodes=x_nodes, values=values, price=price)


def capacity_benchmark(plant: PlantSpec, p0: float, at_total_capacity: bool = True) -> float:
    """
    D, the payoff of a full year at full capacity in the top mode, m.u.

    With ``at_total_capacity`` the top mode is evaluated at the sum of the
    unit saturation flows (every unit saturated); otherwise at the first
    unit's q_max.
    """
    top = plant.n_modes - 1
    flow = plant.total_capacity if at_total_capacity else plant.units[0].q_max
    hourly = mode_payoff_hourly(flow, p0, plant, top)
    benchmark = hourly * HOURS_PER_DAY * DAYS_PER_YEAR
    logger.debug("capacity_benchmark", flow=flow, hourly=hourly, benchmark=benchmark)
    return benchmark
