"""
Production controllers and their scoring.

Three controllers choose the daily mode path of a plant over one year:

    - run_pde_strategy: rolling-horizon switching rule read off the VI solution
    - run_naive_strategy: always occupy the mode paying most today
    - run_hindsight_optimal: exact dynamic programme with the whole year known

Payoffs follow the discretized objective

    J = Σ_n f_{μ_n}(Q_n) Δt − Σ_n c_{μ_{n−1} μ_n},   μ_{−1} = 0,

with Δt = 1 day and f in m.u./day. The DP and every payoff tally add the
per-day terms in the same backward order, so a replayed DP path reproduces
the DP value bit for bit and the hindsight optimum dominates any other path
exactly.
"""

from __future__ import annotations

import numpy as np
import structlog

from app.v1.core.exceptions import ConvergenceError, DataError
from app.v1.models.flow import FlowSeries, OUParams, SeasonalProfile
from app.v1.models.forecast import ForecastSpec
from app.v1.models.plant import PlantSpec
from app.v1.models.schedule import START_MODE, EvaluationResult, ModeSchedule, SwitchEvent
from app.v1.models.solver import SolverSettings, ValueFunction
from app.v1.services import vi_solver
from app.v1.services.dynamics import build_drift
from app.v1.services.payoff import capacity_benchmark, payoff_matrix, payoff_table

logger = structlog.get_logger(__name__)

DT_DAYS = 1.0

FlowPath = FlowSeries | np.ndarray


# ==================== Payoff Tallies ====================


def schedule_payoff(
    modes: np.ndarray | list[int] | tuple[int, ...],
    payoffs: np.ndarray,
    costs: np.ndarray,
    start_mode: int = START_MODE,
) -> float:
    """
    Discretized payoff of a mode path against a daily payoff table.

    Args:
        modes: μ_0..μ_{N−1}.
        payoffs: N × m table of f_j(Q_n), m.u./day.
        costs: m × m switching costs.
        start_mode: Mode before day 0.
    """
    modes = np.asarray(modes, dtype=np.int64)
    total = 0.0
    for n in range(modes.size - 1, -1, -1):
        previous = start_mode if n == 0 else int(modes[n - 1])
        current = int(modes[n])
        total = (-float(costs[previous, current]) + float(payoffs[n, current]) * DT_DAYS) + total
    return total


def optimal_modes(
    payoffs: np.ndarray, costs: np.ndarray, start_mode: int = START_MODE
) -> tuple[list[int], float]:
    """
    Backward DP over (day, mode) and forward replay.

    V_N(i) = 0 and V_n(i) = max_j [−c_ij + f_j(Q_n)Δt + V_{n+1}(j)]; the
    replay takes the lowest mode index among ties.

    Returns:
        (optimal mode path, V_0(start_mode)).
    """
    payoffs = np.asarray(payoffs, dtype=np.float64)
    costs = np.asarray(costs, dtype=np.float64)
    n_days, m = payoffs.shape
    value = np.zeros((n_days + 1, m))
    for n in range(n_days - 1, -1, -1):
        for i in range(m):
            value[n, i] = max(
                (-costs[i, j] + payoffs[n, j] * DT_DAYS) + value[n + 1, j] for j in range(m)
            )

    modes: list[int] = []
    current = start_mode
    for n in range(n_days):
        target = value[n, current]
        for j in range(m):
            if (-costs[current, j] + payoffs[n, j] * DT_DAYS) + value[n + 1, j] == target:
                current = j
                break
        modes.append(current)
    return modes, float(value[0, start_mode])


def _events(modes: list[int], costs: np.ndarray) -> tuple[SwitchEvent, ...]:
    events = []
    previous = START_MODE
    for n, mode in enumerate(modes):
        if mode != previous:
            events.append(
                SwitchEvent(day=n + 1, from_mode=previous, to_mode=mode, cost=float(costs[previous, mode]))
            )
        previous = mode
    return tuple(events)


def _flow_values(flow_path: FlowPath) -> tuple[np.ndarray, int | None]:
    if isinstance(flow_path, FlowSeries):
        years = np.unique(flow_path.years)
        year = int(years[0]) if years.size == 1 else None
        return np.asarray(flow_path.flows), year
    flows = np.asarray(flow_path, dtype=np.float64)
    if flows.ndim != 1:
        raise DataError("flow path must be one-dimensional")
    return flows, None


def _schedule(
    strategy: str,
    modes: list[int],
    payoffs: np.ndarray,
    plant: PlantSpec,
    year: int | None,
    **labels: object,
) -> ModeSchedule:
    costs = plant.cost_matrix
    return ModeSchedule(
        strategy=strategy,
        modes=tuple(modes),
        events=_events(modes, costs),
        realized_payoff=schedule_payoff(modes, payoffs, costs),
        year=year,
        **labels,
    )


# ==================== Controllers ====================


def run_naive_strategy(
    flow_path: FlowPath, plant: PlantSpec, price: np.ndarray | float = 1.0
) -> ModeSchedule:
    """
    Occupy the mode with the highest payoff today, ignoring switching costs.

    Ties keep the current mode; otherwise the lowest-index best mode wins.
    Costs are still charged on every change.
    """
    flows, year = _flow_values(flow_path)
    payoffs = payoff_matrix(flows, price, plant)
    modes: list[int] = []
    current = START_MODE
    for row in payoffs:
        best = row.max()
        if row[current] < best:
            current = int(np.flatnonzero(row == best)[0])
        modes.append(current)
    return _schedule("naive", modes, payoffs, plant, year)


def run_hindsight_optimal(
    flow_path: FlowPath, plant: PlantSpec, price: np.ndarray | float = 1.0
) -> ModeSchedule:
    """The a fortiori optimum: best mode path with the whole year's flow known."""
    flows, year = _flow_values(flow_path)
    payoffs = payoff_matrix(flows, price, plant)
    modes, value = optimal_modes(payoffs, plant.cost_matrix)
    schedule = _schedule("hindsight", modes, payoffs, plant, year)
    logger.debug("hindsight_solved", year=year, value=value, switches=len(schedule.events))
    return schedule


def run_pde_strategy(
    flow_path: FlowPath,
    plant: PlantSpec,
    profile: SeasonalProfile,
    ou: OUParams,
    forecast_days: int = 0,
    relaxation_days: int = 20,
    *,
    price: float = 1.0,
    settings: SolverSettings | None = None,
    benchmark: float | None = None,
) -> ModeSchedule:
    """
    Rolling-horizon switching driven by the VI solution.

    Each day k the controller observes Q_k, builds the drift from the true
    flow of days k+1..k+l used as forecast, solves the switching system on
    [k, T] and applies the switching rule at (log Q_k, k) in the current
    mode. Without a forecast the system does not depend on k, so a single
    solve on [0, T] serves the whole year.

    Args:
        flow_path: One year of daily flows, day 0 = January 1.
        plant: Plant and switching costs.
        profile: Seasonal log-mean.
        ou: Residual dynamics.
        forecast_days: l, truncated at the end of the year.
        relaxation_days: ℓ.
        price: Constant price P_0, m.u./kWh.
        settings: Grid and tolerances; defaults when omitted.
        benchmark: Scale for the relative tolerances; D of ``plant`` when omitted.

    Raises:
        ConvergenceError: The solver failed on some day (``error.day`` names it).
    """
    settings = settings or SolverSettings()
    flows, year = _flow_values(flow_path)
    if forecast_days < 0 or relaxation_days < 0:
        raise DataError("forecast and relaxation lengths must be non-negative")
    if np.any(flows <= 0.0):
        raise DataError("flows must be strictly positive")

    n_days = flows.size
    horizon = n_days
    scale = benchmark if benchmark is not None else capacity_benchmark(plant, price)
    spatial_tol, total_tol = settings.absolute_tolerances(scale)
    log_flows = np.log(flows)

    base_grid = vi_solver.build_grid(
        profile,
        ou,
        0,
        horizon,
        n_nodes=settings.grid_nodes,
        width_sd=settings.grid_width_sd,
        cover=log_flows,
    )
    table = payoff_table(base_grid.x_nodes, price, plant)
    costs = plant.cost_matrix

    def solve_from(k: int, forecast: ForecastSpec) -> ValueFunction:
        spec = build_drift(k, float(flows[k]), forecast, profile, ou)
        try:
            return vi_solver.solve(
                base_grid.with_times(k, horizon),
                spec,
                table,
                costs,
                spatial_tol=spatial_tol,
                total_tol=total_tol,
                max_outer=settings.max_outer_iterations,
                max_inner=settings.max_inner_iterations,
            )
        except ConvergenceError as exc:
            raise ConvergenceError(str(exc), residuals=exc.residuals, day=k) from exc

    shared = solve_from(0, ForecastSpec.none(0)) if forecast_days == 0 else None

    modes: list[int] = []
    current = START_MODE
    for k in range(n_days):
        if shared is not None:
            values = shared
        else:
            length = min(forecast_days, n_days - 1 - k)
            forecast = ForecastSpec(
                start_index=k,
                values=flows[k + 1 : k + 1 + length],
                relaxation_days=max(relaxation_days, 1),
            )
            values = solve_from(k, forecast)
        decision = vi_solver.switch_decision(values, float(log_flows[k]), k, current)
        if decision.action == "switch":
            current = decision.target
        modes.append(current)

    payoffs = payoff_matrix(flows, price, plant)
    schedule = _schedule(
        "pde",
        modes,
        payoffs,
        plant,
        year,
        forecast_days=forecast_days,
        relaxation_days=relaxation_days,
    )
    logger.info(
        "pde_strategy_done",
        year=year,
        forecast_days=forecast_days,
        switches=len(schedule.events),
        payoff=schedule.realized_payoff,
    )
    return schedule


# ==================== Scoring ====================


def realized_payoff(
    schedule: ModeSchedule | list[int] | tuple[int, ...],
    flow_path: FlowPath,
    plant: PlantSpec,
    price: np.ndarray | float = 1.0,
) -> float:
    """
    Recompute the discretized payoff of ``schedule`` on ``flow_path``.

    A switch away from mode 0 on day 0 is charged like any other.

    Raises:
        DataError: Schedule and flow path differ in length.
    """
    modes = schedule.modes if isinstance(schedule, ModeSchedule) else tuple(schedule)
    flows, _ = _flow_values(flow_path)
    if len(modes) != flows.size:
        raise DataError(f"schedule covers {len(modes)} days but the flow path {flows.size}")
    return schedule_payoff(modes, payoff_matrix(flows, price, plant), plant.cost_matrix)


def gamma(payoff: float, benchmark: float) -> float:
    """
    γ = payoff / D.

    Raises:
        ValueError: D is not positive.
    """
    if not benchmark > 0.0:
        raise ValueError(f"capacity benchmark must be positive, got {benchmark}")
    return payoff / benchmark


def evaluate_year(
    flow_path: FlowPath,
    plant: PlantSpec,
    profile: SeasonalProfile,
    ou: OUParams,
    forecast_days: int = 0,
    relaxation_days: int = 20,
    *,
    price: float = 1.0,
    settings: SolverSettings | None = None,
    at_total_capacity: bool = True,
) -> tuple[EvaluationResult, dict[str, ModeSchedule]]:
    """Run all three controllers on one year and score them against D."""
    _, year = _flow_values(flow_path)
    benchmark = capacity_benchmark(plant, price, at_total_capacity)
    schedules = {
        "pde": run_pde_strategy(
            flow_path,
            plant,
            profile,
            ou,
            forecast_days,
            relaxation_days,
            price=price,
            settings=settings,
            benchmark=benchmark,
        ),
        "naive": run_naive_strategy(flow_path, plant, price),
        "hindsight": run_hindsight_optimal(flow_path, plant, price),
    }
    payoffs = {name: s.realized_payoff for name, s in schedules.items()}
    result = EvaluationResult(
        year=year,
        capacity_benchmark=benchmark,
        payoffs=payoffs,
        gammas={name: gamma(p, benchmark) for name, p in payoffs.items()},
    )
    return result, schedules
