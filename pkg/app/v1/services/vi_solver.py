"""
Crank–Nicolson solver for the optimal-switching system.

For modes i = 0..m-1 the value functions solve

    min{ −∂_t u_i − L u_i − f_i , u_i − max_{j≠i}(u_j − c_ij) } = 0,
    u_i(x, T) = g_i(x),

with L the generator of the log-flow x = log Q. The scheme marches
backwards over daily levels; at each level a projected Gauss–Seidel
iteration relaxes the Crank–Nicolson equations of all modes node by node
and projects every update onto its obstacle. The whole backward sweep is
repeated until two consecutive sweeps agree.

Edges use linear extrapolation (zero second derivative) unless convection
at the neighbouring node points out of the grid faster than diffusion
spreads, as it can under a steep forecast; that edge then copies its
neighbour, which keeps every implicit row an M-matrix row. The convection
term is centred where the cell Péclet number allows and upwinded elsewhere.
"""

from __future__ import annotations

import numpy as np
import structlog
from scipy.linalg import solve_banded

from app.v1.core.exceptions import ConvergenceError, GridError
from app.v1.models.flow import OUParams, SeasonalProfile
from app.v1.models.forecast import DriftSpec
from app.v1.models.plant import PayoffTable
from app.v1.models.solver import (
    ConvergenceReport,
    Grid,
    SwitchDecision,
    TerminalCondition,
    ValueFunction,
)
from app.v1.services._kernels import projected_sweeps
from app.v1.services.dynamics import coefficients_log

logger = structlog.get_logger(__name__)

DEFAULT_NODES = 201
DEFAULT_WIDTH_SD = 5.0
DEFAULT_MAX_OUTER = 200
DEFAULT_MAX_INNER = 10_000
MIN_HALF_WIDTH = 0.5


def build_grid(
    profile: SeasonalProfile,
    ou: OUParams,
    start: int,
    end: int,
    n_nodes: int = DEFAULT_NODES,
    width_sd: float = DEFAULT_WIDTH_SD,
    cover: np.ndarray | None = None,
) -> Grid:
    """
    Uniform log-flow grid around the seasonal band.

    The range is [min r − w·s, max r + w·s] with s the stationary standard
    deviation sqrt(σ²/2κ), widened to include every value in ``cover``
    (typically observed log-flows) by a margin of one s.
    """
    spread = _spread(ou, end - start)
    lower = float(profile.log_mean.min()) - width_sd * spread
    upper = float(profile.log_mean.max()) + width_sd * spread
    if cover is not None and np.size(cover):
        lower = min(lower, float(np.min(cover)) - spread)
        upper = max(upper, float(np.max(cover)) + spread)
    return Grid(x_nodes=np.linspace(lower, upper, n_nodes), t_nodes=np.arange(start, end + 1))


def _spread(ou: OUParams, horizon: int) -> float:
    if ou.kappa > 0.0:
        spread = ou.stationary_sd
    else:
        spread = ou.sigma * np.sqrt(max(horizon, 1))
    return max(float(spread), MIN_HALF_WIDTH / DEFAULT_WIDTH_SD)


# ==================== Discretization ====================


def _operator(grid: Grid, coeffs: DriftSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Stencil (a, b, c) of L at every level: L u_j = a_j u_{j-1} + b_j u_j + c_j u_{j+1}.

    Returns arrays of shape (n_t, n_x).
    """
    x = grid.x_nodes
    dx = grid.dx
    n_t = grid.t_nodes.size
    lower = np.empty((n_t, x.size))
    upper = np.empty((n_t, x.size))
    for n, day in enumerate(grid.t_nodes):
        mu, diffusion = coefficients_log(x, int(day), coeffs)
        half = 0.5 * diffusion / dx**2
        central = np.abs(mu) * dx <= diffusion
        lower[n] = np.where(central, half - mu / (2.0 * dx), half + np.maximum(-mu, 0.0) / dx)
        upper[n] = np.where(central, half + mu / (2.0 * dx), half + np.maximum(mu, 0.0) / dx)
    return lower, -(lower + upper), upper


Rows = tuple[np.ndarray, np.ndarray, np.ndarray, bool, bool]


def _implicit_rows(a: np.ndarray, b: np.ndarray, c: np.ndarray, dt: float) -> Rows:
    """
    Rows of I − ½Δt·L with the edge closures folded into the first and last interior rows.

    Returns:
        (lower, diag, upper, linear_low, linear_high); a flag is False where
        that edge copies its neighbour instead of extrapolating linearly.
    """
    lower = -0.5 * dt * a
    diag = 1.0 - 0.5 * dt * b
    upper = -0.5 * dt * c
    n = a.size

    linear_low = bool(a[1] <= c[1])
    if linear_low:
        # u_0 = 2u_1 − u_2
        diag[1] += 2.0 * lower[1]
        upper[1] -= lower[1]
    else:
        # u_0 = u_1
        diag[1] += lower[1]
    lower[1] = 0.0

    linear_high = bool(c[n - 2] <= a[n - 2])
    if linear_high:
        # u_J = 2u_{J-1} − u_{J-2}
        diag[n - 2] += 2.0 * upper[n - 2]
        lower[n - 2] -= upper[n - 2]
    else:
        # u_J = u_{J-1}
        diag[n - 2] += upper[n - 2]
    upper[n - 2] = 0.0
    return lower, diag, upper, linear_low, linear_high


def _explicit_rhs(
    later: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    payoff: np.ndarray,
    dt: float,
) -> np.ndarray:
    """(I + ½Δt·L) u^{n+1} + Δt·f on interior nodes; edge entries are unused."""
    rhs = np.zeros_like(later)
    rhs[:, 1:-1] = (
        later[:, 1:-1]
        + 0.5 * dt * (a[1:-1] * later[:, :-2] + b[1:-1] * later[:, 1:-1] + c[1:-1] * later[:, 2:])
        + dt * payoff[:, 1:-1]
    )
    return rhs


def _close_edges(values: np.ndarray, linear_low: bool, linear_high: bool) -> None:
    values[:, 0] = 2.0 * values[:, 1] - values[:, 2] if linear_low else values[:, 1]
    values[:, -1] = 2.0 * values[:, -2] - values[:, -3] if linear_high else values[:, -2]


def _continuation(
    u: np.ndarray,
    rows: list[Rows],
    stencil: tuple[np.ndarray, np.ndarray, np.ndarray],
    payoff: np.ndarray,
    dt: float,
) -> np.ndarray:
    """Unprojected Crank–Nicolson values: run mode i over one step, then continue optimally."""
    a_all, b_all, c_all = stencil
    y = np.empty_like(u)
    y[:, :, -1] = u[:, :, -1]
    for n in range(u.shape[2] - 1):
        rhs = _explicit_rhs(u[:, :, n + 1], a_all[n + 1], b_all[n + 1], c_all[n + 1], payoff, dt)
        lower, diag, upper, linear_low, linear_high = rows[n]
        level = np.empty_like(rhs)
        level[:, 1:-1] = (
            rhs[:, 1:-1] - lower[1:-1] * u[:, :-2, n] - upper[1:-1] * u[:, 2:, n]
        ) / diag[1:-1]
        _close_edges(level, linear_low, linear_high)
        y[:, :, n] = level
    return y


def _no_switch_guess(
    grid: Grid,
    stencil: tuple[np.ndarray, np.ndarray, np.ndarray],
    payoff: np.ndarray,
    terminal: np.ndarray,
) -> np.ndarray:
    """Value of staying in each mode until the horizon, by plain Crank–Nicolson."""
    a_all, b_all, c_all = stencil
    m, n_x = payoff.shape
    n_t = grid.t_nodes.size
    u = np.empty((m, n_x, n_t))
    u[:, :, -1] = terminal
    banded = np.zeros((3, n_x - 2))
    for n in range(n_t - 2, -1, -1):
        rhs = _explicit_rhs(u[:, :, n + 1], a_all[n + 1], b_all[n + 1], c_all[n + 1], payoff, grid.dt)
        lower, diag, upper, linear_low, linear_high = _implicit_rows(
            a_all[n], b_all[n], c_all[n], grid.dt
        )
        banded[0, 1:] = upper[1:-2]
        banded[1, :] = diag[1:-1]
        banded[2, :-1] = lower[2:-1]
        level = np.empty((m, n_x))
        level[:, 1:-1] = solve_banded((1, 1), banded, rhs[:, 1:-1].T).T
        _close_edges(level, linear_low, linear_high)
        u[:, :, n] = level
    return u


# ==================== Solver ====================


def solve(
    grid: Grid,
    coeffs: DriftSpec,
    payoffs: PayoffTable,
    costs: np.ndarray,
    terminal: TerminalCondition | None = None,
    *,
    spatial_tol: float = 1e-6,
    total_tol: float = 1e-4,
    max_outer: int = DEFAULT_MAX_OUTER,
    max_inner: int = DEFAULT_MAX_INNER,
    initial: np.ndarray | None = None,
) -> ValueFunction:
    """
    Solve the switching system on ``grid``.

    Args:
        grid: Log-flow nodes and daily levels t_start..T.
        coeffs: Drift of the log-flow (seasonal or forecast-blended).
        payoffs: f_i on ``grid.x_nodes``, m.u./day.
        costs: m × m switching costs with zero diagonal.
        terminal: g_i at T; zero when omitted.
        spatial_tol: Stop a level once a sweep changes the level by at most
            this much (summed absolute change).
        total_tol: Stop once a full backward sweep changes no node by more
            than this.
        max_outer: Budget of backward sweeps.
        max_inner: Budget of projected sweeps per level.
        initial: Starting guess of shape (m, n_x, n_t); defaults to the
            no-switching values.

    Returns:
        Converged ValueFunction.

    Raises:
        ValueError: Inconsistent inputs.
        ConvergenceError: An iteration budget ran out.
    """
    costs = np.ascontiguousarray(costs, dtype=np.float64)
    m = payoffs.n_modes
    if costs.shape != (m, m) or np.any(np.diag(costs) != 0.0):
        raise ValueError(f"costs must be {m}x{m} with zero diagonal")
    if not np.array_equal(payoffs.x_nodes, grid.x_nodes):
        raise ValueError("payoff table is not sampled on the solver grid")
    if terminal is None:
        terminal = TerminalCondition.zeros(m, grid.n_x)
    if terminal.values.shape != (m, grid.n_x):
        raise ValueError("terminal condition does not match modes × nodes")

    stencil = _operator(grid, coeffs)
    a_all, b_all, c_all = stencil
    payoff = np.asarray(payoffs.values)
    n_t = grid.t_nodes.size

    if initial is None:
        u = _no_switch_guess(grid, stencil, payoff, terminal.values)
    else:
        u = np.array(initial, dtype=np.float64)
        if u.shape != (m, grid.n_x, n_t):
            raise ValueError("initial guess has the wrong shape")
    u[:, :, -1] = terminal.values

    rows = [_implicit_rows(a_all[n], b_all[n], c_all[n], grid.dt) for n in range(n_t - 1)]
    residuals: list[float] = []
    inner_total = 0
    inner_max = 0
    for outer in range(1, max_outer + 1):
        previous = u.copy()
        for n in range(n_t - 2, -1, -1):
            rhs = _explicit_rhs(u[:, :, n + 1], a_all[n + 1], b_all[n + 1], c_all[n + 1], payoff, grid.dt)
            lower, diag, upper, linear_low, linear_high = rows[n]
            level = np.ascontiguousarray(u[:, :, n])
            sweeps, error = projected_sweeps(
                level, rhs, lower, diag, upper, linear_low, linear_high, costs, spatial_tol, max_inner
            )
            if error > spatial_tol:
                raise ConvergenceError(
                    f"level t={int(grid.t_nodes[n])} did not converge in {sweeps} sweeps "
                    f"(change {error:.3e})",
                    residuals=residuals,
                )
            inner_total += sweeps
            inner_max = max(inner_max, sweeps)
            u[:, :, n] = level
        change = float(np.max(np.abs(u - previous)))
        residuals.append(change)
        logger.debug("vi_outer_iteration", iteration=outer, change=change)
        if change <= total_tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence after {max_outer} outer iterations", residuals=residuals
        )

    report = ConvergenceReport(
        outer_iterations=len(residuals),
        residuals=tuple(residuals),
        inner_iterations=inner_total,
        max_inner_iterations=inner_max,
        spatial_tol=spatial_tol,
        total_tol=total_tol,
    )
    logger.debug(
        "vi_solve_converged",
        start=grid.start,
        end=grid.end,
        outer_iterations=report.outer_iterations,
        inner_iterations=inner_total,
    )
    return ValueFunction(
        grid=grid,
        u=u,
        costs=costs,
        report=report,
        continuation=_continuation(u, rows, stencil, payoff, grid.dt),
    )


# ==================== Queries ====================


def _interpolate(u: ValueFunction, values: np.ndarray, x: float, t: int) -> np.ndarray:
    """All modes of ``values`` at (x, t), linear in x and clamped at the edges."""
    index = u.grid.time_index(t)
    if index is None:
        raise GridError(f"t={t} is not a grid time ({u.grid.start}..{u.grid.end})")
    nodes = u.grid.x_nodes
    if x < nodes[0] or x > nodes[-1]:
        logger.warning(
            "value_query_clamped", x=float(x), lower=float(nodes[0]), upper=float(nodes[-1])
        )
    return np.array([np.interp(x, nodes, values[i, :, index]) for i in range(values.shape[0])])


def value_at(u: ValueFunction, x: float, t: int, mode: int) -> float:
    """
    u_mode(x, t), piecewise linear in x.

    Queries outside the x-range are clamped to the edge value and logged.

    Raises:
        GridError: ``t`` is not one of the grid's time levels.
    """
    return float(_interpolate(u, u.u[mode : mode + 1], x, t)[0])


def _best_other(values: np.ndarray, costs: np.ndarray, current: int) -> tuple[int, float]:
    """Lowest-index argmax of values_j − c_ij over j ≠ current."""
    target, best = current, -np.inf
    for j, value in enumerate(values):
        if j != current and value - costs[current, j] > best:
            target, best = j, float(value - costs[current, j])
    return target, best


def switch_decision(u: ValueFunction, x: float, t: int, current: int) -> SwitchDecision:
    """
    Apply the switching rule at (x, t) from mode ``current``.

    The rule switches iff u_i ≤ max_{j≠i}(u_j − c_ij), towards the j
    maximizing u_j − c_ij (lowest index among ties).

    When the solution carries continuation values y_j (the value of running
    mode j through the next day), the comparison is made on them instead:
    switch iff y_i < max_{j≠i}(y_j − c_ij). Wherever the obstacle binds the
    two forms agree, but the continuation values stay distinct when the
    u_j coincide, as they do with zero switching costs.
    """
    values = _interpolate(u, u.u, x, t)
    costs = np.asarray(u.costs)
    stay = SwitchDecision(action="stay", current=current, target=current, values=tuple(values.tolist()))
    if u.n_modes == 1:
        return stay

    if u.continuation is not None:
        running = _interpolate(u, u.continuation, x, t)
        target, best = _best_other(running, costs, current)
        switch = running[current] < best
    else:
        target, best = _best_other(values, costs, current)
        switch = values[current] <= best

    if not switch:
        return stay
    return SwitchDecision(action="switch", current=current, target=target, values=tuple(values.tolist()))
