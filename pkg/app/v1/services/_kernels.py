"""Compiled inner loops of the VI solver."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def close_obstacles(values: np.ndarray, costs: np.ndarray, column: int) -> None:
    """Raise u_i to max_k(u_k − c_ik) at one node until no mode moves."""
    m = values.shape[0]
    for _ in range(m):
        moved = False
        for i in range(m):
            for k in range(m):
                if k != i:
                    candidate = values[k, column] - costs[i, k]
                    if candidate > values[i, column]:
                        values[i, column] = candidate
                        moved = True
        if not moved:
            break


@njit(cache=True)
def projected_sweeps(
    values: np.ndarray,
    rhs: np.ndarray,
    lower: np.ndarray,
    diag: np.ndarray,
    upper: np.ndarray,
    linear_low: bool,
    linear_high: bool,
    costs: np.ndarray,
    tolerance: float,
    max_sweeps: int,
) -> tuple[int, float]:
    """
    Projected Gauss–Seidel on one time level, all modes at once.

    ``values`` (n_modes × n_x) is updated in place. Rows 1..n_x-2 carry the
    implicit Crank–Nicolson stencil, with the edge closures already folded
    into rows 1 and n_x-2. Each node is relaxed for every mode and projected
    onto its obstacle max_{k≠i}(u_k − c_ik); after each pass the edge nodes
    are closed (linear extrapolation where the flag is set, else a copy of
    the neighbour) and projected.

    Returns:
        (sweeps performed, summed absolute change of the last sweep).
    """
    m, n = values.shape
    error = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        error = 0.0
        for j in range(1, n - 1):
            for i in range(m):
                y = rhs[i, j]
                if j > 1:
                    y -= lower[j] * values[i, j - 1]
                if j < n - 2:
                    y -= upper[j] * values[i, j + 1]
                y /= diag[j]
                for k in range(m):
                    if k != i:
                        obstacle = values[k, j] - costs[i, k]
                        if obstacle > y:
                            y = obstacle
                error += abs(values[i, j] - y)
                values[i, j] = y
        for i in range(m):
            if linear_low:
                values[i, 0] = 2.0 * values[i, 1] - values[i, 2]
            else:
                values[i, 0] = values[i, 1]
            if linear_high:
                values[i, n - 1] = 2.0 * values[i, n - 2] - values[i, n - 3]
            else:
                values[i, n - 1] = values[i, n - 2]
        close_obstacles(values, costs, 0)
        close_obstacles(values, costs, n - 1)
        if error <= tolerance:
            break
    return sweeps, error
