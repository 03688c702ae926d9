"""
Grid, boundary data and output of the variational-inequality solver.

The solver works in log-flow coordinates x = log Q on a uniform grid and on
daily time levels t_start..t_end. ValueFunction stores u_i(x_j, t_n) as an
array of shape (n_modes, n_x, n_t) whose last time slice is the terminal
condition.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.v1.models.base import ArrayModel, DomainModel, readonly_array

MIN_SPACE_INTERVALS = 50


class Grid(ArrayModel):
    """Uniform log-flow nodes x_0..x_J and daily time nodes t_start..t_end."""

    x_nodes: np.ndarray = Field(description="log m³/s, uniform")
    t_nodes: np.ndarray = Field(description="Absolute day indices, step 1")

    @field_validator("x_nodes", mode="before")
    @classmethod
    def _coerce_x(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @field_validator("t_nodes", mode="before")
    @classmethod
    def _coerce_t(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.int64)

    @model_validator(mode="after")
    def _check(self) -> Grid:
        if self.x_nodes.size < MIN_SPACE_INTERVALS + 1:
            raise ValueError(f"need at least {MIN_SPACE_INTERVALS} space intervals")
        steps = np.diff(self.x_nodes)
        if np.any(steps <= 0.0) or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("x_nodes must be strictly increasing and uniform")
        if self.t_nodes.size < 2 or np.any(np.diff(self.t_nodes) != 1):
            raise ValueError("t_nodes must be consecutive days")
        return self

    @property
    def dx(self) -> float:
        return float(self.x_nodes[1] - self.x_nodes[0])

    @property
    def dt(self) -> float:
        return 1.0

    @property
    def n_x(self) -> int:
        return int(self.x_nodes.size)

    @property
    def start(self) -> int:
        return int(self.t_nodes[0])

    @property
    def end(self) -> int:
        return int(self.t_nodes[-1])

    def time_index(self, day: int) -> int | None:
        """Position of ``day`` in ``t_nodes``, or None when off-grid."""
        if int(day) != day or not (self.start <= day <= self.end):
            return None
        return int(day) - self.start

    def with_times(self, start: int, end: int) -> Grid:
        """Same space nodes on the time range ``start..end``."""
        return Grid(x_nodes=self.x_nodes, t_nodes=np.arange(start, end + 1))


class TerminalCondition(ArrayModel):
    """g_i(x) per mode at the horizon, m.u."""

    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check(self) -> TerminalCondition:
        if self.values.ndim != 2 or not np.all(np.isfinite(self.values)):
            raise ValueError("terminal values must be a finite n_modes × n_x array")
        return self

    @classmethod
    def zeros(cls, n_modes: int, n_x: int) -> TerminalCondition:
        """No salvage value at the horizon."""
        return cls(values=np.zeros((n_modes, n_x)))


class ConvergenceReport(DomainModel):
    """Iteration counts and the residual trace of one solve."""

    outer_iterations: int
    residuals: tuple[float, ...] = Field(description="Total change per outer iteration")
    inner_iterations: int = Field(description="Projected sweeps summed over all levels")
    max_inner_iterations: int = Field(description="Largest sweep count at one level")
    spatial_tol: float
    total_tol: float


class ValueFunction(ArrayModel):
    """
    Solution u_i(x, t) of the switching system.

    Immutable after the solve; safe to read from several threads.
    """

    grid: Grid
    u: np.ndarray = Field(description="n_modes × n_x × n_t, m.u.")
    costs: np.ndarray = Field(description="Switching-cost matrix used in the obstacle")
    report: ConvergenceReport
    continuation: np.ndarray | None = Field(
        default=None,
        description="Value of running each mode until the next level, before any switch",
    )

    @field_validator("u", "costs", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @field_validator("continuation", mode="before")
    @classmethod
    def _coerce_optional(cls, v: object) -> np.ndarray | None:
        return None if v is None else readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check(self) -> ValueFunction:
        m = self.costs.shape[0]
        expected = (m, self.grid.n_x, self.grid.t_nodes.size)
        if self.u.shape != expected:
            raise ValueError(f"u has shape {self.u.shape}, expected {expected}")
        if self.continuation is not None and self.continuation.shape != expected:
            raise ValueError("continuation values must have the shape of u")
        return self

    @property
    def n_modes(self) -> int:
        return int(self.u.shape[0])

    def obstacle_gap(self) -> np.ndarray:
        """
        u_i − max_{j≠i}(u_j − c_ij) at every node.

        Non-negative (up to tolerance) for a converged solution.
        """
        m = self.n_modes
        if m == 1:
            return np.full_like(self.u, np.inf)
        gap = np.empty_like(self.u)
        for i in range(m):
            others = [self.u[j] - self.costs[i, j] for j in range(m) if j != i]
            gap[i] = self.u[i] - np.max(np.stack(others), axis=0)
        return gap


class SwitchDecision(DomainModel):
    """Outcome of the switching rule at one (x, t, mode)."""

    action: Literal["stay", "switch"]
    current: int
    target: int
    values: tuple[float, ...] = Field(description="Interpolated u_j at the query point")


class SolverSettings(DomainModel):
    """
    Grid resolution and tolerances of a rolling-horizon run.

    Tolerances are relative to the capacity benchmark D and turned into
    absolute values with ``absolute_tolerances``.
    """

    grid_nodes: int = Field(default=201, ge=MIN_SPACE_INTERVALS + 1, description="J + 1")
    grid_width_sd: float = Field(default=5.0, gt=0.0, description="Half-width beyond r in stationary SDs")
    spatial_tol_rel: float = Field(default=1e-8, gt=0.0)
    total_tol_rel: float = Field(default=1e-6, gt=0.0)
    max_outer_iterations: int = Field(default=200, ge=1)
    max_inner_iterations: int = Field(default=10_000, ge=1)

    def absolute_tolerances(self, scale: float) -> tuple[float, float]:
        """(spatial, total) tolerances in m.u. for benchmark ``scale``."""
        scale = abs(scale) if scale else 1.0
        return self.spatial_tol_rel * scale, self.total_tol_rel * scale
