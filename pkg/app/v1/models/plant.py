"""
Hydropower plant description.

This module defines the production units and the plant built from them:
- UnitSpec: one adjustable turbine/generator unit (defaults describe the reference Kaplan unit)
- PlantSpec: one or two units, the resulting modes and the switching-cost matrix
- PayoffTable: per-mode running payoff sampled on the solver's log-flow grid

Modes are combinations of running units, mode 0 being "all off":

    one unit              0 = off, 1 = on
    two identical units   0 = off, 1 = one unit, 2 = both
    two different units   0 = off, 1 = unit 1, 2 = unit 2, 3 = both
"""

from __future__ import annotations

import itertools

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.v1.models.base import ArrayModel, DomainModel, readonly_array

# Relative cost of a switch that toggles two units at once.
DOUBLE_TOGGLE_FACTOR = 1.5


class UnitSpec(DomainModel):
    """
    One adjustable production unit.

    Efficiency follows η(q) = alpha − beta·(q/q_d − 1)², peaking at the
    design flow ``q_d``. The unit runs on flows in ``[q_min, q_max]``;
    beyond ``q_max`` output saturates, below ``q_min`` it pays ``c_low``.
    """

    # ==================== Flow Range ====================

    q_min: float = Field(default=5.0, gt=0.0, description="Minimum usable flow, m³/s")
    q_max: float = Field(default=13.0, gt=0.0, description="Saturation flow, m³/s")
    q_d: float = Field(default=10.0, gt=0.0, description="Design flow, m³/s")

    # ==================== Efficiency Curve ====================

    alpha: float = Field(default=0.92, gt=0.0, le=1.0, description="Efficiency at design flow")
    beta: float = Field(default=0.45, ge=0.0, description="Curvature of the efficiency curve")

    # ==================== Costs ====================

    c_run: float = Field(default=100.0, description="Running cost, m.u./h")
    c_low: float = Field(default=1000.0, description="Extra cost below q_min, m.u./h")

    # ==================== Physical Constants ====================

    head: float = Field(default=5.0, gt=0.0, description="Water head h, m")
    rho: float = Field(default=1000.0, gt=0.0, description="Water density, kg/m³")
    grav: float = Field(default=9.82, gt=0.0, description="Gravitational acceleration, m/s²")

    @model_validator(mode="after")
    def _check_ranges(self) -> UnitSpec:
        if not (self.q_min < self.q_d < self.q_max):
            raise ValueError(
                f"need 0 < q_min < q_d < q_max, got {self.q_min}, {self.q_d}, {self.q_max}"
            )
        # η is concave, so its minimum over [q_min, q_max] sits at an endpoint
        for q in (self.q_min, self.q_max):
            eta = self.alpha - self.beta * (q / self.q_d - 1.0) ** 2
            if eta <= 0.0:
                raise ValueError(f"efficiency {eta:.4f} at q={q} is not positive")
        return self

    @property
    def energy_factor(self) -> float:
        """c = ρ·g·h, watts per (m³/s) at unit efficiency."""
        return self.rho * self.grav * self.head


def units_per_mode(n_units: int, homogeneous: bool) -> list[tuple[int, ...]]:
    """
    Running-unit sets for every mode.

    Args:
        n_units: 1 or 2.
        homogeneous: Two identical units collapse "unit 1" and "unit 2" into one mode.

    Returns:
        List indexed by mode of tuples of running unit indices.
    """
    if n_units == 1:
        return [(), (0,)]
    if homogeneous:
        return [(), (0,), (0, 1)]
    return [(), (0,), (1,), (0, 1)]


def cost_structure(n_units: int, homogeneous: bool, cost: float) -> list[list[float]]:
    """
    Switching-cost matrix with the relative structure of the reference study.

    A switch toggling one unit costs ``cost``; toggling two units at once
    costs ``1.5 * cost``. For plant II this is the (0, C, 1.5C) table.
    """
    modes = units_per_mode(n_units, homogeneous)
    matrix: list[list[float]] = []
    for a in modes:
        row = []
        for b in modes:
            if a == b:
                row.append(0.0)
                continue
            if homogeneous:
                toggled = abs(len(a) - len(b))
            else:
                toggled = len(set(a) ^ set(b))
            row.append(cost if toggled == 1 else DOUBLE_TOGGLE_FACTOR * cost)
        matrix.append(row)
    return matrix


class PlantSpec(DomainModel):
    """
    A run-of-river plant with one or two units.

    Example:
        >>> plant = PlantSpec.build([UnitSpec()], cost=40_000.0)
        >>> plant.n_modes
        2
    """

    units: tuple[UnitSpec, ...] = Field(min_length=1, max_length=2)
    switch_costs: tuple[tuple[float, ...], ...] = Field(description="c_ij in m.u.")
    delta_grid_size: int = Field(default=101, ge=3, description="δ grid for the flow split")
    allow_negative_costs: bool = Field(default=False)

    @model_validator(mode="after")
    def _check_costs(self) -> PlantSpec:
        m = self.n_modes
        costs = np.asarray(self.switch_costs, dtype=np.float64)
        if costs.shape != (m, m):
            raise ValueError(f"switch_costs must be {m}x{m} for this plant, got {costs.shape}")
        if np.any(np.diag(costs) != 0.0):
            raise ValueError("switch_costs diagonal must be zero")
        if np.any(costs < 0.0):
            if not self.allow_negative_costs:
                raise ValueError("negative switching costs require allow_negative_costs")
            if _has_negative_cycle(costs):
                raise ValueError("switching costs contain a cycle with negative total cost")
        return self

    # ==================== Constructors ====================

    @classmethod
    def build(
        cls,
        units: list[UnitSpec] | tuple[UnitSpec, ...],
        cost: float = 0.0,
        *,
        delta_grid_size: int = 101,
    ) -> PlantSpec:
        """Plant whose costs follow ``cost_structure`` with constant ``cost``."""
        units = tuple(units)
        homogeneous = len(units) == 2 and units[0] == units[1]
        costs = cost_structure(len(units), homogeneous, cost)
        return cls(
            units=units,
            switch_costs=tuple(tuple(row) for row in costs),
            delta_grid_size=delta_grid_size,
        )

    def with_cost(self, cost: float) -> PlantSpec:
        """Same units, costs rebuilt from ``cost_structure`` with constant ``cost``."""
        costs = cost_structure(len(self.units), self.homogeneous, cost)
        return self.model_copy(update={"switch_costs": tuple(tuple(r) for r in costs)})

    # ==================== Computed Properties ====================

    @property
    def homogeneous(self) -> bool:
        return len(self.units) == 2 and self.units[0] == self.units[1]

    @property
    def modes(self) -> list[tuple[int, ...]]:
        return units_per_mode(len(self.units), self.homogeneous)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def cost_matrix(self) -> np.ndarray:
        return np.asarray(self.switch_costs, dtype=np.float64)

    @property
    def total_capacity(self) -> float:
        """Sum of unit saturation flows, m³/s."""
        return float(sum(u.q_max for u in self.units))


def _has_negative_cycle(costs: np.ndarray) -> bool:
    closure = costs.copy()
    m = closure.shape[0]
    for k, i, j in itertools.product(range(m), repeat=3):
        closure[i, j] = min(closure[i, j], closure[i, k] + closure[k, j])
    return bool(np.any(np.diag(closure) < 0.0))


class PayoffTable(ArrayModel):
    """Running payoff f_i(e^x) per mode on the log-flow nodes, m.u./day."""

    x_nodes: np.ndarray
    values: np.ndarray = Field(description="n_modes × n_nodes, m.u./day")
    price: float

    @field_validator("x_nodes", "values", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check(self) -> PayoffTable:
        if self.values.ndim != 2 or self.values.shape[1] != self.x_nodes.size:
            raise ValueError("values must be n_modes × len(x_nodes)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("payoff table contains non-finite values")
        return self

    @property
    def n_modes(self) -> int:
        return int(self.values.shape[0])
