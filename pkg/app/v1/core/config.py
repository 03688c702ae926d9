"""
Run configuration.

Values come from, in priority order: an explicit TOML run file, environment
variables (prefix ``ROR_``, nested keys joined by ``__``) or a ``.env``
file, and the defaults below. Every plant parameter defaults to the
reference configuration, so a minimal run file only names the flow CSV:

    FLOW_CSV = "data/flows.csv"

Example:
    from app.v1.core.config import load_config

    config = load_config("run.toml")
    config.solver_settings().grid_nodes
"""

from __future__ import annotations

import tomllib
from functools import lru_cache
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.v1.core.exceptions import ConfigError
from app.v1.models.plant import UnitSpec, units_per_mode
from app.v1.models.solver import SolverSettings

MAX_FORECAST_DAYS = 365


def _default_sweep() -> list[float]:
    return [round(float(r), 3) for r in np.arange(0.002, 0.0301, 0.002)]


class RunConfig(BaseSettings):
    """Settings of one planner run."""

    # ==================== Inputs and Outputs ====================

    FLOW_CSV: Path | None = Field(default=None, description="Daily flow CSV with a date,flow header")
    CALIBRATION_FILE: Path = Field(
        default=Path("output/calibration.json"),
        description="Calibration JSON written by calibrate and read by the other commands",
    )
    OUTPUT_DIR: Path = Field(default=Path("output"), description="Directory for every report and export")

    # ==================== Calibration ====================

    CALIBRATION_YEARS: tuple[int, int] = Field(default=(1980, 2014), description="First and last calibration year")
    WINDOW_DAYS: int = Field(default=7, ge=1, description="Moving-average width for r_t (odd)")
    MAX_LAG_DAYS: int = Field(default=30, ge=1, description="Largest ACF lag in the κ regression")

    # ==================== Plant ====================

    UNIT: UnitSpec = Field(default_factory=UnitSpec, description="First (or only) unit")
    UNIT2: UnitSpec | None = Field(default=None, description="Second, different unit")
    HOMOGENEOUS_PAIR: bool = Field(default=False, description="Two copies of UNIT")
    PRICE: float = Field(default=1.0, gt=0.0, description="P0, m.u./kWh")
    COST_RATIO: float = Field(default=0.01, ge=0.0, description="C/D")
    SWITCH_COSTS: list[list[float]] | None = Field(
        default=None, description="Explicit cost matrix in m.u., overrides COST_RATIO"
    )
    ALLOW_NEGATIVE_COSTS: bool = Field(default=False)
    CAPACITY_AT_TOTAL_FLOW: bool = Field(
        default=True, description="Evaluate D at the summed saturation flow of all units"
    )
    DELTA_GRID_SIZE: int = Field(default=101, ge=3, description="Flow-split grid for two running units")

    # ==================== Backtest ====================

    BACKTEST_YEARS: tuple[int, int] = Field(default=(2015, 2018), description="First and last backtest year")
    FORECAST_LENGTHS: list[int] = Field(default_factory=lambda: [0, 5, 10], description="l values, days")
    RELAXATION_DAYS: int = Field(default=20, ge=1, description="ℓ, days")
    SWEEP_RATIOS: list[float] = Field(default_factory=_default_sweep, description="C/D grid of sweep")
    MAX_WORKERS: int = Field(default=1, ge=1, description="Worker processes for backtest cells")

    # ==================== Solver ====================

    GRID_NODES: int = Field(default=201, ge=51, description="J + 1 log-flow nodes")
    GRID_WIDTH_SD: float = Field(default=5.0, gt=0.0)
    SPATIAL_TOL_REL: float = Field(default=1e-8, gt=0.0, description="Inner tolerance relative to D")
    TOTAL_TOL_REL: float = Field(default=1e-6, gt=0.0, description="Outer tolerance relative to D")
    MAX_OUTER_ITERATIONS: int = Field(default=200, ge=1)
    MAX_INNER_ITERATIONS: int = Field(default=10_000, ge=1)

    # ==================== Simulation ====================

    SEED: int = Field(default=20200615, ge=0)
    N_PATHS: int = Field(default=5, ge=1)
    SIMULATE_YEAR: int | None = Field(default=None, description="Year whose 1 January flow starts the paths")

    # ==================== Logging ====================

    LOG_LEVEL: str = Field(default="INFO")
    LOG_JSON: bool = Field(default=False)

    model_config = SettingsConfigDict(
        env_prefix="ROR_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # =========================================================================
    # VALIDATORS
    # =========================================================================

    @field_validator("WINDOW_DAYS")
    @classmethod
    def validate_window(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError(f"WINDOW_DAYS must be odd, got {v}")
        return v

    @field_validator("FORECAST_LENGTHS")
    @classmethod
    def validate_forecasts(cls, v: list[int]) -> list[int]:
        for length in v:
            if not 0 <= length <= MAX_FORECAST_DAYS:
                raise ValueError(f"forecast length {length} outside 0..{MAX_FORECAST_DAYS}")
        return v

    @field_validator("SWEEP_RATIOS")
    @classmethod
    def validate_ratios(cls, v: list[float]) -> list[float]:
        if any(r < 0.0 for r in v):
            raise ValueError("SWEEP_RATIOS must be non-negative")
        return v

    @field_validator("CALIBRATION_YEARS", "BACKTEST_YEARS")
    @classmethod
    def validate_years(cls, v: tuple[int, int]) -> tuple[int, int]:
        if v[0] > v[1]:
            raise ValueError(f"year range {v[0]}..{v[1]} is reversed")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        allowed = {"DEBUG", "INFO", "WARNING", "ERROR"}
        if v.upper() not in allowed:
            raise ValueError(f"LOG_LEVEL must be one of: {', '.join(sorted(allowed))}")
        return v.upper()

    @model_validator(mode="after")
    def validate_plant(self) -> RunConfig:
        if self.UNIT2 is not None and self.HOMOGENEOUS_PAIR:
            raise ValueError("set either UNIT2 or HOMOGENEOUS_PAIR, not both")
        if self.SWITCH_COSTS is not None:
            units = self.units
            homogeneous = len(units) == 2 and units[0] == units[1]
            m = len(units_per_mode(len(units), homogeneous))
            costs = np.asarray(self.SWITCH_COSTS, dtype=np.float64)
            if costs.shape != (m, m):
                raise ValueError(f"SWITCH_COSTS must be {m}x{m} for this plant")
            if np.any(np.diag(costs) != 0.0):
                raise ValueError("SWITCH_COSTS diagonal must be zero")
        return self

    # =========================================================================
    # DERIVED SETTINGS
    # =========================================================================

    @property
    def units(self) -> tuple[UnitSpec, ...]:
        if self.UNIT2 is not None:
            return (self.UNIT, self.UNIT2)
        if self.HOMOGENEOUS_PAIR:
            return (self.UNIT, self.UNIT)
        return (self.UNIT,)

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            grid_nodes=self.GRID_NODES,
            grid_width_sd=self.GRID_WIDTH_SD,
            spatial_tol_rel=self.SPATIAL_TOL_REL,
            total_tol_rel=self.TOTAL_TOL_REL,
            max_outer_iterations=self.MAX_OUTER_ITERATIONS,
            max_inner_iterations=self.MAX_INNER_ITERATIONS,
        )

    def require_inputs(self, *names: str) -> None:
        """
        Check that the named path settings point at existing files.

        Raises:
            ConfigError: A setting is unset or its file does not exist.
        """
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name} is not set")
            if not Path(value).is_file():
                raise ConfigError(f"{name} does not exist: {value}")


def _upper_keys(data: dict[str, Any]) -> dict[str, Any]:
    return {key.upper(): value for key, value in data.items()}


def load_config(path: str | Path | None = None, **overrides: Any) -> RunConfig:
    """
    Build a RunConfig from an optional TOML file and keyword overrides.

    Top-level keys are case-insensitive. Overrides win over the file, the file
    over the environment.

    Raises:
        ConfigError: Unreadable file or invalid values.
    """
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            values = _upper_keys(tomllib.loads(path.read_text(encoding="utf-8")))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    values.update(_upper_keys({k: v for k, v in overrides.items() if v is not None}))
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"invalid configuration: {location}: {first['msg']}") from exc


@lru_cache
def get_settings() -> RunConfig:
    """Settings from the environment and ``.env`` alone, built once."""
    return load_config()
