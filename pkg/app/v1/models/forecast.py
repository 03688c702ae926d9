"""
Forecast-blended flow dynamics.

ForecastSpec carries the l-day forecast issued on day k; DriftSpec is the
resulting mean path g_k sampled on the daily grid, which replaces the seasonal
log-mean r on the window k < n <= k + l + ℓ. PathSet holds simulated flows.
"""

from __future__ import annotations

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.v1.models.base import ArrayModel, readonly_array
from app.v1.models.flow import OUParams, SeasonalProfile


class ForecastSpec(ArrayModel):
    """
    Flow forecast issued on day ``start_index``.

    ``values[i]`` is the forecast flow for day ``start_index + 1 + i``. An
    empty ``values`` array (l = 0) means no forecast; ``relaxation_days``
    (ℓ) is then irrelevant.
    """

    start_index: int = Field(ge=0, description="Day k on which the forecast is issued")
    values: np.ndarray = Field(description="Forecast flows F for days k+1..k+l, m³/s")
    relaxation_days: int = Field(default=20, ge=1, description="ℓ, days to return to r")

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(np.atleast_1d(np.asarray(v, dtype=np.float64)))

    @classmethod
    def none(cls, start_index: int) -> ForecastSpec:
        """No forecast on day ``start_index``."""
        return cls(start_index=start_index, values=np.empty(0))

    @property
    def horizon(self) -> int:
        """l, the number of forecast days."""
        return int(self.values.size)


class DriftSpec(ArrayModel):
    """
    Mean path of the log-flow seen from day ``start_index``.

    ``g[i]`` and ``g_slope[i]`` refer to day ``start_index + i`` for
    ``i = 0..window_end - start_index``. The forecast drift applies on days
    ``start_index < n <= window_end``; elsewhere the seasonal profile does.
    ``g_slope[0]`` is never used.
    """

    start_index: int = Field(ge=0)
    window_end: int = Field(ge=0, description="Last day of the forecast window, k + l + ℓ")
    g: np.ndarray
    g_slope: np.ndarray
    profile: SeasonalProfile
    ou: OUParams

    @field_validator("g", "g_slope", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check_window(self) -> DriftSpec:
        length = self.window_end - self.start_index + 1
        if length < 1:
            raise ValueError("window_end must not precede start_index")
        if self.g.shape != (length,) or self.g_slope.shape != (length,):
            raise ValueError(f"g and g_slope must hold {length} values")
        return self

    @property
    def has_forecast(self) -> bool:
        return self.window_end > self.start_index

    def mean_and_slope(self, day: np.ndarray | int) -> tuple[np.ndarray, np.ndarray]:
        """
        Log-mean m(t_n) and its slope m'(t_n) for absolute day indices.

        Returns the forecast path g, g' inside the window and r, r' outside.
        """
        days = np.asarray(day, dtype=np.int64)
        flat = np.atleast_1d(days)
        mean, slope = self.profile.at(flat)
        mean = np.array(mean, dtype=np.float64)
        slope = np.array(slope, dtype=np.float64)
        if self.has_forecast:
            inside = (flat > self.start_index) & (flat <= self.window_end)
            offset = flat[inside] - self.start_index
            mean[inside] = self.g[offset]
            slope[inside] = self.g_slope[offset]
        return mean.reshape(days.shape), slope.reshape(days.shape)


class PathSet(ArrayModel):
    """
    Simulated flow paths.

    ``paths[p, 0]`` is the initial flow; column ``s`` is the flow after ``s``
    steps of size ``dt`` starting on day ``start_index``.
    """

    paths: np.ndarray = Field(description="n_paths × n_steps flows, m³/s")
    seed: int
    dt: float = Field(gt=0.0, description="Step size in days")
    start_index: int = Field(default=0, ge=0)

    @field_validator("paths", mode="before")
    @classmethod
    def _coerce(cls, v: object) -> np.ndarray:
        return readonly_array(v, dtype=np.float64)

    @model_validator(mode="after")
    def _check_positive(self) -> PathSet:
        if self.paths.ndim != 2:
            raise ValueError("paths must be a 2-D array")
        if not np.all(self.paths > 0.0):
            raise ValueError("simulated flows must be strictly positive")
        return self

    @property
    def n_paths(self) -> int:
        return int(self.paths.shape[0])

    @property
    def n_steps(self) -> int:
        return int(self.paths.shape[1])
