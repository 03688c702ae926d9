"""
Exception hierarchy for the switching planner.

Every domain failure derives from RorSwitchingError and carries the process
exit code the CLI should terminate with:

    - ConfigError (2): invalid or inconsistent run configuration
    - DataError (3): unusable flow data or calibration input
    - ConvergenceError (4): the variational-inequality solver did not converge

DataError and GridError also subclass ValueError so that callers treating
bad input generically keep working.
"""

from __future__ import annotations

from datetime import date
from typing import Sequence


class RorSwitchingError(Exception):
    """Base class for all planner errors."""

    exit_code: int = 1
    category: str = "error"


class ConfigError(RorSwitchingError):
    """Run configuration is invalid or references missing files."""

    exit_code = 2
    category = "config"


class DataError(RorSwitchingError, ValueError):
    """
    Flow data or calibration input is unusable.

    Attributes:
        date: Offending observation date, when one can be named.
        path: Source file, when the data came from disk.
        line: 1-based line number in the source file.
    """

    exit_code = 3
    category = "data"

    def __init__(
        self,
        message: str,
        *,
        date: date | None = None,
        path: str | None = None,
        line: int | None = None,
    ) -> None:
        self.date = date
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class CalibrationError(DataError):
    """Flow model parameters cannot be estimated from the residuals."""


class GridError(RorSwitchingError, ValueError):
    """A value-function query does not fall on the solver grid."""

    exit_code = 3
    category = "data"


class ConvergenceError(RorSwitchingError):
    """
    The VI solver exhausted its iteration budget.

    Attributes:
        residuals: Residual trace of the outer (or inner) iteration.
        day: Rolling-horizon day on which the failure occurred, if any.
    """

    exit_code = 4
    category = "convergence"

    def __init__(
        self,
        message: str,
        *,
        residuals: Sequence[float] = (),
        day: int | None = None,
    ) -> None:
        self.residuals = list(residuals)
        self.day = day
        prefix = f"day {day}: " if day is not None else ""
        super().__init__(f"{prefix}{message}")
