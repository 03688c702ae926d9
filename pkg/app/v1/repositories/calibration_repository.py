"""
Calibration file persistence.

The calibration file is JSON with the keys ``kappa``, ``sigma``,
``log_mean`` (365 values), ``log_mean_derivative`` (365 values),
``window_days`` and ``max_lag_days``, plus the lags used in the κ fit, the
residual variance and the calibration years as provenance.
"""

from __future__ import annotations

from pathlib import Path

import structlog
from pydantic import Field, ValidationError

from app.v1.core.exceptions import DataError
from app.v1.models.base import DomainModel
from app.v1.models.flow import OUParams, SeasonalProfile

logger = structlog.get_logger(__name__)


class CalibrationRecord(DomainModel):
    """On-disk form of a calibrated flow model."""

    kappa: float = Field(ge=0.0)
    sigma: float = Field(ge=0.0)
    log_mean: list[float] = Field(min_length=365, max_length=365)
    log_mean_derivative: list[float] = Field(min_length=365, max_length=365)
    window_days: int = Field(ge=1)
    max_lag_days: int = Field(ge=1)
    lags_used: list[int] = Field(default_factory=list)
    sample_variance: float | None = None
    calibration_years: tuple[int, int] | None = None

    @classmethod
    def from_model(
        cls,
        profile: SeasonalProfile,
        ou: OUParams,
        max_lag_days: int,
        calibration_years: tuple[int, int] | None = None,
    ) -> CalibrationRecord:
        return cls(
            kappa=ou.kappa,
            sigma=ou.sigma,
            log_mean=profile.log_mean.tolist(),
            log_mean_derivative=profile.log_mean_derivative.tolist(),
            window_days=profile.window_days,
            max_lag_days=max_lag_days,
            lags_used=list(ou.lags_used),
            sample_variance=ou.sample_variance,
            calibration_years=calibration_years,
        )

    def profile(self) -> SeasonalProfile:
        return SeasonalProfile(
            log_mean=self.log_mean,
            log_mean_derivative=self.log_mean_derivative,
            window_days=self.window_days,
        )

    def ou(self) -> OUParams:
        return OUParams(
            kappa=self.kappa,
            sigma=self.sigma,
            lags_used=tuple(self.lags_used),
            sample_variance=self.sample_variance,
        )


def write_calibration(record: CalibrationRecord, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(record.model_dump_json(indent=2), encoding="utf-8")
    logger.info("calibration_written", path=str(path), kappa=record.kappa, sigma=record.sigma)
    return path


def read_calibration(path: str | Path) -> CalibrationRecord:
    """
    Load a calibration file.

    Raises:
        DataError: Missing file or content that does not validate.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("calibration file not found", path=str(path))
    try:
        record = CalibrationRecord.model_validate_json(path.read_text(encoding="utf-8"))
        # re-validate the arrays through the domain models
        record.profile()
    except ValidationError as exc:
        raise DataError(f"invalid calibration file: {exc.errors()[0]['msg']}", path=str(path)) from exc
    logger.debug("calibration_loaded", path=str(path))
    return record
