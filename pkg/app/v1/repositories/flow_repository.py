"""
Flow CSV persistence.

Files carry a ``date,flow`` header, ISO-8601 dates and flows in m³/s with a
decimal point. Parsing problems are reported with the file path and the
1-based line number (the header is line 1).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd
import structlog

from app.v1.core.exceptions import DataError
from app.v1.models.flow import FlowSeries

logger = structlog.get_logger(__name__)

FLOW_COLUMNS = ("date", "flow")


def read_flow_csv(path: str | Path) -> FlowSeries:
    """
    Load a raw (uncleaned) flow series.

    Raises:
        DataError: Missing file, wrong header, unparsable date or flow, or a
            missing flow value. The message names the file and line.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError("flow file not found", path=str(path))
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse CSV: {exc}", path=str(path)) from exc

    columns = tuple(c.strip().lower() for c in frame.columns)
    if columns != FLOW_COLUMNS:
        raise DataError(f"expected header 'date,flow', got {','.join(frame.columns)}", path=str(path), line=1)
    frame.columns = list(FLOW_COLUMNS)

    dates = pd.to_datetime(frame["date"].str.strip(), format="%Y-%m-%d", errors="coerce")
    flows = pd.to_numeric(frame["flow"].str.strip(), errors="coerce")
    for column, parsed in (("date", dates), ("flow", flows)):
        bad = np.flatnonzero(parsed.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raw = frame[column].iloc[row]
            problem = "missing" if raw.strip() == "" else f"unparsable ({raw!r})"
            raise DataError(f"{column} {problem}", path=str(path), line=row + 2)

    series = FlowSeries(
        dates=dates.to_numpy(dtype="datetime64[D]"),
        flows=flows.to_numpy(dtype=np.float64),
    )
    logger.info("flow_csv_loaded", path=str(path), records=len(series))
    return series


def write_flow_csv(series: FlowSeries, path: str | Path) -> Path:
    """Write ``series`` with the ``date,flow`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = series.to_frame()
    frame["date"] = frame["date"].dt.strftime("%Y-%m-%d")
    frame.to_csv(path, index=False)
    logger.info("flow_csv_written", path=str(path), records=len(series))
    return path
