"""
Historical trip ingestion.

Bluebikes exports have renamed their columns over the years, so the
columns used here are looked up through a mapping from canonical names.
"""
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from geo.network import Location


logger = logging.getLogger(__name__)


class DemandDataError(ValueError):
    pass


# 2019 Bluebikes trip history export.
BLUEBIKES_TRIP_COLUMNS = {
    "start_time": "starttime",
    "duration": "tripduration",
    "start_station_id": "start station id",
    "start_lat": "start station latitude",
    "start_lon": "start station longitude",
    "end_station_id": "end station id",
    "end_lat": "end station latitude",
    "end_lon": "end station longitude",
}

# 2023+ exports.
BLUEBIKES_2023_TRIP_COLUMNS = {
    "start_time": "started_at",
    "duration": None,
    "start_station_id": "start_station_id",
    "start_lat": "start_lat",
    "start_lon": "start_lng",
    "end_station_id": "end_station_id",
    "end_lat": "end_lat",
    "end_lon": "end_lng",
}

TRIP_SCHEMAS = {
    "bluebikes": BLUEBIKES_TRIP_COLUMNS,
    "bluebikes-2023": BLUEBIKES_2023_TRIP_COLUMNS,
}


@dataclass(frozen=True)
class TripRecord:
    start_time: datetime
    start_station: Tuple[str, Location]
    end_station: Tuple[str, Location]
    duration: Optional[float] = None


class TripRecords(list):
    """Trips in start-time order, plus the number of malformed rows dropped on load."""

    def __init__(self, records=(), skipped: int = 0):
        super().__init__(records)
        self.skipped = skipped


def resolve_columns(columns) -> Dict[str, Optional[str]]:
    if columns is None:
        return BLUEBIKES_TRIP_COLUMNS
    if isinstance(columns, str):
        try:
            return TRIP_SCHEMAS[columns]
        except KeyError:
            raise DemandDataError(f"Unknown trip schema {columns!r}; known: {', '.join(TRIP_SCHEMAS)}")
    return dict(BLUEBIKES_TRIP_COLUMNS, **columns)


def _valid_coordinates(lon: pd.Series, lat: pd.Series) -> pd.Series:
    return lon.between(-180, 180) & lat.between(-90, 90)


def load_trips(path, window: Tuple[datetime, datetime], columns=None) -> TripRecords:
    """
    Trips whose start time falls in [t0, t1), sorted by start time.

    Rows with a blank station id, an unparseable time or bad coordinates are
    skipped and counted on the result's `skipped` attribute.
    """
    path = Path(path)
    if not path.exists():
        raise DemandDataError(f"Trip file not found: {path}")
    mapping = resolve_columns(columns)
    t0, t1 = (pd.Timestamp(t) for t in window)
    if t0 >= t1:
        raise DemandDataError(f"Empty trip window [{t0}, {t1})")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DemandDataError(f"Unreadable trip file {path}: {e}") from e

    required = [c for key, c in mapping.items() if c is not None and key != "duration"]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DemandDataError(f"Trip file {path.name} lacks columns: {', '.join(missing)}")

    start = pd.to_datetime(frame[mapping["start_time"]], errors="coerce")
    start_id = frame[mapping["start_station_id"]].str.strip()
    end_id = frame[mapping["end_station_id"]].str.strip()
    coords = {
        key: pd.to_numeric(frame[mapping[key]], errors="coerce")
        for key in ("start_lon", "start_lat", "end_lon", "end_lat")
    }
    if mapping.get("duration") and mapping["duration"] in frame.columns:
        duration = pd.to_numeric(frame[mapping["duration"]], errors="coerce")
    else:
        duration = pd.Series(np.nan, index=frame.index)

    valid = (
        start.notna()
        & (start_id != "")
        & (end_id != "")
        & _valid_coordinates(coords["start_lon"], coords["start_lat"])
        & _valid_coordinates(coords["end_lon"], coords["end_lat"])
    )
    skipped = int((~valid).sum())
    if skipped:
        logger.warning(f"Skipped {skipped} malformed trip rows in {path.name}")

    keep = valid & (start >= t0) & (start < t1)
    rows = pd.DataFrame({
        "start": start[keep],
        "start_id": start_id[keep],
        "end_id": end_id[keep],
        "duration": duration[keep],
        **{key: series[keep] for key, series in coords.items()},
    }).sort_values("start", kind="mergesort")

    if rows.empty:
        raise DemandDataError(f"No trips in {path.name} between {t0} and {t1}")

    records = [
        TripRecord(
            start_time=row.start.to_pydatetime(),
            start_station=(row.start_id, Location(float(row.start_lon), float(row.start_lat))),
            end_station=(row.end_id, Location(float(row.end_lon), float(row.end_lat))),
            duration=None if pd.isna(row.duration) else float(row.duration),
        )
        for row in rows.itertuples(index=False)
    ]
    logger.info(f"Loaded {len(records)} trips from {path.name} ({skipped} malformed rows skipped)")
    return TripRecords(records, skipped)


def write_trips(path, trips: List[TripRecord]) -> Path:
    """Write trips in the 2019 Bluebikes layout."""
    cols = BLUEBIKES_TRIP_COLUMNS
    frame = pd.DataFrame({
        cols["duration"]: [t.duration if t.duration is not None else "" for t in trips],
        cols["start_time"]: [t.start_time.strftime("%Y-%m-%d %H:%M:%S.%f") for t in trips],
        cols["start_station_id"]: [t.start_station[0] for t in trips],
        cols["start_lat"]: [t.start_station[1].lat for t in trips],
        cols["start_lon"]: [t.start_station[1].lon for t in trips],
        cols["end_station_id"]: [t.end_station[0] for t in trips],
        cols["end_lat"]: [t.end_station[1].lat for t in trips],
        cols["end_lon"]: [t.end_station[1].lon for t in trips],
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.7f")
    return path
