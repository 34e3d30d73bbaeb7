import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List

import pandas as pd

from geo.network import Location, RoadNetwork
from modes.entities import Station

from .trips import DemandDataError


logger = logging.getLogger(__name__)

STATION_COLUMNS = {"id": "id", "lat": "lat", "lon": "lon", "capacity": "capacity"}

# Bluebikes "current stations" export.
BLUEBIKES_STATION_COLUMNS = {"id": "Number", "lat": "Latitude", "lon": "Longitude", "capacity": "Total docks"}

STATION_SCHEMAS = {"canonical": STATION_COLUMNS, "bluebikes": BLUEBIKES_STATION_COLUMNS}


@dataclass(frozen=True)
class StationRecord:
    id: int
    location: Location
    capacity: int
    code: str = ""


def load_stations(path, columns=None) -> List[StationRecord]:
    """
    Validated stations in id order.

    Numeric station codes become the station id; files with alphanumeric
    codes get ids by sorted code.
    """
    path = Path(path)
    if not path.exists():
        raise DemandDataError(f"Station file not found: {path}")
    if isinstance(columns, str):
        if columns not in STATION_SCHEMAS:
            raise DemandDataError(f"Unknown station schema {columns!r}")
        columns = STATION_SCHEMAS[columns]
    mapping = dict(STATION_COLUMNS, **(columns or {}))

    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    missing = [c for c in mapping.values() if c not in frame.columns]
    if missing:
        raise DemandDataError(f"Station file {path.name} lacks columns: {', '.join(missing)}")
    if frame.empty:
        raise DemandDataError(f"Station file {path.name} has no stations")

    codes = frame[mapping["id"]].str.strip()
    duplicated = codes[codes.duplicated()]
    if not duplicated.empty:
        raise DemandDataError(f"Duplicate station id {duplicated.iloc[0]!r} in {path.name}")
    if (codes == "").any():
        raise DemandDataError(f"Blank station id in {path.name}")

    capacity = pd.to_numeric(frame[mapping["capacity"]], errors="coerce")
    lon = pd.to_numeric(frame[mapping["lon"]], errors="coerce")
    lat = pd.to_numeric(frame[mapping["lat"]], errors="coerce")

    numeric = codes.str.fullmatch(r"\d+").all()
    order = sorted(codes.tolist(), key=lambda c: (int(c), c) if numeric else (0, c))
    ids = {code: (int(code) if numeric else k) for k, code in enumerate(order)}

    records = []
    for code, cap, x, y in zip(codes, capacity, lon, lat):
        if pd.isna(cap) or cap < 1 or cap != int(cap):
            raise DemandDataError(f"Station {code!r} has invalid capacity {cap}")
        if pd.isna(x) or pd.isna(y):
            raise DemandDataError(f"Station {code!r} lacks coordinates")
        try:
            location = Location(float(x), float(y))
        except ValueError as e:
            raise DemandDataError(f"Station {code!r}: {e}") from e
        records.append(StationRecord(ids[code], location, int(cap), code))

    records.sort(key=lambda s: s.id)
    logger.info(f"Loaded {len(records)} stations with {sum(s.capacity for s in records)} docks from {path.name}")
    return records


def write_stations(path, stations: Iterable[StationRecord]) -> Path:
    stations = list(stations)
    frame = pd.DataFrame({
        "id": [s.id for s in stations],
        "lat": [s.location.lat for s in stations],
        "lon": [s.location.lon for s in stations],
        "capacity": [s.capacity for s in stations],
    })
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.7f")
    return path


def place_stations(records: Iterable[StationRecord], net: RoadNetwork) -> List[Station]:
    """Snap station records onto the road network."""
    index = net.node_index
    stations = []
    for record in records:
        dist, node = index.nearest(record.location)
        if dist > 500:
            logger.warning(f"Station {record.id} is {dist:.0f} m from the nearest road node")
        stations.append(Station(record.id, record.location, node, record.capacity))
    return stations
