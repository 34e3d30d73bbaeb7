"""
Synthetic city for desk-scale runs that must not depend on downloaded data.

A two-way lattice of streets, stations on a regular subset of junctions and
trips drawn from an inhomogeneous Poisson process with a morning and an
evening peak. Station popularity is gamma distributed so demand is
spatially uneven.
"""
import logging
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from geo.network import EARTH_RADIUS_M, Location, RoadNetwork, haversine_m, save_network

from .stations import StationRecord, write_stations
from .trips import TripRecord, TripRecords, write_trips


logger = logging.getLogger(__name__)

DEFAULT_ORIGIN = Location(-71.09, 42.34)
DEFAULT_T0 = datetime(2019, 10, 7)
PEAK_HOURS = (8.0, 17.5)
PEAK_WIDTH_H = 1.2
BASE_SHARE = 0.15


@dataclass
class SyntheticCity:
    net: RoadNetwork
    stations: List[StationRecord]
    trips: TripRecords
    t0: datetime
    t1: datetime


def lattice_network(rows: int, cols: int, spacing_m: float, origin: Location = DEFAULT_ORIGIN) -> RoadNetwork:
    """Two-way grid of streets; node id = row * cols + col + 1."""
    dlat = math.degrees(spacing_m / EARTH_RADIUS_M)
    dlon = math.degrees(spacing_m / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    nodes: Dict[int, Tuple[float, float]] = {}
    for r in range(rows):
        for c in range(cols):
            nodes[r * cols + c + 1] = (origin.lon + c * dlon, origin.lat + r * dlat)

    edges = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c + 1
            for v in ([u + 1] if c + 1 < cols else []) + ([u + cols] if r + 1 < rows else []):
                mm = max(1, int(round(haversine_m(Location(*nodes[u]), Location(*nodes[v])) * 1000)))
                edges += [(u, v, mm), (v, u, mm)]
    return RoadNetwork.from_edges(nodes, edges)


def intensity(hour_of_day: np.ndarray, uniform: bool = False) -> np.ndarray:
    """Relative request rate over the day, peaking at 1."""
    if uniform:
        return np.ones_like(hour_of_day, dtype=float)
    peaks = sum(np.exp(-0.5 * ((hour_of_day - h) / PEAK_WIDTH_H) ** 2) for h in PEAK_HOURS)
    return BASE_SHARE + (1.0 - BASE_SHARE) * np.minimum(peaks, 1.0)


def poisson_times(rng: np.random.Generator, days: int, trips_per_day: float, uniform: bool) -> np.ndarray:
    """Thinning: homogeneous candidates at the peak rate, kept with probability rate / peak."""
    horizon_s = days * 86400.0
    hours = np.linspace(0, 24, 24 * 60, endpoint=False)
    mean_rate = intensity(hours, uniform).mean()
    peak_per_s = trips_per_day / (86400.0 * mean_rate)
    n = rng.poisson(peak_per_s * horizon_s)
    candidates = np.sort(rng.uniform(0.0, horizon_s, n))
    keep = rng.random(n) < intensity((candidates / 3600.0) % 24.0, uniform)
    return candidates[keep]


def synthetic_city(seed: int = 0, rows: int = 12, cols: int = 12, spacing_m: float = 250.0,
                   station_every: int = 2, days: int = 1, trips_per_day: float = 2000.0,
                   uniform: bool = False, t0: datetime = DEFAULT_T0) -> SyntheticCity:
    rng = np.random.default_rng(seed)
    net = lattice_network(rows, cols, spacing_m)

    stations = []
    for r in range(0, rows, station_every):
        for c in range(0, cols, station_every):
            node = r * cols + c + 1
            stations.append(StationRecord(len(stations) + 1, net.location(node),
                                          int(rng.integers(8, 21)), str(len(stations) + 1)))

    n = len(stations)
    weights = np.ones(n) if uniform else rng.gamma(2.0, 1.0, n)
    weights = weights / weights.sum()
    times = poisson_times(rng, days, trips_per_day, uniform)
    starts = rng.choice(n, size=times.size, p=weights)
    ends = rng.choice(n, size=times.size, p=weights)
    ends = np.where(ends == starts, (ends + 1) % n, ends)

    trips = TripRecords()
    for t, a, b in zip(times.tolist(), starts.tolist(), ends.tolist()):
        origin, destination = stations[a], stations[b]
        trips.append(TripRecord(
            start_time=t0 + timedelta(seconds=round(t, 3)),
            start_station=(origin.code, origin.location),
            end_station=(destination.code, destination.location),
            duration=round(haversine_m(origin.location, destination.location) / (10.2 / 3.6), 1),
        ))
    logger.info(f"Synthetic city: {len(net)} nodes, {n} stations, {len(trips)} trips over {days} day(s)")
    return SyntheticCity(net, stations, trips, t0, t0 + timedelta(days=days))


def save_city(city: SyntheticCity, directory) -> Dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    return {
        "network": save_network(city.net, directory / "network.txt"),
        "stations": write_stations(directory / "stations.csv", city.stations),
        "trips": write_trips(directory / "trips.csv", city.trips),
    }
