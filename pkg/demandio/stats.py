import logging
from dataclasses import dataclass
from datetime import datetime
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from geo.network import EARTH_RADIUS_M
from modes.entities import UserRequest
from rebalance.history import SLOT_MS, SLOTS_PER_DAY, SLOTS_PER_WEEK, DemandHistory


logger = logging.getLogger(__name__)

HOUR_MS = 3_600_000


@dataclass
class DemandStats:
    hourly: pd.Series
    slot_of_week: pd.Series
    distance_counts: np.ndarray
    distance_edges_km: np.ndarray
    share_below_5km: float
    total: int

    def as_frame(self) -> pd.DataFrame:
        return self.hourly.rename("requests").rename_axis("hour").reset_index()


def week_slot_offset(t0: Optional[datetime]) -> int:
    """Slot-of-week index of the window start; Monday 00:00 is slot 0."""
    if t0 is None:
        return 0
    return t0.weekday() * SLOTS_PER_DAY + (t0.hour * 60 + t0.minute) // 15


def air_distances_m(requests: Sequence[UserRequest]) -> np.ndarray:
    o_lon = np.array([r.origin.lon for r in requests])
    o_lat = np.array([r.origin.lat for r in requests])
    d_lon = np.array([r.destination.lon for r in requests])
    d_lat = np.array([r.destination.lat for r in requests])
    lat1, lat2 = np.radians(o_lat), np.radians(d_lat)
    dlat = lat2 - lat1
    dlon = np.radians(d_lon - o_lon)
    a = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def demand_stats(requests: Sequence[UserRequest], t0: Optional[datetime] = None,
                 bin_km: float = 1.0) -> DemandStats:
    """Hourly timeline, slot-of-week profile and air-distance histogram of a request set."""
    if not requests:
        raise ValueError("demand_stats needs at least one request")
    departures = np.array([r.departure for r in requests], dtype=np.int64)
    hours = departures // HOUR_MS
    hourly = pd.Series(np.bincount(hours - hours.min()), index=np.arange(hours.min(), hours.max() + 1))

    slots = (departures // SLOT_MS + week_slot_offset(t0)) % SLOTS_PER_WEEK
    slot_of_week = pd.Series(np.bincount(slots, minlength=SLOTS_PER_WEEK))

    distances = air_distances_m(requests) / 1000.0
    top = max(bin_km, np.ceil(distances.max() / bin_km) * bin_km)
    edges = np.arange(0.0, top + bin_km, bin_km)
    counts, edges = np.histogram(distances, bins=edges)
    share = float((distances < 5.0).mean())
    logger.info(f"{len(requests)} requests, {share:.1%} shorter than 5 km in air distance")
    return DemandStats(hourly, slot_of_week, counts, edges, share, len(requests))


def history_from_requests(requests: Sequence[UserRequest], grid, history: Optional[DemandHistory] = None) -> DemandHistory:
    """Aggregate request departures into per-cell 15-minute counts."""
    history = history or DemandHistory(grid.cell_count)
    for req in requests:
        history.add(grid.cell_of_node(req.origin_node), req.departure)
    return history
