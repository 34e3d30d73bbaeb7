"""
Key performance indicators of a finished run, computed from its event log alone.
"""
import logging
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, Optional, Tuple

from .eventlog import RUN_END, EventLog, EventLogError, LogRecord, read_log


logger = logging.getLogger(__name__)

DAY_MS = 86_400_000
MINUTE_MS = 60_000

MOVE_CLASSES = ("in_use", "pickup", "rebalancing", "charge")
TIME_CLASSES = MOVE_CLASSES + ("idling",)

STATE_CLASS = {
    "InUse": "in_use",
    "DrivingToUser": "pickup",
    "Rebalancing": "rebalancing",
    "DrivingToCharger": "charge",
    "Charging": "charge",
    "Available": "idling",
    "Idle": "idling",
    "Stranded": "idling",
}

UNSERVED_REASONS = ("NoWalkableStations", "NoBikes", "RetryLimit")


@dataclass
class KpiReport:
    mode: str
    fleet_size: int
    days: float
    demand: int
    served: int
    unserved: int
    served_pct: float
    unserved_pct: float
    unserved_by_reason_pct: Dict[str, float]
    avg_trip_min: Optional[float]
    avg_walk_origin_min: Optional[float]
    avg_wait_min: Optional[float]
    avg_ride_min: Optional[float]
    avg_walk_destination_min: Optional[float]
    avg_wait_or_walk_min: Optional[float]
    wait_or_walk_over_10_pct: Optional[float]
    wait_or_walk_over_15_pct: Optional[float]
    bikes_used_pct: float
    trips_per_bike_day: float
    rebalanced_bikes: int
    total_charges: int
    charges_per_day: float
    stranded_bikes: int
    retry_limit_unserved: int
    vkt_total_km: float
    vkt_per_bike_km: float
    vkt_split_pct: Dict[str, float] = field(default_factory=dict)
    time_split_pct: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def flat(self) -> Dict[str, Any]:
        """One level of keys, nested splits as `<name>.<key>`."""
        out = {}
        for key, value in self.as_dict().items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    out[f"{key}.{sub}"] = v
            else:
                out[key] = value
        return out


def _pct(part: float, whole: float) -> float:
    return 100.0 * part / whole if whole else 0.0


def _mean_min(values) -> Optional[float]:
    values = list(values)
    if not values:
        return None
    return sum(values) / len(values) / MINUTE_MS


def wait_or_walk_ms(mode: str, served: Dict[str, Any]) -> int:
    """The time a user spends reaching a bike or a dock, by mode."""
    if mode == "station":
        return served["walk_origin_ms"] + served["walk_destination_ms"]
    if mode == "dockless":
        return served["walk_origin_ms"]
    return served["wait_ms"]


def open_log(source) -> Tuple[Dict[str, Any], Iterable[LogRecord]]:
    if isinstance(source, EventLog):
        return source.metadata, iter(source)
    return read_log(source)


class StateClock:
    """Per-bike milliseconds in each time class, clipped at the horizon."""

    def __init__(self, horizon_ms: Optional[int] = None):
        self.horizon_ms = horizon_ms
        self.since: Dict[str, Tuple[int, str]] = {}
        self.spans: Dict[str, Counter] = defaultdict(Counter)

    def _add(self, agent: str, state: str, start: int, stop: int):
        if self.horizon_ms is not None:
            start, stop = min(start, self.horizon_ms), min(stop, self.horizon_ms)
        self.spans[agent][STATE_CLASS[state]] += stop - start

    def observe(self, agent: str, time: int, state: str):
        previous = self.since.get(agent)
        if previous is not None:
            self._add(agent, previous[1], previous[0], time)
        self.since[agent] = (time, state)

    def close(self, end_time: int) -> Dict[str, Counter]:
        if not self.horizon_ms:
            self.horizon_ms = end_time
        for agent, (since, state) in self.since.items():
            self._add(agent, state, since, end_time)
        self.since = {}
        return self.spans


def state_durations(source) -> Dict[str, Counter]:
    """Milliseconds each bike spent in each time class up to the horizon."""
    metadata, records = open_log(source)
    clock = StateClock(metadata.get("horizon_ms"))
    for rec in records:
        if rec.transition == "bike_state":
            clock.observe(rec.agent, rec.time, rec.payload["state"])
        elif rec.transition == RUN_END:
            return clock.close(rec.time)
    raise EventLogError("Event log is truncated: no run-end marker")


def compute_kpis(source) -> KpiReport:
    """
    KPIs from an EventLog or a log file path.

    The log must end with the run-end marker. Time splits integrate every
    bike's state from its first record to the horizon (the run end when the
    log has no horizon); trips drained after the horizon still count toward
    trip and distance KPIs.
    """
    metadata, records = open_log(source)
    mode = metadata.get("mode", "station")

    served_trips = []
    reasons: Counter = Counter()
    bikes_used = set()
    clock = StateClock(metadata.get("horizon_ms"))
    vkt_mm: Dict[str, int] = defaultdict(int)
    counts: Counter = Counter()
    end_time = None

    for rec in records:
        if end_time is not None:
            raise EventLogError(f"Record after run end at t={rec.time} ms")
        kind = rec.transition
        if kind == "bike_state":
            clock.observe(rec.agent, rec.time, rec.payload["state"])
        elif kind == "bike_moved":
            vkt_mm[rec.payload["cls"]] += rec.payload["mm"]
        elif kind == "user_served":
            served_trips.append(rec.payload)
            bikes_used.add(rec.payload["bike"])
        elif kind == "user_unserved":
            reasons[rec.payload["reason"]] += 1
        elif kind == "station_rebalance":
            counts["rebalanced"] += 1
        elif kind == "rebalance_plan":
            counts["rebalanced"] += rec.payload["moves"]
        elif kind == "charge_start":
            counts["charges"] += 1
        elif kind == "bike_stranded":
            counts["stranded"] += 1
        elif kind == RUN_END:
            end_time = rec.time

    if end_time is None:
        raise EventLogError("Event log is truncated: no run-end marker")
    spans = clock.close(end_time)
    time_by_class: Counter = sum(spans.values(), Counter())

    fleet = int(metadata.get("fleet_size", len(spans)))
    horizon_ms = int(metadata.get("horizon_ms") or end_time or DAY_MS)
    days = horizon_ms / DAY_MS
    served = len(served_trips)
    unserved = sum(reasons.values())
    demand = served + unserved
    if "requests" in metadata and metadata["requests"] != demand:
        raise EventLogError(f"Log accounts for {demand} of {metadata['requests']} requests")

    wait_or_walk = [wait_or_walk_ms(mode, t) for t in served_trips]
    total_vkt = sum(vkt_mm.values())
    total_time = sum(time_by_class.values())

    return KpiReport(
        mode=mode,
        fleet_size=fleet,
        days=days,
        demand=demand,
        served=served,
        unserved=unserved,
        served_pct=_pct(served, demand),
        unserved_pct=_pct(unserved, demand),
        unserved_by_reason_pct={r: _pct(reasons[r], demand) for r in UNSERVED_REASONS},
        avg_trip_min=_mean_min(
            t["walk_origin_ms"] + t["wait_ms"] + t["ride_ms"] + t["walk_destination_ms"] for t in served_trips
        ),
        avg_walk_origin_min=_mean_min(t["walk_origin_ms"] for t in served_trips),
        avg_wait_min=_mean_min(t["wait_ms"] for t in served_trips),
        avg_ride_min=_mean_min(t["ride_ms"] for t in served_trips),
        avg_walk_destination_min=_mean_min(t["walk_destination_ms"] for t in served_trips),
        avg_wait_or_walk_min=_mean_min(wait_or_walk),
        wait_or_walk_over_10_pct=_pct(sum(w > 10 * MINUTE_MS for w in wait_or_walk), served) if served else None,
        wait_or_walk_over_15_pct=_pct(sum(w > 15 * MINUTE_MS for w in wait_or_walk), served) if served else None,
        bikes_used_pct=_pct(len(bikes_used), fleet),
        trips_per_bike_day=served / fleet / days if fleet and days else 0.0,
        rebalanced_bikes=counts["rebalanced"],
        total_charges=counts["charges"],
        charges_per_day=counts["charges"] / days if days else 0.0,
        stranded_bikes=counts["stranded"],
        retry_limit_unserved=reasons["RetryLimit"],
        vkt_total_km=total_vkt / 1e6,
        vkt_per_bike_km=total_vkt / 1e6 / fleet if fleet else 0.0,
        vkt_split_pct={c: _pct(vkt_mm[c], total_vkt) for c in MOVE_CLASSES},
        time_split_pct={c: _pct(time_by_class[c], total_time) for c in TIME_CLASSES},
    )
