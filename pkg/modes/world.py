"""
Shared state of one simulation run.

Every mutation of agent state goes through a World method so it is
logged and the vectorised bike lookups stay in step with the Bike records.
"""
import logging
from collections import Counter
from typing import Dict, Iterable, List, Optional

import numpy as np

from engine.events import Simulator, to_ms
from engine.rng import agent_rng
from geo.network import Location, PointIndex, RoadNetwork, haversine_many
from metrics.eventlog import EventLog
from routing.router import Router, travel_time

from .battery import discharge
from .config import Mode, ModeConfig
from .entities import (
    ALLOWED_TRANSITIONS, STATE_CODES, Bike, BikeState, MoveClass, Outcome, Station, UnservedReason,
    UserActivity, UserRequest,
)


logger = logging.getLogger(__name__)


class World:
    def __init__(self, mode: Mode, config: ModeConfig, net: RoadNetwork, router: Router,
                 stations: Iterable[Station], log: EventLog, seed: int, sim: Optional[Simulator] = None):
        self.mode = mode
        self.config = config
        self.net = net
        self.router = router
        self.log = log
        self.seed = seed
        self.sim = sim or Simulator()
        self.stations: Dict[int, Station] = {s.id: s for s in sorted(stations, key=lambda s: s.id)}
        ids = list(self.stations)
        self.station_index = PointIndex(
            ids, [self.stations[i].location.lon for i in ids], [self.stations[i].location.lat for i in ids]
        )
        self.station_nodes: Dict[int, List[int]] = {}
        for station in self.stations.values():
            self.station_nodes.setdefault(station.node, []).append(station.id)

        self.bikes: List[Bike] = []
        self.bike_lon = np.zeros(0)
        self.bike_lat = np.zeros(0)
        self.bike_state = np.zeros(0, dtype=np.int8)
        self.bike_soc = np.zeros(0)
        self.requests: Dict[int, UserRequest] = {}
        self.in_flight = 0
        self.counters: Counter = Counter()
        self._rngs = {}

    @property
    def now(self) -> int:
        return self.sim.now

    @property
    def autonomous(self) -> bool:
        return self.mode is Mode.AUTONOMOUS

    def emit(self, agent: str, transition: str, payload=None):
        self.log.record(self.sim.now, agent, transition, payload)

    def rng_for(self, agent: str) -> np.random.Generator:
        if agent not in self._rngs:
            self._rngs[agent] = agent_rng(self.seed, agent)
        return self._rngs[agent]

    # travel times in seconds over integer millimetre lengths

    def walk_seconds(self, mm: int) -> float:
        return travel_time(mm / 1000.0, self.config.walking_speed)

    def ride_seconds(self, mm: int) -> float:
        return travel_time(mm / 1000.0, self.config.riding_speed)

    def drive_seconds(self, mm: int) -> float:
        return travel_time(mm / 1000.0, self.config.autonomous_speed)

    # bikes

    def add_bikes(self, bikes: List[Bike]):
        self.bikes = bikes
        self.bike_lon = np.array([self.net.coords[b.node][0] for b in bikes], dtype=float)
        self.bike_lat = np.array([self.net.coords[b.node][1] for b in bikes], dtype=float)
        self.bike_state = np.array([STATE_CODES[b.state] for b in bikes], dtype=np.int8)
        self.bike_soc = np.array([b.soc for b in bikes], dtype=float)
        for bike in bikes:
            self.emit(bike.agent, "bike_state", {"state": bike.state.value, "node": bike.node, "soc": bike.soc})
        for station in self.stations.values():
            self.emit(f"s:{station.id}", "station_occupancy", {"docked": station.docked, "capacity": station.capacity})

    def set_bike_state(self, bike: Bike, state: BikeState):
        if state not in ALLOWED_TRANSITIONS[bike.state]:
            raise RuntimeError(f"Illegal transition {bike.state.value} -> {state.value} for bike {bike.id}")
        bike.state = state
        self.bike_state[bike.id] = STATE_CODES[state]
        self.emit(bike.agent, "bike_state", {"state": state.value, "node": bike.node})

    def place_bike(self, bike: Bike, node: int):
        bike.node = node
        lon, lat = self.net.coords[node]
        self.bike_lon[bike.id] = lon
        self.bike_lat[bike.id] = lat

    def record_move(self, bike: Bike, mm: int, cls: MoveClass):
        """Account a finished movement against the bike's odometer and battery."""
        bike.odometer[cls] += mm
        soc_drop = 0.0
        if self.autonomous:
            before = bike.soc
            bike.soc = discharge(before, mm / 1000.0, self.config.battery)
            self.bike_soc[bike.id] = bike.soc
            soc_drop = before - bike.soc
        self.emit(bike.agent, "bike_moved", {"cls": cls.value, "mm": int(mm), "soc_drop": soc_drop})

    def bikes_within(self, p: Location, radius_m: float, mask: np.ndarray) -> List[int]:
        """Ids of masked bikes within straight-line radius of p, sorted by (distance, id)."""
        ids = np.flatnonzero(mask)
        if ids.size == 0:
            return []
        dists = haversine_many(p.lon, p.lat, self.bike_lon[ids], self.bike_lat[ids])
        keep = dists <= radius_m
        ranked = sorted(zip(dists[keep].tolist(), ids[keep].tolist()))
        return [bike_id for _, bike_id in ranked]

    def state_mask(self, *states: BikeState) -> np.ndarray:
        return np.isin(self.bike_state, [STATE_CODES[s] for s in states])

    def set_soc(self, bike: Bike, soc: float):
        bike.soc = soc
        self.bike_soc[bike.id] = soc

    # stations

    def stations_within(self, p: Location, radius_m: float) -> List[Station]:
        return [self.stations[i] for _, i in self.station_index.within(p, radius_m)]

    def stations_by_distance(self, p: Location) -> List[Station]:
        return [self.stations[i] for _, i in self.station_index.by_distance(p)]

    def _occupancy(self, station: Station):
        self.emit(f"s:{station.id}", "station_occupancy", {"docked": station.docked, "capacity": station.capacity})

    def undock(self, station: Station) -> Bike:
        if not station.bikes:
            raise RuntimeError(f"Station {station.id} has no bike to release")
        bike = self.bikes[station.bikes.pop(0)]
        bike.station_id = None
        self._occupancy(station)
        return bike

    def dock(self, bike: Bike, station: Station):
        if station.free_docks <= 0:
            raise RuntimeError(f"Station {station.id} is full ({station.capacity} docks)")
        station.bikes.append(bike.id)
        station.bikes.sort()
        bike.station_id = station.id
        self.place_bike(bike, station.node)
        self._occupancy(station)

    def relocate(self, donor: Station, receiver: Station, kind: str):
        """Instantaneous one-bike transfer between stations."""
        bike = self.undock(donor)
        self.dock(bike, receiver)
        self.counters["rebalanced_bikes"] += 1
        self.emit(f"s:{receiver.id}", "station_rebalance",
                  {"from": donor.id, "to": receiver.id, "bike": bike.id, "kind": kind})

    # users

    def add_request(self, req: UserRequest):
        self.requests[req.id] = req
        self.in_flight += 1

    def user_activity(self, req: UserRequest, activity: UserActivity):
        req.transitions.append((self.now, activity.value))
        self.emit(req.agent, "user_state", {"activity": activity.value})

    def serve(self, req: UserRequest):
        req.outcome = Outcome.SERVED
        self.in_flight -= 1
        self.emit(req.agent, "user_served", {
            "bike": req.bike_id,
            "departure_ms": req.departure,
            "walk_origin_ms": req.walk_origin_ms,
            "wait_ms": req.wait_ms,
            "ride_ms": req.ride_ms,
            "walk_destination_ms": req.walk_destination_ms,
            "attempts": req.attempts,
        })

    def unserve(self, req: UserRequest, reason: UnservedReason):
        req.outcome = Outcome.UNSERVED
        req.reason = reason
        self.in_flight -= 1
        if reason is UnservedReason.RETRY_LIMIT:
            logger.warning(f"User {req.id} gave up after {req.attempts} attempts")
        self.emit(req.agent, "user_unserved", {
            "reason": reason.value, "departure_ms": req.departure, "attempts": req.attempts,
        })

    def elapsed_ms(self, seconds: float) -> int:
        return to_ms(seconds)
