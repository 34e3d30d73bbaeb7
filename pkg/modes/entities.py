"""Agents and infrastructure records mutated by the mode state machines."""
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from engine.events import EventHandle
from geo.network import Location


class BikeState(str, Enum):
    AVAILABLE = "Available"
    IN_USE = "InUse"
    IDLE = "Idle"
    DRIVING_TO_USER = "DrivingToUser"
    DRIVING_TO_CHARGER = "DrivingToCharger"
    CHARGING = "Charging"
    REBALANCING = "Rebalancing"
    STRANDED = "Stranded"


S = BikeState
ALLOWED_TRANSITIONS = {
    S.AVAILABLE: {S.IN_USE},
    S.IN_USE: {S.AVAILABLE, S.IDLE},
    S.IDLE: {S.DRIVING_TO_USER, S.DRIVING_TO_CHARGER, S.REBALANCING, S.IN_USE},
    S.DRIVING_TO_USER: {S.IN_USE, S.STRANDED},
    S.DRIVING_TO_CHARGER: {S.CHARGING, S.STRANDED},
    S.CHARGING: {S.IDLE},
    S.REBALANCING: {S.IDLE, S.DRIVING_TO_USER, S.STRANDED},
    S.STRANDED: set(),
}

STATE_CODES = {state: code for code, state in enumerate(BikeState)}


class MoveClass(str, Enum):
    IN_USE = "in_use"
    PICKUP = "pickup"
    REBALANCING = "rebalancing"
    CHARGE = "charge"


class Outcome(str, Enum):
    SERVED = "Served"
    UNSERVED = "Unserved"


class UnservedReason(str, Enum):
    NO_WALKABLE_STATIONS = "NoWalkableStations"
    NO_BIKES = "NoBikes"
    RETRY_LIMIT = "RetryLimit"


class UserActivity(str, Enum):
    WALKING = "walking"
    WAITING = "waiting"
    RIDING = "riding"
    WALKING_DESTINATION = "walking_destination"


@dataclass
class Station:
    id: int
    location: Location
    node: int
    capacity: int
    bikes: List[int] = field(default_factory=list)

    @property
    def docked(self) -> int:
        return len(self.bikes)

    @property
    def free_docks(self) -> int:
        return self.capacity - len(self.bikes)


@dataclass
class Motion:
    """A drive along a routed node path, started at `depart_ms`."""

    nodes: Tuple[int, ...]
    cum_mm: List[int]
    depart_ms: int
    speed_kmh: float
    cls: MoveClass
    handle: Optional[EventHandle] = None

    def travelled_mm(self, now_ms: int) -> int:
        travelled = (now_ms - self.depart_ms) * self.speed_kmh * 1000.0 / 3600.0
        return min(self.cum_mm[-1], int(round(travelled)))

    def reach_at(self, now_ms: int) -> int:
        """Index of the last node passed by `now_ms`."""
        travelled = (now_ms - self.depart_ms) * self.speed_kmh * 1000.0 / 3600.0
        return max(0, bisect_right(self.cum_mm, travelled) - 1)


@dataclass
class Bike:
    id: int
    node: int
    state: BikeState
    soc: float = 1.0
    station_id: Optional[int] = None
    odometer: Dict[MoveClass, int] = field(default_factory=lambda: {c: 0 for c in MoveClass})
    motion: Optional[Motion] = None
    user_id: Optional[int] = None

    @property
    def agent(self) -> str:
        return f"b:{self.id}"


@dataclass
class UserRequest:
    id: int
    origin: Location
    destination: Location
    departure: int
    origin_node: int
    destination_node: int
    location: Optional[Location] = None
    node: Optional[int] = None
    outcome: Optional[Outcome] = None
    reason: Optional[UnservedReason] = None
    walk_origin_ms: int = 0
    wait_ms: int = 0
    ride_ms: int = 0
    walk_destination_ms: int = 0
    attempts: int = 0
    bike_id: Optional[int] = None
    transitions: List[Tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.location is None:
            self.location = self.origin
        if self.node is None:
            self.node = self.origin_node

    @property
    def agent(self) -> str:
        return f"u:{self.id}"
