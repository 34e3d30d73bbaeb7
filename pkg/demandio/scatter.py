"""
Turning station-to-station trips into point-to-point requests.

Origins and destinations are displaced from their station by a uniform draw
over a disk, then snapped to the nearest road node.
"""
import logging
import math
from datetime import datetime
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np

from engine.events import to_ms
from geo.network import EARTH_RADIUS_M, Location, RoadNetwork
from modes.entities import UserRequest

from .trips import TripRecord


logger = logging.getLogger(__name__)

SNAP_WARNING_M = 500.0


class Scatterer(Protocol):
    def displace(self, origin: Location, rng: np.random.Generator) -> Location:
        pass


class DiskScatterer:
    """Uniform over the disk of `radius` metres: r = R sqrt(u), theta = 2 pi v."""

    def __init__(self, radius: float):
        if radius < 0:
            raise ValueError(f"Scatter radius must be non-negative, got {radius}")
        self.radius = radius

    def displace(self, origin: Location, rng: np.random.Generator) -> Location:
        u, v = rng.random(2)
        if self.radius == 0:
            return origin
        r = self.radius * math.sqrt(u)
        theta = 2.0 * math.pi * v
        dy = r * math.sin(theta)
        dx = r * math.cos(theta)
        lat = origin.lat + math.degrees(dy / EARTH_RADIUS_M)
        lon = origin.lon + math.degrees(dx / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
        return Location(lon, lat)


def get_scatterer(name: str = "disk", radius: float = 300.0) -> Scatterer:
    """Factory function to grab the displacement model for request origins and destinations."""
    if name == "disk":
        return DiskScatterer(radius)
    raise ValueError(f"Unknown scatterer {name!r}")


class Snapper:
    def __init__(self, net: RoadNetwork):
        self.index = net.node_index
        self.outliers = 0

    def __call__(self, p: Location) -> int:
        dist, node = self.index.nearest(p)
        if dist > SNAP_WARNING_M:
            self.outliers += 1
            logger.debug(f"Point ({p.lon:.6f}, {p.lat:.6f}) snapped {dist:.0f} m away to node {node}")
        return node


def departure_ms(start_time: datetime, t0: datetime) -> int:
    return to_ms((start_time - t0).total_seconds())


def scatter_requests(trips: Sequence[TripRecord], rng: np.random.Generator, radius: float,
                     net: RoadNetwork, t0: datetime, scatterer: Optional[Scatterer] = None) -> List[UserRequest]:
    """One request per trip, in trip order; deterministic for a given generator state."""
    scatterer = scatterer or DiskScatterer(radius)
    snap = Snapper(net)
    requests = []
    for uid, trip in enumerate(trips):
        origin = scatterer.displace(trip.start_station[1], rng)
        destination = scatterer.displace(trip.end_station[1], rng)
        requests.append(UserRequest(
            id=uid,
            origin=origin,
            destination=destination,
            departure=departure_ms(trip.start_time, t0),
            origin_node=snap(origin),
            destination_node=snap(destination),
        ))
    if snap.outliers:
        logger.warning(f"{snap.outliers} request endpoints lie more than {SNAP_WARNING_M:.0f} m from any road node")
    logger.info(f"Scattered {len(requests)} requests within {radius:.0f} m of their stations")
    return requests


def snap_points(net: RoadNetwork, points: Sequence[Location]) -> Tuple[List[int], int]:
    snap = Snapper(net)
    return [snap(p) for p in points], snap.outliers
