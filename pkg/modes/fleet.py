import logging
import math
from typing import List, Sequence

from .config import FleetConfigError, Mode
from .entities import Bike, BikeState


logger = logging.getLogger(__name__)


def allocate_by_capacity(capacities: Sequence[int], fleet_size: int) -> List[int]:
    """
    Largest-remainder split of `fleet_size` proportional to `capacities`.

    Equal remainders favour the earlier station.
    """
    total = sum(capacities)
    if fleet_size == 0 or total == 0:
        return [0] * len(capacities)
    quotas = [fleet_size * c / total for c in capacities]
    counts = [math.floor(q) for q in quotas]
    leftover = fleet_size - sum(counts)
    order = sorted(range(len(capacities)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def init_fleet(world) -> List[Bike]:
    """Place the configured fleet at the stations of `world`, proportional to capacity."""
    config = world.config
    stations = list(world.stations.values())
    capacity = sum(s.capacity for s in stations)
    if world.mode is Mode.STATION and config.fleet_size > capacity - config.min_bikes_docks:
        raise FleetConfigError(
            f"Fleet of {config.fleet_size} bikes does not fit {capacity} docks "
            f"while keeping {config.min_bikes_docks} free"
        )
    if config.fleet_size and not stations:
        raise FleetConfigError("Cannot place a fleet without stations")

    counts = allocate_by_capacity([s.capacity for s in stations], config.fleet_size)
    initial = {
        Mode.STATION: BikeState.AVAILABLE,
        Mode.DOCKLESS: BikeState.AVAILABLE,
        Mode.AUTONOMOUS: BikeState.IDLE,
    }[world.mode]

    bikes = []
    for station, count in zip(stations, counts):
        for _ in range(count):
            bike = Bike(id=len(bikes), node=station.node, state=initial, soc=1.0)
            if world.mode is Mode.STATION:
                station.bikes.append(bike.id)
                bike.station_id = station.id
            bikes.append(bike)

    world.add_bikes(bikes)
    logger.info(f"Placed {len(bikes)} {world.mode.value} bikes over {len(stations)} stations")
    return bikes
