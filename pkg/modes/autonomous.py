"""
Autonomous life cycle.

Bikes drive themselves to users, to chargers and (under predictive
rebalancing) between cells. Every self-driven leg is checked against the
remaining range; a leg the battery cannot finish strands the bike at the
last node it can reach.
"""
import logging
from bisect import bisect_right
from typing import Dict, List, Optional

import numpy as np

from engine.events import Event, EventKind
from geo.network import haversine_many
from routing.router import travel_time

from .base import BaseMode
from .battery import charge_duration_s
from .config import RebalancingScenario
from .entities import Bike, BikeState, MoveClass, Motion, UnservedReason, UserActivity, UserRequest


logger = logging.getLogger(__name__)


class AutonomousMode(BaseMode):

    def register_handlers(self):
        self.sim.register(EventKind.BIKE_ARRIVES_AT_USER, self._on_bike_at_user)
        self.sim.register(EventKind.BIKE_DROPPED, self._on_bike_dropped)
        self.sim.register(EventKind.CHARGER_REACHED, self._on_charger_reached)
        self.sim.register(EventKind.CHARGE_COMPLETE, self._on_charge_complete)
        self.sim.register(EventKind.BIKE_STRANDED, self._on_stranded)
        self.sim.register(EventKind.REBALANCE_ARRIVED, self._on_rebalance_arrived)

    @property
    def battery(self):
        return self.world.config.battery

    # movement

    def _cumulative(self, nodes) -> List[int]:
        cum = [0]
        for a, b in zip(nodes, nodes[1:]):
            cum.append(cum[-1] + self.world.net.edge_length_mm(a, b))
        return cum

    def _reach(self, bike: Bike, cum: List[int]) -> int:
        """Index of the last route node the battery can carry `bike` to."""
        range_mm = bike.soc * self.battery.autonomy_mm
        if cum[-1] <= range_mm:
            return len(cum) - 1
        return max(0, bisect_right(cum, range_mm) - 1)

    def _drive(self, bike: Bike, target: int, cls: MoveClass, kind: EventKind, state: BikeState,
               payload: Optional[Dict] = None, speed: Optional[float] = None) -> float:
        """Send `bike` toward `target`; returns the travel time in seconds of the scheduled leg."""
        world = self.world
        speed = speed or world.config.autonomous_speed
        route = world.router.route(bike.node, target)
        cum = self._cumulative(route.nodes)
        reach = self._reach(bike, cum)
        stranded = reach < len(cum) - 1

        world.set_bike_state(bike, state)
        seconds = travel_time(cum[reach] / 1000.0, speed)
        motion = Motion(route.nodes, cum, world.now, speed, cls)
        body = dict(payload or {}, bike=bike.id, reach=reach)
        motion.handle = self.sim.schedule(seconds, bike.agent,
                                          EventKind.BIKE_STRANDED if stranded else kind, body)
        bike.motion = motion
        return seconds

    def _finish(self, bike: Bike, reach: int):
        motion = bike.motion
        bike.motion = None
        self.world.record_move(bike, motion.cum_mm[reach], motion.cls)
        self.world.place_bike(bike, motion.nodes[reach])

    def _current_node(self, bike: Bike) -> int:
        if bike.motion is None:
            return bike.node
        return bike.motion.nodes[bike.motion.reach_at(self.world.now)]

    def _preempt(self, bike: Bike):
        """
        Stop a rebalancing drive. The distance covered so far, part of the
        current edge included, is charged; the bike resumes from the last
        node passed.
        """
        world = self.world
        motion = bike.motion
        motion.handle.cancel()
        bike.motion = None
        world.record_move(bike, motion.travelled_mm(world.now), motion.cls)
        world.place_bike(bike, motion.nodes[motion.reach_at(world.now)])

    # assignment

    def eligible_mask(self, allow_rebalancing: bool) -> np.ndarray:
        world = self.world
        states = [BikeState.IDLE]
        if allow_rebalancing:
            states.append(BikeState.REBALANCING)
        return world.state_mask(*states) & (world.bike_soc >= self.battery.min_level)

    def _nearest_by_road(self, node: int, ids) -> Optional[Bike]:
        world = self.world
        by_node: Dict[int, List[int]] = {}
        for bike_id in ids:
            by_node.setdefault(self._current_node(world.bikes[bike_id]), []).append(bike_id)
        found = world.router.nearest_of(node, by_node, towards=True)
        if found is None:
            return None
        _, nodes = found
        return world.bikes[min(min(by_node[n]) for n in nodes)]

    def assign_bike(self, req: UserRequest) -> Optional[Bike]:
        """
        Closest eligible bike by road within the straight-line pickup radius.

        Eligible: Idle (or Rebalancing when preemption is on) with charge at
        least the minimum level. Ties go to the smaller bike id. A chosen
        rebalancing bike has its drive cut short.
        """
        world = self.world
        mask = self.eligible_mask(world.config.preempt_rebalancing)
        ids = np.flatnonzero(mask)
        if ids.size == 0:
            return None
        lons = world.bike_lon[ids].copy()
        lats = world.bike_lat[ids].copy()
        for k, bike_id in enumerate(ids.tolist()):
            bike = world.bikes[bike_id]
            if bike.motion is not None:
                lons[k], lats[k] = world.net.coords[self._current_node(bike)]
        dists = haversine_many(req.location.lon, req.location.lat, lons, lats)
        in_radius = ids[dists <= world.config.autonomous_radius].tolist()
        if not in_radius:
            return None
        bike = self._nearest_by_road(req.node, in_radius)
        if bike is not None and bike.state is BikeState.REBALANCING:
            self._preempt(bike)
        return bike

    # users

    def user_process(self, req: UserRequest):
        world = self.world
        req.attempts += 1
        if world.config.rebalancing_scenario is RebalancingScenario.IDEAL:
            self.ideal_rebalance_serve(req)
            return
        if req.attempts == 1:
            world.user_activity(req, UserActivity.WAITING)
        bike = self.assign_bike(req)
        if bike is None:
            world.unserve(req, UnservedReason.NO_BIKES)
            return
        bike.user_id = req.id
        req.bike_id = bike.id
        self._drive(bike, req.node, MoveClass.PICKUP, EventKind.BIKE_ARRIVES_AT_USER,
                    BikeState.DRIVING_TO_USER, {"user": req.id})

    def _start_ride(self, req: UserRequest, bike: Bike):
        world = self.world
        world.user_activity(req, UserActivity.RIDING)
        seconds = self._drive(bike, req.destination_node, MoveClass.IN_USE, EventKind.BIKE_DROPPED,
                              BikeState.IN_USE, {"user": req.id},
                              speed=world.config.riding_speed)
        req.ride_ms += world.elapsed_ms(seconds)

    def ideal_rebalance_serve(self, req: UserRequest):
        """The nearest eligible bike anywhere appears at the user at once; its drive counts as in-use."""
        world = self.world
        ids = np.flatnonzero(self.eligible_mask(allow_rebalancing=False)).tolist()
        bike = self._nearest_by_road(req.node, ids) if ids else None
        if bike is None:
            world.unserve(req, UnservedReason.NO_BIKES)
            return
        route = world.router.route(bike.node, req.node)
        cum = self._cumulative(route.nodes)
        reach = self._reach(bike, cum)
        world.record_move(bike, cum[reach], MoveClass.IN_USE)
        world.place_bike(bike, route.nodes[reach])
        if reach < len(cum) - 1:
            self._strand(bike, req.id)
            return
        bike.user_id = req.id
        req.bike_id = bike.id
        req.wait_ms = 0
        self._start_ride(req, bike)

    def _on_bike_at_user(self, event: Event):
        req = self._user(event)
        bike = self.world.bikes[event.payload["bike"]]
        self._finish(bike, event.payload["reach"])
        req.wait_ms = self.world.now - req.departure
        self._start_ride(req, bike)

    def _on_bike_dropped(self, event: Event):
        req = self._user(event)
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        self._finish(bike, event.payload["reach"])
        bike.user_id = None
        world.set_bike_state(bike, BikeState.IDLE)
        world.serve(req)
        self.battery_check(bike)

    # battery

    def battery_check(self, bike: Bike):
        """Send an idle bike below the minimum level to the closest charging station."""
        world = self.world
        if bike.state is not BikeState.IDLE or bike.soc >= self.battery.min_level:
            return
        found = world.router.nearest_of(bike.node, world.station_nodes)
        if found is None:
            logger.warning(f"Bike {bike.id} at node {bike.node} cannot reach any charging station")
            return
        _, nodes = found
        node = min(nodes, key=lambda n: min(world.station_nodes[n]))
        self._drive(bike, node, MoveClass.CHARGE, EventKind.CHARGER_REACHED, BikeState.DRIVING_TO_CHARGER,
                    {"station": min(world.station_nodes[node])})

    def _on_charger_reached(self, event: Event):
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        self._finish(bike, event.payload["reach"])
        world.set_bike_state(bike, BikeState.CHARGING)
        world.counters["charges"] += 1
        world.emit(bike.agent, "charge_start", {"soc": bike.soc, "station": event.payload["station"]})
        self.sim.schedule(charge_duration_s(bike.soc, self.battery), bike.agent, EventKind.CHARGE_COMPLETE,
                          {"bike": bike.id})

    def _on_charge_complete(self, event: Event):
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        world.emit(bike.agent, "charge_end", {"soc_before": bike.soc})
        world.set_soc(bike, 1.0)
        world.set_bike_state(bike, BikeState.IDLE)

    def _on_stranded(self, event: Event):
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        self._finish(bike, event.payload["reach"])
        self._strand(bike, event.payload.get("user"))

    def _strand(self, bike: Bike, user_id: Optional[int]):
        """Park an empty bike for good; a user it was fetching or carrying tries again or gives up."""
        world = self.world
        world.set_bike_state(bike, BikeState.STRANDED)
        world.counters["stranded_bikes"] += 1
        world.emit(bike.agent, "bike_stranded", {"node": bike.node, "soc": bike.soc})
        logger.warning(f"Bike {bike.id} ran out of battery at node {bike.node}")

        if user_id is None:
            return
        req = world.requests[user_id]
        bike.user_id = None
        req.bike_id = None
        if self.retry_or_give_up(req):
            if req.transitions and req.transitions[-1][1] == UserActivity.RIDING.value:
                world.user_activity(req, UserActivity.WAITING)
            self.user_process(req)

    # rebalancing

    def dispatch_rebalancing(self, bike: Bike, target: int) -> bool:
        if bike.node == target:
            return False
        self._drive(bike, target, MoveClass.REBALANCING, EventKind.REBALANCE_ARRIVED, BikeState.REBALANCING)
        return True

    def _on_rebalance_arrived(self, event: Event):
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        self._finish(bike, event.payload["reach"])
        world.set_bike_state(bike, BikeState.IDLE)
        self.battery_check(bike)
