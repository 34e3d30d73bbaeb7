"""
Station-based life cycle.

Bikes and docks are not reserved while the user walks or rides toward a
station, so arrivals can find the station emptied or filled in the
meantime and the search starts over from there.
"""
import logging
from typing import Optional

from engine.events import Event, EventKind

from .base import BaseMode
from .entities import BikeState, MoveClass, Station, UnservedReason, UserActivity, UserRequest


logger = logging.getLogger(__name__)


class StationBasedMode(BaseMode):

    def register_handlers(self):
        self.sim.register(EventKind.USER_REACHES_STATION, self._on_reaches_station)
        self.sim.register(EventKind.USER_REACHES_DOCK, self._on_reaches_dock)
        self.sim.register(EventKind.USER_ARRIVES_DESTINATION, self._on_arrives_destination)

    def _beta_draw(self, req: UserRequest) -> bool:
        beta = self.world.config.beta
        if beta <= 0:
            return False
        return bool(self.world.rng_for(req.agent).random() < beta)

    def _donor_for(self, receiver: Station) -> Optional[Station]:
        floor = self.world.config.min_bikes_docks
        for station in self.world.stations_by_distance(receiver.location):
            if station.id != receiver.id and station.docked > floor:
                return station
        return None

    def _dock_target_for(self, full: Station) -> Optional[Station]:
        floor = self.world.config.min_bikes_docks
        for station in self.world.stations_by_distance(full.location):
            if station.id != full.id and station.free_docks > floor:
                return station
        return None

    def user_process(self, req: UserRequest):
        req.attempts += 1
        world = self.world
        walkable = world.stations_within(req.location, world.config.walk_radius)
        if not walkable:
            world.unserve(req, UnservedReason.NO_WALKABLE_STATIONS)
            return

        with_bikes = [s for s in walkable if s.docked > 0]
        if not with_bikes and self._beta_draw(req):
            receiver = walkable[0]
            donor = self._donor_for(receiver)
            if donor is not None:
                world.relocate(donor, receiver, "bike")
                with_bikes = [receiver]
        if not with_bikes:
            world.unserve(req, UnservedReason.NO_BIKES)
            return

        station = with_bikes[0]
        route = world.router.route(req.node, station.node)
        seconds = world.walk_seconds(route.length_mm)
        req.walk_origin_ms += world.elapsed_ms(seconds)
        world.user_activity(req, UserActivity.WALKING)
        self.sim.schedule(seconds, req.agent, EventKind.USER_REACHES_STATION,
                          {"user": req.id, "station": station.id})

    def _on_reaches_station(self, event: Event):
        req = self._user(event)
        world = self.world
        station = world.stations[event.payload["station"]]
        req.location, req.node = station.location, station.node
        if station.docked == 0:
            if self.retry_or_give_up(req):
                self.user_process(req)
            return

        bike = world.undock(station)
        world.set_bike_state(bike, BikeState.IN_USE)
        req.bike_id = bike.id
        req.attempts = 0
        self._ride_to_dock(req, anywhere=False)

    def _choose_dock(self, req: UserRequest, anywhere: bool) -> Station:
        world = self.world
        if not anywhere:
            walkable = world.stations_within(req.destination, world.config.walk_radius)
            with_docks = [s for s in walkable if s.free_docks > 0]
            if with_docks:
                return with_docks[0]
            if walkable and self._beta_draw(req):
                full = walkable[0]
                target = self._dock_target_for(full)
                if target is not None:
                    world.relocate(full, target, "dock")
                    return full
        for station in world.stations_by_distance(req.destination):
            if station.free_docks > 0:
                return station
        raise RuntimeError("No free dock anywhere in the system")

    def _ride_to_dock(self, req: UserRequest, anywhere: bool):
        world = self.world
        req.attempts += 1
        station = self._choose_dock(req, anywhere)
        route = world.router.route(req.node, station.node)
        seconds = world.ride_seconds(route.length_mm)
        req.ride_ms += world.elapsed_ms(seconds)
        world.user_activity(req, UserActivity.RIDING)
        self.sim.schedule(seconds, req.agent, EventKind.USER_REACHES_DOCK,
                          {"user": req.id, "station": station.id, "mm": route.length_mm})

    def _on_reaches_dock(self, event: Event):
        req = self._user(event)
        world = self.world
        bike = world.bikes[req.bike_id]
        station = world.stations[event.payload["station"]]
        world.record_move(bike, event.payload["mm"], MoveClass.IN_USE)
        world.place_bike(bike, station.node)
        req.location, req.node = station.location, station.node

        if station.free_docks == 0:
            # The user keeps the bike; past the attempt cap any free dock will do.
            anywhere = req.attempts >= world.config.max_attempts
            if anywhere:
                logger.warning(f"User {req.id} hit the dock search cap; docking at the closest free station")
            self._ride_to_dock(req, anywhere=anywhere)
            return

        world.dock(bike, station)
        world.set_bike_state(bike, BikeState.AVAILABLE)
        route = world.router.route(station.node, req.destination_node)
        seconds = world.walk_seconds(route.length_mm)
        req.walk_destination_ms += world.elapsed_ms(seconds)
        world.user_activity(req, UserActivity.WALKING_DESTINATION)
        self.sim.schedule(seconds, req.agent, EventKind.USER_ARRIVES_DESTINATION, {"user": req.id})

    def _on_arrives_destination(self, event: Event):
        self.world.serve(self._user(event))
