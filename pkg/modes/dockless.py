from engine.events import Event, EventKind

from .base import BaseMode
from .entities import BikeState, MoveClass, UnservedReason, UserActivity, UserRequest


class DocklessMode(BaseMode):
    """Free-floating bikes: walk to the nearest one, ride to the exact destination."""

    def register_handlers(self):
        self.sim.register(EventKind.USER_REACHES_BIKE, self._on_reaches_bike)
        self.sim.register(EventKind.BIKE_DROPPED, self._on_bike_dropped)

    def user_process(self, req: UserRequest):
        world = self.world
        req.attempts += 1
        nearby = world.bikes_within(req.location, world.config.walk_radius,
                                    world.state_mask(BikeState.AVAILABLE))
        if not nearby:
            world.unserve(req, UnservedReason.NO_BIKES)
            return

        bike = world.bikes[nearby[0]]
        route = world.router.route(req.node, bike.node)
        seconds = world.walk_seconds(route.length_mm)
        req.walk_origin_ms += world.elapsed_ms(seconds)
        world.user_activity(req, UserActivity.WALKING)
        self.sim.schedule(seconds, req.agent, EventKind.USER_REACHES_BIKE,
                          {"user": req.id, "bike": bike.id, "node": bike.node})

    def _on_reaches_bike(self, event: Event):
        req = self._user(event)
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        node = event.payload["node"]
        req.node = node
        req.location = world.net.location(node)
        if bike.state is not BikeState.AVAILABLE or bike.node != node:
            if self.retry_or_give_up(req):
                self.user_process(req)
            return

        world.set_bike_state(bike, BikeState.IN_USE)
        req.bike_id = bike.id
        route = world.router.route(node, req.destination_node)
        seconds = world.ride_seconds(route.length_mm)
        req.ride_ms += world.elapsed_ms(seconds)
        world.user_activity(req, UserActivity.RIDING)
        self.sim.schedule(seconds, req.agent, EventKind.BIKE_DROPPED,
                          {"user": req.id, "bike": bike.id, "mm": route.length_mm})

    def _on_bike_dropped(self, event: Event):
        req = self._user(event)
        world = self.world
        bike = world.bikes[event.payload["bike"]]
        world.record_move(bike, event.payload["mm"], MoveClass.IN_USE)
        world.place_bike(bike, req.destination_node)
        world.set_bike_state(bike, BikeState.AVAILABLE)
        world.serve(req)
