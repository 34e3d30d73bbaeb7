from typing import Callable, Iterable, List

from engine.events import Event, EventKind

from .entities import UnservedReason, UserRequest
from .world import World


class BaseMode:
    """Common plumbing: turns request departures into UserArrives events."""

    def __init__(self, world: World):
        self.world = world
        self.sim = world.sim
        self.request_listeners: List[Callable[[UserRequest], None]] = []
        self.sim.register(EventKind.USER_ARRIVES, self._on_user_arrives)
        self.register_handlers()

    def register_handlers(self):
        raise NotImplementedError

    def start(self, requests: Iterable[UserRequest]):
        for req in requests:
            self.world.add_request(req)
            self.sim.schedule_at(req.departure, req.agent, EventKind.USER_ARRIVES, {"user": req.id})

    def _user(self, event: Event) -> UserRequest:
        return self.world.requests[event.payload["user"]]

    def _on_user_arrives(self, event: Event):
        req = self._user(event)
        for listener in self.request_listeners:
            listener(req)
        self.user_process(req)

    def user_process(self, req: UserRequest):
        raise NotImplementedError

    def retry_or_give_up(self, req: UserRequest) -> bool:
        """Count a failed attempt; True when the user may try again."""
        if req.attempts >= self.world.config.max_attempts:
            self.world.unserve(req, UnservedReason.RETRY_LIMIT)
            return False
        return True
