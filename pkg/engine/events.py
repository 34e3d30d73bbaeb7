"""
Discrete-event kernel.

Time is an integer count of milliseconds since the simulation epoch.
Events are dispatched in (time, seq) order where seq is the insertion
counter, so equal-time events fire in the order they were scheduled.
"""
import heapq
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional


logger = logging.getLogger(__name__)

MS_PER_SECOND = 1000


def to_ms(seconds: float) -> int:
    """Seconds to fixed-point milliseconds, rounding half up."""
    return int(math.floor(seconds * MS_PER_SECOND + 0.5))


class EventKind(str, Enum):
    USER_ARRIVES = "UserArrives"
    USER_REACHES_STATION = "UserReachesStation"
    USER_REACHES_DOCK = "UserReachesDock"
    USER_REACHES_BIKE = "UserReachesBike"
    USER_ARRIVES_DESTINATION = "UserArrivesDestination"
    BIKE_UNLOCKED = "BikeUnlocked"
    BIKE_ARRIVES_AT_USER = "BikeArrivesAtUser"
    BIKE_DROPPED = "BikeDropped"
    CHARGER_REACHED = "ChargerReached"
    CHARGE_COMPLETE = "ChargeComplete"
    BIKE_STRANDED = "BikeStranded"
    REBALANCE_ARRIVED = "RebalanceArrived"
    REBALANCE_TICK = "RebalanceTick"


class SchedulingError(ValueError):
    pass


class SimulationError(RuntimeError):
    def __init__(self, message: str, event: Optional["Event"] = None):
        if event is not None:
            message = f"{message} (while dispatching {event.kind.value} for {event.target} at t={event.time} ms, seq {event.seq})"
        super().__init__(message)
        self.event = event


@dataclass(eq=False)
class Event:
    time: int
    seq: int
    target: str
    kind: EventKind
    payload: Dict[str, Any] = field(default_factory=dict)
    cancelled: bool = False
    fired: bool = False

    def __lt__(self, other: "Event") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


class EventHandle:
    def __init__(self, event: Event, queue: "EventQueue"):
        self.event = event
        self._queue = queue

    @property
    def time(self) -> int:
        return self.event.time

    @property
    def pending(self) -> bool:
        return not (self.event.fired or self.event.cancelled)

    def cancel(self) -> bool:
        """Stop the event from firing; True only if it was still pending."""
        if not self.pending:
            return False
        self.event.cancelled = True
        self._queue.live -= 1
        return True


class EventQueue:
    def __init__(self):
        self._heap: List[Event] = []
        self._seq = 0
        self.now = 0
        self.live = 0

    def __len__(self):
        return self.live

    def schedule(self, delay: float, target: str, kind: EventKind, payload=None) -> EventHandle:
        """Enqueue an event `delay` seconds from now."""
        if delay < 0:
            raise SchedulingError(f"Negative delay {delay} s for {kind.value} on {target}")
        return self.schedule_at(self.now + to_ms(delay), target, kind, payload)

    def schedule_at(self, time_ms: int, target: str, kind: EventKind, payload=None) -> EventHandle:
        if time_ms < self.now:
            raise SchedulingError(f"Cannot schedule {kind.value} at {time_ms} ms, clock is at {self.now} ms")
        event = Event(int(time_ms), self._seq, target, kind, dict(payload or {}))
        self._seq += 1
        heapq.heappush(self._heap, event)
        self.live += 1
        return EventHandle(event, self)

    def peek_time(self) -> Optional[int]:
        while self._heap and self._heap[0].cancelled:
            heapq.heappop(self._heap)
        return self._heap[0].time if self._heap else None

    def pop(self) -> Optional[Event]:
        while self._heap:
            event = heapq.heappop(self._heap)
            if event.cancelled:
                continue
            self.live -= 1
            return event
        return None


Handler = Callable[[Event], None]


class Simulator:
    """Event queue plus per-kind handlers and run control."""

    def __init__(self):
        self.queue = EventQueue()
        self.handlers: Dict[EventKind, Handler] = {}
        self.dispatched = 0

    @property
    def now(self) -> int:
        return self.queue.now

    def register(self, kind: EventKind, handler: Handler):
        self.handlers[kind] = handler

    def schedule(self, delay: float, target: str, kind: EventKind, payload=None) -> EventHandle:
        return self.queue.schedule(delay, target, kind, payload)

    def schedule_at(self, time_ms: int, target: str, kind: EventKind, payload=None) -> EventHandle:
        return self.queue.schedule_at(time_ms, target, kind, payload)

    def _dispatch(self, event: Event):
        self.queue.now = event.time
        event.fired = True
        handler = self.handlers.get(event.kind)
        if handler is None:
            raise SimulationError(f"No handler registered for {event.kind.value}", event)
        try:
            handler(event)
        except SimulationError:
            raise
        except Exception as exc:
            raise SimulationError(f"{type(exc).__name__}: {exc}", event) from exc
        self.dispatched += 1

    def run_until(self, t_end: int) -> int:
        """Dispatch every pending event with time <= t_end; the clock ends at t_end."""
        while True:
            next_time = self.queue.peek_time()
            if next_time is None or next_time > t_end:
                break
            self._dispatch(self.queue.pop())
        if t_end > self.queue.now:
            self.queue.now = t_end
        return self.queue.now

    def run_while(self, keep_going: Callable[[], bool]) -> int:
        """Dispatch events in order for as long as `keep_going()` holds and events remain."""
        while keep_going():
            event = self.queue.pop()
            if event is None:
                break
            self._dispatch(event)
        return self.queue.now
