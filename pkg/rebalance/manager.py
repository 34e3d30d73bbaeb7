"""
Periodic predictive rebalancing of autonomous bikes.

Every T slots the manager forecasts demand per cell, nets it against the
idle eligible bikes already in each cell, solves the transportation problem
over cell-to-cell road distances and sends concrete bikes on their way.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from engine.events import Event, EventKind
from geo.grid import GridIndex
from geo.network import haversine_m
from modes.entities import BikeState, UserRequest
from routing.dijkstra import NoRouteError

from .history import SLOT_MS, DemandHistory
from .predictors import DemandPredictor
from .transport import TransportPlan, default_slack_cost, solve_transportation


logger = logging.getLogger(__name__)

MANAGER_AGENT = "rebalancer"


@dataclass
class SupplySnapshot:
    """Idle bikes with enough charge, grouped by cell."""

    bikes_by_cell: Dict[int, List[int]] = field(default_factory=dict)
    cell_count: int = 0

    @property
    def B(self) -> np.ndarray:
        counts = np.zeros(self.cell_count, dtype=np.int64)
        for cell, ids in self.bikes_by_cell.items():
            counts[cell] = len(ids)
        return counts


@dataclass
class TickResult:
    plan: Optional[TransportPlan]
    moves: List[Tuple[int, int, int]]
    demand: int


class RebalanceManager:
    def __init__(self, world, mode, grid: GridIndex, cost: np.ndarray, predictor: DemandPredictor,
                 history: Optional[DemandHistory] = None, horizon_ms: int = 0):
        self.world = world
        self.mode = mode
        self.grid = grid
        self.cost = cost
        self.predictor = predictor
        self.history = history or DemandHistory(grid.cell_count)
        self.horizon_ms = horizon_ms
        config = world.config
        self.period_ms = config.T * SLOT_MS
        self.lam = config.slack_cost if config.slack_cost is not None else default_slack_cost(cost)
        self.ticks = 0

    def start(self):
        self.world.sim.register(EventKind.REBALANCE_TICK, self._on_tick)
        self.mode.request_listeners.append(self.observe)
        if self.horizon_ms > 0:
            self.world.sim.schedule_at(0, MANAGER_AGENT, EventKind.REBALANCE_TICK)

    def observe(self, req: UserRequest):
        self.history.add(self.grid.cell_of_node(req.origin_node), req.departure)

    def snapshot(self) -> SupplySnapshot:
        world = self.world
        snap = SupplySnapshot(cell_count=self.grid.cell_count)
        mask = world.state_mask(BikeState.IDLE) & (world.bike_soc >= world.config.battery.min_level)
        for bike_id in np.flatnonzero(mask).tolist():
            cell = self.grid.cell_of_node(world.bikes[bike_id].node)
            snap.bikes_by_cell.setdefault(cell, []).append(bike_id)
        return snap

    def _candidates(self, ids: List[int], target_cell: int) -> List[int]:
        """Bikes of a cell ordered by straight-line distance to the target centroid, then id."""
        centroid = self.grid.cells[target_cell].centroid
        world = self.world
        return sorted(ids, key=lambda b: (haversine_m(world.net.location(world.bikes[b].node), centroid), b))

    def _reachable(self, bike, target: int) -> bool:
        try:
            length = self.world.router.distance_mm(bike.node, target)
        except NoRouteError:
            return False
        return length <= bike.soc * self.world.config.battery.autonomy_mm

    def rebalance_tick(self) -> TickResult:
        world = self.world
        self.ticks += 1
        self.history.observe_until(world.now)
        forecast = self.predictor.predict(self.history, world.now, world.config.W, world.config.P)
        snap = self.snapshot()
        B = snap.B
        D = np.maximum(0, forecast.D - B)
        supply = np.maximum(0, B - forecast.D)
        if D.sum() == 0:
            world.emit(MANAGER_AGENT, "rebalance_plan", {"moves": 0, "objective": 0.0, "demand": forecast.total})
            return TickResult(None, [], forecast.total)

        plan = solve_transportation(supply, D, self.cost, self.lam)
        dispatched = []
        for i, j, k in plan.moves():
            target = self.grid.centroid_nodes[j]
            sent = 0
            for bike_id in self._candidates(snap.bikes_by_cell.get(i, []), j):
                if sent == k:
                    break
                bike = world.bikes[bike_id]
                if bike.state is not BikeState.IDLE or not self._reachable(bike, target):
                    continue
                if self.mode.dispatch_rebalancing(bike, target):
                    snap.bikes_by_cell[i].remove(bike_id)
                    sent += 1
            if sent < k:
                logger.info(f"Rebalancing {i}->{j}: planned {k} bikes, dispatched {sent}")
            if sent:
                dispatched.append((i, j, sent))

        world.emit(MANAGER_AGENT, "rebalance_plan", {
            "moves": sum(k for _, _, k in dispatched),
            "objective": plan.objective,
            "demand": forecast.total,
        })
        return TickResult(plan, dispatched, forecast.total)

    def _on_tick(self, event: Event):
        self.rebalance_tick()
        next_tick = self.world.now + self.period_ms
        if next_tick < self.horizon_ms:
            self.world.sim.schedule_at(next_tick, MANAGER_AGENT, EventKind.REBALANCE_TICK)
