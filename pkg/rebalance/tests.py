import itertools
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from geo.grid import build_grid, cell_cost_matrix
from geo.network import Location, RoadNetwork, haversine_m
from metrics.eventlog import EventLog
from modes.autonomous import AutonomousMode
from modes.config import BatteryModel, Mode, ModeConfig, RebalancingScenario
from modes.entities import BikeState, MoveClass, Station, UserRequest
from modes.fleet import init_fleet
from modes.world import World
from routing.router import Router

from .history import SLOT_MS, SLOTS_PER_WEEK, DemandHistory
from .manager import RebalanceManager
from .predictors import (
    BaselineHistoricalPredictor, DemandForecast, ExternalFilePredictor, ForecastFileError,
    PerfectForesightPredictor, RecentWindowPredictor, get_predictor, predict_demand,
)
from .transport import TransportProblemError, solve_transportation


WEEK_MS = SLOTS_PER_WEEK * SLOT_MS


def brute_force_objective(B, D, C, lam):
    """Exact optimum by dynamic programming over the demand still uncovered."""
    n = len(B)
    best = {tuple(D): 0.0}
    for i in range(n):
        nxt = {}
        for remaining, cost in best.items():
            ranges = [range(0, r + 1) if np.isfinite(C[i][j]) else range(1) for j, r in enumerate(remaining)]
            for shipment in itertools.product(*ranges):
                if sum(shipment) > B[i]:
                    continue
                left = tuple(r - s for r, s in zip(remaining, shipment))
                total = cost + sum(C[i][j] * s for j, s in enumerate(shipment))
                if total < nxt.get(left, float("inf")):
                    nxt[left] = total
        best = nxt
    return min(cost + sum(lam[j] * r for j, r in enumerate(left)) for left, cost in best.items())


def brute_force_plan(B, D, C, lam):
    """Cheapest plan by enumeration; among equal costs the row-major smallest T."""
    n = len(B)
    B, D, C = np.array(B), np.array(D), np.array(C)
    cells = [(i, j) for i in range(n) for j in range(n)]
    best = None
    for values in itertools.product(*[range(min(B[i], D[j]) + 1) for i, j in cells]):
        T = np.array(values, dtype=int).reshape(n, n)
        if (T.sum(axis=1) > B).any() or (T.sum(axis=0) > D).any():
            continue
        cost = int((C * T).sum() + np.dot(lam, D - T.sum(axis=0)))
        if best is None or (cost, values) < best:
            best = (cost, values)
    return np.array(best[1], dtype=int).reshape(n, n)


class SolveTransportationTests(SimpleTestCase):

    def test_single_cell_serves_itself(self):
        plan = solve_transportation([3], [2], [[0]], [1e6])
        self.assertEqual(plan.T.tolist(), [[2]])
        self.assertEqual(plan.S.tolist(), [0])
        self.assertEqual(plan.objective, 0.0)

    def test_only_cheap_flow(self):
        plan = solve_transportation([0, 5], [3, 0], [[0, 400], [400, 0]], [1e6, 1e6])
        self.assertEqual(plan.T[1, 0], 3)
        self.assertEqual(plan.objective, 1200.0)
        self.assertEqual(plan.moves(), [(1, 0, 3)])

    def test_slack_covers_missing_supply(self):
        plan = solve_transportation([1, 0], [0, 3], [[0, 100], [100, 0]], [1000, 1000])
        self.assertEqual(plan.T[0, 1], 1)
        self.assertEqual(plan.S.tolist(), [0, 2])
        self.assertEqual(plan.objective, 2100.0)

    def test_slack_preferred_over_longer_trip(self):
        plan = solve_transportation([1, 0], [0, 1], [[0, 5000], [5000, 0]], [1000, 1000])
        self.assertEqual(plan.moves(), [])
        self.assertEqual(plan.S.tolist(), [0, 1])

    def test_unreachable_pairs_carry_no_flow(self):
        plan = solve_transportation([2, 0], [0, 2], [[0, np.inf], [np.inf, 0]], [10, 10])
        self.assertEqual(plan.moves(), [])
        self.assertEqual(plan.S.tolist(), [0, 2])

    def test_enough_local_supply_costs_nothing(self):
        C = [[0, 300, 700], [300, 0, 400], [700, 400, 0]]
        plan = solve_transportation([3, 1, 2], [2, 1, 2], C)
        self.assertEqual(plan.objective, 0.0)
        self.assertEqual(plan.moves(), [])

    def test_zero_demand(self):
        plan = solve_transportation([4, 4], [0, 0], [[0, 1], [1, 0]])
        self.assertEqual(plan.flows, {})
        self.assertEqual(plan.objective, 0.0)

    def test_default_slack_cost_is_ten_times_costliest_arc(self):
        # One bike 900 m away is cheaper than the 9000 m slack.
        plan = solve_transportation([1, 0], [0, 1], [[0, 900], [900, 0]])
        self.assertEqual(plan.moves(), [(0, 1, 1)])

    def test_dimension_mismatch(self):
        with self.assertRaises(TransportProblemError):
            solve_transportation([1, 2], [1], [[0, 1], [1, 0]])
        with self.assertRaises(TransportProblemError):
            solve_transportation([1, 2], [1, 0], [[0, 1, 2], [1, 0, 2]])

    def test_negative_inputs(self):
        with self.assertRaises(TransportProblemError):
            solve_transportation([-1, 2], [1, 0], [[0, 1], [1, 0]])
        with self.assertRaises(TransportProblemError):
            solve_transportation([1, 2], [1, 0], [[0, -1], [1, 0]])

    def test_random_instances_match_exhaustive_optimum(self):
        rng = np.random.default_rng(20)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            B = rng.integers(0, 4, n).tolist()
            D = rng.integers(0, 4, n).tolist()
            C = rng.integers(1, 1000, (n, n)).astype(float)
            np.fill_diagonal(C, 0)
            lam = [10.0 * C.max() + 1] * n
            plan = solve_transportation(B, D, C, lam)
            self.assertAlmostEqual(plan.objective, brute_force_objective(B, D, C.tolist(), lam), places=6)
            T = plan.T
            self.assertTrue((T.sum(axis=1) <= np.array(B)).all())
            self.assertTrue((T.sum(axis=0) + plan.S >= np.array(D)).all())
            self.assertTrue(np.issubdtype(T.dtype, np.integer))

    def test_scaling_costs_keeps_the_chosen_plan(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = 4
            B = rng.integers(0, 4, n)
            D = rng.integers(0, 4, n)
            C = rng.integers(1, 50, (n, n)).astype(float) * 10
            np.fill_diagonal(C, 0)
            lam = np.full(n, 10 * C.max())
            base = solve_transportation(B, D, C, lam)
            scaled = solve_transportation(B, D, C * 3, lam * 3)
            np.testing.assert_array_equal(base.T, scaled.T)
            np.testing.assert_array_equal(base.S, scaled.S)

    def test_ties_are_broken_the_same_way_every_time(self):
        C = [[0, 100, 100], [100, 0, 100], [100, 100, 0]]
        first = solve_transportation([2, 2, 0], [0, 0, 2], C, [1e5] * 3)
        for _ in range(5):
            again = solve_transportation([2, 2, 0], [0, 0, 2], C, [1e5] * 3)
            self.assertEqual(first.flows, again.flows)
        self.assertEqual(first.T[:, 2].tolist(), [0, 2, 0])

    def test_free_moves_go_to_the_lexicographically_smallest_plan(self):
        plan = solve_transportation([2, 0, 0, 1], [1, 1, 1, 1], np.zeros((4, 4)), 10.0)
        self.assertEqual(plan.objective, 10.0)
        self.assertEqual(plan.T[0].tolist(), [0, 0, 1, 1])
        self.assertEqual(plan.T[3].tolist(), [0, 1, 0, 0])
        self.assertEqual(plan.S.tolist(), [1, 0, 0, 0])

    def test_random_ties_match_exhaustive_smallest_plan(self):
        rng = np.random.default_rng(31)
        for _ in range(40):
            n = int(rng.integers(2, 4))
            B = rng.integers(0, 3, n).tolist()
            D = rng.integers(0, 3, n).tolist()
            # Few distinct costs, so many optimal plans tie.
            C = rng.integers(0, 3, (n, n)).astype(float)
            lam = [int(rng.integers(1, 4))] * n
            plan = solve_transportation(B, D, C, lam)
            expected = brute_force_plan(B, D, C, lam)
            np.testing.assert_array_equal(plan.T, expected, err_msg=f"B={B} D={D} C={C.tolist()} lam={lam}")
            np.testing.assert_array_equal(plan.S, np.array(D) - expected.sum(axis=0))


class DemandHistoryTests(SimpleTestCase):

    def test_counts_land_in_fifteen_minute_slots(self):
        history = DemandHistory(2)
        history.add(0, 0)
        history.add(0, SLOT_MS - 1)
        history.add(1, SLOT_MS)
        self.assertEqual(history.column(0).tolist(), [2, 0])
        self.assertEqual(history.column(1).tolist(), [0, 1])
        self.assertIsNone(history.column(2))

    def test_grows_backwards_for_seeded_trips(self):
        history = DemandHistory(1)
        history.add(0, 3 * SLOT_MS)
        history.add(0, -WEEK_MS)
        self.assertEqual(history.first_slot, -SLOTS_PER_WEEK)
        self.assertEqual(history.total(), 2)

    def test_observe_until_covers_quiet_slots(self):
        history = DemandHistory(3)
        history.observe_until(4 * SLOT_MS)
        self.assertEqual(history.covered_before(4), 4)
        self.assertEqual(history.window(0, 4).sum(), 0)

    def test_rejects_unknown_cell(self):
        with self.assertRaises(ValueError):
            DemandHistory(2).add(2, 0)


class PredictorTests(SimpleTestCase):

    def test_empty_history_forecasts_zero(self):
        with self.assertLogs("rebalance.predictors", level="WARNING"):
            forecast = predict_demand(DemandHistory(3), 0, W=4, P=1)
        self.assertEqual(forecast.D.tolist(), [0, 0, 0])

    def test_constant_demand_is_forecast_exactly(self):
        history = DemandHistory(2)
        for slot in range(2 * SLOTS_PER_WEEK):
            history.add(1, slot * SLOT_MS, count=4)
        now = 2 * WEEK_MS
        forecast = BaselineHistoricalPredictor(history_weeks=4).predict(history, now, W=4, P=1)
        self.assertEqual(forecast.D.tolist(), [0, 4])
        self.assertEqual(RecentWindowPredictor().predict(history, now, W=4, P=1).D.tolist(), [0, 4])

    def test_same_slot_of_week_mean_matches_hand_computation(self):
        rng = np.random.default_rng(3)
        counts = rng.integers(0, 6, (3, 2 * SLOTS_PER_WEEK))
        history = DemandHistory(3)
        for cell in range(3):
            for slot in range(counts.shape[1]):
                if counts[cell, slot]:
                    history.add(cell, slot * SLOT_MS, count=int(counts[cell, slot]))
        history.observe_until(2 * WEEK_MS)
        predictor = BaselineHistoricalPredictor(history_weeks=2)
        for P in (1, 3):
            for now_slot in (2 * SLOTS_PER_WEEK, 2 * SLOTS_PER_WEEK + 10):
                target = now_slot + P - 1
                expected = []
                for cell in range(3):
                    samples = [counts[cell, target - k * SLOTS_PER_WEEK] for k in (1, 2)
                               if 0 <= target - k * SLOTS_PER_WEEK < counts.shape[1]]
                    expected.append(int(np.floor(sum(samples) / len(samples) + 0.5)))
                forecast = predictor.predict(history, now_slot * SLOT_MS, W=4, P=P)
                self.assertEqual(forecast.D.tolist(), expected)
                self.assertEqual(forecast.target_slot, target)

    def test_means_round_half_up(self):
        history = DemandHistory(1)
        history.add(0, 0, count=1)
        history.add(0, WEEK_MS, count=2)
        history.observe_until(2 * WEEK_MS)
        forecast = BaselineHistoricalPredictor(2).predict(history, 2 * WEEK_MS, W=1, P=1)
        self.assertEqual(forecast.D.tolist(), [2])

    def test_perfect_foresight_reads_target_slot(self):
        future = DemandHistory(2)
        future.add(0, 5 * SLOT_MS, count=3)
        predictor = PerfectForesightPredictor(future)
        self.assertEqual(predictor.predict(DemandHistory(2), 4 * SLOT_MS, W=4, P=2).D.tolist(), [3, 0])
        self.assertEqual(predictor.predict(DemandHistory(2), 50 * SLOT_MS, W=4, P=1).D.tolist(), [0, 0])

    def test_external_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "forecast.csv"
            path.write_text("1,2.4,0\n0,0.5,7\n")
            predictor = ExternalFilePredictor(path, cell_count=2)
            self.assertEqual(predictor.predict(DemandHistory(2), SLOT_MS, W=4, P=1).D.tolist(), [2, 1])
            with self.assertRaises(ForecastFileError):
                ExternalFilePredictor(path, cell_count=3)

    def test_factory(self):
        self.assertIsInstance(get_predictor("baseline-historical"), BaselineHistoricalPredictor)
        self.assertIsInstance(get_predictor("recent-window"), RecentWindowPredictor)
        with self.assertRaises(ValueError):
            get_predictor("gcnn")
        with self.assertRaises(ValueError):
            get_predictor("perfect-foresight")


class FixedForecast:
    def __init__(self, D):
        self.D = np.array(D, dtype=np.int64)

    def predict(self, history, now_ms, W, P):
        return DemandForecast(self.D.copy(), now_ms // SLOT_MS + P - 1, P)


# Roughly 300 m of longitude at the equator.
DEG_300M = 0.0026979


def corridor(count=3):
    nodes = {i + 1: (i * DEG_300M, 0.0) for i in range(count)}
    edges = []
    for i in range(1, count):
        mm = int(round(haversine_m(Location(*nodes[i]), Location(*nodes[i + 1])) * 1000))
        edges += [(i, i + 1, mm), (i + 1, i, mm)]
    return RoadNetwork.from_edges(nodes, edges)


class RebalanceTickTests(SimpleTestCase):

    def make(self, forecast_by_node, fleet_size=2, battery=None):
        net = corridor()
        router = Router(net)
        config = ModeConfig(fleet_size=fleet_size, rebalancing_scenario=RebalancingScenario.PREDICTIVE,
                            battery=battery or BatteryModel())
        station = Station(1, net.location(1), 1, capacity=10)
        world = World(Mode.AUTONOMOUS, config, net, router, [station], EventLog({}), seed=1)
        init_fleet(world)
        mode = AutonomousMode(world)
        grid = build_grid(net, resolution=60)
        D = np.zeros(grid.cell_count, dtype=np.int64)
        for node, demand in forecast_by_node.items():
            D[grid.cell_of_node(node)] = demand
        manager = RebalanceManager(world, mode, grid, cell_cost_matrix(grid, router), FixedForecast(D),
                                   horizon_ms=4 * SLOT_MS)
        return world, grid, manager

    def test_zero_forecast_moves_nothing(self):
        world, _, manager = self.make({})
        result = manager.rebalance_tick()
        self.assertEqual(result.moves, [])
        self.assertTrue(all(b.state is BikeState.IDLE for b in world.bikes))

    def test_demand_already_covered_moves_nothing(self):
        _, _, manager = self.make({1: 2})
        self.assertEqual(manager.rebalance_tick().moves, [])

    def test_bike_is_sent_to_the_cell_with_demand(self):
        world, grid, manager = self.make({3: 1})
        result = manager.rebalance_tick()
        self.assertEqual(result.moves, [(grid.cell_of_node(1), grid.cell_of_node(3), 1)])
        moving = [b.id for b in world.bikes if b.state is BikeState.REBALANCING]
        self.assertEqual(moving, [0])

        world.sim.run_until(10 * 60 * 1000)
        bike = world.bikes[0]
        self.assertIs(bike.state, BikeState.IDLE)
        self.assertEqual(bike.node, 3)
        self.assertAlmostEqual(bike.odometer[MoveClass.REBALANCING] / 1000.0, 600.0, delta=1.0)
        plans = [r for r in world.log if r.transition == "rebalance_plan"]
        self.assertEqual(plans[-1].payload["moves"], 1)

    def test_bikes_that_would_strand_are_not_sent(self):
        # 400 m of range against a 600 m drive.
        _, _, manager = self.make({3: 1}, battery=BatteryModel(autonomy_km=0.4, min_level=0.1))
        self.assertEqual(manager.rebalance_tick().moves, [])

    def test_ticks_repeat_every_period_until_horizon(self):
        world, _, manager = self.make({})
        manager.start()
        world.sim.run_until(4 * SLOT_MS)
        self.assertEqual(manager.ticks, 4)
        self.assertEqual(world.sim.queue.live, 0)

    def test_arriving_requests_feed_the_history(self):
        world, grid, manager = self.make({})
        manager.start()
        req = UserRequest(id=0, origin=world.net.location(3), destination=world.net.location(1),
                          departure=2 * SLOT_MS, origin_node=3, destination_node=1)
        manager.mode.start([req])
        world.sim.run_until(2 * SLOT_MS)
        self.assertEqual(manager.history.column(2)[grid.cell_of_node(3)], 1)
