import networkx as nx
import numpy as np
from django.test import SimpleTestCase

from geo.network import Location, RoadNetwork, haversine_m
from metrics.eventlog import EventLog
from routing.router import Router
from routing.tests import random_road_graph

from .battery import charge_duration_s, discharge
from .config import BatteryModel, FleetConfigError, Mode, ModeConfig, RebalancingScenario
from .entities import Bike, BikeState, MoveClass, Outcome, Station, UnservedReason, UserRequest
from .fleet import allocate_by_capacity, init_fleet
from .registry import get_mode_process
from .world import World


# Metres per degree of longitude at the equator.
M_PER_DEG = 111195.08


def corridor(spacings_m):
    """Two-way straight road along the equator; node 1 at the origin."""
    nodes = {1: (0.0, 0.0)}
    x = 0.0
    for k, spacing in enumerate(spacings_m, start=2):
        x += spacing / M_PER_DEG
        nodes[k] = (x, 0.0)
    edges = []
    for a in range(1, len(nodes)):
        mm = int(round(haversine_m(Location(*nodes[a]), Location(*nodes[a + 1])) * 1000))
        edges += [(a, a + 1, mm), (a + 1, a, mm)]
    return RoadNetwork.from_edges(nodes, edges)


def make_world(net, mode, station_nodes, capacities=None, seed=1, **config):
    capacities = capacities or [10] * len(station_nodes)
    stations = [Station(i + 1, net.location(node), node, cap)
                for i, (node, cap) in enumerate(zip(station_nodes, capacities))]
    config.setdefault("fleet_size", 0)
    world = World(mode, ModeConfig(**config), net, Router(net), stations, EventLog({"seed": seed}), seed=seed)
    return world


def start(world, with_fleet=True):
    if with_fleet:
        init_fleet(world)
    return get_mode_process(world)


def request(net, uid, origin, destination, departure=0):
    return UserRequest(id=uid, origin=net.location(origin), destination=net.location(destination),
                       departure=departure, origin_node=origin, destination_node=destination)


def dock_bikes(world, counts):
    """Station-mode fleet with an explicit bike count per station id."""
    bikes = []
    for station_id, count in counts.items():
        station = world.stations[station_id]
        for _ in range(count):
            bike = Bike(id=len(bikes), node=station.node, state=BikeState.AVAILABLE, station_id=station_id)
            station.bikes.append(bike.id)
            bikes.append(bike)
    world.add_bikes(bikes)


def drain(world):
    world.sim.run_while(lambda: world.in_flight > 0)


class StationBasedTests(SimpleTestCase):

    def test_single_path_is_served(self):
        net = corridor([100] * 5)
        world = make_world(net, Mode.STATION, [2, 5], capacities=[2, 2], fleet_size=1)
        mode = start(world)
        req = request(net, 0, 1, 6)
        mode.start([req])
        drain(world)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertAlmostEqual(req.walk_origin_ms / 1000.0, 72.0, delta=0.1)
        self.assertAlmostEqual(req.walk_destination_ms / 1000.0, 72.0, delta=0.1)
        self.assertAlmostEqual(req.ride_ms / 1000.0, 300 / (10.2 / 3.6), delta=0.1)
        self.assertEqual(world.stations[2].docked, 1)
        self.assertAlmostEqual(world.bikes[0].odometer[MoveClass.IN_USE] / 1000.0, 300.0, delta=0.5)

    def test_no_station_within_walking_distance(self):
        net = corridor([100] * 5)
        world = make_world(net, Mode.STATION, [5, 6], capacities=[5, 5], fleet_size=2)
        mode = start(world)
        req = request(net, 0, 1, 6)
        mode.start([req])
        drain(world)
        self.assertIs(req.outcome, Outcome.UNSERVED)
        self.assertIs(req.reason, UnservedReason.NO_WALKABLE_STATIONS)

    def _empty_near_origin(self, beta):
        net = corridor([100] * 5)
        world = make_world(net, Mode.STATION, [2, 6], capacities=[5, 10], beta=beta)
        dock_bikes(world, {2: 5})
        mode = get_mode_process(world)
        req = request(net, 0, 1, 3)
        mode.start([req])
        drain(world)
        return world, req

    def test_beta_one_relocates_a_bike(self):
        world, req = self._empty_near_origin(beta=1.0)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertEqual(world.counters["rebalanced_bikes"], 1)
        self.assertEqual(world.stations[2].docked, 4)

    def test_beta_zero_never_relocates(self):
        world, req = self._empty_near_origin(beta=0.0)
        self.assertIs(req.reason, UnservedReason.NO_BIKES)
        self.assertFalse([r for r in world.log if r.transition == "station_rebalance"])

    def test_full_station_near_destination_is_skipped(self):
        net = corridor([100] * 5)
        world = make_world(net, Mode.STATION, [1, 5, 6], capacities=[4, 1, 4], beta=0.0, min_bikes_docks=0)
        dock_bikes(world, {1: 1, 2: 1})
        mode = get_mode_process(world)
        req = request(net, 0, 1, 5)
        mode.start([req])
        drain(world)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertEqual(world.stations[3].docked, 1)
        self.assertEqual(world.stations[2].docked, 1)

    def test_occupancy_stays_within_capacity(self):
        net = random_road_graph(80, seed=5)
        rng = np.random.default_rng(5)
        station_nodes = rng.choice(net.node_ids, 10, replace=False).tolist()
        world = make_world(net, Mode.STATION, station_nodes, capacities=[4] * 10, fleet_size=20,
                           walk_radius=1000)
        mode = start(world)
        reqs = [request(net, i, *rng.choice(net.node_ids, 2, replace=False).tolist(),
                        departure=int(rng.integers(0, 3_600_000))) for i in range(200)]
        mode.start(reqs)
        drain(world)

        self.assertEqual(sum(r.outcome is not None for r in reqs), 200)
        served = sum(r.outcome is Outcome.SERVED for r in reqs)
        self.assertEqual(served + sum(r.outcome is Outcome.UNSERVED for r in reqs), 200)
        for record in world.log:
            if record.transition == "station_occupancy":
                self.assertGreaterEqual(record.payload["docked"], 0)
                self.assertLessEqual(record.payload["docked"], record.payload["capacity"])
        self.assertEqual(sum(s.docked for s in world.stations.values()) + world.state_mask(BikeState.IN_USE).sum(), 20)


class DocklessTests(SimpleTestCase):

    def test_bike_at_origin_means_no_walk(self):
        net = corridor([400])
        world = make_world(net, Mode.DOCKLESS, [1], fleet_size=1)
        mode = start(world)
        req = request(net, 0, 1, 2)
        mode.start([req])
        drain(world)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertEqual(req.walk_origin_ms, 0)
        self.assertEqual(req.walk_destination_ms, 0)
        self.assertEqual(world.bikes[0].node, 2)
        self.assertIs(world.bikes[0].state, BikeState.AVAILABLE)

    def test_bike_just_beyond_walk_radius(self):
        net = corridor([301])
        world = make_world(net, Mode.DOCKLESS, [2], fleet_size=1)
        mode = start(world)
        req = request(net, 0, 1, 2)
        mode.start([req])
        drain(world)
        self.assertIs(req.reason, UnservedReason.NO_BIKES)

    def test_bike_taken_while_walking_sends_user_to_the_next(self):
        net = corridor([100, 100, 100])
        world = make_world(net, Mode.DOCKLESS, [2, 4], fleet_size=2)
        mode = start(world)
        first = request(net, 0, 2, 4, departure=0)
        second = request(net, 1, 1, 3, departure=0)
        mode.start([first, second])
        drain(world)
        self.assertIs(first.outcome, Outcome.SERVED)
        self.assertIs(second.outcome, Outcome.SERVED)
        self.assertEqual(second.attempts, 2)

    def test_bikes_alternate_between_available_and_in_use(self):
        net = random_road_graph(60, seed=9)
        rng = np.random.default_rng(9)
        world = make_world(net, Mode.DOCKLESS, rng.choice(net.node_ids, 6, replace=False).tolist(),
                           fleet_size=12, walk_radius=800)
        mode = start(world)
        reqs = [request(net, i, *rng.choice(net.node_ids, 2, replace=False).tolist(),
                        departure=int(rng.integers(0, 1_800_000))) for i in range(150)]
        mode.start(reqs)
        drain(world)

        self.assertEqual(sum(r.outcome is not None for r in reqs), 150)
        last = {}
        for record in world.log:
            if record.transition == "bike_state":
                state = record.payload["state"]
                self.assertNotEqual(last.get(record.agent), state)
                last[record.agent] = state


class AutonomousTests(SimpleTestCase):

    def test_idle_bike_at_origin_means_no_wait(self):
        net = corridor([500])
        world = make_world(net, Mode.AUTONOMOUS, [1], fleet_size=1)
        mode = start(world)
        req = request(net, 0, 1, 2)
        mode.start([req])
        drain(world)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertEqual(req.wait_ms, 0)
        self.assertIs(world.bikes[0].state, BikeState.IDLE)
        self.assertEqual(world.bikes[0].node, 2)

    def test_two_kilometre_pickup_takes_fifteen_minutes(self):
        net = corridor([1999.96])
        world = make_world(net, Mode.AUTONOMOUS, [2], fleet_size=1)
        mode = start(world)
        req = request(net, 0, 1, 2)
        mode.start([req])
        drain(world)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertAlmostEqual(req.wait_ms / 1000.0, 900.0, delta=0.1)
        bike = world.bikes[0]
        self.assertAlmostEqual(bike.odometer[MoveClass.PICKUP] / 1e6, 2.0, delta=0.001)
        self.assertAlmostEqual(bike.soc, 1.0 - 4.0 / 70.0, places=4)

    def test_equal_distance_goes_to_lower_id(self):
        net = corridor([300, 300])
        world = make_world(net, Mode.AUTONOMOUS, [3, 1], fleet_size=2)
        mode = start(world)
        req = request(net, 0, 2, 1)
        self.assertEqual(mode.assign_bike(req).id, 0)

    def test_low_battery_bike_is_not_assigned(self):
        net = corridor([300])
        world = make_world(net, Mode.AUTONOMOUS, [2], fleet_size=1)
        mode = start(world)
        world.set_soc(world.bikes[0], 0.1)
        self.assertIsNone(mode.assign_bike(request(net, 0, 1, 2)))

    def test_assignment_matches_linear_scan(self):
        for seed in range(50):
            net = random_road_graph(60, seed=100 + seed)
            rng = np.random.default_rng(seed)
            world = make_world(net, Mode.AUTONOMOUS, rng.choice(net.node_ids, 8, replace=False).tolist(),
                               capacities=rng.integers(1, 6, 8).tolist(), fleet_size=int(rng.integers(1, 15)))
            mode = start(world)
            for bike in world.bikes:
                world.set_soc(bike, float(rng.uniform(0.05, 1.0)))
            user_node = int(rng.choice(net.node_ids))
            req = request(net, 0, user_node, user_node)

            towards_user = nx.single_source_dijkstra_path_length(
                net.to_networkx().reverse(copy=True), user_node, weight="length_mm")
            candidates = [
                (towards_user[b.node], b.id) for b in world.bikes
                if b.soc >= 0.15 and b.node in towards_user
                and haversine_m(net.location(b.node), req.location) <= 2000
            ]
            chosen = mode.assign_bike(req)
            if candidates:
                self.assertEqual(chosen.id, min(candidates)[1])
            else:
                self.assertIsNone(chosen)

    def test_drop_triggers_charge_trip_below_min_level(self):
        net = corridor([100, 100])
        world = make_world(net, Mode.AUTONOMOUS, [3], fleet_size=1)
        mode = start(world)
        bike = world.bikes[0]
        world.place_bike(bike, 1)
        world.set_soc(bike, 0.10)
        mode.battery_check(bike)
        self.assertIs(bike.state, BikeState.DRIVING_TO_CHARGER)

        world.sim.run_until(6 * 3600 * 1000)
        self.assertIs(bike.state, BikeState.IDLE)
        self.assertEqual(bike.soc, 1.0)
        self.assertEqual(bike.node, 3)
        self.assertEqual(world.counters["charges"], 1)
        self.assertAlmostEqual(bike.odometer[MoveClass.CHARGE] / 1000.0, 200.0, delta=1.0)

    def test_exactly_min_level_does_not_charge(self):
        net = corridor([100])
        world = make_world(net, Mode.AUTONOMOUS, [2], fleet_size=1)
        mode = start(world)
        bike = world.bikes[0]
        world.set_soc(bike, 0.15)
        mode.battery_check(bike)
        self.assertIs(bike.state, BikeState.IDLE)

    def test_pickup_beyond_range_strands_the_bike(self):
        net = corridor([100, 100, 100])
        battery = BatteryModel(autonomy_km=0.5, min_level=0.1)
        world = make_world(net, Mode.AUTONOMOUS, [4], fleet_size=1, battery=battery)
        mode = start(world)
        bike = world.bikes[0]
        world.set_soc(bike, 0.2)
        req = request(net, 0, 1, 4)
        mode.start([req])
        drain(world)
        self.assertIs(bike.state, BikeState.STRANDED)
        self.assertEqual(bike.node, 3)
        self.assertAlmostEqual(bike.soc, 0.0, places=3)
        self.assertEqual(world.counters["stranded_bikes"], 1)
        self.assertIs(req.outcome, Outcome.UNSERVED)

    def test_ideal_rebalancing_teleports_with_zero_wait(self):
        net = corridor([1000, 500])
        world = make_world(net, Mode.AUTONOMOUS, [2], fleet_size=1,
                           rebalancing_scenario=RebalancingScenario.IDEAL)
        mode = start(world)
        req = request(net, 0, 1, 3)
        mode.start([req])
        world.sim.run_until(0)
        bike = world.bikes[0]
        self.assertEqual(bike.node, 1)
        self.assertAlmostEqual(bike.soc, 1.0 - 1.0 / 70.0, places=4)
        self.assertEqual(bike.odometer[MoveClass.PICKUP], 0)

        drain(world)
        self.assertIs(req.outcome, Outcome.SERVED)
        self.assertEqual(req.wait_ms, 0)
        self.assertAlmostEqual(bike.odometer[MoveClass.IN_USE] / 1000.0, 2500.0, delta=1.0)

    def test_ride_beyond_range_strands_the_bike_with_the_user(self):
        net = corridor([100, 100, 100, 100])
        battery = BatteryModel(autonomy_km=0.5, min_level=0.1)
        world = make_world(net, Mode.AUTONOMOUS, [1], fleet_size=1, battery=battery)
        mode = start(world)
        bike = world.bikes[0]
        world.set_soc(bike, 0.5)
        req = request(net, 0, 1, 5)
        mode.start([req])
        drain(world)

        self.assertIs(bike.state, BikeState.STRANDED)
        self.assertEqual(bike.node, 3)
        self.assertAlmostEqual(bike.soc, 0.1, places=3)
        self.assertEqual(world.counters["stranded_bikes"], 1)
        self.assertIs(req.outcome, Outcome.UNSERVED)
        self.assertIs(req.reason, UnservedReason.NO_BIKES)
        self.assertEqual(req.attempts, 2)
        self.assertEqual([a for _, a in req.transitions], ["waiting", "riding", "waiting"])

        moved = [r.payload for r in world.log if r.transition == "bike_moved"]
        driven = sum(p["mm"] for p in moved)
        drained = sum(p["soc_drop"] for p in moved)
        self.assertAlmostEqual(driven / 1000.0, 200.0, delta=1.0)
        self.assertAlmostEqual(drained * battery.autonomy_mm, driven, delta=1000)

    def test_ideal_rebalancing_does_not_teleport_past_the_range(self):
        net = corridor([200, 200, 100])
        battery = BatteryModel(autonomy_km=0.5, min_level=0.1)
        world = make_world(net, Mode.AUTONOMOUS, [1], fleet_size=1, battery=battery,
                           rebalancing_scenario=RebalancingScenario.IDEAL)
        mode = start(world)
        bike = world.bikes[0]
        world.set_soc(bike, 0.5)
        req = request(net, 0, 3, 4)
        mode.start([req])
        drain(world)

        self.assertIs(bike.state, BikeState.STRANDED)
        self.assertEqual(bike.node, 2)
        self.assertAlmostEqual(bike.odometer[MoveClass.IN_USE] / 1000.0, 200.0, delta=1.0)
        self.assertAlmostEqual(bike.soc, 0.1, places=3)
        self.assertIs(req.outcome, Outcome.UNSERVED)

    def test_preempted_rebalancing_charges_the_partial_edge(self):
        net = corridor([1000, 1000])
        world = make_world(net, Mode.AUTONOMOUS, [1], fleet_size=1)
        mode = start(world)
        bike = world.bikes[0]
        self.assertTrue(mode.dispatch_rebalancing(bike, 3))

        world.sim.run_until(60_000)
        self.assertIs(mode.assign_bike(request(net, 0, 2, 3)), bike)

        speed = world.config.autonomous_speed
        expected_mm = int(round(60_000 * speed * 1000.0 / 3600.0))
        self.assertEqual(bike.odometer[MoveClass.REBALANCING], expected_mm)
        self.assertEqual(bike.node, 1)
        self.assertIsNone(bike.motion)
        self.assertAlmostEqual(bike.soc, 1.0 - expected_mm / world.config.battery.autonomy_mm, places=9)
        moved = [r.payload for r in world.log if r.transition == "bike_moved"]
        self.assertEqual((moved[-1]["cls"], moved[-1]["mm"]), ("rebalancing", expected_mm))

    def test_soc_stays_in_unit_interval_over_a_busy_hour(self):
        net = random_road_graph(80, seed=3)
        rng = np.random.default_rng(3)
        battery = BatteryModel(autonomy_km=8, min_level=0.15)
        world = make_world(net, Mode.AUTONOMOUS, rng.choice(net.node_ids, 6, replace=False).tolist(),
                           fleet_size=10, battery=battery)
        mode = start(world)
        reqs = [request(net, i, *rng.choice(net.node_ids, 2, replace=False).tolist(),
                        departure=int(rng.integers(0, 3_600_000))) for i in range(120)]
        mode.start(reqs)
        drain(world)

        self.assertEqual(sum(r.outcome is not None for r in reqs), 120)
        self.assertTrue(((world.bike_soc >= 0.0) & (world.bike_soc <= 1.0)).all())
        for bike in world.bikes:
            self.assertTrue(all(mm >= 0 for mm in bike.odometer.values()))
        for record in world.log:
            if record.transition == "charge_end":
                self.assertLess(record.payload["soc_before"], 1.0)


class BatteryTests(SimpleTestCase):

    def test_discharge(self):
        battery = BatteryModel()
        self.assertEqual(discharge(0.7, 0, battery), 0.7)
        self.assertEqual(discharge(1.0, 70_000, battery), 0.0)
        self.assertAlmostEqual(discharge(0.5, 17_500, battery), 0.25)
        self.assertEqual(discharge(0.1, 50_000, battery), 0.0)

    def test_linear_charge_time(self):
        self.assertAlmostEqual(charge_duration_s(0.09, BatteryModel()) / 3600.0, 4.095)

    def test_battery_validation(self):
        with self.assertRaises(FleetConfigError):
            BatteryModel(min_level=1.0)
        with self.assertRaises(FleetConfigError):
            BatteryModel(autonomy_km=0)


class FleetTests(SimpleTestCase):

    def test_proportional_split(self):
        self.assertEqual(allocate_by_capacity([10, 30], 4), [1, 3])
        self.assertEqual(allocate_by_capacity([1, 1, 1], 2), [1, 1, 0])
        self.assertEqual(sum(allocate_by_capacity([7, 13, 29], 31)), 31)

    def test_station_fleet_is_docked_within_capacity(self):
        net = corridor([100, 100])
        world = make_world(net, Mode.STATION, [1, 3], capacities=[10, 30], fleet_size=4)
        init_fleet(world)
        self.assertEqual([s.docked for s in world.stations.values()], [1, 3])
        self.assertTrue(all(b.state is BikeState.AVAILABLE for b in world.bikes))

    def test_autonomous_fleet_starts_idle_and_full(self):
        net = corridor([100, 100])
        world = make_world(net, Mode.AUTONOMOUS, [1, 3], capacities=[10, 30], fleet_size=4)
        init_fleet(world)
        self.assertEqual([b.node for b in world.bikes], [1, 3, 3, 3])
        self.assertTrue(all(b.state is BikeState.IDLE and b.soc == 1.0 for b in world.bikes))
        self.assertEqual([s.docked for s in world.stations.values()], [0, 0])

    def test_station_fleet_too_large(self):
        net = corridor([100])
        world = make_world(net, Mode.STATION, [1, 2], capacities=[5, 5], fleet_size=8)
        with self.assertRaises(FleetConfigError):
            init_fleet(world)

    def test_empty_fleet_serves_nobody(self):
        net = corridor([100, 100])
        for mode_name in Mode:
            world = make_world(net, mode_name, [1, 3], fleet_size=0)
            mode = start(world)
            reqs = [request(net, i, 1, 3, departure=i * 1000) for i in range(3)]
            mode.start(reqs)
            drain(world)
            self.assertTrue(all(r.outcome is Outcome.UNSERVED for r in reqs))

    def test_config_validation(self):
        with self.assertRaises(FleetConfigError):
            ModeConfig(fleet_size=1, beta=1.5)
        with self.assertRaises(FleetConfigError):
            ModeConfig(fleet_size=1, riding_speed=0)
        with self.assertRaises(FleetConfigError):
            ModeConfig(fleet_size=-1)
