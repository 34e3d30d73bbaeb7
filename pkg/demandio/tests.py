import tempfile
from datetime import datetime
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from geo.network import Location, haversine_m
from modes.entities import UserRequest
from rebalance.history import SLOT_MS

from .requests import read_requests, write_requests
from .scatter import DiskScatterer, get_scatterer, scatter_requests
from .stations import load_stations, place_stations
from .stats import demand_stats, history_from_requests
from .synthetic import lattice_network, save_city, synthetic_city
from .trips import DemandDataError, TripRecord, load_trips


FIXTURES = Path(__file__).resolve().parent / "fixtures"
MONDAY = (datetime(2019, 10, 7), datetime(2019, 10, 8))


class LoadTripsTests(SimpleTestCase):

    def test_rows_outside_window_are_dropped(self):
        trips = load_trips(FIXTURES / "trips.csv", MONDAY)
        self.assertEqual(len(trips), 2)
        self.assertEqual(trips.skipped, 0)
        self.assertLess(trips[0].start_time, trips[1].start_time)
        self.assertEqual(trips[0].start_station[0], "179")
        self.assertEqual(trips[0].end_station[1], Location(-71.093198, 42.3581))
        self.assertEqual(trips[0].duration, 905.0)

    def test_blank_station_id_is_skipped_and_counted(self):
        with self.assertLogs("demandio.trips", level="WARNING"):
            trips = load_trips(FIXTURES / "trips_blank_station.csv", MONDAY)
        self.assertEqual(len(trips), 1)
        self.assertEqual(trips.skipped, 1)

    def test_missing_columns(self):
        with self.assertRaisesMessage(DemandDataError, "starttime"):
            load_trips(FIXTURES / "stations.csv", MONDAY)

    def test_nothing_in_window(self):
        with self.assertRaises(DemandDataError):
            load_trips(FIXTURES / "trips.csv", (datetime(2020, 1, 1), datetime(2020, 1, 2)))

    def test_column_mapping_override(self):
        with self.assertRaises(DemandDataError):
            load_trips(FIXTURES / "trips.csv", MONDAY, columns={"start_time": "started_at"})
        with self.assertRaises(DemandDataError):
            load_trips(FIXTURES / "trips.csv", MONDAY, columns="divvy")


class LoadStationsTests(SimpleTestCase):

    def test_two_stations(self):
        stations = load_stations(FIXTURES / "stations.csv")
        self.assertEqual([s.id for s in stations], [67, 179])
        self.assertEqual([s.capacity for s in stations], [23, 15])

    def test_duplicate_id_is_named(self):
        with self.assertRaisesMessage(DemandDataError, "'67'"):
            load_stations(FIXTURES / "stations_duplicate.csv")

    def test_capacity_must_be_positive(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "stations.csv"
            path.write_text("id,lat,lon,capacity\n1,42.35,-71.1,0\n")
            with self.assertRaises(DemandDataError):
                load_stations(path)

    def test_alphanumeric_codes_get_sorted_ids(self):
        stations = load_stations(FIXTURES / "stations_bluebikes.csv", columns="bluebikes")
        self.assertEqual([(s.id, s.code) for s in stations], [(0, "A32019"), (1, "M32006")])

    def test_stations_snap_to_nearest_node(self):
        net = lattice_network(3, 3, 200.0, origin=Location(-71.1, 42.35))
        stations = load_stations(FIXTURES / "stations.csv")
        placed = place_stations(stations, net)
        self.assertEqual(len(placed), 2)
        self.assertTrue(all(s.node in net.coords for s in placed))


class ScatterTests(SimpleTestCase):

    def setUp(self):
        self.net = lattice_network(6, 6, 150.0, origin=Location(-71.1, 42.35))
        a, b = self.net.location(8), self.net.location(29)
        self.trips = [
            TripRecord(datetime(2019, 10, 7, 0, k), ("1", a), ("2", b)) for k in range(20)
        ]

    def test_zero_radius_keeps_station_locations(self):
        requests = scatter_requests(self.trips, np.random.default_rng(1), 0.0, self.net, MONDAY[0])
        self.assertTrue(all(r.origin == self.net.location(8) for r in requests))
        self.assertTrue(all(r.origin_node == 8 and r.destination_node == 29 for r in requests))
        self.assertEqual([r.departure for r in requests], [k * 60_000 for k in range(20)])

    def test_same_seed_same_requests(self):
        first = scatter_requests(self.trips, np.random.default_rng(42), 300.0, self.net, MONDAY[0])
        second = scatter_requests(self.trips, np.random.default_rng(42), 300.0, self.net, MONDAY[0])
        self.assertEqual([(r.origin, r.destination, r.origin_node) for r in first],
                         [(r.origin, r.destination, r.origin_node) for r in second])

    def test_one_request_per_trip(self):
        requests = scatter_requests(self.trips, np.random.default_rng(0), 300.0, self.net, MONDAY[0])
        self.assertEqual(len(requests), len(self.trips))
        self.assertEqual([r.id for r in requests], list(range(len(self.trips))))

    def test_disk_statistics(self):
        rng = np.random.default_rng(2)
        scatterer = get_scatterer("disk", 300.0)
        centre = Location(-71.1, 42.35)
        offsets = np.array([haversine_m(centre, scatterer.displace(centre, rng)) for _ in range(10_000)])
        self.assertLessEqual(offsets.max(), 300.0 + 0.5)
        self.assertAlmostEqual(offsets.mean(), 200.0, delta=4.0)

    def test_negative_radius(self):
        with self.assertRaises(ValueError):
            DiskScatterer(-1)


class RequestFileTests(SimpleTestCase):

    def test_written_requests_replay_identically(self):
        net = lattice_network(4, 4, 200.0, origin=Location(-71.1, 42.35))
        requests = [
            UserRequest(id=i, origin=net.location(1 + i), destination=net.location(16 - i),
                        departure=i * 1500, origin_node=1 + i, destination_node=16 - i)
            for i in range(5)
        ]
        with tempfile.TemporaryDirectory() as tmp:
            path = write_requests(Path(tmp) / "requests.csv", requests)
            self.assertEqual(path.read_text().splitlines()[0], "id,t,o_lon,o_lat,d_lon,d_lat")
            replayed = read_requests(path, net)
        self.assertEqual([(r.id, r.departure, r.origin_node, r.destination_node) for r in replayed],
                         [(r.id, r.departure, r.origin_node, r.destination_node) for r in requests])

    def test_bad_header(self):
        net = lattice_network(2, 2, 200.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "requests.csv"
            path.write_text("id,time,a,b,c,d\n1,0,0,0,0,0\n")
            with self.assertRaises(DemandDataError):
                read_requests(path, net)

    def test_negative_times_only_for_history(self):
        net = lattice_network(2, 2, 200.0)
        loc = net.location(1)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_requests(Path(tmp) / "history.csv", [
                UserRequest(id=0, origin=loc, destination=loc, departure=-900_000, origin_node=1, destination_node=1),
            ])
            with self.assertRaises(DemandDataError):
                read_requests(path, net)
            self.assertEqual(read_requests(path, net, allow_negative=True)[0].departure, -900_000)


class DemandStatsTests(SimpleTestCase):

    def test_single_request_fills_one_hour(self):
        loc = Location(-71.1, 42.35)
        stats = demand_stats([UserRequest(0, loc, loc, 5_400_000, 1, 1)])
        self.assertEqual(stats.hourly.tolist(), [1])
        self.assertEqual(stats.hourly.index.tolist(), [1])
        self.assertEqual(int(stats.slot_of_week.sum()), 1)
        self.assertEqual(stats.share_below_5km, 1.0)

    def test_uniform_week_is_flat(self):
        city = synthetic_city(seed=4, days=7, trips_per_day=2400, uniform=True)
        requests = scatter_requests(city.trips, np.random.default_rng(4), 0.0, city.net, city.t0)
        stats = demand_stats(requests, city.t0)
        self.assertEqual(len(stats.hourly), 7 * 24)
        self.assertLess(stats.hourly.std() / stats.hourly.mean(), 0.25)

    def test_peaks_show_in_the_default_profile(self):
        city = synthetic_city(seed=5, days=1, trips_per_day=3000)
        requests = scatter_requests(city.trips, np.random.default_rng(5), 0.0, city.net, city.t0)
        hourly = demand_stats(requests).hourly
        self.assertGreater(hourly.get(8, 0), 3 * hourly.get(3, 0))

    def test_empty(self):
        with self.assertRaises(ValueError):
            demand_stats([])

    def test_history_aggregation(self):
        city = synthetic_city(seed=6, rows=4, cols=4, trips_per_day=200)
        requests = scatter_requests(city.trips, np.random.default_rng(6), 0.0, city.net, city.t0)

        class OneCell:
            cell_count = 1

            def cell_of_node(self, node):
                return 0

        history = history_from_requests(requests, OneCell())
        self.assertEqual(history.total(), len(requests))
        first = requests[0].departure // SLOT_MS
        self.assertGreaterEqual(history.column(first)[0], 1)


class SyntheticCityTests(SimpleTestCase):

    def test_same_seed_same_city(self):
        a = synthetic_city(seed=9, trips_per_day=300)
        b = synthetic_city(seed=9, trips_per_day=300)
        self.assertEqual(a.trips, b.trips)
        self.assertEqual(a.stations, b.stations)

    def test_saved_city_loads_back(self):
        city = synthetic_city(seed=3, rows=6, cols=6, trips_per_day=150)
        with tempfile.TemporaryDirectory() as tmp:
            paths = save_city(city, tmp)
            stations = load_stations(paths["stations"])
            trips = load_trips(paths["trips"], (city.t0, city.t1))
        self.assertEqual([s.capacity for s in stations], [s.capacity for s in city.stations])
        self.assertEqual(len(trips), len(city.trips))
