import tempfile
from pathlib import Path

import networkx as nx
import numpy as np
from django.test import SimpleTestCase

from routing.router import Router

from .grid import GridError, build_grid, cell_cost_matrix
from .network import (
    BBox, Location, NetworkLoadError, RoadNetwork, haversine_m, load_network,
    load_network_cache, nearest_node, parse_network, save_network, serialize_network,
)


FIXTURES = Path(__file__).resolve().parent / "fixtures"
WORLD = BBox(-1.0, -1.0, 1.0, 1.0)

# Roughly 100 m and 300 m of longitude at the equator.
DEG_100M = 0.0008993
DEG_300M = 0.0026979


def line_network(spacing_deg=DEG_300M, count=2):
    nodes = {i + 1: (i * spacing_deg, 0.0) for i in range(count)}
    edges = []
    for i in range(1, count):
        mm = int(round(haversine_m(Location(*nodes[i]), Location(*nodes[i + 1])) * 1000))
        edges += [(i, i + 1, mm), (i + 1, i, mm)]
    return RoadNetwork.from_edges(nodes, edges)


class LoadNetworkTests(SimpleTestCase):

    def test_square_fixture_has_four_nodes_and_eight_edges(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        self.assertEqual(net.node_ids, [1, 2, 3, 4])
        self.assertEqual(len(net.edges), 8)
        for _, _, mm in net.edges:
            self.assertAlmostEqual(mm / 1000.0, 100.0, delta=0.5)

    def test_motorway_ways_are_excluded(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        self.assertNotIn(5, net.coords)

    def test_allowlist_overrides_default_filter(self):
        with self.assertRaises(NetworkLoadError):
            load_network(FIXTURES / "square.osm", WORLD, allow={"cycleway"})

    def test_node_reachable_one_way_only_is_pruned(self):
        net = load_network(FIXTURES / "triangle_spur.osm", WORLD)
        self.assertEqual(net.node_ids, [1, 2, 3])

    def test_missing_file(self):
        with self.assertRaises(NetworkLoadError):
            load_network(FIXTURES / "nope.osm", WORLD)

    def test_unreadable_file(self):
        with self.assertRaises(NetworkLoadError):
            load_network(FIXTURES / "broken.osm", WORLD)

    def test_bbox_outside_data(self):
        with self.assertRaises(NetworkLoadError):
            load_network(FIXTURES / "square.osm", BBox(10.0, 10.0, 11.0, 11.0))

    def test_load_is_deterministic(self):
        first = serialize_network(load_network(FIXTURES / "square.osm", WORLD))
        second = serialize_network(load_network(FIXTURES / "square.osm", WORLD))
        self.assertEqual(first, second)

    def test_cache_file_round_trip(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        path = Path(self._tmpdir()) / "square.net"
        save_network(net, path)
        again = load_network_cache(path)
        self.assertEqual(serialize_network(again), serialize_network(net))

    def test_cache_rejects_foreign_text(self):
        with self.assertRaises(NetworkLoadError):
            parse_network("hello\nworld\n")

    def _tmpdir(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        return tmp.name


class NearestNodeTests(SimpleTestCase):

    def test_point_on_a_node(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        self.assertEqual(nearest_node(net, net.location(3)), 3)

    def test_tie_goes_to_smaller_id(self):
        net = RoadNetwork.from_edges({7: (-0.001, 0.0), 9: (0.001, 0.0)}, [(7, 9, 222), (9, 7, 222)])
        self.assertEqual(nearest_node(net, Location(0.0, 0.0)), 7)

    def test_matches_linear_scan(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        rng = np.random.default_rng(11)
        for lon, lat in rng.uniform(-0.002, 0.003, size=(100, 2)):
            p = Location(float(lon), float(lat))
            brute = min((haversine_m(p, loc), n) for n, loc in net.nodes)[1]
            self.assertEqual(nearest_node(net, p), brute)

    def test_location_bounds(self):
        with self.assertRaises(ValueError):
            Location(181.0, 0.0)
        with self.assertRaises(ValueError):
            Location(0.0, -91.0)


class GridTests(SimpleTestCase):

    def test_single_node_network_has_one_cell(self):
        net = RoadNetwork.from_edges({1: (0.0, 0.0)}, [])
        grid = build_grid(net)
        self.assertEqual(grid.cell_count, 1)
        self.assertEqual(grid.node_to_cell, {1: 0})

    def test_coarse_resolution_puts_square_in_one_cell(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        grid = build_grid(net, resolution=5000)
        self.assertEqual(grid.cell_count, 1)
        self.assertEqual(set(grid.node_to_cell.values()), {0})

    def test_every_node_maps_to_one_cell(self):
        net = line_network(DEG_100M, count=12)
        grid = build_grid(net, resolution=120)
        self.assertEqual(set(grid.node_to_cell), set(net.node_ids))
        self.assertGreater(grid.cell_count, 1)
        for cell in grid.cells:
            self.assertEqual(grid.cell_of_location(cell.centroid), cell.cell_id)

    def test_rejects_nonpositive_resolution(self):
        net = line_network()
        with self.assertRaises(GridError):
            build_grid(net, resolution=0)

    def test_rejects_too_many_cells(self):
        net = load_network(FIXTURES / "square.osm", WORLD)
        with self.assertRaises(GridError):
            build_grid(net, resolution=0.1)


class CellCostMatrixTests(SimpleTestCase):

    def test_one_cell(self):
        net = line_network()
        grid = build_grid(net, resolution=5000)
        cost = cell_cost_matrix(grid, Router(net))
        self.assertEqual(cost.tolist(), [[0.0]])

    def test_two_cells_on_a_line(self):
        net = line_network()
        grid = build_grid(net, resolution=60)
        self.assertEqual(grid.cell_count, 2)
        cost = cell_cost_matrix(grid, Router(net))
        self.assertEqual(cost[0, 0], 0.0)
        self.assertAlmostEqual(cost[0, 1], 300.0, delta=0.5)
        self.assertAlmostEqual(cost[1, 0], 300.0, delta=0.5)

    def test_entries_match_dijkstra(self):
        net = line_network(DEG_100M, count=10)
        grid = build_grid(net, resolution=90)
        self.assertGreaterEqual(grid.cell_count, 5)
        cost = cell_cost_matrix(grid, Router(net))
        graph = net.to_networkx()
        for i, a in enumerate(grid.centroid_nodes):
            lengths = nx.single_source_dijkstra_path_length(graph, a, weight="length_mm")
            for j, b in enumerate(grid.centroid_nodes):
                self.assertEqual(cost[i, j], lengths[b] / 1000.0)
                straight = haversine_m(net.location(a), net.location(b))
                self.assertGreaterEqual(cost[i, j], straight * 0.99)

    def test_unreachable_pair_is_infinite(self):
        nodes = {1: (0.0, 0.0), 2: (DEG_300M, 0.0)}
        net = RoadNetwork.from_edges(nodes, [(1, 2, 300000)])
        grid = build_grid(net, resolution=60)
        cost = cell_cost_matrix(grid, Router(net))
        self.assertEqual(cost[0, 1], 300.0)
        self.assertEqual(cost[1, 0], float("inf"))
