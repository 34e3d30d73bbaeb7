import tempfile
from pathlib import Path

import networkx as nx
import numpy as np
from django.test import SimpleTestCase, override_settings

from geo.network import Location, RoadNetwork, haversine_m

from .contraction import preprocess
from .dijkstra import NoRouteError, bidirectional_dijkstra, nearest_targets
from .router import Route, Router, load_or_preprocess, shortest_path, travel_time


def random_road_graph(n, seed):
    """Strongly connected planar-ish graph: a one-way ring plus links to near neighbours."""
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, 0.03, size=(n, 2))
    nodes = {i: (float(coords[i, 0]), float(coords[i, 1])) for i in range(n)}

    def mm(a, b):
        return max(1, int(round(haversine_m(Location(*nodes[a]), Location(*nodes[b])) * 1000)))

    edges = [(i, (i + 1) % n, mm(i, (i + 1) % n)) for i in range(n)]
    for i in range(n):
        d = np.hypot(coords[:, 0] - coords[i, 0], coords[:, 1] - coords[i, 1])
        for j in np.argsort(d)[1:4].tolist():
            edges.append((i, j, mm(i, j)))
            if rng.random() < 0.7:
                edges.append((j, i, mm(j, i)))
    return RoadNetwork.from_edges(nodes, edges)


def line(lengths_mm):
    nodes = {i: (i * 0.001, 0.0) for i in range(len(lengths_mm) + 1)}
    edges = []
    for i, length in enumerate(lengths_mm):
        edges += [(i, i + 1, length), (i + 1, i, length)]
    return RoadNetwork.from_edges(nodes, edges)


class TravelTimeTests(SimpleTestCase):

    def test_zero_length(self):
        self.assertEqual(travel_time(0, 10.2), 0.0)

    def test_riding_speed(self):
        self.assertAlmostEqual(travel_time(1020, 10.2), 360.0)

    def test_fifteen_minute_pickup(self):
        self.assertAlmostEqual(travel_time(2000, 8), 900.0)

    def test_rejects_nonpositive_speed(self):
        with self.assertRaises(ValueError):
            travel_time(100, 0)
        with self.assertRaises(ValueError):
            travel_time(100, -5)

    def test_route_at_speed(self):
        route = Route((1, 2), 1020000).at_speed(10.2)
        self.assertAlmostEqual(route.duration, 360.0)
        self.assertEqual(route.length, 1020.0)


class ContractionTests(SimpleTestCase):

    def test_single_edge_needs_no_shortcut(self):
        net = RoadNetwork.from_edges({1: (0.0, 0.0), 2: (0.001, 0.0)}, [(1, 2, 100000), (2, 1, 100000)])
        self.assertEqual(preprocess(net).shortcuts, [])

    def test_contracting_middle_of_line_bridges_it(self):
        net = line([100000, 200000])
        cg = preprocess(net, order=[1])
        pairs = sorted((u, w, mm, mid) for u, w, mm, mid in cg.shortcuts)
        self.assertEqual(pairs, [(0, 2, 300000, 1), (2, 0, 300000, 1)])

    def test_levels_are_a_total_order(self):
        net = random_road_graph(60, seed=3)
        cg = preprocess(net)
        self.assertEqual(sorted(cg.level.values()), list(range(1, len(net) + 1)))

    def test_preprocessing_is_deterministic(self):
        net = random_road_graph(80, seed=5)
        self.assertEqual(preprocess(net).shortcuts, preprocess(net).shortcuts)

    def test_shortcut_lengths_equal_bridged_paths(self):
        net = random_road_graph(60, seed=8)
        cg = preprocess(net)
        graph = net.to_networkx()
        for u, w, mm, _ in cg.shortcuts:
            self.assertGreaterEqual(mm, nx.dijkstra_path_length(graph, u, w, weight="length_mm"))


class QueryTests(SimpleTestCase):

    def test_same_node(self):
        cg = preprocess(line([100000, 200000]))
        route = shortest_path(cg, 1, 1)
        self.assertEqual(route.nodes, (1,))
        self.assertEqual(route.length_mm, 0)

    def test_line(self):
        cg = preprocess(line([100000, 200000]))
        route = shortest_path(cg, 0, 2)
        self.assertEqual(route.length, 300.0)
        self.assertEqual(route.nodes, (0, 1, 2))

    def test_unreachable_target(self):
        net = RoadNetwork.from_edges({1: (0.0, 0.0), 2: (0.001, 0.0)}, [(1, 2, 5)])
        with self.assertRaises(NoRouteError):
            shortest_path(preprocess(net), 2, 1)
        with self.assertRaises(NoRouteError):
            bidirectional_dijkstra(net.out_adj, net.in_adj, 2, 1)

    def test_contracted_distances_match_dijkstra_on_random_graphs(self):
        rng = np.random.default_rng(2024)
        for graph_seed in range(20):
            n = int(rng.integers(50, 501))
            net = random_road_graph(n, seed=graph_seed)
            cg = preprocess(net)
            graph = net.to_networkx()
            sources = rng.choice(n, size=50, replace=False).tolist()
            for s in sources:
                expected = nx.single_source_dijkstra_path_length(graph, s, weight="length_mm")
                for t in rng.choice(n, size=20).tolist():
                    route = shortest_path(cg, s, t)
                    self.assertEqual(route.length_mm, expected[t], f"graph {graph_seed}, {s}->{t}")
                    self.assertEqual(route.nodes[0], s)
                    self.assertEqual(route.nodes[-1], t)
                    walked = sum(net.edge_length_mm(a, b) for a, b in zip(route.nodes, route.nodes[1:]))
                    self.assertEqual(walked, route.length_mm)

    def test_bidirectional_dijkstra_matches_networkx(self):
        net = random_road_graph(120, seed=42)
        graph = net.to_networkx()
        rng = np.random.default_rng(1)
        for s, t in rng.integers(0, 120, size=(200, 2)).tolist():
            length, nodes = bidirectional_dijkstra(net.out_adj, net.in_adj, s, t)
            self.assertEqual(length, nx.dijkstra_path_length(graph, s, t, weight="length_mm"))
            self.assertEqual((nodes[0], nodes[-1]), (s, t))

    def test_triangle_inequality(self):
        net = random_road_graph(150, seed=9)
        cg = preprocess(net)
        rng = np.random.default_rng(4)
        for s, m, t in rng.integers(0, 150, size=(200, 3)).tolist():
            d_st = shortest_path(cg, s, t).length_mm
            self.assertLessEqual(d_st, shortest_path(cg, s, m).length_mm + shortest_path(cg, m, t).length_mm)


class RouterTests(SimpleTestCase):

    def test_small_network_uses_plain_search(self):
        router = Router.for_network(line([1000, 2000]), min_ch_nodes=1000)
        self.assertIsNone(router.contracted)
        self.assertEqual(router.distance_mm(0, 2), 3000)

    @override_settings(BIKESIM={'ROUTING_CH_MIN_NODES': 10})
    def test_threshold_comes_from_settings(self):
        router = Router.for_network(random_road_graph(30, seed=1))
        self.assertIsNotNone(router.contracted)

    def test_both_back_ends_agree(self):
        net = random_road_graph(100, seed=12)
        plain = Router(net)
        contracted = Router(net, preprocess(net))
        for s, t in np.random.default_rng(0).integers(0, 100, size=(100, 2)).tolist():
            self.assertEqual(plain.distance_mm(s, t), contracted.distance_mm(s, t))

    def test_nearest_of_returns_all_ties(self):
        net = line([1000, 1000, 1000, 1000])
        router = Router(net)
        self.assertEqual(router.nearest_of(2, {0, 4}), (2000, [0, 4]))
        self.assertEqual(router.nearest_of(2, {0, 3}, towards=True), (1000, [3]))
        self.assertIsNone(router.nearest_of(2, set()))

    def test_nearest_targets_on_directed_graph(self):
        net = RoadNetwork.from_edges({1: (0.0, 0.0), 2: (0.001, 0.0), 3: (0.002, 0.0)},
                                     [(1, 2, 10), (2, 3, 10), (3, 1, 10)])
        self.assertEqual(nearest_targets(net.out_adj, 1, {3}), (20, [3]))
        self.assertEqual(nearest_targets(net.in_adj, 1, {3}), (10, [3]))

    def test_distances_from(self):
        router = Router(line([1000, 2000]))
        self.assertEqual(router.distances_from(0, {1, 2}), {1: 1000, 2: 3000})
        self.assertEqual(router.distances_to(2, {0}), {0: 3000})

    def test_contraction_cache_reused(self):
        net = random_road_graph(40, seed=21)
        with tempfile.TemporaryDirectory() as tmp:
            first = load_or_preprocess(net, tmp)
            self.assertEqual(len(list(Path(tmp).glob("ch-*.pickle"))), 1)
            second = load_or_preprocess(net, tmp)
        self.assertEqual(first.shortcuts, second.shortcuts)
        self.assertEqual(first.level, second.level)
