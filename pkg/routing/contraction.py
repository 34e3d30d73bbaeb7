"""
Contraction hierarchies.

Nodes are contracted in order of a lazily updated priority
(edge difference + deleted neighbours); shortcuts remember the node they
bridge so query results can be unpacked back to road edges.
"""
import heapq
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from geo.network import RoadNetwork

from .dijkstra import INFINITY, NoRouteError


logger = logging.getLogger(__name__)

# Witness searches give up after settling this many nodes; a missed witness
# only costs an extra shortcut.
WITNESS_SETTLE_LIMIT = 500


@dataclass
class ContractedGraph:
    base: RoadNetwork
    shortcuts: List[Tuple[int, int, int, int]]
    level: Dict[int, int]
    middle: Dict[Tuple[int, int], int] = field(repr=False)
    up_out: Dict[int, List[Tuple[int, int]]] = field(repr=False)
    up_in: Dict[int, List[Tuple[int, int]]] = field(repr=False)

    @classmethod
    def assemble(cls, net: RoadNetwork, shortcuts: Sequence[Tuple[int, int, int, int]],
                 level: Dict[int, int]) -> "ContractedGraph":
        weight: Dict[Tuple[int, int], int] = {(u, v): mm for u, v, mm in net.edges}
        middle: Dict[Tuple[int, int], int] = {}
        for u, w, mm, mid in shortcuts:
            if mm < weight.get((u, w), INFINITY):
                weight[(u, w)] = mm
                middle[(u, w)] = mid

        up_out: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
        up_in: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
        for (u, w), mm in sorted(weight.items()):
            if level[w] > level[u]:
                up_out[u].append((w, mm))
            else:
                # Reversed so the backward search also only climbs.
                up_in[w].append((u, mm))
        return cls(net, list(shortcuts), dict(level), middle, dict(up_out), dict(up_in))


class _Overlay:
    """Remaining (uncontracted) graph while contraction is in progress."""

    def __init__(self, net: RoadNetwork):
        self.out: Dict[int, Dict[int, int]] = {n: {} for n in net.node_ids}
        self.inn: Dict[int, Dict[int, int]] = {n: {} for n in net.node_ids}
        for u, v, mm in net.edges:
            self.add(u, v, mm)

    def add(self, u: int, v: int, mm: int):
        if mm < self.out[u].get(v, INFINITY):
            self.out[u][v] = mm
            self.inn[v][u] = mm

    def remove_node(self, v: int):
        for w in self.out.pop(v):
            self.inn[w].pop(v, None)
        for u in self.inn.pop(v):
            self.out[u].pop(v, None)

    def witness_distances(self, source: int, skip: int, limit: int) -> Dict[int, int]:
        dist = {source: 0}
        heap = [(0, source)]
        settled = 0
        done = set()
        while heap and settled < WITNESS_SETTLE_LIMIT:
            d, node = heapq.heappop(heap)
            if node in done:
                continue
            if d > limit:
                break
            done.add(node)
            settled += 1
            for nxt, mm in self.out[node].items():
                if nxt == skip:
                    continue
                nd = d + mm
                if nd < dist.get(nxt, INFINITY):
                    dist[nxt] = nd
                    heapq.heappush(heap, (nd, nxt))
        return dist

    def needed_shortcuts(self, v: int) -> List[Tuple[int, int, int]]:
        needed = []
        outgoing = self.out[v]
        for u in sorted(self.inn[v]):
            to_v = self.inn[v][u]
            targets = {w: mm for w, mm in outgoing.items() if w != u}
            if not targets:
                continue
            limit = to_v + max(targets.values())
            dist = self.witness_distances(u, v, limit)
            for w in sorted(targets):
                via = to_v + targets[w]
                if dist.get(w, INFINITY) > via:
                    needed.append((u, w, via))
        return needed


def preprocess(net: RoadNetwork, order: Optional[Sequence[int]] = None) -> ContractedGraph:
    """
    Contract every node of `net`.

    `order` forces a contraction sequence; otherwise nodes are picked by
    priority with ties going to the smaller node id.
    """
    overlay = _Overlay(net)
    deleted_neighbours: Dict[int, int] = defaultdict(int)
    level: Dict[int, int] = {}
    shortcuts: List[Tuple[int, int, int, int]] = []

    def priority(v: int) -> int:
        edges_removed = len(overlay.out[v]) + len(overlay.inn[v])
        return len(overlay.needed_shortcuts(v)) - edges_removed + deleted_neighbours[v]

    def contract(v: int):
        for u, w, via in overlay.needed_shortcuts(v):
            shortcuts.append((u, w, via, v))
            overlay.add(u, w, via)
        neighbours = set(overlay.out[v]) | set(overlay.inn[v])
        overlay.remove_node(v)
        for n in neighbours:
            deleted_neighbours[n] += 1
        level[v] = len(level) + 1

    if order is not None:
        forced = list(order)
        rest = [n for n in net.node_ids if n not in set(forced)]
        for v in forced + rest:
            contract(v)
    else:
        heap = [(priority(v), v) for v in net.node_ids]
        heapq.heapify(heap)
        while heap:
            _, v = heapq.heappop(heap)
            if v in level:
                continue
            current = priority(v)
            if heap and (current, v) > heap[0]:
                heapq.heappush(heap, (current, v))
                continue
            contract(v)

    logger.info(f"Contracted {len(level)} nodes, added {len(shortcuts)} shortcuts")
    return ContractedGraph.assemble(net, shortcuts, level)


def _upward_search_step(heap, dist, pred, settled, adj, other_dist, best, meet):
    d, node = heapq.heappop(heap)
    if node in settled:
        return best, meet
    settled.add(node)
    if node in other_dist and d + other_dist[node] < best:
        best = d + other_dist[node]
        meet = node
    for nxt, mm in adj.get(node, ()):
        nd = d + mm
        if nd < dist.get(nxt, INFINITY):
            dist[nxt] = nd
            pred[nxt] = node
            heapq.heappush(heap, (nd, nxt))
    return best, meet


def unpack_edge(cg: ContractedGraph, u: int, w: int) -> List[int]:
    """Road nodes strictly after u up to and including w."""
    out = []
    stack = [(u, w)]
    while stack:
        a, b = stack.pop()
        mid = cg.middle.get((a, b))
        if mid is None:
            out.append(b)
        else:
            stack.append((mid, b))
            stack.append((a, mid))
    return out


def query(cg: ContractedGraph, source: int, target: int) -> Tuple[int, List[int]]:
    """Exact distance and unpacked node path via the bidirectional upward search."""
    if source == target:
        return 0, [source]

    dist_f, dist_b = {source: 0}, {target: 0}
    pred_f: Dict[int, int] = {}
    pred_b: Dict[int, int] = {}
    settled_f, settled_b = set(), set()
    heap_f, heap_b = [(0, source)], [(0, target)]
    best, meet = INFINITY, None

    while True:
        run_f = bool(heap_f) and heap_f[0][0] < best
        run_b = bool(heap_b) and heap_b[0][0] < best
        if not run_f and not run_b:
            break
        if run_f and (not run_b or heap_f[0][0] <= heap_b[0][0]):
            best, meet = _upward_search_step(heap_f, dist_f, pred_f, settled_f, cg.up_out, dist_b, best, meet)
        else:
            best, meet = _upward_search_step(heap_b, dist_b, pred_b, settled_b, cg.up_in, dist_f, best, meet)

    if meet is None:
        raise NoRouteError(source, target)

    up_path = [meet]
    while up_path[-1] != source:
        up_path.append(pred_f[up_path[-1]])
    up_path.reverse()
    down_path = [meet]
    while down_path[-1] != target:
        down_path.append(pred_b[down_path[-1]])

    nodes = [source]
    for a, b in zip(up_path, up_path[1:]):
        nodes.extend(unpack_edge(cg, a, b))
    for a, b in zip(down_path, down_path[1:]):
        nodes.extend(unpack_edge(cg, a, b))
    return int(best), nodes
