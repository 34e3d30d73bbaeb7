"""
Plain Dijkstra searches over integer millimetre adjacency lists.

Used directly on small networks, as the reference for the contracted
graph, and for one-to-many lookups (nearest bike, nearest charger).
"""
import heapq
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

Adjacency = Mapping[int, Sequence[Tuple[int, int]]]

INFINITY = float("inf")


class NoRouteError(RuntimeError):
    def __init__(self, source: int, target: int):
        super().__init__(f"No route from node {source} to node {target}")
        self.source = source
        self.target = target


def settle_order(adj: Adjacency, source: int) -> Iterator[Tuple[int, int]]:
    """Yield (distance_mm, node) in settle order; equal distances come out by node id."""
    dist = {source: 0}
    heap = [(0, source)]
    settled = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in settled:
            continue
        settled.add(node)
        yield d, node
        for nxt, mm in adj.get(node, ()):
            nd = d + mm
            if nd < dist.get(nxt, INFINITY):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))


def one_to_many(adj: Adjacency, source: int, targets: Iterable[int]) -> Dict[int, int]:
    """Distances from source to every reachable target; stops once all are settled."""
    remaining = set(targets)
    found = {}
    if not remaining:
        return found
    for d, node in settle_order(adj, source):
        if node in remaining:
            found[node] = d
            remaining.discard(node)
            if not remaining:
                break
    return found


def nearest_targets(adj: Adjacency, source: int, targets: Iterable[int]) -> Optional[Tuple[int, List[int]]]:
    """Smallest distance to any target and every target at exactly that distance."""
    wanted = set(targets)
    if not wanted:
        return None
    best = None
    hits = []
    for d, node in settle_order(adj, source):
        if best is not None and d > best:
            break
        if node in wanted:
            best = d
            hits.append(node)
    if best is None:
        return None
    return best, sorted(hits)


def _walk_back(pred: Dict[int, int], node: int) -> List[int]:
    path = [node]
    while node in pred:
        node = pred[node]
        path.append(node)
    return path


def bidirectional_dijkstra(out_adj: Adjacency, in_adj: Adjacency, source: int, target: int) -> Tuple[int, List[int]]:
    """Exact shortest path by meeting forward and backward searches."""
    if source == target:
        return 0, [source]

    dist = ({source: 0}, {target: 0})
    pred: Tuple[Dict[int, int], Dict[int, int]] = ({}, {})
    settled = (set(), set())
    heaps = ([(0, source)], [(0, target)])
    adjs = (out_adj, in_adj)
    best = INFINITY
    meet = None

    while heaps[0] and heaps[1]:
        if heaps[0][0][0] + heaps[1][0][0] >= best:
            break
        side = 0 if heaps[0][0] <= heaps[1][0] else 1
        d, node = heapq.heappop(heaps[side])
        if node in settled[side]:
            continue
        settled[side].add(node)
        other = 1 - side
        for nxt, mm in adjs[side].get(node, ()):
            nd = d + mm
            if nd < dist[side].get(nxt, INFINITY):
                dist[side][nxt] = nd
                pred[side][nxt] = node
                heapq.heappush(heaps[side], (nd, nxt))
            if nxt in dist[other]:
                total = dist[side][nxt] + dist[other][nxt]
                if total < best:
                    best = total
                    meet = nxt

    if meet is None:
        raise NoRouteError(source, target)

    forward = _walk_back(pred[0], meet)
    forward.reverse()
    backward = _walk_back(pred[1], meet)
    return int(best), forward + backward[1:]
