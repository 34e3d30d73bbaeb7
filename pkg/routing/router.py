"""
Routing service used by the simulator.

Networks at or above the configured node count are answered from a
contraction hierarchy; smaller ones use plain bidirectional Dijkstra.
Both give identical distances.
"""
import logging
import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

from django.conf import settings

from geo.network import RoadNetwork, network_digest

from .contraction import ContractedGraph, preprocess, query
from .dijkstra import bidirectional_dijkstra, nearest_targets, one_to_many


logger = logging.getLogger(__name__)


def travel_time(length_m: float, speed_kmh: float) -> float:
    """Seconds needed to cover `length_m` metres at `speed_kmh`."""
    if speed_kmh <= 0:
        raise ValueError(f"Speed must be positive, got {speed_kmh} km/h")
    return length_m / (speed_kmh * 1000.0 / 3600.0)


@dataclass(frozen=True)
class Route:
    nodes: Tuple[int, ...]
    length_mm: int
    duration: Optional[float] = None

    @property
    def length(self) -> float:
        return self.length_mm / 1000.0

    def at_speed(self, speed_kmh: float) -> "Route":
        return Route(self.nodes, self.length_mm, travel_time(self.length, speed_kmh))


def shortest_path(cg: ContractedGraph, s: int, t: int) -> Route:
    length_mm, nodes = query(cg, s, t)
    return Route(tuple(nodes), length_mm)


def load_or_preprocess(net: RoadNetwork, cache_dir=None) -> ContractedGraph:
    """Contract `net`, reusing an on-disk hierarchy keyed by the network's content hash."""
    if cache_dir is None:
        return preprocess(net)
    cache_dir = Path(cache_dir)
    path = cache_dir / f"ch-{network_digest(net)}.pickle"
    if path.is_file():
        try:
            with path.open("rb") as fh:
                shortcuts, level = pickle.load(fh)
            logger.info(f"Loaded contracted graph from {path.name}")
            return ContractedGraph.assemble(net, shortcuts, level)
        except (OSError, pickle.UnpicklingError, ValueError, EOFError) as e:
            logger.warning(f"Ignoring unreadable contraction cache {path}: {e}")

    cg = preprocess(net)
    cache_dir.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with tmp.open("wb") as fh:
        pickle.dump((cg.shortcuts, cg.level), fh, protocol=pickle.HIGHEST_PROTOCOL)
    tmp.replace(path)
    return cg


class Router:
    def __init__(self, net: RoadNetwork, contracted: Optional[ContractedGraph] = None):
        self.net = net
        self.contracted = contracted

    @classmethod
    def for_network(cls, net: RoadNetwork, cache_dir=None, min_ch_nodes: Optional[int] = None) -> "Router":
        if min_ch_nodes is None:
            min_ch_nodes = settings.BIKESIM['ROUTING_CH_MIN_NODES']
        if len(net) < min_ch_nodes:
            logger.info(f"Network has {len(net)} nodes; using plain bidirectional Dijkstra")
            return cls(net)
        return cls(net, load_or_preprocess(net, cache_dir))

    def route(self, s: int, t: int) -> Route:
        if self.contracted is not None:
            return shortest_path(self.contracted, s, t)
        length_mm, nodes = bidirectional_dijkstra(self.net.out_adj, self.net.in_adj, s, t)
        return Route(tuple(nodes), length_mm)

    def distance_mm(self, s: int, t: int) -> int:
        return self.route(s, t).length_mm

    def distances_from(self, s: int, targets: Iterable[int]) -> Dict[int, int]:
        return one_to_many(self.net.out_adj, s, targets)

    def distances_to(self, t: int, sources: Iterable[int]) -> Dict[int, int]:
        return one_to_many(self.net.in_adj, t, sources)

    def nearest_of(self, node: int, candidates: Iterable[int], towards: bool = False) -> Optional[Tuple[int, List[int]]]:
        """
        Closest candidate nodes by road distance.

        With `towards` the distance is measured from each candidate to
        `node` (a bike driving to a user), otherwise from `node` outward.
        """
        adj = self.net.in_adj if towards else self.net.out_adj
        return nearest_targets(adj, node, candidates)
