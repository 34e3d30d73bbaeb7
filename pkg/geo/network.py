"""
Road network loading, node lookup and the on-disk network cache.

Lengths are carried as integer millimetres so that routing results compare
exactly across algorithms.
"""
import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import osmium
from scipy.spatial import cKDTree


logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6371008.8

CACHE_HEADER = "bikesim-network v1"

# Bicycles are barred from motorways; everything else tagged highway is kept.
DEFAULT_HIGHWAY_DENY = frozenset({"motorway", "motorway_link"})

ONEWAY_FORWARD = {"yes", "true", "1"}
ONEWAY_REVERSE = {"-1", "reverse"}


class NetworkLoadError(ValueError):
    pass


@dataclass(frozen=True)
class Location:
    lon: float
    lat: float

    def __post_init__(self):
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"Longitude out of range: {self.lon}")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"Latitude out of range: {self.lat}")


@dataclass(frozen=True)
class BBox:
    west: float
    south: float
    east: float
    north: float

    def __post_init__(self):
        if self.west >= self.east or self.south >= self.north:
            raise NetworkLoadError(f"Degenerate bounding box: {self}")

    @classmethod
    def parse(cls, text: str) -> "BBox":
        """Parse `west,south,east,north`."""
        try:
            west, south, east, north = (float(part) for part in text.split(","))
        except ValueError as exc:
            raise NetworkLoadError(f"Bounding box must be west,south,east,north: {text!r}") from exc
        return cls(west, south, east, north)

    def contains(self, lon: float, lat: float) -> bool:
        return self.west <= lon <= self.east and self.south <= lat <= self.north

    def as_text(self) -> str:
        return f"{self.west},{self.south},{self.east},{self.north}"


def haversine_m(a: Location, b: Location) -> float:
    return float(haversine_many(a.lon, a.lat, np.array([b.lon]), np.array([b.lat]))[0])


def haversine_many(lon: float, lat: float, lons: np.ndarray, lats: np.ndarray) -> np.ndarray:
    """Great-circle distances in metres from one point to many."""
    lat1 = math.radians(lat)
    lat2 = np.radians(lats)
    dlat = lat2 - lat1
    dlon = np.radians(lons) - math.radians(lon)
    h = np.sin(dlat / 2.0) ** 2 + math.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(h, 1.0)))


def segment_length_mm(a: Location, b: Location) -> int:
    # Coincident way nodes still need a positive edge weight.
    return max(1, int(round(haversine_m(a, b) * 1000.0)))


class LocalProjection:
    """Equirectangular projection to metres around a reference point."""

    def __init__(self, lon0: float, lat0: float):
        self.lon0 = lon0
        self.lat0 = lat0
        self.kx = math.radians(1.0) * EARTH_RADIUS_M * math.cos(math.radians(lat0))
        self.ky = math.radians(1.0) * EARTH_RADIUS_M

    def to_xy(self, lons, lats) -> Tuple[np.ndarray, np.ndarray]:
        lons = np.asarray(lons, dtype=float)
        lats = np.asarray(lats, dtype=float)
        return (lons - self.lon0) * self.kx, (lats - self.lat0) * self.ky

    def to_lonlat(self, x: float, y: float) -> Location:
        return Location(self.lon0 + x / self.kx, self.lat0 + y / self.ky)


class PointIndex:
    """
    KD-tree over a set of labelled points.

    Candidates come from the projected tree; the final ranking always uses
    the exact great-circle distance with ties broken by the smaller id.
    """

    def __init__(self, ids: Sequence[int], lons: Sequence[float], lats: Sequence[float]):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.lons = np.asarray(lons, dtype=float)
        self.lats = np.asarray(lats, dtype=float)
        if len(self.ids):
            self.projection = LocalProjection(float(self.lons.mean()), float(self.lats.mean()))
            x, y = self.projection.to_xy(self.lons, self.lats)
            self.tree = cKDTree(np.column_stack([x, y]))
        else:
            self.projection = None
            self.tree = None

    def __len__(self):
        return len(self.ids)

    def _ranked(self, p: Location, positions) -> List[Tuple[float, int]]:
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size == 0:
            return []
        dists = haversine_many(p.lon, p.lat, self.lons[positions], self.lats[positions])
        return sorted(zip(dists.tolist(), self.ids[positions].tolist()))

    def nearest(self, p: Location) -> Tuple[float, int]:
        if self.tree is None:
            raise ValueError("Nearest lookup on an empty index")
        k = min(8, len(self.ids))
        x, y = self.projection.to_xy(p.lon, p.lat)
        _, positions = self.tree.query([float(x), float(y)], k=k)
        positions = np.atleast_1d(positions)
        ranked = self._ranked(p, positions)
        best = ranked[0]
        # Widen the candidate set when the k-th candidate could still tie or beat.
        if k < len(self.ids):
            within = self.tree.query_ball_point([float(x), float(y)], r=best[0] * 1.01 + 1.0)
            ranked = self._ranked(p, within)
            best = ranked[0]
        return best

    def within(self, p: Location, radius_m: float) -> List[Tuple[float, int]]:
        """All points within radius (great-circle), sorted by (distance, id)."""
        if self.tree is None or radius_m < 0:
            return []
        x, y = self.projection.to_xy(p.lon, p.lat)
        positions = self.tree.query_ball_point([float(x), float(y)], r=radius_m * 1.01 + 1.0)
        return [(d, i) for d, i in self._ranked(p, positions) if d <= radius_m]

    def by_distance(self, p: Location) -> List[Tuple[float, int]]:
        return self._ranked(p, np.arange(len(self.ids)))


@dataclass
class RoadNetwork:
    """Directed road graph with integer millimetre edge lengths."""

    node_ids: List[int]
    coords: Dict[int, Tuple[float, float]]
    edges: List[Tuple[int, int, int]]
    out_adj: Dict[int, List[Tuple[int, int]]] = field(repr=False)
    in_adj: Dict[int, List[Tuple[int, int]]] = field(repr=False)

    @classmethod
    def from_edges(cls, nodes: Dict[int, Tuple[float, float]],
                   edges: Iterable[Tuple[int, int, int]]) -> "RoadNetwork":
        best: Dict[Tuple[int, int], int] = {}
        for u, v, length_mm in edges:
            if u not in nodes or v not in nodes:
                raise NetworkLoadError(f"Edge {u}->{v} references an unknown node")
            if u == v:
                continue
            if length_mm <= 0:
                raise NetworkLoadError(f"Edge {u}->{v} has non-positive length {length_mm}")
            key = (int(u), int(v))
            if key not in best or length_mm < best[key]:
                best[key] = int(length_mm)

        node_ids = sorted(int(n) for n in nodes)
        coords = {n: (float(nodes[n][0]), float(nodes[n][1])) for n in node_ids}
        edge_list = sorted((u, v, mm) for (u, v), mm in best.items())
        out_adj: Dict[int, List[Tuple[int, int]]] = {n: [] for n in node_ids}
        in_adj: Dict[int, List[Tuple[int, int]]] = {n: [] for n in node_ids}
        for u, v, mm in edge_list:
            out_adj[u].append((v, mm))
            in_adj[v].append((u, mm))
        return cls(node_ids=node_ids, coords=coords, edges=edge_list, out_adj=out_adj, in_adj=in_adj)

    def __len__(self):
        return len(self.node_ids)

    @property
    def nodes(self) -> List[Tuple[int, Location]]:
        return [(n, self.location(n)) for n in self.node_ids]

    def location(self, node_id: int) -> Location:
        lon, lat = self.coords[node_id]
        return Location(lon, lat)

    def edge_length_mm(self, u: int, v: int) -> Optional[int]:
        for w, mm in self.out_adj.get(u, ()):
            if w == v:
                return mm
        return None

    @cached_property
    def node_index(self) -> PointIndex:
        lons = [self.coords[n][0] for n in self.node_ids]
        lats = [self.coords[n][1] for n in self.node_ids]
        return PointIndex(self.node_ids, lons, lats)

    @cached_property
    def bounds(self) -> BBox:
        lons = [c[0] for c in self.coords.values()]
        lats = [c[1] for c in self.coords.values()]
        # Single points get a tiny box so the projection stays defined.
        pad = 1e-6
        return BBox(min(lons) - pad, min(lats) - pad, max(lons) + pad, max(lats) + pad)

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.node_ids)
        graph.add_weighted_edges_from(self.edges, weight="length_mm")
        return graph

    def subgraph(self, keep: Iterable[int]) -> "RoadNetwork":
        keep = set(keep)
        nodes = {n: self.coords[n] for n in self.node_ids if n in keep}
        edges = [(u, v, mm) for u, v, mm in self.edges if u in keep and v in keep]
        return RoadNetwork.from_edges(nodes, edges)


def nearest_node(net: RoadNetwork, p: Location) -> int:
    if not len(net):
        raise NetworkLoadError("Nearest node lookup on an empty network")
    return net.node_index.nearest(p)[1]


def nodes_within(net: RoadNetwork, p: Location, radius_m: float) -> List[int]:
    return [node for _, node in net.node_index.within(p, radius_m)]


def largest_strong_component(net: RoadNetwork) -> RoadNetwork:
    """Keep the largest strongly connected component; ties go to the smaller min id."""
    if not len(net):
        return net
    components = sorted(nx.strongly_connected_components(net.to_networkx()),
                        key=lambda c: (-len(c), min(c)))
    keep = components[0]
    pruned = len(net) - len(keep)
    share = len(keep) / len(net)
    if share < 0.95:
        logger.warning(f"Largest strongly connected component holds only {share:.1%} of nodes")
    logger.info(f"Pruned {pruned} node(s) outside the largest strongly connected component")
    return net.subgraph(keep)


class HighwayGraphHandler(osmium.SimpleHandler):
    """Collects directed segments from `highway` ways inside a bounding box."""

    def __init__(self, bbox: BBox, allow: Optional[Iterable[str]] = None,
                 deny: Iterable[str] = DEFAULT_HIGHWAY_DENY):
        super().__init__()
        self.bbox = bbox
        self.allow = set(allow) if allow else None
        self.deny = set(deny)
        self.nodes: Dict[int, Tuple[float, float]] = {}
        self.edges: List[Tuple[int, int, int]] = []
        self.ways_seen = 0
        self.ways_used = 0

    def accepts(self, highway: Optional[str]) -> bool:
        if not highway:
            return False
        if self.allow is not None:
            return highway in self.allow
        return highway not in self.deny

    def way(self, w):
        highway = w.tags.get("highway")
        if not self.accepts(highway):
            return
        self.ways_seen += 1

        oneway = w.tags.get("oneway", "no")
        forward = True
        backward = oneway not in ONEWAY_FORWARD and w.tags.get("junction") != "roundabout"
        if oneway in ONEWAY_REVERSE:
            forward, backward = False, True

        points = []
        for n in w.nodes:
            if not n.location.valid():
                points.append(None)
                continue
            lon, lat = n.location.lon, n.location.lat
            points.append((n.ref, lon, lat) if self.bbox.contains(lon, lat) else None)

        used = False
        for a, b in zip(points, points[1:]):
            if a is None or b is None or a[0] == b[0]:
                continue
            self.nodes[a[0]] = (a[1], a[2])
            self.nodes[b[0]] = (b[1], b[2])
            mm = segment_length_mm(Location(a[1], a[2]), Location(b[1], b[2]))
            if forward:
                self.edges.append((a[0], b[0], mm))
            if backward:
                self.edges.append((b[0], a[0], mm))
            used = True
        if used:
            self.ways_used += 1


def load_network(osm_extract, bbox: BBox, allow: Optional[Iterable[str]] = None,
                 deny: Iterable[str] = DEFAULT_HIGHWAY_DENY) -> RoadNetwork:
    """
    Build the routable network from an OSM XML or PBF extract.

    Only the largest strongly connected component inside `bbox` is kept.
    """
    path = Path(osm_extract)
    if not path.is_file():
        raise NetworkLoadError(f"OSM extract not found: {path}")

    handler = HighwayGraphHandler(bbox, allow=allow, deny=deny)
    try:
        handler.apply_file(str(path), locations=True)
    except (RuntimeError, ValueError, OSError) as exc:
        raise NetworkLoadError(f"Could not read OSM extract {path}: {exc}") from exc

    if handler.ways_seen == 0:
        raise NetworkLoadError(f"No highway ways found in {path}")
    if not handler.nodes:
        raise NetworkLoadError(f"No highway nodes of {path} fall inside bbox {bbox.as_text()}")

    raw = RoadNetwork.from_edges(handler.nodes, handler.edges)
    net = largest_strong_component(raw)
    if len(net) == 0 or not net.edges:
        raise NetworkLoadError("Road network is empty after pruning")

    logger.info(
        f"Loaded road network from {path.name}: {handler.ways_used} ways, "
        f"{len(net)} nodes, {len(net.edges)} directed edges"
    )
    return net


def serialize_network(net: RoadNetwork) -> str:
    lines = [CACHE_HEADER, f"nodes {len(net.node_ids)} edges {len(net.edges)}"]
    for n in net.node_ids:
        lon, lat = net.coords[n]
        lines.append(f"N {n} {lon:.7f} {lat:.7f}")
    for u, v, mm in net.edges:
        lines.append(f"E {u} {v} {mm}")
    return "\n".join(lines) + "\n"


def network_digest(net: RoadNetwork) -> str:
    return hashlib.sha256(serialize_network(net).encode("utf-8")).hexdigest()


def save_network(net: RoadNetwork, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_network(net), encoding="utf-8")
    return path


def parse_network(text: str) -> RoadNetwork:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CACHE_HEADER:
        raise NetworkLoadError(f"Not a network cache (expected header {CACHE_HEADER!r})")
    nodes: Dict[int, Tuple[float, float]] = {}
    edges: List[Tuple[int, int, int]] = []
    for lineno, line in enumerate(lines[2:], start=3):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "N":
                nodes[int(parts[1])] = (float(parts[2]), float(parts[3]))
            elif parts[0] == "E":
                edges.append((int(parts[1]), int(parts[2]), int(parts[3])))
            else:
                raise ValueError(parts[0])
        except (IndexError, ValueError) as exc:
            raise NetworkLoadError(f"Malformed network cache line {lineno}: {line!r}") from exc
    if not nodes:
        raise NetworkLoadError("Network cache holds no nodes")
    return RoadNetwork.from_edges(nodes, edges)


def load_network_cache(path) -> RoadNetwork:
    path = Path(path)
    if not path.is_file():
        raise NetworkLoadError(f"Network cache not found: {path}")
    net = parse_network(path.read_text(encoding="utf-8"))
    logger.info(f"Read network cache {path.name}: {len(net)} nodes, {len(net.edges)} edges")
    return net
