"""
Hexagonal partition of the service area.

Pointy-top hexagons in axial (q, r) coordinates over an equirectangular
projection centred on the network bounds. Only cells holding at least one
routable node are kept; cell ids follow the sorted (q, r) order.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .network import LocalProjection, Location, RoadNetwork, nearest_node


logger = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)

# Edge length comparable to an H3 resolution 8 cell.
DEFAULT_RESOLUTION_M = 461.35

MAX_CELLS = 100_000


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class HexCell:
    cell_id: int
    q: int
    r: int
    centroid: Location
    boundary: Tuple[Location, ...]


@dataclass
class GridIndex:
    resolution: float
    projection: LocalProjection
    cells: List[HexCell]
    node_to_cell: Dict[int, int]
    centroid_nodes: List[int]
    _by_axial: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_axial = {(c.q, c.r): c.cell_id for c in self.cells}

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def cell_of_node(self, node_id: int) -> int:
        return self.node_to_cell[node_id]

    def cell_of_location(self, p: Location) -> Optional[int]:
        """Cell covering an arbitrary point, or None outside the kept cells."""
        x, y = self.projection.to_xy(p.lon, p.lat)
        q, r = axial_round(*xy_to_axial(float(x), float(y), self.resolution))
        return self._by_axial.get((q, r))


def xy_to_axial(x, y, size):
    q = (SQRT3 / 3.0 * x - y / 3.0) / size
    r = (2.0 / 3.0 * y) / size
    return q, r


def axial_round(q, r):
    """Cube rounding; works on scalars and numpy arrays alike."""
    x = np.asarray(q, dtype=float)
    z = np.asarray(r, dtype=float)
    y = -x - z
    rx, ry, rz = np.rint(x), np.rint(y), np.rint(z)
    dx, dy, dz = np.abs(rx - x), np.abs(ry - y), np.abs(rz - z)
    fix_x = (dx > dy) & (dx > dz)
    fix_z = ~fix_x & ~(dy > dz)
    rx = np.where(fix_x, -ry - rz, rx)
    rz = np.where(fix_z, -rx - ry, rz)
    if np.ndim(rx) == 0:
        return int(rx), int(rz)
    return rx.astype(np.int64), rz.astype(np.int64)


def axial_to_xy(q: int, r: int, size: float) -> Tuple[float, float]:
    return size * (SQRT3 * q + SQRT3 / 2.0 * r), size * 1.5 * r


def hexagon_boundary(projection: LocalProjection, cx: float, cy: float, size: float) -> Tuple[Location, ...]:
    corners = []
    for i in range(6):
        angle = math.radians(60 * i - 30)
        corners.append(projection.to_lonlat(cx + size * math.cos(angle), cy + size * math.sin(angle)))
    return tuple(corners)


def build_grid(net: RoadNetwork, resolution: float = DEFAULT_RESOLUTION_M) -> GridIndex:
    """Partition the network nodes into hexagonal cells of the given edge length (metres)."""
    if not len(net):
        raise GridError("Cannot build a grid over an empty network")
    if not resolution or resolution <= 0 or not math.isfinite(resolution):
        raise GridError(f"Grid resolution must be a positive length, got {resolution}")

    bounds = net.bounds
    projection = LocalProjection((bounds.west + bounds.east) / 2.0, (bounds.south + bounds.north) / 2.0)
    width, height = projection.to_xy([bounds.east], [bounds.north])
    covering = (2 * abs(float(width[0])) * 2 * abs(float(height[0]))) / (1.5 * SQRT3 * resolution ** 2)
    if covering > MAX_CELLS:
        raise GridError(f"Resolution {resolution} m needs about {covering:.0f} cells to tile the area (max {MAX_CELLS})")

    lons = np.array([net.coords[n][0] for n in net.node_ids])
    lats = np.array([net.coords[n][1] for n in net.node_ids])
    xs, ys = projection.to_xy(lons, lats)
    qs, rs = axial_round(*xy_to_axial(xs, ys, resolution))

    occupied = sorted(set(zip(qs.tolist(), rs.tolist())))
    if not occupied or len(occupied) > MAX_CELLS:
        raise GridError(f"Resolution {resolution} m yields {len(occupied)} cells (allowed 1..{MAX_CELLS})")

    cell_ids = {axial: i for i, axial in enumerate(occupied)}
    cells = []
    centroid_nodes = []
    for (q, r), cell_id in cell_ids.items():
        cx, cy = axial_to_xy(q, r, resolution)
        centroid = projection.to_lonlat(cx, cy)
        cells.append(HexCell(cell_id, q, r, centroid, hexagon_boundary(projection, cx, cy, resolution)))
        centroid_nodes.append(nearest_node(net, centroid))

    node_to_cell = {
        node: cell_ids[(q, r)] for node, q, r in zip(net.node_ids, qs.tolist(), rs.tolist())
    }
    logger.info(f"Hex grid at {resolution:.2f} m: {len(cells)} cells over {len(net)} nodes")
    return GridIndex(resolution, projection, cells, node_to_cell, centroid_nodes)


def cell_cost_matrix(grid: GridIndex, router) -> np.ndarray:
    """
    Road distance in metres between the nodes nearest each cell centroid.

    Unreachable pairs are +inf so the transportation problem drops their arcs.
    """
    n = grid.cell_count
    cost = np.full((n, n), np.inf)
    targets = set(grid.centroid_nodes)
    for i, source in enumerate(grid.centroid_nodes):
        reached = router.distances_from(source, targets)
        for j, target in enumerate(grid.centroid_nodes):
            if target in reached:
                cost[i, j] = reached[target] / 1000.0
        cost[i, i] = 0.0
    return cost
