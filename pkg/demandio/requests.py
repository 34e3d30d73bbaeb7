"""
Canonical request file: the replay input of a run.

One request per line, `id,t,o_lon,o_lat,d_lon,d_lat`, where `t` is the
departure in seconds from the start of the simulation window.
"""
import logging
from pathlib import Path
from typing import List, Sequence

import pandas as pd

from engine.events import MS_PER_SECOND, to_ms
from geo.network import Location, RoadNetwork
from modes.entities import UserRequest

from .scatter import snap_points
from .trips import DemandDataError


logger = logging.getLogger(__name__)

REQUEST_COLUMNS = ["id", "t", "o_lon", "o_lat", "d_lon", "d_lat"]


def write_requests(path, requests: Sequence[UserRequest]) -> Path:
    frame = pd.DataFrame({
        "id": [r.id for r in requests],
        "t": [r.departure / MS_PER_SECOND for r in requests],
        "o_lon": [r.origin.lon for r in requests],
        "o_lat": [r.origin.lat for r in requests],
        "d_lon": [r.destination.lon for r in requests],
        "d_lat": [r.destination.lat for r in requests],
    }, columns=REQUEST_COLUMNS)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.7f", lineterminator="\n")
    logger.info(f"Wrote {len(frame)} requests to {path}")
    return path


def read_request_frame(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DemandDataError(f"Request file not found: {path}")
    frame = pd.read_csv(path)
    if list(frame.columns) != REQUEST_COLUMNS:
        raise DemandDataError(f"Request file {path.name} must have columns {','.join(REQUEST_COLUMNS)}")
    if frame.isna().any().any():
        raise DemandDataError(f"Request file {path.name} has blank fields")
    if frame["id"].duplicated().any():
        raise DemandDataError(f"Duplicate request id {frame['id'][frame['id'].duplicated()].iloc[0]} in {path.name}")
    return frame.sort_values(["t", "id"], kind="mergesort")


def read_requests(path, net: RoadNetwork, allow_negative: bool = False) -> List[UserRequest]:
    """
    Requests snapped onto `net`, ordered by departure then id.

    History files hold trips from before the window, so their times are
    negative; pass `allow_negative` for those.
    """
    frame = read_request_frame(path)
    if not allow_negative and (frame["t"] < 0).any():
        raise DemandDataError(f"Request file {Path(path).name} has departures before the window start")
    try:
        origins = [Location(x, y) for x, y in zip(frame["o_lon"], frame["o_lat"])]
        destinations = [Location(x, y) for x, y in zip(frame["d_lon"], frame["d_lat"])]
    except ValueError as e:
        raise DemandDataError(f"Request file {Path(path).name}: {e}") from e

    origin_nodes, far_o = snap_points(net, origins)
    destination_nodes, far_d = snap_points(net, destinations)
    if far_o + far_d:
        logger.warning(f"{far_o + far_d} request endpoints snapped more than 500 m")

    return [
        UserRequest(id=int(uid), origin=o, destination=d, departure=to_ms(float(t)),
                    origin_node=on, destination_node=dn)
        for uid, t, o, d, on, dn in zip(frame["id"], frame["t"], origins, destinations,
                                        origin_nodes, destination_nodes)
    ]
