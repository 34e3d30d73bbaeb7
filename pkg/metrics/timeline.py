"""
Binned activity timeline of a run, for plotting.

Activity and state columns hold the time-averaged number of users (or
bikes) in that activity during the bin; `served` and `unserved` count the
trips that finished in the bin.
"""
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from modes.entities import BikeState, UserActivity

from .eventlog import RUN_END, EventLogError
from .kpis import open_log


logger = logging.getLogger(__name__)

USER_COLUMNS = [f"users_{a.value}" for a in UserActivity]
BIKE_COLUMNS = [f"bikes_{s.value}" for s in BikeState]


def _spread(totals: np.ndarray, start: int, end: int, bin_ms: int):
    """Add the overlap of [start, end) with every bin, in milliseconds."""
    if end <= start:
        return
    first, last = start // bin_ms, (end - 1) // bin_ms
    for b in range(first, last + 1):
        lo, hi = max(start, b * bin_ms), min(end, (b + 1) * bin_ms)
        totals[b] += hi - lo


def timeline(source, bin_s: float) -> pd.DataFrame:
    if bin_s <= 0:
        raise ValueError(f"Timeline bin must be positive, got {bin_s} s")
    bin_ms = int(round(bin_s * 1000))
    _, records = open_log(source)

    intervals: List[Tuple[str, int, int]] = []
    finished: Dict[str, List[int]] = defaultdict(list)
    user_open: Dict[str, Tuple[int, str]] = {}
    bike_open: Dict[str, Tuple[int, str]] = {}
    end_time = None

    for rec in records:
        kind = rec.transition
        if kind == "user_state":
            if rec.agent in user_open:
                since, activity = user_open[rec.agent]
                intervals.append((f"users_{activity}", since, rec.time))
            user_open[rec.agent] = (rec.time, rec.payload["activity"])
        elif kind in ("user_served", "user_unserved"):
            if rec.agent in user_open:
                since, activity = user_open.pop(rec.agent)
                intervals.append((f"users_{activity}", since, rec.time))
            finished["served" if kind == "user_served" else "unserved"].append(rec.time)
        elif kind == "bike_state":
            if rec.agent in bike_open:
                since, state = bike_open[rec.agent]
                intervals.append((f"bikes_{state}", since, rec.time))
            bike_open[rec.agent] = (rec.time, rec.payload["state"])
        elif kind == RUN_END:
            end_time = rec.time

    if end_time is None:
        raise EventLogError("Event log is truncated: no run-end marker")
    for since, state in bike_open.values():
        intervals.append((f"bikes_{state}", since, end_time))
    if user_open:
        logger.warning(f"{len(user_open)} users still active at run end")
        for since, activity in user_open.values():
            intervals.append((f"users_{activity}", since, end_time))

    n_bins = max(1, -(-end_time // bin_ms))
    columns = USER_COLUMNS + BIKE_COLUMNS
    occupancy = {c: np.zeros(n_bins, dtype=np.int64) for c in columns}
    for column, start, end in intervals:
        _spread(occupancy[column], start, end, bin_ms)

    frame = pd.DataFrame({c: occupancy[c] / bin_ms for c in columns})
    for column in ("served", "unserved"):
        bins = np.minimum(np.asarray(finished[column], dtype=np.int64) // bin_ms, n_bins - 1)
        frame[column] = np.bincount(bins, minlength=n_bins)
    frame.insert(0, "bin_start_s", np.arange(n_bins) * bin_ms / 1000.0)
    return frame


def peak_share(frame: pd.DataFrame, column: str, total: int) -> float:
    """Largest per-bin average of `column` as a fraction of `total`."""
    if total <= 0 or frame.empty:
        return 0.0
    return float(frame[column].max()) / total


def write_timeline(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.4f", lineterminator="\n")
    return path
