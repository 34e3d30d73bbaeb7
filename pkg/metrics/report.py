import logging
from pathlib import Path
from typing import Dict

from .kpis import KpiReport


logger = logging.getLogger(__name__)

EMPTY = "-"

SECTIONS = (
    ("Demand", ("demand", "served", "unserved", "served_pct", "unserved_pct", "unserved_by_reason_pct",
                "retry_limit_unserved")),
    ("Trip time (min)", ("avg_trip_min", "avg_walk_origin_min", "avg_wait_min", "avg_ride_min",
                         "avg_walk_destination_min", "avg_wait_or_walk_min", "wait_or_walk_over_10_pct",
                         "wait_or_walk_over_15_pct")),
    ("Fleet", ("mode", "fleet_size", "days", "bikes_used_pct", "trips_per_bike_day", "rebalanced_bikes",
               "total_charges", "charges_per_day", "stranded_bikes")),
    ("Distance and time", ("vkt_total_km", "vkt_per_bike_km", "vkt_split_pct", "time_split_pct")),
)


def format_value(value) -> str:
    if value is None:
        return EMPTY
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def render_table(report: KpiReport) -> str:
    flat = report.flat()
    width = max(len(k) for k in flat)
    lines = []
    for title, names in SECTIONS:
        lines.append(title)
        lines.append("-" * len(title))
        for key, value in flat.items():
            if key.split(".", 1)[0] in names:
                lines.append(f"  {key.ljust(width)}  {format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def render_kv(report: KpiReport) -> str:
    return "".join(f"{key} = {format_value(value)}\n" for key, value in report.flat().items())


def read_kv(path) -> Dict[str, str]:
    values = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def write_report(report: KpiReport, directory) -> Dict[str, Path]:
    """Write `report.txt` and `report.kv` into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"txt": directory / "report.txt", "kv": directory / "report.kv"}
    paths["txt"].write_text(render_table(report), encoding="utf-8", newline="\n")
    paths["kv"].write_text(render_kv(report), encoding="utf-8", newline="\n")
    logger.info(f"KPI report written to {directory}")
    return paths
