"""
Named scenarios: the nominal runs of each system and the batch studies built on them.

Run presets point at the Boston data directory (`BIKESIM_BOSTON_DIR`) over
the week of 7 to 14 October 2019; pass `data` to run the same scenario on
other inputs.
"""
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

from django.conf import settings

from .config import ConfigError, RunConfig, build_config
from .sweep import SweepGroup, SweepSpec


logger = logging.getLogger(__name__)

BOSTON_WINDOW = {"t0": "2019-10-07T00:00:00", "t1": "2019-10-14T00:00:00"}

NOMINAL = {
    "sb-nominal": {
        "mode": "station", "fleet_size": 3500, "walk_radius": 300.0, "walking_speed": 5.0,
        "riding_speed": 10.2, "beta": 0.9, "min_bikes_docks": 3,
    },
    "dl-nominal": {
        "mode": "dockless", "fleet_size": 8000, "walk_radius": 300.0, "walking_speed": 5.0,
        "riding_speed": 10.2,
    },
    "au-nominal-nr": {
        "mode": "autonomous", "fleet_size": 1000, "autonomous_radius": 2000.0, "autonomous_speed": 8.0,
        "riding_speed": 10.2, "autonomy_km": 70.0, "recharge_time_h": 4.5, "min_level": 0.15,
        "rebalancing_scenario": "none",
    },
}
NOMINAL["au-nominal-ir"] = dict(NOMINAL["au-nominal-nr"], rebalancing_scenario="ideal")
NOMINAL["au-nominal-pr"] = dict(NOMINAL["au-nominal-nr"], rebalancing_scenario="predictive",
                                predictor="baseline-historical")

SYSTEMS = tuple(NOMINAL)

FLEET_SIZES = {
    "sb-nominal": [1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000, 5500],
    "dl-nominal": [2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 10000, 11000],
    "au-nominal-nr": [300, 500, 600, 700, 800, 1000, 1500, 2000, 2500, 3000],
}
FLEET_SIZES["au-nominal-ir"] = FLEET_SIZES["au-nominal-nr"]
FLEET_SIZES["au-nominal-pr"] = FLEET_SIZES["au-nominal-nr"]

SHARED_AXES = {
    "walk_radius": [100.0, 300.0, 500.0, 750.0, 1000.0, 1500.0],
    "walking_speed": [3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
    "riding_speed": [5.0, 8.0, 10.0, 12.0, 15.0, 20.0],
}
AUTONOMOUS_AXES = {
    "autonomous_radius": [500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0],
    "autonomous_speed": [1.0, 2.5, 5.0, 10.0, 15.0, 20.0],
    "riding_speed": SHARED_AXES["riding_speed"],
    "min_level": [0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
    "autonomy_km": [30.0, 50.0, 70.0, 90.0, 110.0, 130.0],
    "recharge_time_h": [0.5, 1.0, 2.0, 4.0, 6.0, 8.0],
}
APPENDIX_AXES = {
    "sb-nominal": dict(SHARED_AXES, beta=[0.0, 0.5, 0.8, 0.9, 0.98, 1.0], min_bikes_docks=[0, 1, 2, 3, 4, 5]),
    "dl-nominal": SHARED_AXES,
    "au-nominal-nr": AUTONOMOUS_AXES,
    "au-nominal-ir": AUTONOMOUS_AXES,
    "au-nominal-pr": {"autonomous_speed": AUTONOMOUS_AXES["autonomous_speed"]},
}


class UnknownPresetError(ConfigError):
    pass


def boston_data() -> Dict[str, Any]:
    directory = Path(settings.BIKESIM['BOSTON_DATA_DIR'])
    history = directory / "history.csv"
    return {
        "network": str(directory / "network.txt"),
        "stations": str(directory / "stations.csv"),
        "stations_schema": "canonical",
        "trips": str(directory / "trips.csv"),
        "trips_schema": "bluebikes",
        "history": str(history) if history.is_file() else "",
        **BOSTON_WINDOW,
    }


def nominal(name: str, data: Optional[Dict[str, Any]] = None, out=None) -> RunConfig:
    flat = {**boston_data(), **(data or {}), **NOMINAL[name]}
    flat["out"] = str(out or Path(settings.BIKESIM['DATA_DIR']) / "runs" / name)
    return build_config(flat, check_files=False)


def _same_fleet(size: int) -> Callable[..., SweepSpec]:
    def build(data=None, out=None) -> SweepSpec:
        out = Path(out or Path(settings.BIKESIM['DATA_DIR']) / "runs" / f"same-fleet-{size}")
        groups = [SweepGroup(nominal(s, data, out), None, [None], [size], label=s) for s in SYSTEMS]
        return SweepSpec(f"same-fleet-{size}", groups, [0], out)
    return build


def _level_of_service(data=None, out=None) -> SweepSpec:
    out = Path(out or Path(settings.BIKESIM['DATA_DIR']) / "runs" / "level-of-service-99")
    groups = [
        SweepGroup(nominal(s, data, out), None, [None], [FLEET_SIZES[s][0], FLEET_SIZES[s][-1]], label=s)
        for s in SYSTEMS
    ]
    return SweepSpec("level-of-service-99", groups, [0, 1, 2], out, target_served_pct=99.0)


def _appendix(data=None, out=None) -> SweepSpec:
    out = Path(out or Path(settings.BIKESIM['DATA_DIR']) / "runs" / "appendix-sweeps")
    groups = []
    for system, axes in APPENDIX_AXES.items():
        base = nominal(system, data, out)
        for axis, values in axes.items():
            groups.append(SweepGroup(base, axis, list(values), FLEET_SIZES[system], label=system))
    return SweepSpec("appendix-sweeps", groups, [0], out)


def _run_preset(name: str) -> Callable[..., RunConfig]:
    def build(data=None, out=None) -> RunConfig:
        return nominal(name, data, out)
    return build


PRESETS: Dict[str, Callable[..., Union[RunConfig, SweepSpec]]] = {
    **{name: _run_preset(name) for name in SYSTEMS},
    "same-fleet-2000": _same_fleet(2000),
    "same-fleet-3000": _same_fleet(3000),
    "level-of-service-99": _level_of_service,
    "appendix-sweeps": _appendix,
}


def preset(name: str, data: Optional[Dict[str, Any]] = None, out=None) -> Union[RunConfig, SweepSpec]:
    """
    The run configuration or sweep registered as `name`.

    `data` replaces data keys (network, stations, trips, requests, window)
    of the default Boston inputs.
    """
    if name not in PRESETS:
        raise UnknownPresetError(f"Unknown preset {name!r}; available presets: {', '.join(PRESETS)}")
    return PRESETS[name](data=data, out=out)
