"""
Run configuration files.

A config file is INI-style: sections `[run]`, `[data]`, `[fleet]`,
`[autonomous]`, `[battery]` and `[rebalance]` holding `key = value` lines.
Only the mode, the window, the fleet size and the data files are required;
every other key takes its nominal value. `BIKESIM_SEED` and `BIKESIM_OUT`
in the environment override the seed and the output directory.
"""
import configparser
import hashlib
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from decouple import config

from engine.events import to_ms
from modes.config import BatteryModel, FleetConfigError, Mode, ModeConfig, RebalancingScenario

from .serializers import DATA_FILES, RunConfigSerializer


logger = logging.getLogger(__name__)

SECTIONS = {
    "run": ("mode", "seed", "out", "t0", "t1"),
    "data": ("network", "stations", "stations_schema", "requests", "trips", "trips_schema",
             "scatter_radius", "history", "forecast_file"),
    "fleet": ("fleet_size", "walk_radius", "walking_speed", "riding_speed", "beta", "min_bikes_docks",
              "max_attempts"),
    "autonomous": ("autonomous_speed", "autonomous_radius", "rebalancing_scenario", "preempt_rebalancing"),
    "battery": ("autonomy_km", "recharge_time_h", "min_level"),
    "rebalance": ("predictor", "history_weeks", "W", "P", "T", "grid_resolution", "slack_cost"),
}
KEY_SECTION = {key: section for section, keys in SECTIONS.items() for key in keys}

BATTERY_KEYS = SECTIONS["battery"]
MODE_KEYS = tuple(k for s in ("fleet", "autonomous", "rebalance") for k in SECTIONS[s])

# Keys a sweep may vary; everything that changes behaviour but not the data.
PARAMETERS = MODE_KEYS + BATTERY_KEYS + ("scatter_radius",)


class ConfigError(ValueError):
    def __init__(self, message: str, errors: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.errors = errors or {}


def _format_errors(errors: Dict[str, Any]) -> str:
    parts = []
    for name, messages in errors.items():
        if not isinstance(messages, (list, tuple)):
            messages = [messages]
        parts.append(f"{name}: {' '.join(str(m) for m in messages)}")
    return "Invalid run configuration: " + "; ".join(parts)


def _text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (Mode, RebalancingScenario)):
        return value.value
    if isinstance(value, datetime):
        return value.isoformat()
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    mode: Mode
    mode_config: ModeConfig
    t0: datetime
    t1: datetime
    seed: int = 0
    out: Path = Path("runs/latest")
    network: Optional[Path] = None
    stations: Optional[Path] = None
    stations_schema: str = "canonical"
    requests: Optional[Path] = None
    trips: Optional[Path] = None
    trips_schema: str = "bluebikes"
    scatter_radius: float = 300.0
    history: Optional[Path] = None
    forecast_file: Optional[Path] = None

    @property
    def horizon_ms(self) -> int:
        return to_ms((self.t1 - self.t0).total_seconds())

    @property
    def fleet_size(self) -> int:
        return self.mode_config.fleet_size

    def as_flat(self) -> Dict[str, Any]:
        flat = {
            "mode": self.mode.value,
            "seed": self.seed,
            "out": str(self.out),
            "t0": self.t0.isoformat(),
            "t1": self.t1.isoformat(),
            "stations_schema": self.stations_schema,
            "trips_schema": self.trips_schema,
            "scatter_radius": self.scatter_radius,
        }
        for name in DATA_FILES:
            path = getattr(self, name)
            flat[name] = str(path) if path else ""
        for name in MODE_KEYS:
            flat[name] = getattr(self.mode_config, name)
        for name in BATTERY_KEYS:
            flat[name] = getattr(self.mode_config.battery, name)
        return flat

    def with_params(self, check_files: bool = False, **changes) -> "RunConfig":
        """A copy with some keys replaced, validated like a freshly read file."""
        unknown = set(changes) - set(KEY_SECTION)
        if unknown:
            raise ConfigError(f"Unknown configuration keys: {', '.join(sorted(unknown))}")
        return build_config({**self.as_flat(), **changes}, check_files=check_files)

    def to_ini(self) -> str:
        flat = self.as_flat()
        lines = []
        for section, keys in SECTIONS.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {_text(flat[key])}".rstrip() for key in keys)
            lines.append("")
        return "\n".join(lines)

    def config_hash(self) -> str:
        """Digest of everything that determines the run's outcome; the output directory is left out."""
        flat = self.as_flat()
        flat.pop("out")
        text = "\n".join(f"{k}={_text(flat[k])}" for k in sorted(flat))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_config(flat: Dict[str, Any], check_files: bool = True) -> RunConfig:
    data = {k: v for k, v in flat.items() if v is not None and v != ""}
    serializer = RunConfigSerializer(data=data, context={"check_files": check_files})
    if not serializer.is_valid():
        raise ConfigError(_format_errors(serializer.errors), serializer.errors)
    v = serializer.validated_data

    try:
        battery = BatteryModel(autonomy_km=v["autonomy_km"], recharge_time_h=v["recharge_time_h"],
                               min_level=v["min_level"])
        params = {name: v.get(name) for name in MODE_KEYS}
        params["rebalancing_scenario"] = RebalancingScenario(params["rebalancing_scenario"])
        mode_config = ModeConfig(battery=battery, **params)
    except FleetConfigError as e:
        raise ConfigError(f"Invalid run configuration: {e}") from e

    def path(name):
        return Path(v[name]) if v.get(name) else None

    return RunConfig(
        mode=Mode(v["mode"]),
        mode_config=mode_config,
        t0=v["t0"],
        t1=v["t1"],
        seed=v["seed"],
        out=Path(v["out"]),
        network=path("network"),
        stations=path("stations"),
        stations_schema=v["stations_schema"],
        requests=path("requests"),
        trips=path("trips"),
        trips_schema=v["trips_schema"],
        scatter_radius=v["scatter_radius"],
        history=path("history"),
        forecast_file=path("forecast_file"),
    )


def environment_overrides() -> Dict[str, str]:
    overrides = {}
    seed = config("BIKESIM_SEED", default="")
    out = config("BIKESIM_OUT", default="")
    if seed:
        overrides["seed"] = seed
    if out:
        overrides["out"] = out
    return overrides


def parse_config(text: str, base_dir=None, check_files: bool = True, use_environment: bool = True) -> RunConfig:
    """
    Read a config from its text. Relative data paths resolve against `base_dir`.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"Malformed configuration file: {e}") from e

    flat: Dict[str, str] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"Unknown section [{section}]; expected one of {', '.join(SECTIONS)}")
        for key, value in parser.items(section):
            if KEY_SECTION.get(key) != section:
                raise ConfigError(f"Unknown key {key!r} in section [{section}]")
            flat[key] = value

    if base_dir is not None:
        for name in DATA_FILES:
            if flat.get(name) and not Path(flat[name]).is_absolute():
                flat[name] = str(Path(base_dir) / flat[name])

    if use_environment:
        overrides = environment_overrides()
        if overrides:
            logger.info(f"Environment overrides: {', '.join(f'{k}={v}' for k, v in overrides.items())}")
        flat.update(overrides)
    return build_config(flat, check_files=check_files)


def load_config(path, check_files: bool = True, use_environment: bool = True) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent,
                        check_files=check_files, use_environment=use_environment)


def write_config(run_config: RunConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(run_config.to_ini(), encoding="utf-8")
    return path
