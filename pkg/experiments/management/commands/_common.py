from typing import Dict, List

from django.core.management.base import CommandError

from demandio.trips import DemandDataError
from geo.grid import GridError
from geo.network import NetworkLoadError
from modes.config import FleetConfigError
from rebalance.predictors import ForecastFileError

from experiments.config import ConfigError


CONFIG_ERRORS = (ConfigError, FleetConfigError, NetworkLoadError, GridError, DemandDataError, ForecastFileError)

EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2


def command_error(exc: Exception) -> CommandError:
    """Exit status 1 for bad configuration or input data, 2 for anything that broke during a run."""
    if isinstance(exc, CONFIG_ERRORS):
        return CommandError(str(exc), returncode=EXIT_CONFIG_ERROR)
    return CommandError(f"{type(exc).__name__}: {exc}", returncode=EXIT_RUNTIME_ERROR)


def parse_assignments(items: List[str]) -> Dict[str, str]:
    """`key=value` pairs from repeated --set options."""
    values = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise CommandError(f"Expected key=value, got {item!r}", returncode=EXIT_CONFIG_ERROR)
        values[key.strip()] = value.strip()
    return values


def parse_list(text: str, cast=float) -> List:
    try:
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise CommandError(f"Bad list {text!r}: {e}", returncode=EXIT_CONFIG_ERROR)
