from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class FleetConfigError(ValueError):
    pass


class Mode(str, Enum):
    STATION = "station"
    DOCKLESS = "dockless"
    AUTONOMOUS = "autonomous"


class RebalancingScenario(str, Enum):
    NONE = "none"
    IDEAL = "ideal"
    PREDICTIVE = "predictive"


@dataclass(frozen=True)
class BatteryModel:
    autonomy_km: float = 70.0
    recharge_time_h: float = 4.5
    min_level: float = 0.15

    def __post_init__(self):
        if self.autonomy_km <= 0 or self.recharge_time_h <= 0:
            raise FleetConfigError("Battery autonomy and recharge time must be positive")
        if not 0 < self.min_level < 1:
            raise FleetConfigError(f"Minimum battery level must lie in (0, 1), got {self.min_level}")

    @property
    def autonomy_mm(self) -> int:
        return int(round(self.autonomy_km * 1_000_000))


@dataclass(frozen=True)
class ModeConfig:
    """Behavioural parameters of one run; defaults are the nominal values."""

    fleet_size: int
    walk_radius: float = 300.0
    walking_speed: float = 5.0
    riding_speed: float = 10.2
    autonomous_speed: float = 8.0
    autonomous_radius: float = 2000.0
    beta: float = 0.9
    min_bikes_docks: int = 3
    rebalancing_scenario: RebalancingScenario = RebalancingScenario.NONE
    battery: BatteryModel = field(default_factory=BatteryModel)
    W: int = 4
    P: int = 1
    T: int = 1
    max_attempts: int = 5
    preempt_rebalancing: bool = True
    predictor: str = "baseline-historical"
    history_weeks: int = 4
    grid_resolution: float = 461.35
    slack_cost: Optional[float] = None

    def __post_init__(self):
        if self.fleet_size < 0:
            raise FleetConfigError(f"Fleet size must be non-negative, got {self.fleet_size}")
        for name in ("walking_speed", "riding_speed", "autonomous_speed"):
            if getattr(self, name) <= 0:
                raise FleetConfigError(f"{name} must be positive")
        if self.walk_radius < 0 or self.autonomous_radius < 0:
            raise FleetConfigError("Radii must be non-negative")
        if not 0.0 <= self.beta <= 1.0:
            raise FleetConfigError(f"beta must lie in [0, 1], got {self.beta}")
        if self.min_bikes_docks < 0:
            raise FleetConfigError("min_bikes_docks must be non-negative")
        if min(self.W, self.P, self.T) < 1:
            raise FleetConfigError("W, P and T must be at least one slot")
        if self.max_attempts < 1:
            raise FleetConfigError("max_attempts must be at least 1")
