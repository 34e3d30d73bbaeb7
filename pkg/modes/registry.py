from typing import Dict, Type

from .autonomous import AutonomousMode
from .base import BaseMode
from .config import Mode
from .dockless import DocklessMode
from .station_based import StationBasedMode


MODE_CLASSES: Dict[Mode, Type[BaseMode]] = {
    Mode.STATION: StationBasedMode,
    Mode.DOCKLESS: DocklessMode,
    Mode.AUTONOMOUS: AutonomousMode,
}


def get_mode_process(world) -> BaseMode:
    """Factory function to grab the life-cycle implementation for the world's mode."""
    return MODE_CLASSES[world.mode](world)
