from .config import BatteryModel


def discharge(soc: float, distance_m: float, battery: BatteryModel) -> float:
    """State of charge after covering `distance_m`; proportional to distance, floored at 0."""
    return max(0.0, soc - distance_m / (battery.autonomy_km * 1000.0))


def charge_duration_s(soc: float, battery: BatteryModel) -> float:
    """Linear charging from `soc` to full."""
    return battery.recharge_time_h * 3600.0 * (1.0 - soc)
