"""
Demand forecasters for predictive rebalancing.

A forecaster turns the observed `DemandHistory` into expected requests per
cell for the slot `P` slots ahead of the current one. The learned model is
out of scope; an externally trained model's output can be injected through
`ExternalFilePredictor`.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .history import SLOTS_PER_WEEK, DemandHistory, slot_of


logger = logging.getLogger(__name__)


class ForecastFileError(ValueError):
    pass


@dataclass
class DemandForecast:
    D: np.ndarray
    target_slot: int
    horizon: int

    @property
    def total(self) -> int:
        return int(self.D.sum())


def round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(np.asarray(values, dtype=float) + 0.5).astype(np.int64)


def target_slot_for(now_ms: int, P: int) -> int:
    return slot_of(now_ms) + P - 1


class DemandPredictor(Protocol):
    def predict(self, history: DemandHistory, now_ms: int, W: int, P: int) -> DemandForecast:
        pass


class _WarnOnce:
    _warned = False

    def _zero(self, history: DemandHistory, target: int, P: int, reason: str) -> DemandForecast:
        if not self._warned:
            logger.warning(f"{type(self).__name__}: {reason}; forecasting zero demand")
            self._warned = True
        return DemandForecast(np.zeros(history.cell_count, dtype=np.int64), target, P)


class BaselineHistoricalPredictor(_WarnOnce):
    """Mean count of the same slot-of-week over the trailing weeks of history."""

    def __init__(self, history_weeks: int = 4):
        if history_weeks < 1:
            raise ValueError("history_weeks must be at least 1")
        self.history_weeks = history_weeks

    def predict(self, history: DemandHistory, now_ms: int, W: int, P: int) -> DemandForecast:
        now_slot = slot_of(now_ms)
        target = target_slot_for(now_ms, P)
        if history.covered_before(now_slot) < W:
            return self._zero(history, target, P, f"fewer than {W} slots of history")

        samples = []
        for k in range(1, self.history_weeks + 1):
            slot = target - k * SLOTS_PER_WEEK
            if slot < now_slot:
                column = history.column(slot)
                if column is not None:
                    samples.append(column)
        if not samples:
            return self._zero(history, target, P, "no same-slot-of-week samples in history")
        return DemandForecast(round_half_up(np.mean(samples, axis=0)), target, P)


class RecentWindowPredictor(_WarnOnce):
    """Mean count over the last W observed slots."""

    def predict(self, history: DemandHistory, now_ms: int, W: int, P: int) -> DemandForecast:
        now_slot = slot_of(now_ms)
        target = target_slot_for(now_ms, P)
        if history.covered_before(now_slot) < W:
            return self._zero(history, target, P, f"fewer than {W} slots of history")
        window = history.window(now_slot - W, now_slot)
        return DemandForecast(round_half_up(window.mean(axis=1)), target, P)


class PerfectForesightPredictor(_WarnOnce):
    """Reads the realised demand of the target slot; an upper bound for forecast quality."""

    def __init__(self, future: DemandHistory):
        self.future = future

    def predict(self, history: DemandHistory, now_ms: int, W: int, P: int) -> DemandForecast:
        target = target_slot_for(now_ms, P)
        column = self.future.column(target)
        if column is None:
            return DemandForecast(np.zeros(history.cell_count, dtype=np.int64), target, P)
        return DemandForecast(column.astype(np.int64).copy(), target, P)


class ExternalFilePredictor(_WarnOnce):
    """
    Forecast matrix produced elsewhere: one row per cell, one column per
    slot counted from the start of the simulation window. Comma separated.
    """

    def __init__(self, path, cell_count: int):
        path = Path(path)
        if not path.exists():
            raise ForecastFileError(f"Forecast file not found: {path}")
        try:
            matrix = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as e:
            raise ForecastFileError(f"Malformed forecast file {path}: {e}") from e
        if matrix.shape[0] != cell_count:
            raise ForecastFileError(f"Forecast file has {matrix.shape[0]} rows, grid has {cell_count} cells")
        if (matrix < 0).any():
            raise ForecastFileError("Forecast file holds negative demand")
        self.matrix = matrix
        logger.info(f"Loaded external forecast of {matrix.shape[1]} slots for {cell_count} cells")

    def predict(self, history: DemandHistory, now_ms: int, W: int, P: int) -> DemandForecast:
        target = target_slot_for(now_ms, P)
        if not 0 <= target < self.matrix.shape[1]:
            return self._zero(history, target, P, f"slot {target} lies outside the forecast file")
        return DemandForecast(round_half_up(self.matrix[:, target]), target, P)


PREDICTORS = ("baseline-historical", "recent-window", "perfect-foresight", "external-file")


def get_predictor(name: str, history_weeks: int = 4, future: Optional[DemandHistory] = None,
                  forecast_file=None, cell_count: int = 0) -> DemandPredictor:
    """Factory function to grab the forecaster selected in the run configuration."""
    if name == "baseline-historical":
        return BaselineHistoricalPredictor(history_weeks)
    if name == "recent-window":
        return RecentWindowPredictor()
    if name == "perfect-foresight":
        if future is None:
            raise ValueError("perfect-foresight needs the realised demand of the run")
        return PerfectForesightPredictor(future)
    if name == "external-file":
        if forecast_file is None:
            raise ValueError("external-file needs a forecast_file")
        return ExternalFilePredictor(forecast_file, cell_count)
    raise ValueError(f"Unknown predictor {name!r}; expected one of {', '.join(PREDICTORS)}")


def predict_demand(history: DemandHistory, now_ms: int, W: int, P: int,
                   predictor: Optional[DemandPredictor] = None) -> DemandForecast:
    return (predictor or BaselineHistoricalPredictor()).predict(history, now_ms, W, P)
