import logging
from typing import Iterable, Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)

SLOT_MS = 15 * 60 * 1000
SLOTS_PER_DAY = 96
SLOTS_PER_WEEK = 7 * SLOTS_PER_DAY


def slot_of(time_ms: int) -> int:
    return time_ms // SLOT_MS


class DemandHistory:
    """
    Request counts per grid cell and 15-minute slot.

    Slot indices are absolute (`time_ms // SLOT_MS`) so history seeded from
    trips before the simulation window lands on negative slots. The matrix
    grows on demand in both directions.
    """

    def __init__(self, cell_count: int, first_slot: int = 0, slots: int = 0):
        self.cell_count = cell_count
        self.first_slot = first_slot
        self.counts = np.zeros((cell_count, slots), dtype=np.int64)

    @property
    def last_slot(self) -> int:
        """One past the last slot held."""
        return self.first_slot + self.counts.shape[1]

    def _grow(self, slot: int):
        if slot < self.first_slot:
            pad = np.zeros((self.cell_count, self.first_slot - slot), dtype=np.int64)
            self.counts = np.hstack([pad, self.counts])
            self.first_slot = slot
        elif slot >= self.last_slot:
            pad = np.zeros((self.cell_count, slot - self.last_slot + 1), dtype=np.int64)
            self.counts = np.hstack([self.counts, pad])

    def add(self, cell: int, time_ms: int, count: int = 1):
        if not 0 <= cell < self.cell_count:
            raise ValueError(f"Cell {cell} outside grid of {self.cell_count} cells")
        slot = slot_of(time_ms)
        self._grow(slot)
        self.counts[cell, slot - self.first_slot] += count

    def extend(self, observations: Iterable[Tuple[int, int]]):
        for cell, time_ms in observations:
            self.add(cell, time_ms)

    def observe_until(self, time_ms: int):
        """Mark every slot that ended by `time_ms` as observed, even if it saw no requests."""
        slot = slot_of(time_ms)
        if slot > self.last_slot:
            self._grow(slot - 1)

    def column(self, slot: int) -> Optional[np.ndarray]:
        """Counts of one absolute slot, or None if the slot is not covered."""
        if not self.first_slot <= slot < self.last_slot:
            return None
        return self.counts[:, slot - self.first_slot]

    def window(self, start_slot: int, end_slot: int) -> np.ndarray:
        """Counts over [start_slot, end_slot); uncovered slots read as zero."""
        out = np.zeros((self.cell_count, max(0, end_slot - start_slot)), dtype=np.int64)
        lo = max(start_slot, self.first_slot)
        hi = min(end_slot, self.last_slot)
        if lo < hi:
            out[:, lo - start_slot:hi - start_slot] = self.counts[:, lo - self.first_slot:hi - self.first_slot]
        return out

    def covered_before(self, slot: int) -> int:
        """Number of held slots strictly before `slot`."""
        return max(0, min(slot, self.last_slot) - self.first_slot)

    def covers(self, start_slot: int, end_slot: int) -> bool:
        return self.first_slot <= start_slot and end_slot <= self.last_slot

    def total(self) -> int:
        return int(self.counts.sum())
