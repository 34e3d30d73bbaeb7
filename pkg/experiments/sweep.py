"""
Batch runs over parameter grids.

A sweep is a list of groups; each group varies one parameter of a base
configuration over a list of values and crosses it with fleet sizes and
seeds, the other parameters staying at the base values. Runs are
independent, so they fan out over a billiard process pool (or a Celery
group) and the matrix comes back in combination order whatever the
worker count.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from billiard import Pool
from django.conf import settings

from engine.events import SimulationError

from .config import PARAMETERS, ConfigError, RunConfig, parse_config
from .runner import run


logger = logging.getLogger(__name__)


@dataclass
class SweepGroup:
    base: RunConfig
    axis: Optional[str]
    values: List[Any]
    fleet_sizes: List[int]
    label: str = ""

    def __post_init__(self):
        if self.axis is not None and self.axis not in PARAMETERS:
            raise ConfigError(f"Unknown sweep axis {self.axis!r}; expected one of {', '.join(PARAMETERS)}")
        if self.axis is None:
            self.values = [None]
        if not self.values or not self.fleet_sizes:
            raise ConfigError("A sweep group needs at least one value and one fleet size")
        self.label = self.label or self.base.mode.value


@dataclass
class SweepSpec:
    name: str
    groups: List[SweepGroup]
    seeds: List[int] = field(default_factory=lambda: [0])
    out: Optional[Path] = None
    target_served_pct: Optional[float] = None

    @classmethod
    def single(cls, base: RunConfig, axis: Optional[str], values: Sequence, fleet_sizes: Sequence[int],
               seeds: Sequence[int], name: str = "sweep") -> "SweepSpec":
        return cls(name, [SweepGroup(base, axis, list(values), list(fleet_sizes))], list(seeds), base.out)

    @property
    def size(self) -> int:
        return sum(len(g.values) * len(g.fleet_sizes) for g in self.groups) * len(self.seeds)

    def combinations(self) -> List[Tuple[Dict[str, Any], RunConfig]]:
        """(label, config) for every run, in matrix order."""
        out = Path(self.out or self.groups[0].base.out)
        runs = []
        for group in self.groups:
            for value in group.values:
                for fleet in group.fleet_sizes:
                    for seed in self.seeds:
                        label = {"system": group.label, "axis": group.axis or "", "value": value,
                                 "fleet_size": fleet, "seed": seed}
                        changes = {"fleet_size": fleet, "seed": seed}
                        if group.axis is not None:
                            changes[group.axis] = value
                        point = f"{group.axis}={value}" if group.axis else "nominal"
                        directory = out / group.label / point / f"fleet={fleet}" / f"seed={seed}"
                        changes["out"] = str(directory)
                        runs.append((label, group.base.with_params(**changes)))
        return runs


@dataclass
class SweepResult:
    matrix: pd.DataFrame
    failures: List[Dict[str, Any]]
    path: Optional[Path] = None


def run_one(run_config: RunConfig) -> Dict[str, Any]:
    """Run one combination; failures come back as an `error` entry instead of raising."""
    try:
        result = run(run_config)
    except Exception as e:
        logger.error(f"Run in {run_config.out} failed: {e}")
        return {"error": f"{type(e).__name__}: {e}"}
    return result.report.flat()


def run_one_ini(ini_text: str) -> Dict[str, Any]:
    return run_one(parse_config(ini_text, check_files=True, use_environment=False))


def _map_local(configs: List[RunConfig], workers: int) -> List[Dict[str, Any]]:
    if workers <= 1 or len(configs) <= 1:
        return [run_one(c) for c in configs]
    with Pool(processes=min(workers, len(configs))) as pool:
        return pool.map(run_one, configs, chunksize=1)


def _map_celery(configs: List[RunConfig]) -> List[Dict[str, Any]]:
    from celery import group

    from .tasks import run_scenario_task

    job = group(run_scenario_task.s(c.to_ini()) for c in configs)
    return job.apply_async().get(disable_sync_subtasks=False)


def run_sweep(spec: SweepSpec, workers: Optional[int] = None, use_celery: bool = False,
              on_result: Optional[Callable[[Dict[str, Any], RunConfig, Dict[str, Any]], None]] = None) -> SweepResult:
    """
    Run every combination of `spec` and gather one matrix row per successful run.

    Failed runs are listed in `failures` and left out of the matrix.
    """
    combos = spec.combinations()
    workers = workers or settings.BIKESIM['SWEEP_WORKERS']
    logger.info(f"Sweep {spec.name}: {len(combos)} runs on {'celery' if use_celery else f'{workers} worker(s)'}")

    configs = [c for _, c in combos]
    results = _map_celery(configs) if use_celery else _map_local(configs, workers)

    rows, failures = [], []
    for (label, run_config), kpis in zip(combos, results):
        if on_result is not None:
            on_result(label, run_config, kpis)
        if "error" in kpis:
            failures.append({**label, "error": kpis["error"]})
        else:
            rows.append({**label, **kpis})

    matrix = pd.DataFrame(rows)
    path = None
    out = Path(spec.out or spec.groups[0].base.out)
    if rows:
        out.mkdir(parents=True, exist_ok=True)
        path = out / "matrix.csv"
        matrix.to_csv(path, index=False, lineterminator="\n")
    if failures:
        logger.warning(f"Sweep {spec.name}: {len(failures)} of {len(combos)} runs failed")
    return SweepResult(matrix, failures, path)


@dataclass
class LevelOfService:
    fleet_size: int
    served_pct: float
    evaluations: Dict[int, float]


def mean_served(base: RunConfig, fleet_size: int, seeds: Sequence[int], workers: int = 1) -> float:
    spec = SweepSpec.single(base, None, [None], [fleet_size], seeds, name=f"los-{fleet_size}")
    spec.out = Path(base.out) / "level-of-service"
    result = run_sweep(spec, workers=workers)
    if result.failures:
        raise SimulationError(f"Fleet {fleet_size}: {result.failures[0]['error']}")
    return float(np.mean(result.matrix["served_pct"]))


def level_of_service(base: RunConfig, target_pct: float = 99.0, seeds: Sequence[int] = (0, 1, 2),
                     low: int = 0, high: int = 1000, step: int = 50, workers: int = 1) -> LevelOfService:
    """
    Smallest fleet (to `step` bikes) whose seed-averaged served share reaches `target_pct`.

    Served share is taken as non-decreasing in fleet size; `high` doubles
    until it reaches the target.
    """
    if step < 1 or low < 0 or high <= low:
        raise ConfigError("level_of_service needs 0 <= low < high and step >= 1")
    evaluations: Dict[int, float] = {}

    def served(fleet: int) -> float:
        if fleet not in evaluations:
            evaluations[fleet] = mean_served(base, fleet, seeds, workers)
            logger.info(f"Fleet {fleet}: {evaluations[fleet]:.2f}% served")
        return evaluations[fleet]

    for _ in range(16):
        if served(high) >= target_pct:
            break
        low, high = high, high * 2
    else:
        raise ConfigError(f"No fleet up to {high} bikes serves {target_pct}% of the demand")

    while high - low > step:
        mid = low + (high - low) // 2
        if served(mid) >= target_pct:
            high = mid
        else:
            low = mid
    return LevelOfService(high, evaluations[high], dict(sorted(evaluations.items())))


def run_level_of_service(spec: SweepSpec, workers: Optional[int] = None) -> SweepResult:
    """Level-of-service search for every group of `spec`, bracketed by the group's fleet sizes."""
    target = spec.target_served_pct or 99.0
    workers = workers or settings.BIKESIM['SWEEP_WORKERS']
    rows, failures = [], []
    for group in spec.groups:
        low, high = min(group.fleet_sizes), max(group.fleet_sizes)
        try:
            found = level_of_service(group.base, target, spec.seeds, low=low, high=max(high, low + 1),
                                     workers=workers)
        except Exception as e:
            logger.error(f"Level-of-service search for {group.label} failed: {e}")
            failures.append({"system": group.label, "error": f"{type(e).__name__}: {e}"})
            continue
        rows.append({"system": group.label, "target_pct": target, "fleet_size": found.fleet_size,
                     "served_pct": found.served_pct, "evaluations": len(found.evaluations)})

    matrix = pd.DataFrame(rows)
    path = None
    if rows:
        out = Path(spec.out or spec.groups[0].base.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "level_of_service.csv"
        matrix.to_csv(path, index=False, lineterminator="\n")
    return SweepResult(matrix, failures, path)
