"""
Single-run pipeline: data loading, world setup, engine, KPIs, artifacts.

Artifacts of a run (`events.log`, `report.txt`, `report.kv`,
`timeline.csv`, `config.ini`) are written into a scratch directory next to
the output directory and only moved in once the run has finished, so a
failed run leaves nothing behind.
"""
import logging
import os
import shutil
import tempfile
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional

from django.conf import settings

from demandio.requests import read_requests
from demandio.scatter import scatter_requests
from demandio.stations import load_stations, place_stations
from demandio.stats import history_from_requests
from demandio.trips import load_trips
from engine.events import SimulationError
from engine.rng import agent_rng
from geo.grid import build_grid, cell_cost_matrix
from geo.network import RoadNetwork, load_network_cache
from metrics.eventlog import EventLog
from metrics.kpis import KpiReport, compute_kpis
from metrics.report import write_report
from metrics.timeline import timeline, write_timeline
from modes.config import Mode, RebalancingScenario
from modes.entities import Outcome, UserRequest
from modes.fleet import init_fleet
from modes.registry import get_mode_process
from modes.world import World
from rebalance.history import DemandHistory
from rebalance.manager import RebalanceManager
from rebalance.predictors import get_predictor
from routing.router import Router

from .config import RunConfig, write_config


logger = logging.getLogger(__name__)

ARTIFACTS = ("events.log", "report.txt", "report.kv", "timeline.csv", "config.ini")
TIMELINE_BIN_S = 900


@dataclass
class RunResult:
    config: RunConfig
    report: KpiReport
    out: Path
    paths: Dict[str, Path] = field(default_factory=dict)
    counters: Dict[str, int] = field(default_factory=dict)


@lru_cache(maxsize=4)
def _cached_router(path: str, mtime_ns: int, size: int) -> Router:
    return Router.for_network(load_network_cache(path), cache_dir=settings.BIKESIM['CACHE_DIR'])


def network_router(path) -> Router:
    """Router over the cached network at `path`, shared by the runs of one process."""
    stat = Path(path).stat()
    return _cached_router(str(path), stat.st_mtime_ns, stat.st_size)


def load_demand(run_config: RunConfig, net: RoadNetwork) -> List[UserRequest]:
    """The run's requests: a prepared request file, or trips scattered with the run seed."""
    if run_config.requests is not None:
        return read_requests(run_config.requests, net)
    trips = load_trips(run_config.trips, (run_config.t0, run_config.t1), columns=run_config.trips_schema)
    return scatter_requests(trips, agent_rng(run_config.seed, "demand"), run_config.scatter_radius,
                            net, run_config.t0)


def _attach_rebalancer(run_config: RunConfig, world: World, mode, requests: List[UserRequest]) -> RebalanceManager:
    mode_config = run_config.mode_config
    grid = build_grid(world.net, mode_config.grid_resolution)
    cost = cell_cost_matrix(grid, world.router)
    history = DemandHistory(grid.cell_count)
    if run_config.history is not None:
        history_from_requests(read_requests(run_config.history, world.net, allow_negative=True), grid, history)
    future = None
    if mode_config.predictor == "perfect-foresight":
        future = history_from_requests(requests, grid)
    predictor = get_predictor(mode_config.predictor, mode_config.history_weeks, future=future,
                              forecast_file=run_config.forecast_file, cell_count=grid.cell_count)
    manager = RebalanceManager(world, mode, grid, cost, predictor, history=history,
                               horizon_ms=run_config.horizon_ms)
    manager.start()
    return manager


def run_metadata(run_config: RunConfig, requests: int) -> Dict:
    return {
        "mode": run_config.mode.value,
        "seed": run_config.seed,
        "fleet_size": run_config.fleet_size,
        "horizon_ms": run_config.horizon_ms,
        "t0": run_config.t0.isoformat(),
        "requests": requests,
        "config_hash": run_config.config_hash(),
    }


def simulate(run_config: RunConfig, log_path=None) -> World:
    """
    Build the world for `run_config` and play every request to completion.

    The event log is streamed to `log_path` when given, otherwise kept in
    memory; it is closed when the call returns.
    """
    router = network_router(run_config.network)
    net = router.net
    stations = place_stations(load_stations(run_config.stations, columns=run_config.stations_schema), net)
    requests = load_demand(run_config, net)
    log = EventLog(run_metadata(run_config, len(requests)), path=log_path, keep_in_memory=log_path is None,
                   flush_every=settings.BIKESIM['LOG_FLUSH_EVERY'])

    try:
        world = World(run_config.mode, run_config.mode_config, net, router, stations, log, seed=run_config.seed)
        init_fleet(world)
        mode = get_mode_process(world)
        if (run_config.mode is Mode.AUTONOMOUS
                and run_config.mode_config.rebalancing_scenario is RebalancingScenario.PREDICTIVE):
            _attach_rebalancer(run_config, world, mode, requests)

        mode.start(requests)
        world.sim.run_until(run_config.horizon_ms)
        world.sim.run_while(lambda: world.in_flight > 0)
    except BaseException:
        log.abort()
        raise
    log.close(world.now, {"dispatched": world.sim.dispatched})
    logger.info(
        f"{run_config.mode.value} run (fleet {run_config.fleet_size}, seed {run_config.seed}) "
        f"finished at t={world.now} ms after {world.sim.dispatched} events"
    )
    return world


def _check_online(world: World, report: KpiReport):
    """KPIs recomputed from the log must agree with the counts kept while running."""
    served = sum(r.outcome is Outcome.SERVED for r in world.requests.values())
    unserved = sum(r.outcome is Outcome.UNSERVED for r in world.requests.values())
    expected = {
        "served": (served, report.served),
        "unserved": (unserved, report.unserved),
        "total_charges": (world.counters["charges"], report.total_charges),
        "stranded_bikes": (world.counters["stranded_bikes"], report.stranded_bikes),
    }
    if world.mode is Mode.STATION:
        expected["rebalanced_bikes"] = (world.counters["rebalanced_bikes"], report.rebalanced_bikes)
    for name, (online, logged) in expected.items():
        if online != logged:
            raise SimulationError(f"{name} differs between the run ({online}) and its log ({logged})")


def run(run_config: RunConfig, out: Optional[Path] = None, timeline_bin_s: float = TIMELINE_BIN_S) -> RunResult:
    out = Path(out or run_config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    log_path = scratch / "events.log"
    try:
        world = simulate(run_config, log_path)
        report = compute_kpis(log_path)
        _check_online(world, report)
        write_report(report, scratch)
        write_timeline(timeline(log_path, timeline_bin_s), scratch / "timeline.csv")
        write_config(run_config, scratch / "config.ini")
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise

    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name in ARTIFACTS:
        os.replace(scratch / name, out / name)
        paths[name] = out / name
    shutil.rmtree(scratch, ignore_errors=True)
    logger.info(f"Served {report.served_pct:.2f}% of {report.demand} requests; artifacts in {out}")
    return RunResult(run_config, report, out, paths, dict(world.counters))
