import os
import shutil
import tempfile
from collections import defaultdict
from io import StringIO
from pathlib import Path
from unittest import mock, skipUnless

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from demandio.synthetic import save_city, synthetic_city
from engine.events import SimulationError
from metrics.kpis import compute_kpis, state_durations
from metrics.report import read_kv
from metrics.timeline import BIKE_COLUMNS, timeline
from modes.entities import BikeState

from .config import ConfigError, build_config, load_config, parse_config, write_config
from .models import SimulationRun, Sweep
from .presets import PRESETS, UnknownPresetError, boston_data, preset
from .runner import ARTIFACTS, run, simulate
from .sweep import SweepSpec, level_of_service, run_sweep


class SyntheticCityMixin:
    """One synthetic day of demand on an 8 x 8 lattice, written once per test class."""

    city_days = 1
    trips_per_day = 300.0

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = Path(tempfile.mkdtemp())
        cls.city = synthetic_city(seed=7, rows=8, cols=8, days=cls.city_days, trips_per_day=cls.trips_per_day)
        cls.paths = save_city(cls.city, cls.tmp / "city")

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)
        super().tearDownClass()

    def config(self, mode="dockless", fleet_size=40, out="runs/test", check_files=True, **changes):
        flat = {
            "mode": mode,
            "seed": 0,
            "out": str(self.tmp / out),
            "t0": self.city.t0.isoformat(),
            "t1": self.city.t1.isoformat(),
            "network": str(self.paths["network"]),
            "stations": str(self.paths["stations"]),
            "trips": str(self.paths["trips"]),
            "fleet_size": fleet_size,
        }
        flat.update(changes)
        return build_config(flat, check_files=check_files)


def seed_mean(make_config, attribute, seeds=(0, 1, 2)):
    values = [getattr(compute_kpis(simulate(make_config(seed)).log), attribute) for seed in seeds]
    return float(np.mean(values))


class ConfigTests(SyntheticCityMixin, SimpleTestCase):

    def test_ini_round_trip(self):
        cfg = self.config(mode="autonomous", fleet_size=12, autonomous_speed=12.5, min_level=0.2)
        again = parse_config(cfg.to_ini(), use_environment=False)
        self.assertEqual(again, cfg)
        self.assertEqual(again.to_ini(), cfg.to_ini())

    def test_written_file_reads_back(self):
        cfg = self.config(mode="station", fleet_size=30, beta=0.5)
        path = write_config(cfg, self.tmp / "cfg" / "run.ini")
        self.assertEqual(load_config(path, use_environment=False), cfg)

    def test_defaults_are_nominal(self):
        cfg = self.config()
        self.assertEqual(cfg.mode_config.walk_radius, 300.0)
        self.assertEqual(cfg.mode_config.riding_speed, 10.2)
        self.assertEqual(cfg.mode_config.battery.min_level, 0.15)
        self.assertEqual(cfg.horizon_ms, 86_400_000)

    def test_beta_out_of_range(self):
        with self.assertRaises(ConfigError) as ctx:
            self.config(mode="station", beta=1.5)
        self.assertIn("beta", ctx.exception.errors)

    def test_window_must_be_ordered(self):
        with self.assertRaises(ConfigError):
            self.config(t1=self.city.t0.isoformat())

    def test_missing_data_file(self):
        with self.assertRaisesMessage(ConfigError, "stations"):
            self.config(stations=str(self.tmp / "nowhere.csv"))
        self.config(stations=str(self.tmp / "nowhere.csv"), check_files=False)

    def test_unknown_section_and_key(self):
        with self.assertRaisesMessage(ConfigError, "Unknown section"):
            parse_config("[engine]\nspeed = 3\n", check_files=False, use_environment=False)
        with self.assertRaisesMessage(ConfigError, "Unknown key"):
            parse_config("[run]\nmode = dockless\nspeed = 3\n", check_files=False, use_environment=False)

    def test_predictive_rebalancing_needs_autonomous_mode(self):
        with self.assertRaises(ConfigError):
            self.config(mode="dockless", rebalancing_scenario="predictive")

    def test_environment_overrides_seed_and_out(self):
        cfg = self.config(seed=3)
        with mock.patch.dict(os.environ, {"BIKESIM_SEED": "11", "BIKESIM_OUT": str(self.tmp / "env")}):
            again = parse_config(cfg.to_ini())
        self.assertEqual(again.seed, 11)
        self.assertEqual(again.out, self.tmp / "env")

    def test_hash_ignores_output_directory(self):
        cfg = self.config()
        self.assertEqual(cfg.config_hash(), cfg.with_params(out="elsewhere").config_hash())
        self.assertNotEqual(cfg.config_hash(), cfg.with_params(seed=1).config_hash())

    def test_with_params_rejects_unknown_keys(self):
        with self.assertRaises(ConfigError):
            self.config().with_params(fleet=3)


class PresetTests(SimpleTestCase):

    def test_autonomous_nominal(self):
        cfg = preset("au-nominal-nr")
        self.assertEqual(cfg.fleet_size, 1000)
        self.assertEqual(cfg.mode_config.autonomous_radius, 2000.0)
        self.assertEqual(cfg.mode_config.autonomous_speed, 8.0)
        self.assertEqual(cfg.mode_config.battery.autonomy_km, 70.0)
        self.assertEqual(cfg.mode_config.battery.recharge_time_h, 4.5)
        self.assertEqual(cfg.mode_config.battery.min_level, 0.15)

    def test_station_nominal(self):
        cfg = preset("sb-nominal")
        self.assertEqual(cfg.fleet_size, 3500)
        self.assertEqual(cfg.mode_config.beta, 0.9)
        self.assertEqual(cfg.mode_config.min_bikes_docks, 3)
        self.assertEqual(cfg.horizon_ms, 7 * 86_400_000)

    def test_dockless_nominal(self):
        self.assertEqual(preset("dl-nominal").fleet_size, 8000)

    def test_same_fleet_compares_every_system(self):
        spec = preset("same-fleet-2000")
        self.assertIsInstance(spec, SweepSpec)
        self.assertEqual(spec.size, 5)
        self.assertEqual({cfg.fleet_size for _, cfg in spec.combinations()}, {2000})

    def test_unknown_preset_lists_the_known_ones(self):
        with self.assertRaises(UnknownPresetError) as ctx:
            preset("au-nominal-xx")
        for name in PRESETS:
            self.assertIn(name, str(ctx.exception))


class RunTests(SyntheticCityMixin, SimpleTestCase):

    def test_artifacts(self):
        result = run(self.config(out="artifacts"))
        for name in ARTIFACTS:
            self.assertTrue((result.out / name).is_file(), name)
        self.assertEqual(read_kv(result.out / "report.kv")["demand"], str(len(self.city.trips)))
        self.assertEqual(load_config(result.out / "config.ini", use_environment=False), result.config)
        self.assertFalse([p for p in result.out.parent.iterdir() if p.name.startswith(".")])

    def test_failed_run_leaves_nothing(self):
        cfg = self.config(out="broken", stations=str(self.tmp / "nowhere.csv"), check_files=False)
        with self.assertRaises(Exception):
            run(cfg)
        self.assertFalse((self.tmp / "broken").exists())
        self.assertFalse([p for p in self.tmp.iterdir() if p.name.startswith(".broken")])

    def test_empty_fleet_serves_nobody(self):
        report = compute_kpis(simulate(self.config(fleet_size=0)).log)
        self.assertEqual(report.served, 0)
        self.assertEqual(report.served_pct, 0.0)
        self.assertEqual(report.unserved, report.demand)

    def test_report_matches_online_counts(self):
        world = simulate(self.config(mode="station", fleet_size=60))
        report = compute_kpis(world.log)
        self.assertEqual(report.rebalanced_bikes, world.counters["rebalanced_bikes"])
        self.assertEqual(report.demand, len(world.requests))


class DeterminismTests(SyntheticCityMixin, SimpleTestCase):
    city_days = 7
    trips_per_day = 120.0

    def test_same_seed_same_bytes(self):
        for mode, fleet in (("dockless", 30), ("autonomous", 10)):
            with self.subTest(mode=mode):
                a = run(self.config(mode=mode, fleet_size=fleet, out=f"{mode}/a"))
                b = run(self.config(mode=mode, fleet_size=fleet, out=f"{mode}/b"))
                self.assertEqual((a.out / "events.log").read_bytes(), (b.out / "events.log").read_bytes())
                self.assertEqual((a.out / "report.kv").read_bytes(), (b.out / "report.kv").read_bytes())

    def test_other_seed_other_log(self):
        a = simulate(self.config(seed=0, fleet_size=30))
        b = simulate(self.config(seed=1, fleet_size=30))
        self.assertNotEqual(a.log.records, b.log.records)


class ConservationTests(SyntheticCityMixin, SimpleTestCase):
    CASES = (
        {"mode": "station", "fleet_size": 60},
        {"mode": "station", "fleet_size": 60, "beta": 0.0, "walk_radius": 150.0},
        {"mode": "dockless", "fleet_size": 25},
        {"mode": "autonomous", "fleet_size": 8},
        {"mode": "autonomous", "fleet_size": 8, "rebalancing_scenario": "ideal"},
        {"mode": "autonomous", "fleet_size": 8, "rebalancing_scenario": "predictive",
         "predictor": "perfect-foresight"},
    )

    def test_every_mode_closes_its_books(self):
        for case in self.CASES:
            with self.subTest(**case):
                world = simulate(self.config(**case))
                report = compute_kpis(world.log)

                self.assertEqual(report.demand, len(self.city.trips))
                self.assertEqual(report.served + report.unserved, report.demand)
                durations = state_durations(world.log)
                self.assertEqual(len(durations), case["fleet_size"])
                for agent, spans in durations.items():
                    self.assertEqual(sum(spans.values()), world.log.metadata["horizon_ms"], msg=agent)
                if report.vkt_total_km:
                    self.assertAlmostEqual(sum(report.vkt_split_pct.values()), 100.0, places=6)

                moved_mm = sum(r.payload["mm"] for r in world.log.records if r.transition == "bike_moved")
                self.assertAlmostEqual(report.vkt_total_km, moved_mm / 1e6, places=9)

                for r in world.log.records:
                    if r.transition == "station_occupancy":
                        self.assertGreaterEqual(r.payload["docked"], 0)
                        self.assertLessEqual(r.payload["docked"], r.payload["capacity"])

                frame = timeline(world.log, 900)
                full_bins = frame.iloc[:-1]
                fleet_on_the_clock = full_bins[list(BIKE_COLUMNS)].sum(axis=1)
                np.testing.assert_allclose(fleet_on_the_clock, case["fleet_size"], atol=1e-6)

    def test_predictive_run_plans_moves(self):
        world = simulate(self.config(mode="autonomous", fleet_size=8, rebalancing_scenario="predictive",
                                     predictor="perfect-foresight"))
        plans = [r for r in world.log.records if r.transition == "rebalance_plan"]
        self.assertTrue(plans)
        self.assertEqual(compute_kpis(world.log).rebalanced_bikes, sum(p.payload["moves"] for p in plans))


class IdealRebalancingTests(SyntheticCityMixin, SimpleTestCase):

    def test_no_wait_and_no_pickup_distance(self):
        world = simulate(self.config(mode="autonomous", fleet_size=30, rebalancing_scenario="ideal"))
        report = compute_kpis(world.log)
        self.assertEqual(report.served_pct, 100.0)
        self.assertEqual(report.avg_wait_min, 0.0)
        self.assertEqual(report.vkt_split_pct["pickup"], 0.0)
        served = [r for r in world.log.records if r.transition == "user_served"]
        self.assertTrue(all(r.payload["wait_ms"] == 0 for r in served))


class MonotonicityTests(SyntheticCityMixin, SimpleTestCase):

    def test_more_bikes_serve_more(self):
        served = [seed_mean(lambda s, f=f: self.config(fleet_size=f, seed=s), "served_pct") for f in (5, 20, 80)]
        self.assertEqual(served, sorted(served))

    def test_faster_bikes_wait_less(self):
        waits = [
            seed_mean(lambda s, v=v: self.config(mode="autonomous", fleet_size=10, autonomous_speed=v, seed=s),
                      "avg_wait_min")
            for v in (2.5, 8.0, 20.0)
        ]
        self.assertEqual(waits, sorted(waits, reverse=True))

    def test_longer_walks_serve_more(self):
        served = [seed_mean(lambda s, r=r: self.config(fleet_size=20, walk_radius=r, seed=s), "served_pct")
                  for r in (100.0, 300.0)]
        self.assertLessEqual(served[0], served[1])


class BatteryAccountingTests(SyntheticCityMixin, SimpleTestCase):

    def setUp(self):
        # A small battery forces several charge trips per bike over the day.
        self.cfg = self.config(mode="autonomous", fleet_size=10, autonomy_km=20.0, recharge_time_h=0.5,
                               min_level=0.3)
        self.world = simulate(self.cfg)

    def test_discharge_matches_distance(self):
        self.assertEqual(self.world.counters["stranded_bikes"], 0)
        autonomy_mm = self.cfg.mode_config.battery.autonomy_mm
        driven = defaultdict(int)
        drained = defaultdict(float)
        for r in self.world.log.records:
            if r.transition == "bike_moved":
                driven[r.agent] += r.payload["mm"]
                drained[r.agent] += r.payload["soc_drop"]
        self.assertTrue(driven)
        for agent, mm in driven.items():
            self.assertAlmostEqual(drained[agent] * autonomy_mm, mm, delta=1000, msg=agent)

    def test_charges_follow_threshold_crossings(self):
        min_level = self.cfg.mode_config.battery.min_level
        soc = {}
        crossings = 0
        for r in self.world.log.records:
            if r.transition == "bike_state" and "soc" in r.payload:
                soc[r.agent] = r.payload["soc"]
            elif r.transition == "bike_moved":
                before = soc[r.agent]
                soc[r.agent] = before - r.payload["soc_drop"]
                crossings += before >= min_level > soc[r.agent]
            elif r.transition == "charge_end":
                soc[r.agent] = 1.0

        on_the_way = sum(b.state is BikeState.DRIVING_TO_CHARGER for b in self.world.bikes)
        charges = self.world.counters["charges"]
        self.assertGreater(charges, 0)
        self.assertEqual(crossings, charges + on_the_way)
        self.assertEqual(compute_kpis(self.world.log).total_charges, charges)


class SweepTests(SyntheticCityMixin, SimpleTestCase):

    def test_single_cell_sweep_equals_a_run(self):
        base = self.config(out="sweep-one", fleet_size=20)
        spec = SweepSpec.single(base, None, [None], [20], [0], name="one")
        result = run_sweep(spec, workers=1)
        single = run(self.config(out="single", fleet_size=20)).report.flat()

        self.assertEqual(len(result.matrix), 1)
        self.assertEqual(result.failures, [])
        row = result.matrix.iloc[0]
        for key in ("served_pct", "demand", "vkt_total_km", "trips_per_bike_day"):
            self.assertAlmostEqual(row[key], single[key], msg=key)
        self.assertTrue(result.path.is_file())

    def test_axis_crossed_with_fleets_and_seeds(self):
        base = self.config(out="grid")
        spec = SweepSpec.single(base, "walk_radius", [100.0, 300.0], [10, 20], [0, 1])
        combos = spec.combinations()
        self.assertEqual(spec.size, 8)
        self.assertEqual(len(combos), 8)
        self.assertEqual(len({str(cfg.out) for _, cfg in combos}), 8)
        label, cfg = combos[-1]
        self.assertEqual((label["value"], label["fleet_size"], label["seed"]), (300.0, 20, 1))
        self.assertEqual(cfg.mode_config.walk_radius, 300.0)

    def test_unknown_axis(self):
        with self.assertRaises(ConfigError):
            SweepSpec.single(self.config(), "colour", ["red"], [10], [0])

    def test_failures_are_recorded_not_raised(self):
        base = self.config(out="sweep-broken", stations=str(self.tmp / "nowhere.csv"), check_files=False)
        seen = []
        result = run_sweep(SweepSpec.single(base, None, [None], [10], [0]), workers=1,
                           on_result=lambda label, cfg, kpis: seen.append(kpis))
        self.assertTrue(result.matrix.empty)
        self.assertIsNone(result.path)
        self.assertEqual(len(result.failures), 1)
        self.assertIn("error", seen[0])

    def test_level_of_service_reports_the_failed_run(self):
        base = self.config(out="los-broken", stations=str(self.tmp / "nowhere.csv"), check_files=False)
        with self.assertRaisesMessage(SimulationError, "Fleet 4"):
            level_of_service(base, target_pct=50.0, seeds=(0,), low=0, high=4, step=2)

    def test_level_of_service_finds_the_smallest_fleet(self):
        base = self.config(out="los")
        found = level_of_service(base, target_pct=50.0, seeds=(0,), low=0, high=16, step=4)
        self.assertGreaterEqual(found.served_pct, 50.0)
        for fleet, served in found.evaluations.items():
            if fleet < found.fleet_size:
                self.assertLess(served, 50.0)


class CommandTests(SyntheticCityMixin, TestCase):

    def setUp(self):
        self.ini = write_config(self.config(out="cmd/run"), self.tmp / "cmd" / "run.ini")

    def assertExitCode(self, code, *args):
        with self.assertRaises(CommandError) as ctx:
            call_command(*args, stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, code)

    def test_run_records_the_run(self):
        call_command("run", "--config", str(self.ini), "--seed", "2", stdout=StringIO())
        record = SimulationRun.objects.get()
        self.assertEqual(record.status, "done")
        self.assertEqual(record.seed, 2)
        self.assertEqual(record.mode, "dockless")
        self.assertIsNotNone(record.served_pct)
        self.assertEqual(record.kpis["demand"], len(self.city.trips))

    def test_configuration_errors_exit_one(self):
        self.assertExitCode(1, "run", "--config", str(self.tmp / "missing.ini"))
        self.assertExitCode(1, "run", "--preset", "no-such-preset")
        self.assertExitCode(1, "run", "--preset", "same-fleet-2000")
        self.assertExitCode(1, "run", "--config", str(self.ini), "--set", "beta=2")
        self.assertExitCode(1, "run", "--config", str(self.ini), "--set", "fleet")
        self.assertExitCode(1, "report", "--log", str(self.tmp / "missing.log"))
        self.assertFalse(SimulationRun.objects.exists())

    def test_runtime_errors_exit_two(self):
        with mock.patch("experiments.management.commands.run.run", side_effect=SimulationError("boom")):
            self.assertExitCode(2, "run", "--config", str(self.ini))
        record = SimulationRun.objects.get()
        self.assertEqual(record.status, "failed")
        self.assertIn("boom", record.error)

    def test_report_recomputes_a_finished_run(self):
        result = run(self.config(out="cmd/report"))
        out = self.tmp / "cmd" / "recomputed"
        call_command("report", "--log", str(result.out / "events.log"), "--out", str(out),
                     stdout=StringIO())
        self.assertEqual((out / "report.kv").read_bytes(), (result.out / "report.kv").read_bytes())

    def test_truncated_log_exits_two(self):
        result = run(self.config(out="cmd/truncated"))
        log = result.out / "events.log"
        lines = log.read_text().splitlines(keepends=True)
        log.write_text("".join(lines[:-1]))
        self.assertExitCode(2, "report", "--log", str(log), "--out", str(self.tmp / "cmd" / "t"))

    def test_sweep_records_every_run(self):
        call_command("sweep", "--config", str(self.ini), "--axis", "walk_radius", "--values", "100,300",
                     "--fleet-sizes", "15", "--workers", "1", "--out", str(self.tmp / "cmd" / "sweep"),
                     stdout=StringIO())
        sweep = Sweep.objects.get()
        self.assertEqual(sweep.status, "done")
        self.assertEqual(sweep.size, 2)
        self.assertEqual(sweep.runs.count(), 2)
        self.assertTrue(Path(sweep.matrix_path).is_file())

    def test_preset_writes_a_run_configuration(self):
        target = self.tmp / "cmd" / "au.ini"
        call_command("preset", "au-nominal-ir", "--write", str(target), "--seed", "4",
                     stdout=StringIO())
        cfg = load_config(target, check_files=False, use_environment=False)
        self.assertEqual(cfg.seed, 4)
        self.assertEqual(cfg.mode_config.rebalancing_scenario.value, "ideal")
        self.assertExitCode(1, "preset", "level-of-service-99", "--write", str(target))

    def test_prepare_synthetic_city(self):
        directory = self.tmp / "cmd" / "prepared"
        call_command("prepare", "--synthetic", str(directory), "--rows", "4", "--cols", "4",
                     "--trips-per-day", "50", stdout=StringIO())
        cfg = load_config(directory / "run.ini", use_environment=False)
        self.assertEqual(cfg.mode.value, "dockless")
        self.assertTrue(cfg.trips.is_file())

    def test_prepare_requests_match_run_time_scatter(self):
        requests = self.tmp / "cmd" / "requests.csv"
        call_command("prepare", "--network", str(self.paths["network"]), "--trips", str(self.paths["trips"]),
                     "--t0", self.city.t0.isoformat(), "--t1", self.city.t1.isoformat(),
                     "--requests-out", str(requests), stdout=StringIO())
        from_trips = compute_kpis(simulate(self.config()).log)
        from_file = compute_kpis(simulate(self.config(trips="", requests=str(requests))).log)
        self.assertEqual(from_file.demand, from_trips.demand)


BOSTON = boston_data()
HAVE_BOSTON = all(Path(BOSTON[key]).is_file() for key in ("network", "stations", "trips"))


@skipUnless(HAVE_BOSTON, "Boston trips, stations and network are not downloaded")
class BostonReproductionTests(SimpleTestCase):
    """Nominal week of 7 to 14 October 2019; each run takes minutes."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = Path(tempfile.mkdtemp())
        cls.reports = {}

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp, ignore_errors=True)
        super().tearDownClass()

    def report(self, name, **changes):
        key = (name, tuple(sorted(changes.items())))
        if key not in self.reports:
            cfg = preset(name, out=self.tmp / name)
            if changes:
                cfg = cfg.with_params(**changes)
            self.reports[key] = compute_kpis(simulate(cfg).log)
        return self.reports[key]

    def assertWithin(self, value, expected, rel):
        self.assertLessEqual(abs(value - expected), rel * expected, f"{value} vs {expected}")

    def test_station_nominal(self):
        r = self.report("sb-nominal")
        self.assertLessEqual(abs(r.served_pct - 99.00), 1.0)
        self.assertWithin(r.trips_per_bike_day, 2.51, 0.15)
        self.assertWithin(r.avg_trip_min, 19.87, 0.10)
        self.assertWithin(r.served / r.rebalanced_bikes, 6.08, 0.20)

    def test_dockless_nominal(self):
        r = self.report("dl-nominal")
        self.assertLessEqual(abs(r.served_pct - 99.02), 1.0)
        self.assertWithin(r.trips_per_bike_day, 1.10, 0.15)
        self.assertWithin(r.avg_trip_min, 15.14, 0.10)

    def test_autonomous_without_rebalancing(self):
        r = self.report("au-nominal-nr")
        self.assertLessEqual(abs(r.served_pct - 99.46), 1.0)
        self.assertWithin(r.avg_wait_min, 3.53, 0.20)
        self.assertWithin(r.trips_per_bike_day, 8.84, 0.15)
        self.assertWithin(r.total_charges, 504, 0.25)

    def test_autonomous_ideal_rebalancing(self):
        r = self.report("au-nominal-ir")
        self.assertEqual(r.served_pct, 100.0)
        self.assertWithin(r.trips_per_bike_day, 8.88, 0.15)

    def test_autonomous_beats_the_current_systems(self):
        au, sb, dl = self.report("au-nominal-nr"), self.report("sb-nominal"), self.report("dl-nominal")
        self.assertGreater(au.served_pct, sb.served_pct)
        self.assertGreater(au.served_pct, dl.served_pct)
        self.assertLess(au.avg_wait_min, sb.avg_wait_or_walk_min)

    def test_predictive_rebalancing(self):
        pr, nr = self.report("au-nominal-pr"), self.report("au-nominal-nr")
        self.assertGreater(pr.vkt_split_pct["rebalancing"], 0.0)
        self.assertLessEqual(pr.vkt_split_pct["rebalancing"], 25.0)
        self.assertLessEqual(abs(pr.served_pct - nr.served_pct), 2.0)

        foresight = self.report("au-nominal-pr", fleet_size=1500, predictor="perfect-foresight")
        without = self.report("au-nominal-nr", fleet_size=1500)
        self.assertLessEqual(foresight.avg_wait_min, without.avg_wait_min)
