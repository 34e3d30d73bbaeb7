import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from .eventlog import EventLog, EventLogError, read_log
from .kpis import DAY_MS, compute_kpis, state_durations
from .report import read_kv, write_report
from .timeline import peak_share, timeline, write_timeline


def one_trip_log(path=None, mode="dockless"):
    """One bike, one user walking a minute and riding 840 s, over one day."""
    log = EventLog({"mode": mode, "fleet_size": 1, "horizon_ms": DAY_MS, "requests": 1}, path=path)
    log.record(0, "b:0", "bike_state", {"state": "Available", "node": 1})
    log.record(0, "u:0", "user_state", {"activity": "walking"})
    log.record(60_000, "b:0", "bike_state", {"state": "InUse", "node": 1})
    log.record(60_000, "u:0", "user_state", {"activity": "riding"})
    log.record(900_000, "b:0", "bike_moved", {"cls": "in_use", "mm": 2_380_000, "soc_drop": 0.0})
    log.record(900_000, "b:0", "bike_state", {"state": "Available", "node": 9})
    log.record(900_000, "u:0", "user_served", {
        "bike": 0, "departure_ms": 0, "walk_origin_ms": 60_000, "wait_ms": 0,
        "ride_ms": 840_000, "walk_destination_ms": 0, "attempts": 1,
    })
    log.close(DAY_MS)
    return log


class EventLogTests(SimpleTestCase):

    def test_record_appends(self):
        log = EventLog({"seed": 1})
        log.record(0, "sim", "start")
        self.assertEqual(len(log), 1)

    def test_out_of_order_record(self):
        log = EventLog({"seed": 1})
        log.record(10, "u:0", "user_state", {"activity": "walking"})
        with self.assertRaises(EventLogError):
            log.record(9, "u:1", "user_state", {"activity": "walking"})

    def test_closed_log_rejects_records(self):
        log = one_trip_log()
        with self.assertRaises(EventLogError):
            log.record(DAY_MS, "u:1", "user_state", {"activity": "walking"})

    def test_file_replays_in_memory_records(self):
        with tempfile.TemporaryDirectory() as tmp:
            log = one_trip_log(Path(tmp) / "events.log")
            metadata, records = read_log(log.path)
            self.assertEqual(metadata["mode"], "dockless")
            self.assertEqual(list(records), log.records)

    def test_same_records_same_bytes(self):
        with tempfile.TemporaryDirectory() as tmp:
            a = one_trip_log(Path(tmp) / "a.log")
            b = one_trip_log(Path(tmp) / "b.log")
            self.assertEqual(a.path.read_bytes(), b.path.read_bytes())

    def test_not_a_log(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "other.log"
            path.write_text('{"meta": {"format": "something else"}}\n')
            with self.assertRaises(EventLogError):
                read_log(path)
            with self.assertRaises(EventLogError):
                read_log(Path(tmp) / "missing.log")


class ComputeKpisTests(SimpleTestCase):

    def test_single_trip(self):
        report = compute_kpis(one_trip_log())
        self.assertEqual(report.demand, 1)
        self.assertEqual(report.served_pct, 100.0)
        self.assertEqual(report.trips_per_bike_day, 1.0)
        self.assertAlmostEqual(report.avg_ride_min, 14.0)
        self.assertAlmostEqual(report.avg_walk_origin_min, 1.0)
        self.assertAlmostEqual(report.avg_trip_min, 15.0)
        self.assertAlmostEqual(report.avg_wait_or_walk_min, 1.0)
        self.assertEqual(report.wait_or_walk_over_10_pct, 0.0)
        self.assertEqual(report.bikes_used_pct, 100.0)
        self.assertAlmostEqual(report.vkt_total_km, 2.38)
        self.assertEqual(report.vkt_split_pct["in_use"], 100.0)
        self.assertAlmostEqual(report.time_split_pct["in_use"], 100.0 * 840_000 / DAY_MS)
        self.assertAlmostEqual(sum(report.time_split_pct.values()), 100.0, places=6)

    def test_wait_or_walk_depends_on_mode(self):
        self.assertAlmostEqual(compute_kpis(one_trip_log(mode="station")).avg_wait_or_walk_min, 1.0)
        self.assertEqual(compute_kpis(one_trip_log(mode="autonomous")).avg_wait_or_walk_min, 0.0)

    def test_no_served_trips(self):
        log = EventLog({"mode": "station", "fleet_size": 0, "horizon_ms": DAY_MS})
        log.record(5, "u:0", "user_unserved", {"reason": "NoWalkableStations", "departure_ms": 5, "attempts": 1})
        log.close(DAY_MS)
        report = compute_kpis(log)
        self.assertEqual(report.served_pct, 0.0)
        self.assertEqual(report.unserved_pct, 100.0)
        self.assertEqual(report.unserved_by_reason_pct["NoWalkableStations"], 100.0)
        self.assertIsNone(report.avg_trip_min)
        self.assertIsNone(report.avg_wait_min)
        self.assertIsNone(report.wait_or_walk_over_15_pct)
        self.assertEqual(report.trips_per_bike_day, 0.0)

    def test_truncated_log(self):
        log = EventLog({"mode": "station", "fleet_size": 0})
        log.record(0, "u:0", "user_state", {"activity": "walking"})
        with self.assertRaises(EventLogError):
            compute_kpis(log)

    def test_missing_requests_are_detected(self):
        log = EventLog({"mode": "station", "fleet_size": 0, "requests": 2})
        log.record(5, "u:0", "user_unserved", {"reason": "NoBikes", "departure_ms": 5, "attempts": 1})
        log.close(10)
        with self.assertRaises(EventLogError):
            compute_kpis(log)

    def test_persisted_log_gives_same_report(self):
        with tempfile.TemporaryDirectory() as tmp:
            log = one_trip_log(Path(tmp) / "events.log")
            self.assertEqual(compute_kpis(log.path), compute_kpis(log))

    def test_counts(self):
        log = EventLog({"mode": "autonomous", "fleet_size": 2, "horizon_ms": 2 * DAY_MS})
        log.record(0, "b:0", "bike_state", {"state": "Idle", "node": 1})
        log.record(0, "b:1", "bike_state", {"state": "Idle", "node": 1})
        log.record(10, "b:0", "bike_state", {"state": "DrivingToCharger", "node": 1})
        log.record(20, "b:0", "bike_moved", {"cls": "charge", "mm": 1000, "soc_drop": 0.01})
        log.record(20, "b:0", "bike_state", {"state": "Charging", "node": 2})
        log.record(20, "b:0", "charge_start", {"soc": 0.14, "station": 1})
        log.record(30, "b:1", "bike_state", {"state": "Rebalancing", "node": 1})
        log.record(30, "rebalancer", "rebalance_plan", {"moves": 1, "objective": 1.0, "demand": 1})
        log.record(40, "b:1", "bike_moved", {"cls": "rebalancing", "mm": 3000, "soc_drop": 0.0})
        log.record(40, "b:1", "bike_state", {"state": "Stranded", "node": 3})
        log.record(40, "b:1", "bike_stranded", {"node": 3, "soc": 0.0})
        log.close(2 * DAY_MS)
        report = compute_kpis(log)
        self.assertEqual(report.total_charges, 1)
        self.assertEqual(report.charges_per_day, 0.5)
        self.assertEqual(report.rebalanced_bikes, 1)
        self.assertEqual(report.stranded_bikes, 1)
        self.assertEqual(report.vkt_split_pct, {"in_use": 0.0, "pickup": 0.0, "rebalancing": 75.0, "charge": 25.0})
        self.assertAlmostEqual(report.time_split_pct["rebalancing"], 100.0 * 10 / (4 * DAY_MS))

    def test_time_after_the_horizon_is_not_counted(self):
        log = EventLog({"mode": "autonomous", "fleet_size": 2, "horizon_ms": DAY_MS, "requests": 1})
        log.record(0, "b:0", "bike_state", {"state": "Idle", "node": 1})
        log.record(0, "b:1", "bike_state", {"state": "Idle", "node": 1})
        log.record(DAY_MS - 60_000, "b:0", "bike_state", {"state": "InUse", "node": 1})
        log.record(DAY_MS + 120_000, "b:0", "bike_moved", {"cls": "in_use", "mm": 500_000, "soc_drop": 0.0})
        log.record(DAY_MS + 120_000, "b:0", "bike_state", {"state": "Idle", "node": 2})
        log.record(DAY_MS + 120_000, "u:0", "user_served", {
            "bike": 0, "departure_ms": DAY_MS - 60_000, "walk_origin_ms": 0, "wait_ms": 0,
            "ride_ms": 180_000, "walk_destination_ms": 0, "attempts": 1,
        })
        log.close(DAY_MS + 120_000)

        durations = state_durations(log)
        self.assertEqual(durations["b:0"], {"idling": DAY_MS - 60_000, "in_use": 60_000})
        self.assertEqual(durations["b:1"], {"idling": DAY_MS})
        report = compute_kpis(log)
        self.assertAlmostEqual(report.time_split_pct["in_use"], 100.0 * 60_000 / (2 * DAY_MS))
        self.assertEqual(report.served, 1)
        self.assertAlmostEqual(report.vkt_total_km, 0.5)


class TimelineTests(SimpleTestCase):

    def test_single_trip_fills_its_bins(self):
        frame = timeline(one_trip_log(), 60)
        self.assertEqual(len(frame), 1440)
        riding = frame.index[frame["users_riding"] > 0].tolist()
        self.assertEqual(riding, list(range(1, 15)))
        self.assertEqual(frame.index[frame["users_walking"] > 0].tolist(), [0])
        self.assertEqual(frame.index[frame["served"] > 0].tolist(), [15])
        self.assertEqual(frame["bikes_InUse"].sum(), 14.0)

    def test_one_bin_matches_report(self):
        log = one_trip_log()
        frame = timeline(log, DAY_MS / 1000)
        report = compute_kpis(log)
        self.assertEqual(len(frame), 1)
        self.assertEqual(int(frame["served"].sum()), report.served)
        self.assertEqual(int(frame["unserved"].sum()), report.unserved)
        bike_share = frame[[c for c in frame.columns if c.startswith("bikes_")]].sum(axis=1)
        self.assertAlmostEqual(float(bike_share.iloc[0]), 1.0)

    def test_peak_share(self):
        frame = timeline(one_trip_log(), 60)
        self.assertEqual(peak_share(frame, "bikes_InUse", 1), 1.0)
        self.assertEqual(peak_share(frame, "bikes_InUse", 0), 0.0)

    def test_bin_must_be_positive(self):
        with self.assertRaises(ValueError):
            timeline(one_trip_log(), 0)

    def test_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_timeline(timeline(one_trip_log(), 3600), Path(tmp) / "timeline.csv")
            header = path.read_text().splitlines()[0]
        self.assertTrue(header.startswith("bin_start_s,users_walking"))
        self.assertTrue(header.endswith("served,unserved"))


class ReportTests(SimpleTestCase):

    def test_key_value_file(self):
        report = compute_kpis(one_trip_log())
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_report(report, tmp)
            values = read_kv(paths["kv"])
            table = paths["txt"].read_text()
        self.assertEqual(values["served"], "1")
        self.assertEqual(values["avg_ride_min"], "14.0000")
        self.assertEqual(values["time_split_pct.in_use"], f"{100.0 * 840_000 / DAY_MS:.4f}")
        self.assertIn("Trip time (min)", table)

    def test_empty_averages_are_marked(self):
        log = EventLog({"mode": "dockless", "fleet_size": 0})
        log.record(0, "u:0", "user_unserved", {"reason": "NoBikes", "departure_ms": 0, "attempts": 1})
        log.close(0)
        with tempfile.TemporaryDirectory() as tmp:
            values = read_kv(write_report(compute_kpis(log), tmp)["kv"])
        self.assertEqual(values["avg_trip_min"], "-")
