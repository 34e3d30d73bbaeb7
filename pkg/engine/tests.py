import numpy as np
from django.test import SimpleTestCase

from .events import EventKind, SchedulingError, SimulationError, Simulator, to_ms
from .rng import agent_rng, stable_u64


def recording_simulator():
    sim = Simulator()
    seen = []

    def record(event):
        seen.append((event.time, event.seq, event.payload.get("tag")))

    for kind in EventKind:
        sim.register(kind, record)
    return sim, seen


class ScheduleTests(SimpleTestCase):

    def test_seconds_become_milliseconds(self):
        self.assertEqual(to_ms(72), 72000)
        self.assertEqual(to_ms(0.0004), 0)
        self.assertEqual(to_ms(0.0005), 1)

    def test_zero_delay_runs_before_later_events(self):
        sim, seen = recording_simulator()
        sim.schedule_at(100, "u:1", EventKind.USER_ARRIVES, {"tag": "first"})
        sim.schedule_at(101, "u:2", EventKind.USER_ARRIVES, {"tag": "later"})

        def chain(event):
            seen.append((event.time, event.seq, "first"))
            sim.schedule(0, "u:3", EventKind.BIKE_DROPPED, {"tag": "zero"})

        sim.register(EventKind.USER_ARRIVES, chain)
        sim.register(EventKind.BIKE_DROPPED, lambda e: seen.append((e.time, e.seq, e.payload["tag"])))
        sim.run_until(100)
        self.assertEqual([tag for _, _, tag in seen], ["first", "zero"])

    def test_equal_times_dispatch_in_insertion_order(self):
        sim, seen = recording_simulator()
        sim.schedule(5, "a", EventKind.USER_ARRIVES, {"tag": "a"})
        sim.schedule(5, "b", EventKind.USER_ARRIVES, {"tag": "b"})
        sim.run_until(10_000)
        self.assertEqual([tag for _, _, tag in seen], ["a", "b"])

    def test_negative_delay_rejected(self):
        sim, _ = recording_simulator()
        with self.assertRaises(SchedulingError):
            sim.schedule(-1, "a", EventKind.USER_ARRIVES)

    def test_dispatch_order_matches_sort(self):
        sim, seen = recording_simulator()
        rng = np.random.default_rng(7)
        delays = rng.integers(0, 1000, size=100_000)
        for delay in delays.tolist():
            sim.schedule(delay, "x", EventKind.USER_ARRIVES)
        sim.run_until(10**9)
        expected = sorted((to_ms(d), i) for i, d in enumerate(delays.tolist()))
        self.assertEqual([(t, s) for t, s, _ in seen], expected)


class CancelTests(SimpleTestCase):

    def test_cancel_before_dispatch(self):
        sim, seen = recording_simulator()
        handle = sim.schedule(1, "a", EventKind.USER_ARRIVES)
        self.assertTrue(handle.cancel())
        sim.run_until(5000)
        self.assertEqual(seen, [])
        self.assertEqual(len(sim.queue), 0)

    def test_cancel_after_dispatch(self):
        sim, seen = recording_simulator()
        handle = sim.schedule(1, "a", EventKind.USER_ARRIVES)
        sim.run_until(5000)
        self.assertFalse(handle.cancel())
        self.assertEqual(len(seen), 1)

    def test_second_cancel_reports_false(self):
        sim, _ = recording_simulator()
        handle = sim.schedule(1, "a", EventKind.USER_ARRIVES)
        self.assertTrue(handle.cancel())
        self.assertFalse(handle.cancel())

    def test_cancel_storm_matches_reference(self):
        sim, seen = recording_simulator()
        rng = np.random.default_rng(13)
        handles = []
        for i in range(10_000):
            handles.append((i, sim.schedule(int(rng.integers(0, 500)), "x", EventKind.USER_ARRIVES, {"tag": i})))
        cancelled = set()
        for i, handle in handles:
            if rng.random() < 0.5:
                handle.cancel()
                cancelled.add(i)
        sim.run_until(10**9)
        self.assertEqual({tag for _, _, tag in seen}, set(range(10_000)) - cancelled)
        self.assertEqual(len(seen), 10_000 - len(cancelled))


class RunTests(SimpleTestCase):

    def test_empty_queue_returns_end_time(self):
        sim, _ = recording_simulator()
        self.assertEqual(sim.run_until(7000), 7000)

    def test_only_events_up_to_end_are_dispatched(self):
        sim, seen = recording_simulator()
        for t in (5, 5, 9):
            sim.schedule_at(t, "x", EventKind.USER_ARRIVES)
        self.assertEqual(sim.run_until(7), 7)
        self.assertEqual([t for t, _, _ in seen], [5, 5])
        self.assertEqual(len(sim.queue), 1)

    def test_clock_never_goes_backwards(self):
        sim, _ = recording_simulator()
        times = []
        sim.register(EventKind.USER_ARRIVES, lambda e: times.append(sim.now))
        for t in np.random.default_rng(3).integers(0, 10_000, size=1000).tolist():
            sim.schedule_at(t, "x", EventKind.USER_ARRIVES)
        sim.run_until(5_000)
        sim.run_until(20_000)
        self.assertEqual(times, sorted(times))

    def test_handler_error_names_event(self):
        sim = Simulator()

        def explode(event):
            raise KeyError("bike 3")

        sim.register(EventKind.CHARGE_COMPLETE, explode)
        sim.schedule_at(42, "b:3", EventKind.CHARGE_COMPLETE)
        with self.assertRaises(SimulationError) as ctx:
            sim.run_until(100)
        self.assertEqual(ctx.exception.event.target, "b:3")
        self.assertIn("ChargeComplete", str(ctx.exception))

    def test_unregistered_kind_fails(self):
        sim = Simulator()
        sim.schedule_at(1, "x", EventKind.REBALANCE_TICK)
        with self.assertRaises(SimulationError):
            sim.run_until(10)

    def test_run_while_drains_in_order(self):
        sim, seen = recording_simulator()
        for t in (30, 10, 20):
            sim.schedule_at(t, "x", EventKind.USER_ARRIVES)
        sim.run_while(lambda: len(seen) < 2)
        self.assertEqual([t for t, _, _ in seen], [10, 20])


class AgentRngTests(SimpleTestCase):

    def test_stable_hash(self):
        self.assertEqual(stable_u64("7:u:1"), stable_u64("7:u:1"))
        self.assertNotEqual(stable_u64("7:u:1"), stable_u64("7:u:2"))

    def test_substreams_are_reproducible_and_distinct(self):
        a = agent_rng(7, "u:1").random(5)
        b = agent_rng(7, "u:1").random(5)
        c = agent_rng(8, "u:1").random(5)
        self.assertTrue(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))
