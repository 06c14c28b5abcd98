import random

import pytest

from trimsim.engine import Link, SchedulingError, Simulator, ns, us


def test_schedule_at_now_executes_next_step():
    sim = Simulator()
    fired = []
    sim.schedule(0, fired.append)
    sim.run_until(0)
    assert fired == [None]


def test_equal_time_events_execute_in_insertion_order():
    sim = Simulator()
    order = []
    sim.schedule(ns(100), order.append, "A")
    sim.schedule(ns(100), order.append, "B")
    sim.run_until(ns(100))
    assert order == ["A", "B"]


def test_event_order_matches_sort_oracle():
    # large random schedule against an independent stable sort
    rng = random.Random(7)
    sim = Simulator()
    fired = []
    expected = []
    for i in range(10**6):
        t = rng.randrange(0, 10**9)
        sim.schedule(t, fired.append, i)
        expected.append((t, i))
    expected.sort(key=lambda p: p[0])  # stable: ties keep insertion order
    sim.run_until(10**9)
    assert fired == [i for _, i in expected]


def test_scheduling_in_past_aborts():
    sim = Simulator()
    sim.schedule(ns(10), lambda _: None)
    sim.run_until(ns(10))
    with pytest.raises(SchedulingError):
        sim.schedule(ns(5), lambda _: None)


def test_run_until_empty_queue_advances_clock():
    sim = Simulator()
    sim.run_until(us(500))
    assert sim.now == us(500)


def test_event_after_horizon_not_executed():
    sim = Simulator()
    fired = []
    sim.schedule(us(10), fired.append)
    sim.run_until(us(5))
    assert fired == []
    assert sim.now == us(5)


def test_event_chain_count():
    # chain reschedules +1us each step: exactly 10 executions by t=10us
    sim = Simulator()
    count = [0]

    def step(_):
        count[0] += 1
        sim.schedule(sim.now + us(1), step)

    sim.schedule(us(1), step)
    sim.run_until(us(10))
    assert count[0] == 10


def test_clock_monotone_under_events():
    sim = Simulator()
    seen = []
    rng = random.Random(3)
    for _ in range(1000):
        sim.schedule(rng.randrange(0, 10**6), lambda _: seen.append(sim.now))
    sim.run_until(10**6)
    assert seen == sorted(seen)


class TestLink:
    def test_mtu_at_100g_takes_120ns(self):
        link = Link(100_000_000_000)
        assert link.serialize(1500, 0) == ns(120)

    def test_back_to_back_serialization(self):
        link = Link(100_000_000_000)
        link.serialize(1500, 0)
        assert link.serialize(1500, 0) == ns(240)

    def test_header_at_100g(self):
        link = Link(100_000_000_000)
        assert link.serialization_ps(64) == 5120

    def test_busy_until_non_decreasing(self):
        link = Link(100_000_000_000)
        rng = random.Random(9)
        prev = 0
        for _ in range(500):
            done = link.serialize(rng.choice([64, 1500]), rng.randrange(0, 10**6))
            assert done >= prev
            prev = done

    def test_zero_rate_rejected(self):
        with pytest.raises(ValueError):
            Link(0)

    def test_rate_conservation_over_window(self):
        # total bytes on the wire over [0, W] cannot exceed rate*W + one MTU
        link = Link(100_000_000_000)
        rng = random.Random(11)
        window = us(100)
        sent = 0
        now = 0
        while True:
            now += rng.randrange(0, ns(100))
            size = rng.choice([64, 1500])
            if max(now, link.busy_until) + link.serialization_ps(size) > window:
                break
            link.serialize(size, now)
            sent += size
        assert sent * 8 <= 100_000_000_000 * window / 1e12 + 1500 * 8
