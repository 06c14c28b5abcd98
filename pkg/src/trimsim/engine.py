"""Deterministic discrete-event core: clock, scheduler, and serializing links.

Time is kept as integer picoseconds so that serialization times at datacenter
rates are exact: a 1500 B packet at 100 Gb/s is 120000 ps, a 64 B header is
5120 ps.  All public interfaces (configs, CSV rows) speak nanoseconds; the
helpers `ns`/`us` convert into picoseconds.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

PS_PER_NS = 1_000
PS_PER_US = 1_000_000

#: scale factor turning (picoseconds * bits-per-second) into exact byte counts
BPS_PS_PER_BYTE = 8 * 10**12


def ns(v: float) -> int:
    """Nanoseconds -> integer picoseconds."""
    return round(v * PS_PER_NS)


def us(v: float) -> int:
    """Microseconds -> integer picoseconds."""
    return round(v * PS_PER_US)


def to_ns(ps: int) -> float:
    """Picoseconds -> nanoseconds (float, for reporting)."""
    return ps / PS_PER_NS


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled in the past (a programming error)."""


@dataclass(frozen=True)
class Event:
    """A scheduled action.  Equal fire times execute in insertion order."""

    fire_time: int
    target: Callable[[Any], None]
    payload: Any = None
    sequence: int = field(default=0, compare=False)


class Simulator:
    """Single global event queue with a monotone clock.

    One instance is strictly single-threaded; independent instances may run
    in parallel with no shared state.
    """

    __slots__ = ("now", "_heap", "_seq")

    def __init__(self) -> None:
        self.now: int = 0
        self._heap: list = []
        self._seq: int = 0

    def schedule(self, fire_time: int, target: Callable[[Any], None], payload: Any = None) -> None:
        """Queue `target(payload)` at `fire_time` (absolute picoseconds)."""
        if fire_time < self.now:
            raise SchedulingError(
                f"event scheduled in the past: fire_time={fire_time} < now={self.now}"
            )
        heapq.heappush(self._heap, (fire_time, self._seq, target, payload))
        self._seq += 1

    def schedule_after(self, delay: int, target: Callable[[Any], None], payload: Any = None) -> None:
        self.schedule(self.now + delay, target, payload)

    def run_until(self, t: int) -> None:
        """Execute every event with fire_time <= t, then set the clock to t."""
        if t < self.now:
            raise SchedulingError(f"run_until({t}) is before now={self.now}")
        heap = self._heap
        while heap and heap[0][0] <= t:
            fire, _, target, payload = heapq.heappop(heap)
            self.now = fire
            target(payload)
        self.now = t

    def run_all(self, limit: int) -> None:
        """Drain the queue completely; fail if activity persists past `limit`.

        Used to run a scenario to quiescence for conservation accounting.
        """
        heap = self._heap
        while heap:
            fire, _, target, payload = heapq.heappop(heap)
            if fire > limit:
                raise SchedulingError(
                    f"simulation not quiescent by t={limit} ps (next event at {fire} ps)"
                )
            self.now = fire
            target(payload)

    def pending(self) -> int:
        return len(self._heap)


class Link:
    """A serializing point-to-point link: rate in bits/s plus fixed latency.

    `serialize` books transmission time on the wire; completions never
    overlap (busy_until is non-decreasing).
    """

    __slots__ = ("rate_bps", "latency_ps", "busy_until")

    def __init__(self, rate_bps: int, latency_ps: int = 0) -> None:
        if rate_bps <= 0:
            raise ValueError("link rate must be positive")
        self.rate_bps = rate_bps
        self.latency_ps = latency_ps
        self.busy_until = 0

    def serialization_ps(self, nbytes: int) -> int:
        if nbytes <= 0:
            raise ValueError("cannot serialize a non-positive byte count")
        num = nbytes * BPS_PS_PER_BYTE
        return -(-num // self.rate_bps)  # ceil division

    def serialize(self, nbytes: int, now: int) -> int:
        """Book `nbytes` on the wire starting no earlier than `now`.

        Returns the serialization completion time and advances busy_until.
        """
        start = now if now > self.busy_until else self.busy_until
        done = start + self.serialization_ps(nbytes)
        self.busy_until = done
        return done
