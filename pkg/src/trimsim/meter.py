"""Two-rate three-color token-bucket meters (color-blind trTCM).

Each meter tracks a committed and a peak bucket.  Token state is held in
scaled integer units (bytes * 8e12) so that lazy replenishment from integer
picosecond timestamps is exact for any rate expressed in bits/second --
there is no rounding drift between calls.
"""

from __future__ import annotations

from enum import IntEnum

from .engine import BPS_PS_PER_BYTE

BURST_DEFAULT = 3000  # bytes; two MTUs of slack for back-to-back arrival jitter


class Color(IntEnum):
    GREEN = 0
    YELLOW = 1
    RED = 2


class TrTcmMeter:
    """Color-blind two-rate three-color marker.

    RED when the peak bucket cannot cover the packet; YELLOW when only the
    committed bucket cannot (peak debited); GREEN otherwise (both debited).
    Meters never reject traffic, they only color it.
    """

    __slots__ = ("cir", "pir", "cbs", "pbs", "_c", "_p", "last_update")

    def __init__(self, cir: int, pir: int, cbs: int = BURST_DEFAULT, pbs: int = BURST_DEFAULT) -> None:
        if cir > pir:
            raise ValueError("committed rate must not exceed peak rate")
        if cir <= 0 or pir <= 0:
            raise ValueError("meter rates must be positive")
        self.cir = cir
        self.pir = pir
        self.cbs = cbs
        self.pbs = pbs
        # buckets start full, in scaled units
        self._c = cbs * BPS_PS_PER_BYTE
        self._p = pbs * BPS_PS_PER_BYTE
        self.last_update = 0

    @property
    def c_tokens(self) -> float:
        """Committed bucket content in bytes (diagnostic view)."""
        return self._c / BPS_PS_PER_BYTE

    @property
    def p_tokens(self) -> float:
        return self._p / BPS_PS_PER_BYTE

    def preload(self, c_bytes: int, p_bytes: int) -> None:
        """Set absolute bucket levels (setup only, e.g. to desynchronize meters)."""
        if not (0 <= c_bytes <= self.cbs and 0 <= p_bytes <= self.pbs):
            raise ValueError("preload levels must lie within the burst sizes")
        self._c = c_bytes * BPS_PS_PER_BYTE
        self._p = p_bytes * BPS_PS_PER_BYTE

    def execute(self, now: int, nbytes: int) -> Color:
        if now < self.last_update:
            raise ValueError("meter time must be non-decreasing")
        dt = now - self.last_update
        if dt:
            c = self._c + dt * self.cir
            cap = self.cbs * BPS_PS_PER_BYTE
            self._c = cap if c > cap else c
            p = self._p + dt * self.pir
            cap = self.pbs * BPS_PS_PER_BYTE
            self._p = cap if p > cap else p
            self.last_update = now
        need = nbytes * BPS_PS_PER_BYTE
        if self._p < need:
            return Color.RED
        if self._c < need:
            self._p -= need
            return Color.YELLOW
        self._p -= need
        self._c -= need
        return Color.GREEN


def single_rate_meter(rate_bps: int, burst: int = BURST_DEFAULT) -> TrTcmMeter:
    """Meter with cir = pir, as used for the fixed-rate mode meters."""
    return TrTcmMeter(cir=rate_bps, pir=rate_bps, cbs=burst, pbs=burst)
