"""Per-egress-port trimming control loop.

Each (pipeline, egress port) pair holds a small state machine driven by
congestion signals: a signal puts the port into pessimistic mode and arms two
expiry timestamps; absent further signals the port decays to halftimistic at
t0 and back to optimistic at t1.  The trim decision for a packet combines the
current mode with the colors of fixed-rate meters.

Policy variants cover the design alternatives: pessimistic-only and
trim-everything responses (single-stage), trim-N-packets soft state, and a
no-response mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto

from .engine import us
from .meter import Color


class Mode(Enum):
    OPTIMISTIC = auto()
    HALFTIMISTIC = auto()
    PESSIMISTIC = auto()


class Verdict(Enum):
    FORWARD = auto()
    TRIM = auto()


class Variant(Enum):
    FULL = auto()        # pessimistic then halftimistic (the deployed design)
    PESSI_ONLY = auto()  # pessimistic then straight back to optimistic
    TRIM_ALL = auto()    # trim 100% of packets while pessimistic
    TRIM_N = auto()      # trim a fixed packet count per signal
    NONE = auto()        # ignore congestion signals entirely


class Fanout(Enum):
    ALL_PIPES = auto()
    ORIGIN_PIPE = auto()


class MeterScheme(Enum):
    THREE_METER = auto()  # optimistic/halftimistic/pessimistic at 100/50/25%
    TWO_METER = auto()    # opti trTCM (pir=line, cir=line/2) + pessi at line/4


@dataclass
class PolicyConfig:
    t0_ps: int = us(6)    # pessimistic hold
    t1_ps: int = us(24)   # total hold (pessimistic + halftimistic)
    variant: Variant = Variant.FULL
    signal_fanout: Fanout = Fanout.ALL_PIPES
    trim_n: int = 12
    meter_scheme: MeterScheme = MeterScheme.THREE_METER

    def __post_init__(self) -> None:
        if self.t0_ps > self.t1_ps:
            raise ValueError("t0 must not exceed t1")
        if self.variant is Variant.TRIM_N and self.trim_n < 1:
            raise ValueError("trim_n must be >= 1")


class PortTrimState:
    """Mode registers for one (pipeline, egress port) pair."""

    __slots__ = ("t0_reg", "t1_reg", "pending_trims")

    def __init__(self) -> None:
        self.t0_reg = 0
        self.t1_reg = 0
        self.pending_trims = 0


def on_congestion_signal(state: PortTrimState, now: int, cfg: PolicyConfig) -> None:
    """Apply one congestion signal: (re)arm the expiry registers.

    Soft state: a repeat signal restarts the t0 timeout.  Single-stage
    variants arm only the pessimistic window.  TRIM_N instead accumulates a
    pending-trim quota.
    """
    v = cfg.variant
    if v is Variant.NONE:
        return
    if v is Variant.TRIM_N:
        state.pending_trims += cfg.trim_n
        return
    state.t0_reg = now + cfg.t0_ps
    if v is Variant.FULL:
        state.t1_reg = now + cfg.t1_ps
    else:  # PESSI_ONLY, TRIM_ALL: no halftimistic stage
        state.t1_reg = state.t0_reg


def classify(state: PortTrimState, now: int) -> Mode:
    """Mode as a pure function of (now, t0_reg, t1_reg); clears expired regs."""
    if now <= state.t0_reg:
        return Mode.PESSIMISTIC
    if now <= state.t1_reg:
        return Mode.HALFTIMISTIC
    if state.t0_reg or state.t1_reg:
        state.t0_reg = 0
        state.t1_reg = 0
    return Mode.OPTIMISTIC


def decide_three_meter(mode: Mode, opti: Color, half: Color, pessi: Color) -> Verdict:
    """Pick the active mode's meter color; trim iff it is RED."""
    if mode is Mode.PESSIMISTIC:
        color = pessi
    elif mode is Mode.HALFTIMISTIC:
        color = half
    else:
        color = opti
    return Verdict.TRIM if color is Color.RED else Verdict.FORWARD


def decide_two_meter(mode: Mode, opti: Color, pessi: Color) -> Verdict:
    """Two-meter decision table (opti: pir=line, cir=line/2; pessi: line/4)."""
    if mode is Mode.PESSIMISTIC:
        trim_it = pessi is not Color.GREEN
    elif mode is Mode.HALFTIMISTIC:
        trim_it = opti is not Color.GREEN
    else:
        trim_it = opti is Color.RED
    return Verdict.TRIM if trim_it else Verdict.FORWARD


def mode_target_rate(mode: Mode, line_rate_bps: int) -> int:
    """Per-pipeline target rate toward one egress port in the given mode."""
    if mode is Mode.PESSIMISTIC:
        return line_rate_bps // 4
    if mode is Mode.HALFTIMISTIC:
        return line_rate_bps // 2
    return line_rate_bps


def fanout_targets(origin_pipe: int, cfg: PolicyConfig, n_pipes: int) -> tuple:
    """Pipelines that receive a congestion signal originated by `origin_pipe`."""
    if cfg.signal_fanout is Fanout.ALL_PIPES:
        return tuple(range(n_pipes))
    return (origin_pipe,)
