"""trimsim: packet-level simulation of datacenter switch packet trimming."""

from .engine import Event, Link, SchedulingError, Simulator, ns, to_ns, us
from .harness import (
    ConservationError,
    ExcessReport,
    MetricStore,
    Scenario,
    build_incast,
    cdf,
    clone_scenario,
    run_scenario,
    sweep,
    trim_excess,
)
from .meter import Color, TrTcmMeter, single_rate_meter
from .packets import CongestionSignal, Flow, Kind, Packet, TrimOrigin, trim
from .policy import (
    Fanout,
    MeterScheme,
    Mode,
    PolicyConfig,
    PortTrimState,
    Variant,
    Verdict,
    classify,
    decide_three_meter,
    decide_two_meter,
    fanout_targets,
    mode_target_rate,
    on_congestion_signal,
)
from .switch import (
    EnqueueOutcome,
    SwitchConfig,
    SwitchModel,
    SwitchVariant,
    worst_case_check,
)

__version__ = "0.1.0"
