"""Scenario construction, run orchestration, metric collection, and file output.

A Scenario fully determines a run (including the seed); `run_scenario` is a
pure function from Scenario to MetricStore.  Runs execute the measurement
window first, snapshot per-flow results, then continue to quiescence so the
packet-conservation ledger can be balanced exactly before any metric is
reported.
"""

from __future__ import annotations

import copy
import csv
import json
import multiprocessing
import random
from dataclasses import dataclass, field
from pathlib import Path

from .engine import Link, Simulator, to_ns, us
from .packets import Flow
from .policy import Fanout, MeterScheme, Variant
from .switch import SwitchConfig, SwitchModel, SwitchVariant
from .transport import HostSender, PortReceiver


class ConservationError(AssertionError):
    """A packet went missing outside the counted loss modes."""


class ConfigError(ValueError):
    """Bad or unknown key in a config file."""


class MetricStore:
    """Per-run collectors.  Plain data only, so stores pickle across processes."""

    def __init__(self, n_pipes: int, n_ports: int,
                 record_queues: bool = False, record_trace: bool = False) -> None:
        self.meta: dict = {}
        self.record_queues = record_queues
        self.record_trace = record_trace
        # exact counters
        self.sent_data = 0
        self.delivered_full = 0
        self.delivered_header = 0
        self.dup_data = 0
        self.stale_headers = 0
        self.ingress_trims = 0
        self.dod_trims = 0
        self.ideal_trims = 0
        self.mod_trims = 0
        self.dod_dropped = 0
        self.header_dropped = 0
        self.signals = 0
        self.pulls = 0
        self.nacks = 0
        self.rtx_sent = 0
        self.wasted_pulls = 0
        self.signals_by_port: dict[int, int] = {}
        self.max_dod_queue = [0] * n_pipes
        self.max_data_queue = [0] * n_ports
        # traces
        self.header_arrival_ps: list[int] = []
        self.mode_trace: list[tuple] = []
        self.queue_samples: list[tuple] = []
        self.trace_rows: list[tuple] = []
        self.flow_rows: list[dict] = []
        self.duration_ps = 0
        self.quiesce_ps = 0

    def total_trims(self) -> int:
        return self.ingress_trims + self.dod_trims + self.ideal_trims + self.mod_trims

    def conservation_residual(self) -> int:
        return self.sent_data - (
            self.delivered_full + self.delivered_header
            + self.dod_dropped + self.header_dropped
        )

    def header_arrivals_in_window(self) -> list[int]:
        cut = self.duration_ps
        return [t for t in self.header_arrival_ps if t <= cut]

    def goodputs_gbps(self) -> list[float]:
        return [row["goodput_gbps"] for row in self.flow_rows]

    def counters_dict(self) -> dict:
        return {
            "sent": self.sent_data,
            "delivered_full": self.delivered_full,
            "delivered_header": self.delivered_header,
            "duplicates": self.dup_data,
            "stale_headers": self.stale_headers,
            "ingress_trims": self.ingress_trims,
            "dod_trims": self.dod_trims,
            "ideal_trims": self.ideal_trims,
            "mod_trims": self.mod_trims,
            "dod_dropped": self.dod_dropped,
            "header_dropped": self.header_dropped,
            "signals": self.signals,
            "signals_by_port": {str(k): v for k, v in sorted(self.signals_by_port.items())},
            "pulls": self.pulls,
            "nacks": self.nacks,
            "rtx_sent": self.rtx_sent,
            "wasted_pulls": self.wasted_pulls,
            "max_dod_queue": list(self.max_dod_queue),
            "max_data_queue": list(self.max_data_queue),
        }


@dataclass
class Scenario:
    name: str = "scenario"
    n_senders: int = 64
    n_receivers: int = 16
    duration_ps: int = us(500)
    initial_window: int = 1000
    total_packets: int | None = None
    seed: int = 0
    start_jitter_ps: int = 0
    ingress_ports: tuple | None = None
    host_link_latency_ps: int = 0
    cable_skew_ps: int = 1875   # per-ingress-port wiring skew; spreads synchronized arrivals
    host_dither_ps: int = 8000  # max per-packet emission gap; hosts share no clock
    reverse_latency_ps: int = 0
    switch: SwitchConfig = field(default_factory=SwitchConfig)

    def __post_init__(self) -> None:
        if not 1 <= self.n_senders <= self.switch.n_ports:
            raise ValueError(f"n_senders must be in 1..{self.switch.n_ports}")
        if self.n_receivers < 1:
            raise ValueError("n_receivers must be >= 1")
        if self.total_packets is None:
            self.total_packets = self.initial_window
        if self.ingress_ports is not None:
            ports = tuple(self.ingress_ports)
            if len(ports) != self.n_senders or len(set(ports)) != len(ports):
                raise ValueError("ingress_ports must list one distinct port per sender")
            if any(not 0 <= p < self.switch.n_ports for p in ports):
                raise ValueError("ingress_ports out of range")
            self.ingress_ports = ports

    def sender_ingress_port(self, i: int) -> int:
        return self.ingress_ports[i] if self.ingress_ports is not None else i

    def sender_egress_port(self, i: int) -> int:
        return i % self.n_receivers

    def sender_pairs(self) -> list[tuple[int, int]]:
        return [
            (self.sender_ingress_port(i), self.sender_egress_port(i))
            for i in range(self.n_senders)
        ]


def clone_scenario(s: Scenario, **changes) -> Scenario:
    """Deep copy with field overrides; nested configs never end up shared."""
    c = copy.deepcopy(s)
    switch = changes.pop("switch", None)
    policy = changes.pop("policy", None)
    for k, v in changes.items():
        if not hasattr(c, k):
            raise AttributeError(f"Scenario has no field {k!r}")
        setattr(c, k, v)
    if switch:
        for k, v in switch.items():
            if not hasattr(c.switch, k):
                raise AttributeError(f"SwitchConfig has no field {k!r}")
            setattr(c.switch, k, v)
    if policy:
        for k, v in policy.items():
            if not hasattr(c.switch.policy, k):
                raise AttributeError(f"PolicyConfig has no field {k!r}")
            setattr(c.switch.policy, k, v)
    if c.total_packets is not None and c.total_packets < c.initial_window:
        c.total_packets = c.initial_window
    c.__post_init__()
    return c


def build_incast(n_senders: int, n_receivers: int, **overrides) -> Scenario:
    """Incast family: sender i on ingress port i sends to egress port i % n_receivers."""
    if n_senders > 64:
        raise ValueError("at most 64 senders on a 64-port switch")
    s = Scenario(
        name=f"incast_{n_senders}to{n_receivers}",
        n_senders=n_senders,
        n_receivers=n_receivers,
    )
    senders_per_port = -(-n_senders // n_receivers)
    # Degree so high that trimmed headers alone exceed the egress line rate:
    # the per-port header backlog is then inherent to the pattern, and the
    # header queue must be deep enough that nothing is lost.
    if (senders_per_port - 1) * s.switch.header_size >= s.switch.mtu:
        s.switch.header_queue_cap = max(s.switch.header_queue_cap, 65536)
    return clone_scenario(s, **overrides) if overrides else s


def run_scenario(s: Scenario, record_queues: bool = False, record_trace: bool = False,
                 quiesce: bool = True) -> MetricStore:
    """Execute one scenario deterministically and return its metrics."""
    cfg = s.switch
    sim = Simulator()
    m = MetricStore(cfg.n_pipes, cfg.n_ports, record_queues, record_trace)
    m.duration_ps = s.duration_ps
    m.meta = {
        "name": s.name,
        "variant": cfg.variant.name,
        "policy": cfg.policy.variant.name,
        "fanout": cfg.policy.signal_fanout.name,
        "t0_ns": to_ns(cfg.policy.t0_ps),
        "t1_ns": to_ns(cfg.policy.t1_ps),
        "n_senders": s.n_senders,
        "n_receivers": s.n_receivers,
        "duration_ns": to_ns(s.duration_ps),
        "initial_window": s.initial_window,
        "total_packets": s.total_packets,
        "seed": s.seed,
    }

    receivers: dict[int, PortReceiver] = {}

    def deliver(pkt):
        receivers[pkt.egress_port].on_delivery(pkt)

    switch = SwitchModel(sim, cfg, m, deliver)
    rng = random.Random(s.seed)
    senders: list[HostSender] = []
    for i in range(s.n_senders):
        ing = s.sender_ingress_port(i)
        eport = s.sender_egress_port(i)
        flow = Flow(
            flow_id=i,
            src_host=ing,
            dst_host=eport,
            total_packets=s.total_packets,
            initial_window=s.initial_window,
        )
        link = Link(
            cfg.line_rate_bps,
            latency_ps=s.host_link_latency_ps + ing * s.cable_skew_ps,
        )
        start = rng.randrange(0, s.start_jitter_ps + 1) if s.start_jitter_ps else 0
        if s.host_dither_ps > 0:
            host_rng = random.Random((s.seed << 20) ^ (i + 1))
            span = s.host_dither_ps + 1
            dither = lambda r=host_rng, n=span: r.randrange(n)
        else:
            dither = None
        sender = HostSender(
            sim, flow, link, ing // cfg.ports_per_pipe,
            inject=switch.ingress_receive, metrics=m, mtu=cfg.mtu, start_ps=start,
            dither=dither,
        )
        if eport not in receivers:
            receivers[eport] = PortReceiver(
                sim, eport, cfg.line_rate_bps, m,
                mtu=cfg.mtu, reverse_latency_ps=s.reverse_latency_ps,
            )
        receivers[eport].register_flow(flow, sender, start_ps=start)
        senders.append(sender)

    for sender in senders:
        sender.start()
    sim.run_until(s.duration_ps)
    _freeze_flows(m, receivers, s.duration_ps, cfg.mtu)

    if quiesce:
        sim.run_all(limit=s.duration_ps * 50)
        residual = m.conservation_residual()
        if residual != 0 or not switch.queues_quiescent():
            raise ConservationError(
                f"{s.name}: sent={m.sent_data} != delivered_full={m.delivered_full}"
                f" + delivered_header={m.delivered_header} + dod_dropped={m.dod_dropped}"
                f" + header_dropped={m.header_dropped} (residual {residual})"
            )
    m.quiesce_ps = sim.now
    return m


def _freeze_flows(m: MetricStore, receivers: dict[int, PortReceiver], window_ps: int,
                  mtu: int) -> None:
    rows = []
    for port in sorted(receivers):
        rx = receivers[port]
        for fid in sorted(rx.flows):
            fx = rx.flows[fid]
            done = fx.done_ps if fx.done_ps is not None and fx.done_ps <= window_ps else None
            end = done if done is not None else window_ps
            nbytes = fx.count * mtu if done is None else fx.flow.total_packets * mtu
            active_ns = to_ns(end - fx.start_ps)
            rows.append({
                "flow_id": fid,
                "port": port,
                "bytes": nbytes,
                "start_ns": to_ns(fx.start_ps),
                "end_ns": to_ns(end),
                "complete": done is not None,
                "goodput_gbps": (nbytes * 8 / active_ns) if active_ns > 0 else 0.0,
                "rtx_count": fx.sender.rtx_count,
                "duplicates": fx.dup,
            })
    m.flow_rows = rows


# ------------------------------------------------------------------ analysis

def cdf(values) -> list[tuple]:
    """Step CDF of a sample: sorted (value, cumulative fraction) pairs."""
    vals = sorted(values)
    n = len(vals)
    if n == 0:
        return []
    out = []
    for i, v in enumerate(vals):
        if i + 1 < n and vals[i + 1] == v:
            continue  # collapse duplicates onto the last occurrence
        out.append((v, (i + 1) / n))
    return out


@dataclass(frozen=True)
class ExcessReport:
    """Trim excess of a run against its ideal-switch baseline."""

    ratio: float | None  # None when the baseline trimmed nothing but the run did
    absolute: int

    @property
    def value(self) -> float:
        if self.ratio is None:
            raise ValueError(f"no baseline trims; absolute excess is {self.absolute}")
        return self.ratio


def trim_excess(run: MetricStore, ideal: MetricStore) -> ExcessReport:
    t_run = run.total_trims()
    t_ideal = ideal.total_trims()
    if t_ideal == 0:
        return ExcessReport(0.0 if t_run == 0 else None, t_run)
    return ExcessReport((t_run - t_ideal) / t_ideal, t_run - t_ideal)


# -------------------------------------------------------------------- sweeps

def _run_point(args):
    scenario, record_queues = args
    return run_scenario(scenario, record_queues=record_queues)


def sweep(axis: str, base: Scenario, values=None, jobs: int = 1) -> list[tuple]:
    """One run per axis value, identical seed everywhere.

    Axes: `n_senders` (1..64), `response_duration` (picoseconds; arms the
    policy with t0=d, t1=4d preserving the default 6/24 shape), `variant`
    (policy Variant names or members).
    """
    if axis == "n_senders":
        if values is None:
            values = range(1, 65)
        points = [(v, clone_scenario(base, n_senders=int(v),
                                     name=f"{base.name}_n{v}")) for v in values]
    elif axis == "response_duration":
        if values is None:
            values = [us(x) for x in (0, 1, 2, 3, 4, 6, 9, 12, 15, 18, 24, 30)]
        points = []
        for v in values:
            d = int(v)
            points.append((d, clone_scenario(
                base, name=f"{base.name}_d{to_ns(d):g}ns",
                policy={"t0_ps": d, "t1_ps": 4 * d})))
    elif axis == "variant":
        if values is None:
            values = [Variant.FULL, Variant.PESSI_ONLY, Variant.TRIM_ALL]
        points = []
        for v in values:
            var = v if isinstance(v, Variant) else Variant[str(v)]
            points.append((var.name, clone_scenario(
                base, name=f"{base.name}_{var.name.lower()}",
                policy={"variant": var})))
    else:
        raise ValueError(f"unknown sweep axis {axis!r}")

    scenarios = [(sc, False) for _, sc in points]
    if jobs > 1 and len(scenarios) > 1:
        with multiprocessing.Pool(jobs) as pool:
            stores = pool.map(_run_point, scenarios)
    else:
        stores = [_run_point(a) for a in scenarios]
    return [(points[i][0], stores[i]) for i in range(len(points))]


# ------------------------------------------------------------------- outputs

def write_run_outputs(m: MetricStore, outdir) -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "counters.json").write_text(
        json.dumps({"meta": m.meta, **m.counters_dict()}, indent=2) + "\n"
    )
    with (out / "header_cdf.csv").open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ns", "fraction"])
        for t, frac in cdf(m.header_arrivals_in_window()):
            w.writerow([f"{to_ns(t):.3f}", f"{frac:.8f}"])
    with (out / "flows.csv").open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["flow_id", "bytes", "start_ns", "end_ns", "goodput_gbps", "rtx_count"])
        for row in m.flow_rows:
            w.writerow([
                row["flow_id"], row["bytes"], f"{row['start_ns']:.3f}",
                f"{row['end_ns']:.3f}", f"{row['goodput_gbps']:.4f}", row["rtx_count"],
            ])
    with (out / "modes.csv").open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ns", "pipe", "port", "mode"])
        for t, pipe, port, mode in m.mode_trace:
            w.writerow([f"{to_ns(t):.3f}", pipe, port, mode])
    with (out / "queues.csv").open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time_ns", "queue", "index", "depth"])
        for t, kind, idx, depth in m.queue_samples:
            w.writerow([f"{to_ns(t):.3f}", kind, idx, depth])
    if m.record_trace:
        with (out / "trace.csv").open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["time_ns", "flow_id", "seqno", "kind", "trim_origin", "egress_port"])
            for t, fid, seq, kind, origin, eport in m.trace_rows:
                w.writerow([f"{to_ns(t):.3f}", fid, seq, kind, origin, eport])


SWEEP_COLUMNS = [
    "axis", "value", "name", "variant", "policy",
    "goodput_mean_gbps", "goodput_min_gbps", "goodput_max_gbps",
    "total_trims", "ingress_trims", "dod_trims", "ideal_trims", "mod_trims",
    "max_dod_queue", "max_data_queue", "signals",
    "dod_dropped", "header_dropped", "sent", "delivered_full", "delivered_header",
]


def sweep_row(axis: str, value, m: MetricStore) -> dict:
    goodputs = m.goodputs_gbps()
    return {
        "axis": axis,
        "value": value,
        "name": m.meta["name"],
        "variant": m.meta["variant"],
        "policy": m.meta["policy"],
        "goodput_mean_gbps": sum(goodputs) / len(goodputs) if goodputs else 0.0,
        "goodput_min_gbps": min(goodputs) if goodputs else 0.0,
        "goodput_max_gbps": max(goodputs) if goodputs else 0.0,
        "total_trims": m.total_trims(),
        "ingress_trims": m.ingress_trims,
        "dod_trims": m.dod_trims,
        "ideal_trims": m.ideal_trims,
        "mod_trims": m.mod_trims,
        "max_dod_queue": max(m.max_dod_queue, default=0),
        "max_data_queue": max(m.max_data_queue, default=0),
        "signals": m.signals,
        "dod_dropped": m.dod_dropped,
        "header_dropped": m.header_dropped,
        "sent": m.sent_data,
        "delivered_full": m.delivered_full,
        "delivered_header": m.delivered_header,
    }


def write_sweep_csv(rows: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        for row in rows:
            out = dict(row)
            for k in ("goodput_mean_gbps", "goodput_min_gbps", "goodput_max_gbps"):
                out[k] = f"{row[k]:.4f}"
            w.writerow(out)


# ------------------------------------------------------------- config loading

_SCENARIO_KEYS = {
    "name": ("name", str),
    "n_senders": ("n_senders", int),
    "n_receivers": ("n_receivers", int),
    "duration_ns": ("duration_ps", "ns"),
    "initial_window": ("initial_window", int),
    "total_packets": ("total_packets", int),
    "seed": ("seed", int),
    "start_jitter_ns": ("start_jitter_ps", "ns"),
    "ingress_ports": ("ingress_ports", tuple),
    "host_link_latency_ns": ("host_link_latency_ps", "ns"),
    "cable_skew_ns": ("cable_skew_ps", "ns"),
    "host_dither_ns": ("host_dither_ps", "ns"),
    "reverse_latency_ns": ("reverse_latency_ps", "ns"),
}
_SWITCH_KEYS = {
    "n_pipes": ("n_pipes", int),
    "ports_per_pipe": ("ports_per_pipe", int),
    "line_rate_bps": ("line_rate_bps", int),
    "data_queue_cap": ("data_queue_cap", int),
    "header_queue_cap": ("header_queue_cap", int),
    "dod_queue_cap": ("dod_queue_cap", int),
    "recirc_latency_ns": ("recirc_latency_ps", "ns"),
    "signal_hops": ("signal_hops", int),
    "signal_latency_ns": ("signal_latency_ps", "ns"),
    "dod_signal_min_queue": ("dod_signal_min_queue", int),
    "mtu": ("mtu", int),
    "header_size": ("header_size", int),
    "header_data_weight": ("header_data_weight", int),
    "variant": ("variant", SwitchVariant),
    "tofino2_lag": ("tofino2_lag", int),
}
_POLICY_KEYS = {
    "t0_ns": ("t0_ps", "ns"),
    "t1_ns": ("t1_ps", "ns"),
    "variant": ("variant", Variant),
    "signal_fanout": ("signal_fanout", Fanout),
    "trim_n": ("trim_n", int),
    "meter_scheme": ("meter_scheme", MeterScheme),
}


def _apply_section(obj, section: dict, keymap: dict, where: str) -> None:
    for key, raw in section.items():
        if key not in keymap:
            raise ConfigError(f"unknown key {key!r} in {where}")
        attr, conv = keymap[key]
        if conv == "ns":
            value = round(float(raw) * 1000)
        elif isinstance(conv, type) and issubclass(conv, (SwitchVariant, Variant, Fanout, MeterScheme)):
            try:
                value = conv[str(raw)]
            except KeyError:
                raise ConfigError(
                    f"{where}.{key}: {raw!r} is not one of {[e.name for e in conv]}"
                ) from None
        elif conv is tuple:
            value = tuple(raw)
        else:
            value = conv(raw)
        setattr(obj, attr, value)


def scenario_from_config(doc: dict) -> Scenario:
    """Build a Scenario from a parsed JSON config; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    for key in doc:
        if key not in ("scenario", "switch", "policy"):
            raise ConfigError(f"unknown top-level key {key!r}")
    s = Scenario()
    _apply_section(s.switch.policy, doc.get("policy", {}), _POLICY_KEYS, "policy")
    _apply_section(s.switch, doc.get("switch", {}), _SWITCH_KEYS, "switch")
    _apply_section(s, doc.get("scenario", {}), _SCENARIO_KEYS, "scenario")
    if "signal_latency_ns" not in doc.get("switch", {}):
        s.switch.signal_latency_ps = s.switch.signal_hops * s.switch.recirc_latency_ps
    if "total_packets" not in doc.get("scenario", {}):
        s.total_packets = None
    # re-run validation after field injection
    s.__post_init__()
    s.switch.policy.__post_init__()
    return s


def load_config(path) -> Scenario:
    with open(path) as f:
        return scenario_from_config(json.load(f))
