"""Switch variants behind one ingress/enqueue/dequeue contract.

Four models share the machinery here:

* IDEAL          -- output-queued trimming: an arrival at a full data queue is
                    trimmed in place and its header joins the priority queue.
* MOD            -- mirror-on-drop: only the header of an overflowing packet
                    is copied into the origin pipeline's deflection queue and
                    recirculated back to the destination port.
* TOFINO_DOD     -- fixed per-(pipeline, port) line-rate meters in ingress
                    plus deflect-on-drop of whole packets on queue overflow.
* TOFINO_FULL    -- TOFINO_DOD plus the congestion feedback loop: a deflected
                    packet leaving a backlogged deflection queue triggers
                    signals that push ingress meters into pessimistic mode.
* TOFINO2        -- ingress trimming from lagged egress queue readings
                    instead of meters.

Queuing happens only in the traffic manager (the per-port data and header
queues and the per-pipeline DoD queues); ingress and egress pipelines are
zero-cost passthroughs apart from the logic modeled here.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum, auto

from .engine import Link, Simulator, us
from .meter import TrTcmMeter, single_rate_meter
from .packets import Kind, Packet, TrimOrigin, trim
from .policy import (
    Mode,
    MeterScheme,
    PolicyConfig,
    PortTrimState,
    Variant,
    Verdict,
    classify,
    decide_three_meter,
    decide_two_meter,
    fanout_targets,
    on_congestion_signal,
)


class SwitchVariant(Enum):
    IDEAL = auto()
    MOD = auto()
    TOFINO_DOD = auto()
    TOFINO_FULL = auto()
    TOFINO2 = auto()


class EnqueueOutcome(Enum):
    ENQUEUED = auto()
    DEFLECTED = auto()
    TRIMMED = auto()
    HEADER_DROPPED = auto()


@dataclass
class SwitchConfig:
    n_pipes: int = 4
    ports_per_pipe: int = 16
    line_rate_bps: int = 100_000_000_000
    data_queue_cap: int = 10
    header_queue_cap: int = 100
    dod_queue_cap: int = 16384
    recirc_latency_ps: int = us(1)
    signal_hops: int = 1
    signal_latency_ps: int | None = None  # default: signal_hops * recirc_latency
    dod_signal_min_queue: int = 1         # remaining backlog at dequeue that marks a growing queue
    mtu: int = 1500
    header_size: int = 64
    header_data_weight: int = 0           # 0 = strict priority; >0 = DRR byte ratio header:data
    meter_burst: int = 3000               # committed/peak burst of the mode meters
    variant: SwitchVariant = SwitchVariant.TOFINO_FULL
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    tofino2_lag: int = 4

    def __post_init__(self) -> None:
        if self.data_queue_cap < 1:
            raise ValueError("data_queue_cap must be >= 1")
        if self.signal_latency_ps is None:
            self.signal_latency_ps = self.signal_hops * self.recirc_latency_ps

    @property
    def n_ports(self) -> int:
        return self.n_pipes * self.ports_per_pipe


class _EgressPort:
    __slots__ = ("idx", "data_q", "hdr_q", "link", "busy", "deficit", "cur", "granted")

    def __init__(self, idx: int, link: Link) -> None:
        self.idx = idx
        self.data_q: deque = deque()
        self.hdr_q: deque = deque()
        self.link = link
        self.busy = False
        self.deficit = [0, 0]  # header, data (bytes) for the weighted regime
        self.cur = 0
        self.granted = False


class _DodPort:
    __slots__ = ("pipe", "q", "link", "busy", "port_backlog")

    def __init__(self, pipe: int, link: Link, n_ports: int) -> None:
        self.pipe = pipe
        self.q: deque = deque()
        self.link = link
        self.busy = False
        self.port_backlog = [0] * n_ports  # queued packets per destination port


class SwitchModel:
    """One switch instance wired into a Simulator.

    `deliver(pkt)` is invoked at the instant a packet finishes serializing on
    its egress port link.
    """

    def __init__(self, sim: Simulator, cfg: SwitchConfig, metrics, deliver) -> None:
        self.sim = sim
        self.cfg = cfg
        self.m = metrics
        self.deliver = deliver
        rate = cfg.line_rate_bps
        self.ports = [_EgressPort(i, Link(rate)) for i in range(cfg.n_ports)]
        self.dod = [_DodPort(p, Link(rate), cfg.n_ports) for p in range(cfg.n_pipes)]

        v = cfg.variant
        self._metered = v in (SwitchVariant.TOFINO_DOD, SwitchVariant.TOFINO_FULL)
        if self._metered:
            self.meters = [
                [self._make_meters(rate, pipe) for _ in range(cfg.n_ports)]
                for pipe in range(cfg.n_pipes)
            ]
        self.trim_states = [
            [PortTrimState() for _ in range(cfg.n_ports)] for _ in range(cfg.n_pipes)
        ]
        self._mode_obs = [
            [Mode.OPTIMISTIC] * cfg.n_ports for _ in range(cfg.n_pipes)
        ]
        if v is SwitchVariant.TOFINO2:
            self._t2_hist = [
                [deque() for _ in range(cfg.n_ports)] for _ in range(cfg.n_pipes)
            ]

    def _make_meters(self, rate: int, pipe: int):
        b = self.cfg.meter_burst
        if self.cfg.policy.meter_scheme is MeterScheme.TWO_METER:
            opti = TrTcmMeter(cir=rate // 2, pir=rate, cbs=b, pbs=b)
            pessi = single_rate_meter(rate // 4, burst=b)
            meters = (opti, pessi)
        else:
            meters = (
                single_rate_meter(rate, burst=b),
                single_rate_meter(rate // 2, burst=b),
                single_rate_meter(rate // 4, burst=b),
            )
        for m in meters:
            self._stagger_meter(m, pipe)
        return meters

    def _stagger_meter(self, m: TrTcmMeter, pipe: int) -> None:
        """Offset initial bucket levels by one packet-time of tokens per pipe.

        Identical meters fed identical synchronized arrivals cycle in lockstep
        and release their conformant packets bunched into the same
        serialization slot, pinning all residual egress overflow onto one
        pipeline's deflection queue.  Hardware meters share no epoch, so start
        each pipe's bucket one service-tick apart.  Line-rate buckets are left
        alone (their pass cycle has no phase to shift).
        """
        line = self.cfg.line_rate_bps
        mtu = self.cfg.mtu
        c = m.cbs - pipe * (mtu * m.cir // line) if m.cir < line else m.cbs
        p = m.pbs - pipe * (mtu * m.pir // line) if m.pir < line else m.pbs
        m.preload(max(c, 0), max(p, 0))

    # ---------------------------------------------------------------- ingress

    def ingress_receive(self, pkt: Packet) -> None:
        """Entry point for a packet arriving on an ingress port (event target)."""
        now = self.sim.now
        v = self.cfg.variant
        if v is SwitchVariant.IDEAL or v is SwitchVariant.MOD:
            self.enqueue_egress(pkt, now)
            return
        if v is SwitchVariant.TOFINO2:
            self._ingress_tofino2(pkt, now)
            return
        self._ingress_tofino(pkt, now)

    def _ingress_tofino(self, pkt: Packet, now: int) -> None:
        pipe = pkt.ingress_pipe
        port = pkt.egress_port
        meters = self.meters[pipe][port]
        policy = self.cfg.policy
        if self.cfg.variant is SwitchVariant.TOFINO_DOD:
            # fixed meters, no feedback: the port never leaves optimistic mode
            verdict = (
                Verdict.TRIM
                if meters[0].execute(now, pkt.size).value == 2  # Color.RED
                else Verdict.FORWARD
            )
        else:
            st = self.trim_states[pipe][port]
            mode = classify(st, now)
            self._observe_mode(pipe, port, mode, now)
            if policy.variant is Variant.TRIM_N and st.pending_trims > 0:
                st.pending_trims -= 1
                meters[0].execute(now, pkt.size)
                verdict = Verdict.TRIM
            elif policy.meter_scheme is MeterScheme.TWO_METER:
                opti = meters[0].execute(now, pkt.size)
                pessi = meters[1].execute(now, pkt.size)
                verdict = decide_two_meter(mode, opti, pessi)
            else:
                opti = meters[0].execute(now, pkt.size)
                half = meters[1].execute(now, pkt.size)
                pessi = meters[2].execute(now, pkt.size)
                if policy.variant is Variant.TRIM_ALL and mode is Mode.PESSIMISTIC:
                    verdict = Verdict.TRIM
                else:
                    verdict = decide_three_meter(mode, opti, half, pessi)
        if verdict is Verdict.TRIM:
            self.m.ingress_trims += 1
            hdr = trim(pkt, TrimOrigin.INGRESS, self.cfg.header_size)
            self.enqueue_egress(hdr, now)
        else:
            self.enqueue_egress(pkt, now)

    def _ingress_tofino2(self, pkt: Packet, now: int) -> None:
        # Queue readings reach this pipeline `lag` packets late; until history
        # fills the pipeline assumes an empty queue.
        hist = self._t2_hist[pkt.ingress_pipe][pkt.egress_port]
        lag = self.cfg.tofino2_lag
        stale = hist[0] if len(hist) >= lag else 0
        hist.append(len(self.ports[pkt.egress_port].data_q))
        if len(hist) > lag:
            hist.popleft()
        if stale >= self.cfg.data_queue_cap:
            self.m.ingress_trims += 1
            self.enqueue_egress(trim(pkt, TrimOrigin.INGRESS, self.cfg.header_size), now)
        else:
            self.enqueue_egress(pkt, now)

    def _observe_mode(self, pipe: int, port: int, mode: Mode, now: int) -> None:
        if self._mode_obs[pipe][port] is not mode:
            self._mode_obs[pipe][port] = mode
            self.m.mode_trace.append((now, pipe, port, mode.name))

    # ----------------------------------------------------------- traffic manager

    def enqueue_egress(self, pkt: Packet, now: int) -> EnqueueOutcome:
        p = self.ports[pkt.egress_port]
        if pkt.kind is Kind.TRIMMED_HEADER:
            if len(p.hdr_q) >= self.cfg.header_queue_cap:
                self.m.header_dropped += 1
                return EnqueueOutcome.HEADER_DROPPED
            p.hdr_q.append(pkt)
            self._kick(p, now)
            return EnqueueOutcome.ENQUEUED

        if len(p.data_q) < self.cfg.data_queue_cap:
            p.data_q.append(pkt)
            depth = len(p.data_q)
            m = self.m
            if depth > m.max_data_queue[p.idx]:
                m.max_data_queue[p.idx] = depth
            if m.record_queues:
                m.queue_samples.append((now, "data", p.idx, depth))
            self._kick(p, now)
            return EnqueueOutcome.ENQUEUED

        # data queue full: variant-specific overflow behavior
        v = self.cfg.variant
        if v is SwitchVariant.IDEAL:
            self.m.ideal_trims += 1
            hdr = trim(pkt, TrimOrigin.IDEAL, self.cfg.header_size)
            self.enqueue_egress(hdr, now)
            return EnqueueOutcome.TRIMMED
        if v is SwitchVariant.MOD:
            self.m.mod_trims += 1
            hdr = trim(pkt, TrimOrigin.MOD, self.cfg.header_size)
            self._dod_push(hdr, now)
            return EnqueueOutcome.TRIMMED
        self._dod_push(pkt, now)
        return EnqueueOutcome.DEFLECTED

    def _dod_push(self, pkt: Packet, now: int) -> None:
        d = self.dod[pkt.ingress_pipe]
        if len(d.q) >= self.cfg.dod_queue_cap:
            self.m.dod_dropped += 1  # the real loss mode: the whole packet is gone
            return
        d.q.append(pkt)
        d.port_backlog[pkt.egress_port] += 1
        depth = len(d.q)
        m = self.m
        if depth > m.max_dod_queue[d.pipe]:
            m.max_dod_queue[d.pipe] = depth
        if m.record_queues:
            m.queue_samples.append((now, "dod", d.pipe, depth))
        self._dod_kick(d, now)

    # ------------------------------------------------------------- egress ports

    def _pick(self, p: _EgressPort):
        hq = p.hdr_q
        dq = p.data_q
        if not hq and not dq:
            return None
        w = self.cfg.header_data_weight
        if w <= 0:
            # strict priority: early trimmed headers jump the data queue
            if hq:
                return hq.popleft()
            return self._pop_data(p)
        # byte-based weighted service between the two queues
        quanta = (w * self.cfg.mtu, self.cfg.mtu)
        queues = (hq, dq)
        for _ in range(4):
            q = queues[p.cur]
            if q:
                if not p.granted:
                    p.deficit[p.cur] += quanta[p.cur]
                    p.granted = True
                if q[0].size <= p.deficit[p.cur]:
                    p.deficit[p.cur] -= q[0].size
                    return q.popleft() if p.cur == 0 else self._pop_data(p)
            else:
                p.deficit[p.cur] = 0
            p.cur ^= 1
            p.granted = False
        raise AssertionError("weighted scheduler failed to pick from a non-empty port")

    def _pop_data(self, p: _EgressPort) -> Packet:
        pkt = p.data_q.popleft()
        if self.m.record_queues:
            self.m.queue_samples.append((self.sim.now, "data", p.idx, len(p.data_q)))
        return pkt

    def _kick(self, p: _EgressPort, now: int) -> None:
        if p.busy:
            return
        pkt = self._pick(p)
        if pkt is None:
            return
        p.busy = True
        done = p.link.serialize(pkt.size, now)
        self.sim.schedule(done, self._egress_done, (p, pkt))

    def _egress_done(self, payload) -> None:
        p, pkt = payload
        p.busy = False
        self.deliver(pkt)
        self._kick(p, self.sim.now)

    # --------------------------------------------------------------- DoD ports

    def _dod_kick(self, d: _DodPort, now: int) -> None:
        if d.busy or not d.q:
            return
        pkt = d.q.popleft()
        d.port_backlog[pkt.egress_port] -= 1
        m = self.m
        if m.record_queues:
            m.queue_samples.append((now, "dod", d.pipe, len(d.q)))
        if (
            self.cfg.variant is SwitchVariant.TOFINO_FULL
            and d.port_backlog[pkt.egress_port] >= self.cfg.dod_signal_min_queue
        ):
            # More deflected packets for the same port are waiting behind this
            # one: that port's overflow is outrunning the drain, so the
            # response must hold at least until they surface.  A lone
            # deflection (the port keeping up) stays silent.
            m.signals += 1
            m.signals_by_port[pkt.egress_port] = (
                m.signals_by_port.get(pkt.egress_port, 0) + 1
            )
            self.sim.schedule(
                now + self.cfg.signal_latency_ps,
                self._apply_signal,
                (pkt.egress_port, d.pipe),
            )
        d.busy = True
        done = d.link.serialize(pkt.size, now)
        self.sim.schedule(done, self._dod_done, (d, pkt))

    def _dod_done(self, payload) -> None:
        d, pkt = payload
        d.busy = False
        now = self.sim.now
        if pkt.kind is Kind.DATA:
            self.m.dod_trims += 1
            pkt = trim(pkt, TrimOrigin.DOD, self.cfg.header_size)
        self.sim.schedule(now + self.cfg.recirc_latency_ps, self._recirc_arrive, pkt)
        self._dod_kick(d, now)

    def _recirc_arrive(self, hdr: Packet) -> None:
        self.enqueue_egress(hdr, self.sim.now)

    def _apply_signal(self, payload) -> None:
        eport, origin_pipe = payload
        now = self.sim.now
        policy = self.cfg.policy
        for pipe in fanout_targets(origin_pipe, policy, self.cfg.n_pipes):
            st = self.trim_states[pipe][eport]
            on_congestion_signal(st, now, policy)
            self._observe_mode(pipe, eport, classify(st, now), now)

    # ------------------------------------------------------------- diagnostics

    def queues_quiescent(self) -> bool:
        return (
            all(not p.data_q and not p.hdr_q and not p.busy for p in self.ports)
            and all(not d.q and not d.busy for d in self.dod)
        )


def worst_case_check(sender_pairs, cfg: SwitchConfig) -> dict:
    """Analytic oversubscription of the deflection path for a traffic pattern.

    `sender_pairs` maps the scenario: one (ingress_port, egress_port) pair per
    sender at line rate.  Each pipeline's ingress meter caps its stream toward
    any single egress port at line rate; the remainder beyond each port's
    drain is attributed back to the contributing pipelines' recirculation
    ports.
    """
    line = cfg.line_rate_bps
    gbps = line / 1e9
    contrib: dict[tuple[int, int], int] = {}
    for ing, eg in sender_pairs:
        pipe = ing // cfg.ports_per_pipe
        contrib[(pipe, eg)] = contrib.get((pipe, eg), 0) + 1

    arrive = [0.0] * cfg.n_ports
    capped: dict[tuple[int, int], float] = {}
    for (pipe, eg), cnt in contrib.items():
        rate = min(cnt * gbps, gbps)
        capped[(pipe, eg)] = rate
        arrive[eg] += rate

    pipe_deflected = [0.0] * cfg.n_pipes
    for (pipe, eg), rate in capped.items():
        excess = max(arrive[eg] - gbps, 0.0)
        if excess:
            pipe_deflected[pipe] += excess * rate / arrive[eg]

    ratios = [d / gbps for d in pipe_deflected]
    return {
        "per_port_arrive_gbps": arrive,
        "per_pipe_deflected_gbps": pipe_deflected,
        "per_pipe_ratio": ratios,
        "oversubscription_ratio": max(ratios) if ratios else 0.0,
    }
