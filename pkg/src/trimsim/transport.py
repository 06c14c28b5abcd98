"""Minimal NDP-style end hosts.

Senders blast their initial window unsolicited at host line rate, then send
only in response to PULLs.  Receivers keep one pull pacer per destination
port, shared by every flow terminating there; each arriving data packet or
trimmed header earns one pull credit.  A trimmed header's credit is flagged
with the sequence number to retransmit (the negative-acknowledgment path),
and flagged credits are served ahead of plain ones so recovery is never
stuck behind stale demand.  There is no retransmission timer: recovery is
driven entirely by delivered headers, so a whole-packet loss stalls its flow
and the stall itself shows up in the metrics.
"""

from __future__ import annotations

from collections import deque

from .engine import Link, Simulator
from .packets import Flow, Kind, Packet, TrimOrigin


class HostSender:
    """One sending host: an access link plus window/retransmission state."""

    __slots__ = (
        "sim", "flow", "link", "inject", "m", "mtu", "ingress_pipe",
        "start_ps", "unsolicited_sent", "next_new", "new_credits",
        "rtx_queue", "rtx_count", "active", "started", "_dither",
    )

    def __init__(self, sim: Simulator, flow: Flow, link: Link, ingress_pipe: int,
                 inject, metrics, mtu: int = 1500, start_ps: int = 0,
                 dither=None) -> None:
        self.sim = sim
        self.flow = flow
        self.link = link
        self.inject = inject  # called with the packet when it reaches the switch
        self.m = metrics
        self.mtu = mtu
        self.ingress_pipe = ingress_pipe
        self.start_ps = start_ps
        self.unsolicited_sent = 0
        self.next_new = flow.initial_window
        self.new_credits = 0
        self.rtx_queue: deque = deque()
        self.rtx_count = 0
        self.active = False
        self.started = False
        # per-packet emission-gap source (picoseconds); hosts do not share a
        # clock, so back-to-back departures are not lattice-exact in reality
        self._dither = dither

    def start(self) -> None:
        if self.started:
            raise RuntimeError("sender already started")
        self.started = True
        self.sim.schedule(self.start_ps, self._send_next)

    def on_pull(self, rtx_seq=None) -> None:
        """A PULL arrived: queue the named retransmission or release one new packet."""
        if rtx_seq is not None:
            self.rtx_queue.append(rtx_seq)
        elif self.next_new + self.new_credits < self.flow.total_packets:
            self.new_credits += 1
        else:
            self.m.wasted_pulls += 1
            return
        if not self.active:
            self._send_next()

    def _pick(self):
        if self.rtx_queue:
            return self.rtx_queue.popleft(), True
        if self.unsolicited_sent < self.flow.initial_window:
            seq = self.unsolicited_sent
            self.unsolicited_sent += 1
            return seq, False
        if self.new_credits:
            self.new_credits -= 1
            seq = self.next_new
            self.next_new += 1
            return seq, False
        return None

    def _send_next(self, _=None) -> None:
        picked = self._pick()
        if picked is None:
            self.active = False
            return
        self.active = True
        seq, is_rtx = picked
        now = self.sim.now
        if is_rtx:
            self.rtx_count += 1
            self.m.rtx_sent += 1
        f = self.flow
        pkt = Packet(
            flow_id=f.flow_id,
            seqno=seq,
            size=self.mtu,
            kind=Kind.DATA,
            src_host=f.src_host,
            dst_host=f.dst_host,
            ingress_pipe=self.ingress_pipe,
            egress_port=f.dst_host,
            trim_origin=TrimOrigin.NONE,
            send_time=now,
        )
        self.m.sent_data += 1
        if self._dither is not None:
            now += self._dither()
        done = self.link.serialize(self.mtu, now)
        self.sim.schedule(done, self._serialized, pkt)

    def _serialized(self, pkt: Packet) -> None:
        self.sim.schedule(self.sim.now + self.link.latency_ps, self.inject, pkt)
        self._send_next()


class _FlowRx:
    __slots__ = ("flow", "sender", "received", "count", "done_ps", "dup", "start_ps")

    def __init__(self, flow: Flow, sender: HostSender, start_ps: int) -> None:
        self.flow = flow
        self.sender = sender
        self.received = bytearray(flow.total_packets)
        self.count = 0
        self.done_ps = None
        self.dup = 0
        self.start_ps = start_ps


class PortReceiver:
    """Receiving host on one switch egress port, with the shared pull pacer.

    PULL emission is paced to one per MTU serialization time at line rate.
    Retransmission credits are served first (in arrival order); plain credits
    are served round-robin across flows.
    """

    def __init__(self, sim: Simulator, port: int, line_rate_bps: int, metrics,
                 mtu: int = 1500, reverse_latency_ps: int = 0) -> None:
        self.sim = sim
        self.port = port
        self.m = metrics
        self.reverse_latency_ps = reverse_latency_ps
        self.interval = Link(line_rate_bps).serialization_ps(mtu)
        self.flows: dict[int, _FlowRx] = {}
        self.rtx: dict[int, deque] = {}
        self.rtx_total = 0
        self.plain: dict[int, int] = {}
        self.plain_total = 0
        self.rr: list[int] = []
        self.rr_idx = 0
        self.rtx_rr_idx = 0
        self.next_free = 0
        self._armed = False

    def register_flow(self, flow: Flow, sender: HostSender, start_ps: int = 0) -> None:
        self.flows[flow.flow_id] = _FlowRx(flow, sender, start_ps)
        self.rtx[flow.flow_id] = deque()
        self.plain[flow.flow_id] = 0
        self.rr.append(flow.flow_id)

    def on_delivery(self, pkt: Packet) -> None:
        now = self.sim.now
        m = self.m
        if m.record_trace:
            m.trace_rows.append(
                (now, pkt.flow_id, pkt.seqno, pkt.kind.name, pkt.trim_origin.name, pkt.egress_port)
            )
        fx = self.flows[pkt.flow_id]
        if pkt.kind is Kind.DATA:
            m.delivered_full += 1
            if fx.received[pkt.seqno]:
                fx.dup += 1
                m.dup_data += 1
                return
            fx.received[pkt.seqno] = 1
            fx.count += 1
            if fx.count == fx.flow.total_packets:
                fx.done_ps = now
                # drop queued credits for the finished flow: nothing left to pull
                self.plain_total -= self.plain[pkt.flow_id]
                self.plain[pkt.flow_id] = 0
                return
            self.plain[pkt.flow_id] += 1
            self.plain_total += 1
            self._arm(now)
        elif pkt.kind is Kind.TRIMMED_HEADER:
            m.delivered_header += 1
            m.header_arrival_ps.append(now)
            if fx.received[pkt.seqno]:
                m.stale_headers += 1
                return
            m.nacks += 1
            self.rtx[pkt.flow_id].append(pkt.seqno)
            self.rtx_total += 1
            self._arm(now)
        else:
            raise ValueError(f"unexpected {pkt.kind.name} delivered to a receiver")

    # ------------------------------------------------------------------ pacer

    def _arm(self, now: int) -> None:
        if self._armed:
            return
        self._armed = True
        t = now if now > self.next_free else self.next_free
        self.sim.schedule(t, self._emit)

    def _emit(self, _=None) -> None:
        now = self.sim.now
        n = len(self.rr)
        target = None
        # retransmission credits first, round-robin across flows so one
        # flow's losses cannot monopolize (or burst through) the pacer
        while self.rtx_total and target is None:
            for k in range(n):
                fid = self.rr[(self.rtx_rr_idx + k) % n]
                q = self.rtx[fid]
                if q:
                    seq = q.popleft()
                    self.rtx_total -= 1
                    self.rtx_rr_idx = (self.rtx_rr_idx + k + 1) % n
                    if self.flows[fid].received[seq]:
                        self.m.stale_headers += 1
                        break  # stale credit consumed; rescan
                    target = (fid, seq)
                    break
        if target is None and self.plain_total:
            for k in range(n):
                fid = self.rr[(self.rr_idx + k) % n]
                if self.plain[fid] > 0:
                    self.plain[fid] -= 1
                    self.plain_total -= 1
                    self.rr_idx = (self.rr_idx + k + 1) % n
                    target = (fid, None)
                    break
        if target is None:
            self._armed = False
            return
        fid, seq = target
        self.m.pulls += 1
        self.next_free = now + self.interval
        self.sim.schedule(
            now + self.reverse_latency_ps, self._deliver_pull, (self.flows[fid].sender, seq)
        )
        if self.rtx_total or self.plain_total:
            self.sim.schedule(self.next_free, self._emit)
        else:
            self._armed = False

    @staticmethod
    def _deliver_pull(payload) -> None:
        sender, seq = payload
        sender.on_pull(seq)

    # ------------------------------------------------------------- accounting

    def all_complete(self) -> bool:
        return all(fx.done_ps is not None for fx in self.flows.values())
