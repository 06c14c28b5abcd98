"""Packets, flows, and control messages exchanged by hosts and the switch."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto

MTU = 1500
HEADER_SIZE = 64
CONTROL_SIZE = 64


class Kind(Enum):
    DATA = auto()
    TRIMMED_HEADER = auto()
    PULL = auto()
    UPDATE = auto()
    NOTIFY = auto()


class TrimOrigin(Enum):
    NONE = auto()
    INGRESS = auto()
    DOD = auto()
    IDEAL = auto()
    MOD = auto()


@dataclass(slots=True)
class Packet:
    flow_id: int
    seqno: int
    size: int
    kind: Kind
    src_host: int
    dst_host: int
    ingress_pipe: int
    egress_port: int
    trim_origin: TrimOrigin = TrimOrigin.NONE
    send_time: int = 0


@dataclass(frozen=True)
class Flow:
    flow_id: int
    src_host: int
    dst_host: int
    total_packets: int
    initial_window: int

    def __post_init__(self) -> None:
        if self.initial_window < 1:
            raise ValueError("initial_window must be >= 1")
        if self.total_packets < self.initial_window:
            raise ValueError("total_packets must be >= initial_window")


@dataclass(frozen=True)
class CongestionSignal:
    """Emitted when a deflected packet is seen leaving a backlogged DoD queue."""

    egress_port: int
    origin_pipe: int
    emit_time: int


def trim(p: Packet, origin: TrimOrigin, header_size: int = HEADER_SIZE) -> Packet:
    """Cut the payload: return a header-sized copy preserving packet identity."""
    if p.kind is not Kind.DATA:
        raise ValueError(f"cannot trim a {p.kind.name} packet")
    if origin is TrimOrigin.NONE:
        raise ValueError("trimmed packets must carry a trim origin")
    return Packet(
        flow_id=p.flow_id,
        seqno=p.seqno,
        size=header_size,
        kind=Kind.TRIMMED_HEADER,
        src_host=p.src_host,
        dst_host=p.dst_host,
        ingress_pipe=p.ingress_pipe,
        egress_port=p.egress_port,
        trim_origin=origin,
        send_time=p.send_time,
    )
