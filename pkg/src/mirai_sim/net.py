"""Packets and point-to-point links."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum

ETH_HEADER = 14
IP_HEADER = 20
TCP_HEADER = 20
UDP_HEADER = 8

DEFAULT_MTU_PAYLOAD = 1460


class Proto(IntEnum):
    TCP = 6
    UDP = 17


class Kind(IntEnum):
    SYN = 0
    SYN_ACK = 1
    ACK = 2
    DATA = 3
    TELNET_PROMPT = 4
    TELNET_CRED = 5
    CNC_REGISTER = 6
    CNC_COMMAND = 7
    LOADER_PAYLOAD = 8


TCP_ONLY = frozenset({Kind.SYN, Kind.SYN_ACK, Kind.ACK})


def header_bytes(proto: int) -> int:
    return ETH_HEADER + IP_HEADER + (TCP_HEADER if proto == Proto.TCP else UDP_HEADER)


@dataclass(slots=True)
class Packet:
    src: int
    dst: int
    sport: int
    dport: int
    proto: Proto
    kind: Kind
    payload_bytes: int = 0
    seq: int = 0
    # simulator-side annotation (telnet verdict, flood handle, ...); never serialized
    info: object = None

    @property
    def wire_bytes(self) -> int:
        return header_bytes(self.proto) + self.payload_bytes

    def check(self, mtu_payload: int = DEFAULT_MTU_PAYLOAD) -> None:
        if self.payload_bytes > mtu_payload:
            raise ValueError(f"payload {self.payload_bytes} B exceeds MTU payload cap {mtu_payload} B")
        if self.kind in TCP_ONLY and self.proto != Proto.TCP:
            raise ValueError(f"{self.kind.name} is only valid over TCP")
        if not (0 <= self.sport < 65536 and 0 <= self.dport < 65536):
            raise ValueError("port out of range")


def serialization_us(payload_bytes: int, bandwidth_bps: int) -> int:
    """ceil(bits / bandwidth) in whole microseconds."""
    return -(-payload_bytes * 8 * 1_000_000 // bandwidth_bps)


class Link:
    """One direction of a point-to-point link with a FIFO drop-tail queue.

    Serialization time is charged on payload bytes only. ``queue_capacity``
    bounds the number of packets that have been accepted but not yet fully
    serialized.
    """

    __slots__ = ("bandwidth", "latency", "queue_capacity", "busy_until", "_finish", "loss_prob", "rng",
                 "offered", "dropped", "last_lost")

    def __init__(self, bandwidth: int = 100_000_000, latency: int = 200, queue_capacity: int = 100,
                 loss_prob: float = 0.0, rng=None):
        if bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if latency < 0 or queue_capacity < 1:
            raise ValueError("latency must be >= 0 and queue_capacity >= 1")
        if loss_prob and rng is None:
            raise ValueError("random loss needs an rng")
        self.bandwidth = bandwidth
        self.latency = latency
        self.queue_capacity = queue_capacity
        self.busy_until = 0
        self._finish: deque[int] = deque()
        self.loss_prob = loss_prob
        self.rng = rng
        self.offered = 0
        self.dropped = 0
        self.last_lost = False

    def occupancy(self, now: int) -> int:
        finish = self._finish
        while finish and finish[0] <= now:
            finish.popleft()
        return len(finish)

    def transmit(self, payload_bytes: int, now: int) -> int | None:
        """Arrival time at the far end, or ``None`` when the packet is dropped."""
        self.offered += 1
        self.last_lost = False
        finish = self._finish
        while finish and finish[0] <= now:
            finish.popleft()
        if len(finish) >= self.queue_capacity:
            self.dropped += 1
            return None
        start = now if now > self.busy_until else self.busy_until
        done = start + -(-payload_bytes * 8_000_000 // self.bandwidth)
        self.busy_until = done
        if done > now:
            finish.append(done)
        if self.loss_prob and self.rng.random() < self.loss_prob:
            # lost on the wire after occupying the transmitter
            self.dropped += 1
            self.last_lost = True
            return None
        return done + self.latency


def transmit(link: Link, packet: Packet, now: int) -> int | None:
    return link.transmit(packet.payload_bytes, now)
