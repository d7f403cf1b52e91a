"""TCP and UDP flood streams.

UDP streams are open loop: one datagram every ``payload_bytes * 8 / rate``
seconds. TCP streams do a three-way handshake and then send MSS-sized
segments under Reno-style AIMD, optionally paced at ``per_stream_rate``.
Lost segments are not retransmitted; a flood only cares about load.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Union

from .engine import US_PER_S
from .errors import InvalidSpec
from .net import Kind, Packet, Proto, serialization_us

IPERF_PORT = 5201
SOURCE_PORT_BASE = 40000


@dataclass(frozen=True)
class FloodSpec:
    protocol: Proto
    target: int
    port: int = IPERF_PORT
    per_stream_rate: int = 30_000_000  # bits/s, 0 = unpaced (TCP only)
    payload_bytes: int = 1200
    parallel_streams: int = 6
    duration: float = 60.0  # seconds

    def validate(self) -> "FloodSpec":
        if self.duration <= 0:
            raise InvalidSpec(f"duration must be positive, got {self.duration}")
        if self.parallel_streams < 1:
            raise InvalidSpec("parallel_streams must be >= 1")
        if self.payload_bytes < 1:
            raise InvalidSpec("payload_bytes must be >= 1")
        if self.per_stream_rate < 0 or (self.protocol == Proto.UDP and self.per_stream_rate == 0):
            raise InvalidSpec("UDP floods need a positive per-stream rate")
        return self

    @property
    def duration_us(self) -> int:
        return round(self.duration * US_PER_S)

    @property
    def packet_bits(self) -> int:
        return self.payload_bytes * 8


def paper_preset(protocol: Proto, target: int, port: int = IPERF_PORT) -> FloodSpec:
    """30 Mbit/s per stream, 1200-byte buffers, 6 parallel streams, 60 s."""
    return FloodSpec(protocol, target, port, 30_000_000, 1200, 6, 60.0)


# ---------------------------------------------------------------------------
# congestion control

class Phase(Enum):
    SLOW_START = "slow-start"
    CONGESTION_AVOIDANCE = "congestion-avoidance"


@dataclass(frozen=True)
class Ack:
    bytes: int


@dataclass(frozen=True)
class Loss:
    pass


@dataclass(slots=True)
class TcpConn:
    mss: int = 1200
    cwnd: int = 0
    ssthresh: int = 0
    srtt: int = 0
    in_flight: int = 0
    phase: Phase = Phase.SLOW_START
    # bytes acked since the last congestion-avoidance increment
    acked: int = 0

    def __post_init__(self):
        if self.cwnd == 0:
            self.cwnd = self.mss
        if self.ssthresh == 0:
            self.ssthresh = 64 * self.mss

    def on_ack(self, nbytes: int) -> None:
        mss = self.mss
        self.in_flight = max(0, self.in_flight - nbytes)
        if self.phase is Phase.SLOW_START:
            self.cwnd += min(nbytes, mss)
            if self.cwnd >= self.ssthresh:
                self.phase = Phase.CONGESTION_AVOIDANCE
                self.acked = 0
        else:
            # byte counting: one MSS per cwnd worth of acked data, i.e. mss*mss/cwnd per full segment
            self.acked += nbytes
            while self.acked >= self.cwnd:
                self.acked -= self.cwnd
                self.cwnd += mss

    def on_loss(self) -> None:
        self.ssthresh = max(self.cwnd // 2, 2 * self.mss)
        self.cwnd = self.ssthresh
        self.phase = Phase.CONGESTION_AVOIDANCE
        self.acked = 0


def tcp_cwnd_update(conn: TcpConn, event: Union[Ack, Loss]) -> TcpConn:
    """Functional AIMD step; ``conn`` is left untouched."""
    new = dataclasses.replace(conn)
    if isinstance(event, Ack):
        new.on_ack(event.bytes)
    elif isinstance(event, Loss):
        new.on_loss()
    else:
        raise TypeError(f"unknown congestion event {event!r}")
    return new


# ---------------------------------------------------------------------------
# streams

class UdpStream:
    """Constant-rate datagram source. Emission k happens at
    ``start + floor(k * bits * 1e6 / rate)`` so the long-run rate is exact
    even when the gap is not a whole number of microseconds."""

    __slots__ = ("spec", "src", "sport", "start", "end", "k", "emitted", "_num", "_den")

    def __init__(self, spec: FloodSpec, src: int, sport: int, start: int):
        self.spec = spec
        self.src = src
        self.sport = sport
        self.start = start
        self.end = start + spec.duration_us
        self.k = 0
        self.emitted = 0
        self._num = spec.packet_bits * US_PER_S
        self._den = spec.per_stream_rate

    @property
    def gap_us(self) -> float:
        return self._num / self._den

    @property
    def next_time(self) -> int:
        return self.start + self.k * self._num // self._den

    def emit(self, now: int) -> Packet | None:
        if now - self.start >= self.spec.duration_us:
            return None
        spec = self.spec
        pkt = Packet(self.src, spec.target, self.sport, spec.port, Proto.UDP, Kind.DATA,
                     spec.payload_bytes, self.k, self)
        self.k += 1
        self.emitted += 1
        return pkt


def udp_emit(stream: UdpStream, now: int) -> Packet | None:
    """Next datagram of ``stream``, or ``None`` once the duration has elapsed."""
    return stream.emit(now)


class TcpStream:
    """Sender half of one flood connection.

    ``net`` must provide ``loop`` (an EventLoop), ``send(packet) -> arrival | None``
    and ``conn_delta(addr, now, delta)`` for connection-state accounting.
    """

    def __init__(self, net, spec: FloodSpec, src: int, sport: int, start: int, srtt: int):
        self.net = net
        self.spec = spec
        self.src = src
        self.sport = sport
        self.start = start
        self.end = start + spec.duration_us
        self.conn = TcpConn(mss=spec.payload_bytes, srtt=srtt)
        self.gap = spec.packet_bits * US_PER_S // spec.per_stream_rate if spec.per_stream_rate else 0
        self.established = False
        self.next_allowed = start
        self.snd_nxt = 0
        self.recover = -1
        self.timer_pending = False
        self.segments_sent = 0
        self.losses = 0

    def open(self) -> None:
        self.net.conn_delta(self.src, self.start, +1)
        self.net.conn_delta(self.src, self.end, -1)
        self._handshake(Kind.SYN)

    def _handshake(self, kind: Kind) -> None:
        pkt = Packet(self.src, self.spec.target, self.sport, self.spec.port, Proto.TCP, kind, 0, 0, self)
        if self.net.send(pkt) is None and kind is Kind.SYN:
            self.on_handshake_drop()

    def on_handshake_drop(self) -> None:
        self.net.loop.schedule_clipped(self.net.loop.now + self.conn.srtt, self._retry_syn)

    def _retry_syn(self) -> None:
        if not self.established and self.net.loop.now < self.end:
            self._handshake(Kind.SYN)

    def on_synack(self) -> None:
        if self.established:
            return
        self.established = True
        # a lost final ACK is harmless: the first data segment completes the handshake
        self._handshake(Kind.ACK)
        self.try_send()

    def try_send(self) -> None:
        net = self.net
        now = net.loop.now
        if now >= self.end or not self.established:
            return
        conn = self.conn
        mss = conn.mss
        spec = self.spec
        while conn.in_flight + mss <= conn.cwnd:
            if now < self.next_allowed:
                if not self.timer_pending:
                    self.timer_pending = True
                    net.loop.schedule_clipped(self.next_allowed, self._on_timer)
                return
            seq = self.snd_nxt
            self.snd_nxt += mss
            conn.in_flight += mss
            self.segments_sent += 1
            self.next_allowed = now + self.gap
            arrival = net.send(Packet(self.src, spec.target, self.sport, spec.port, Proto.TCP, Kind.DATA,
                                      mss, seq, self))
            if arrival is None:
                self.on_drop(seq)

    def _on_timer(self) -> None:
        self.timer_pending = False
        self.try_send()

    def on_ack(self, seq: int, nbytes: int) -> None:
        self.conn.on_ack(nbytes)
        self.try_send()

    def on_drop(self, seq: int) -> None:
        # the sender learns about the drop one smoothed RTT later
        self.net.loop.schedule_clipped(self.net.loop.now + self.conn.srtt, self.on_loss, seq)

    def on_loss(self, seq: int) -> None:
        conn = self.conn
        conn.in_flight = max(0, conn.in_flight - conn.mss)
        self.losses += 1
        # one multiplicative decrease per window of data
        if seq >= self.recover:
            conn.on_loss()
            self.recover = self.snd_nxt
        self.try_send()


def start_flood(net, src: int, spec: FloodSpec, now: int, srtt: int = 0) -> list:
    """Create ``spec.parallel_streams`` streams from ``src`` starting at ``now``.

    Paced streams are spread evenly over one inter-packet gap (stream i
    starts i/n of a gap late) so that they do not hit the bottleneck queue in
    lockstep.
    """
    spec.validate()
    n = spec.parallel_streams
    gap = spec.packet_bits * US_PER_S // spec.per_stream_rate if spec.per_stream_rate else 0
    streams = []
    for i in range(n):
        sport = SOURCE_PORT_BASE + i
        start = now + i * gap // n
        if spec.protocol == Proto.UDP:
            stream = UdpStream(spec, src, sport, start)
            net.loop.schedule(start, net.udp_tick, stream)
        else:
            stream = TcpStream(net, spec, src, sport, start, srtt)
            net.loop.schedule(start, stream.open)
        streams.append(stream)
    return streams


def default_srtt(latency_us: int, mss: int, bandwidth_bps: int) -> int:
    return 2 * latency_us + serialization_us(mss, bandwidth_bps)
