"""One simulated scenario: topology, lifecycle handlers, floods, ledger, sampler.

Every node pair talks over its own pair of unidirectional links created on
first use. Packets that involve a monitored node are written to a columnar
ledger; per-node activity bins, traces and samples are derived from it once
the event loop has drained.
"""

from __future__ import annotations

import logging
from array import array
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import lifecycle as lc
from .config import ScenarioConfig
from .engine import EventLoop
from .errors import TargetUnreachable
from .flood import TcpStream, UdpStream, default_srtt, start_flood
from .net import Kind, Link, Packet, Proto, header_bytes
from .pcap import TRACE_DTYPE
from .rng import AddressSpace, Exclusions, SplitMix64, int_to_ip, ip_to_int, random_public_ipv4
from .telemetry import (BIN_US, NodeBins, ResourceModelParams, ResourceSample, harness_cost, harness_series,
                        normalize_series, sample_series)

log = logging.getLogger(__name__)

# ledger arrival codes (non-negative values are arrival times)
DROPPED = -1
IN_FLIGHT = -2
LOST = -3
NO_HOST = -4

LOADER_PAYLOAD_BYTES = 1024
REPORT_BYTES = 64
CNC_BYTES = 32

LEDGER_DTYPE = np.dtype([("t_send", np.int64), ("t_arrive", np.int64), ("src", np.uint32), ("dst", np.uint32),
                         ("sport", np.uint16), ("dport", np.uint16), ("proto", np.uint8), ("kind", np.uint8),
                         ("payload", np.uint32), ("seq", np.uint64)])


class Ledger:
    """Append-only packet ledger in compact typed columns."""

    _codes = ("q", "q", "L", "L", "H", "H", "B", "B", "L", "Q")

    def __init__(self):
        self.cols = [array(c) for c in self._codes]

    def add(self, pkt: Packet, t_send: int, t_arrive: int) -> None:
        c = self.cols
        c[0].append(t_send)
        c[1].append(t_arrive)
        c[2].append(pkt.src)
        c[3].append(pkt.dst)
        c[4].append(pkt.sport)
        c[5].append(pkt.dport)
        c[6].append(pkt.proto)
        c[7].append(pkt.kind)
        c[8].append(pkt.payload_bytes)
        c[9].append(pkt.seq)

    def __len__(self) -> int:
        return len(self.cols[0])

    def to_array(self) -> np.ndarray:
        out = np.empty(len(self), dtype=LEDGER_DTYPE)
        for name, col in zip(LEDGER_DTYPE.names, self.cols):
            out[name] = np.frombuffer(col, dtype=col.typecode) if len(col) else []
        return out


def default_params() -> ResourceModelParams:
    """Parameters fitted to the published deltas, shipped with the package."""
    res = resources.files("mirai_sim").joinpath("data/calibrated_params.json")
    if res.is_file():
        return ResourceModelParams.from_json(res.read_text())
    log.warning("no bundled calibrated parameters; using baseline-only model")
    return ResourceModelParams.baseline_only()


def resolve_params(source: str) -> ResourceModelParams:
    if source in ("", "calibrated"):
        return default_params()
    return ResourceModelParams.load(source)


# ---------------------------------------------------------------------------

class Simulation:
    def __init__(self, cfg: ScenarioConfig, wordlist: list[lc.CredentialEntry] | None = None):
        self.cfg = cfg
        self.loop = EventLoop(cfg.horizon_us)
        root = SplitMix64(cfg.seed)
        self.pop_rng = root.fork()
        self.scan_rng = root.fork()
        self.loss_rng = root.fork()
        self.wordlist = wordlist if wordlist is not None else lc.load_wordlist(cfg.wordlist or None)
        self.space = cfg.space
        self.nodes: dict[int, lc.NodeProfile] = {}
        self.links: dict[tuple[int, int], Link] = {}
        self.ledger = Ledger()
        self.monitored: dict[str, int] = {}
        self._monitored_addrs: set[int] = set()
        self.capture: set[int] = set()
        self.conn_events: dict[int, list[tuple[int, int]]] = {}
        self.ticks: dict[str, list[int]] = {}
        self.infections: list[tuple[int, int]] = []
        self.streams: list = []
        self.probes_sent = 0
        self.brute_attempts: dict[int, int] = {}
        self._scan_sport = 0
        self._build()

    # -- topology ---------------------------------------------------------
    def _build(self) -> None:
        cfg = self.cfg
        infra = [a for a in (cfg.cnc, cfg.report, cfg.loader) if a is not None]
        blocks = Exclusions.of_addresses(infra).blocks
        for cidr in cfg.exclusions:
            sp = AddressSpace.from_cidr(cidr)
            blocks.append((sp.base, sp.base + sp.size))
        self.exclusions = Exclusions(blocks)
        # only blocks that intersect the scanned space matter for draws
        space = self.space
        local = [(lo, hi) for lo, hi in blocks if lo < space.base + space.size and hi > space.base]
        self.draw_exclusions = Exclusions(local) if local else None

        self.cnc = lc.CncRegistry(cfg.cnc or 0)
        if cfg.cnc is not None:
            self.nodes[cfg.cnc] = lc.NodeProfile(cfg.cnc, lc.Arch.X86, {lc.CNC_NEW_BOT_PORT: "cnc",
                                                                         lc.CNC_BOT_PORT: "cnc"}, role=lc.Role.CNC)
        self.report_server = None
        if cfg.report is not None:
            self.report_server = lc.ReportServer(cfg.report, on_new=self._on_report)
            self.nodes[cfg.report] = lc.NodeProfile(cfg.report, lc.Arch.X86, {lc.REPORT_PORT: "report"},
                                                    role=lc.Role.REPORT)
        self.loader = None
        if cfg.loader is not None:
            self.loader = lc.Loader(cfg.loader, frozenset(cfg.loader_archs))
            self.nodes[cfg.loader] = lc.NodeProfile(cfg.loader, lc.Arch.X86, {}, role=lc.Role.LOADER)

        if cfg.victim is not None:
            self.nodes[cfg.victim] = lc.NodeProfile(cfg.victim, lc.Arch.ARM, {22: "ssh", cfg.flood.port: "iperf"})
        if cfg.compromised is not None:
            bot = lc.NodeProfile(cfg.compromised, lc.Arch.ARM, {22: "ssh", 23: "telnet", 80: "http"},
                                 telnet_credential=self.wordlist[0].pair, scan_enabled=cfg.compromised_scans)
            self.nodes[cfg.compromised] = bot
            self._bootstrap_bot(bot, preregistered=True)

        self._place_population()

        for name in cfg.nodes:
            for addr in self._resolve(name):
                self._monitor(name if name in ("compromised", "victim") else int_to_ip(addr), addr)
        for name in cfg.capture:
            self.capture.update(self._resolve(name))

        horizon, cadence = cfg.horizon_us, cfg.cadence_us
        for label, addr in self.monitored.items():
            self.ticks[label] = []
            for t in range(cadence, horizon + 1, cadence):
                self.loop.schedule(t, self._tick, label)
        for cmd in cfg.timeline:
            self.loop.schedule(cmd.at, self._issue, cmd)

    def _resolve(self, name: str) -> list[int]:
        if name == "compromised":
            return [self.cfg.compromised] if self.cfg.compromised is not None else []
        if name == "victim":
            return [self.cfg.victim] if self.cfg.victim is not None else []
        if name == "all":
            return sorted(a for a, n in self.nodes.items() if n.role is lc.Role.DEVICE)
        addr = ip_to_int(name)
        return [addr] if addr in self.nodes else []

    def _monitor(self, label: str, addr: int) -> None:
        self.monitored[label] = addr
        self._monitored_addrs.add(addr)

    def _place_population(self) -> None:
        cfg, rng = self.cfg, self.pop_rng
        taken = set(self.nodes)
        n_vuln = round(cfg.vulnerable_fraction * cfg.size)
        archs = [a for a, _ in cfg.arch_mix]
        weights = np.cumsum([w for _, w in cfg.arch_mix])
        wordset = {e.pair for e in self.wordlist}
        extra = {80: "http"}
        self.population: list[int] = []
        for i in range(cfg.size):
            while True:
                addr = random_public_ipv4(rng, self.space, self.draw_exclusions)
                if addr not in taken:
                    break
            taken.add(addr)
            arch = archs[int(np.searchsorted(weights, rng.random() * weights[-1], side="right"))]
            if i < n_vuln:
                cred = lc.pick_credential(self.wordlist, rng).pair
            else:
                cred = ("admin", f"Str0ng-{i:05d}-{rng.next_u64() & 0xFFFFFF:06x}")
                assert cred not in wordset
            node = lc.make_device(addr, arch, cred, cfg.telnet_ports, extra)
            self.nodes[addr] = node
            self.population.append(addr)
        for addr in self.population[:cfg.initial_bots]:
            self._bootstrap_bot(self.nodes[addr], preregistered=True)

    def _bootstrap_bot(self, node: lc.NodeProfile, preregistered: bool) -> None:
        lc.infect(node)
        lc.killer_apply(node)
        self.infections.append((self.loop.now, node.addr))
        if preregistered:
            self.cnc.registered.add(node.addr)
        self._start_bot_timers(node)

    def _start_bot_timers(self, node: lc.NodeProfile) -> None:
        if node.scan_enabled:
            self.loop.schedule_clipped(self.loop.now, self._scan, node.addr)
        if self.cfg.killer_interval_ms > 0:
            self.loop.schedule_clipped(self.loop.now + self.cfg.killer_interval_ms * 1000, self._killer, node.addr)

    def link(self, src: int, dst: int) -> Link:
        key = (src, dst)
        link = self.links.get(key)
        if link is None:
            cfg = self.cfg
            link = Link(cfg.bandwidth_bps, cfg.latency_us, cfg.queue_packets, cfg.loss,
                        self.loss_rng if cfg.loss else None)
            self.links[key] = link
        return link

    # -- data plane -------------------------------------------------------
    def send(self, pkt: Packet) -> int | None:
        """Put ``pkt`` on the wire. Returns the arrival time, or None if it
        will not arrive within the run."""
        now = self.loop.now
        mon = self._monitored_addrs
        record = pkt.src in mon or pkt.dst in mon
        if pkt.payload_bytes > self.cfg.mtu_payload:
            raise ValueError(f"payload {pkt.payload_bytes} B exceeds MTU payload cap")
        if pkt.dst not in self.nodes:
            if record:
                self.ledger.add(pkt, now, NO_HOST)
            return None
        link = self.links.get((pkt.src, pkt.dst)) or self.link(pkt.src, pkt.dst)
        arrival = link.transmit(pkt.payload_bytes, now)
        if arrival is None:
            if record:
                self.ledger.add(pkt, now, LOST if link.last_lost else DROPPED)
            return None
        if arrival > self.loop.horizon:
            self.loop.clipped += 1
            if record:
                self.ledger.add(pkt, now, IN_FLIGHT)
            return None
        if record:
            self.ledger.add(pkt, now, arrival)
        if not (pkt.proto == Proto.UDP and pkt.kind == Kind.DATA):
            # UDP flood datagrams need no receiver reaction: their arrival is
            # fully accounted for by the ledger entry above
            self.loop.schedule_clipped(arrival, self.deliver, pkt)
        return arrival

    def udp_tick(self, stream: UdpStream) -> None:
        pkt = stream.emit(self.loop.now)
        if pkt is None:
            return
        self.send(pkt)
        nxt = stream.next_time
        if nxt - stream.start < stream.spec.duration_us:
            self.loop.schedule_clipped(nxt, self.udp_tick, stream)

    def conn_delta(self, addr: int, at: int, delta: int) -> None:
        if addr in self._monitored_addrs:
            self.conn_events.setdefault(addr, []).append((at, delta))

    def deliver(self, pkt: Packet) -> None:
        node = self.nodes[pkt.dst]
        role = node.role
        if role is lc.Role.DEVICE:
            self._device_rx(node, pkt)
        elif role is lc.Role.REPORT:
            if pkt.dport == lc.REPORT_PORT and isinstance(pkt.info, lc.ReportRecord):
                lc.report_compromise(self.report_server, pkt.info)
        elif role is lc.Role.CNC:
            if pkt.kind == Kind.CNC_REGISTER:
                lc.cnc_accept(self.cnc, pkt.src, pkt.dport)

    def _reply(self, pkt: Packet, kind: Kind, seq: int = 0, payload: int = 0) -> int | None:
        return self.send(Packet(pkt.dst, pkt.src, pkt.dport, pkt.sport, pkt.proto, kind, payload, seq, pkt.info))

    def _device_rx(self, node: lc.NodeProfile, pkt: Packet) -> None:
        kind = pkt.kind
        info = pkt.info
        if isinstance(info, TcpStream):
            stream = info
            if node.addr == stream.src:
                if kind == Kind.SYN_ACK:
                    stream.on_synack()
                elif kind == Kind.ACK:
                    stream.on_ack(pkt.seq, stream.conn.mss)
            elif node.listens(pkt.dport):
                if kind == Kind.SYN:
                    if not getattr(stream, "sink_open", False):
                        stream.sink_open = True
                        self.conn_delta(node.addr, self.loop.now, +1)
                        self.conn_delta(node.addr, max(stream.end, self.loop.now), -1)
                    if self._reply(pkt, Kind.SYN_ACK) is None:
                        stream.on_handshake_drop()
                elif kind == Kind.DATA:
                    if self._reply(pkt, Kind.ACK, pkt.seq) is None:
                        stream.on_drop(pkt.seq)
            return
        if kind == Kind.SYN:
            if node.telnet_open(pkt.dport) and pkt.src != node.addr:
                self._reply(pkt, Kind.SYN_ACK)
        elif kind == Kind.SYN_ACK:
            if node.infected and node.state.phase is lc.Phase.SCANNING and pkt.sport in lc.TELNET_PORTS:
                node.state = lc.begin_brute_force(node, pkt.src, pkt.sport)
                self._send_cred(node)
        elif kind == Kind.TELNET_CRED:
            if node.telnet_open(pkt.dport):
                self._reply(pkt, Kind.TELNET_PROMPT, pkt.seq)
        elif kind == Kind.TELNET_PROMPT:
            self._on_prompt(node, pkt)
        elif kind == Kind.LOADER_PAYLOAD and isinstance(info, lc.ReportRecord):
            self._on_payload(node, info)

    def _send_cred(self, bot: lc.NodeProfile) -> None:
        st = bot.state
        entry = self.wordlist[st.attempt_index]
        pkt = Packet(bot.addr, st.target, 40000 + (st.attempt_index % 1000), st.port, Proto.TCP, Kind.TELNET_CRED,
                     len(entry.username) + len(entry.password) + 2, st.attempt_index)
        self.brute_attempts[st.target] = self.brute_attempts.get(st.target, 0) + 1
        if self.send(pkt) is None:
            bot.state = lc.SCANNING

    def _on_prompt(self, bot: lc.NodeProfile, pkt: Packet) -> None:
        st = bot.state
        if st.phase is not lc.Phase.BRUTE_FORCING or st.target != pkt.src or st.attempt_index != pkt.seq:
            return
        target = self.nodes[st.target]
        try:
            res = lc.brute_force_step(st, target, self.wordlist)
        except TargetUnreachable:
            bot.state = lc.SCANNING
            return
        if res.outcome is lc.BruteOutcome.SUCCESS:
            bot.state = res.state
            rec = lc.ReportRecord(target.addr, st.port, res.credential, self.loop.now)
            if self.report_server is None:
                lc.report_compromise(None, rec)
            self.send(Packet(bot.addr, self.report_server.addr, 40999, lc.REPORT_PORT, Proto.TCP, Kind.DATA,
                             REPORT_BYTES, 0, rec))
            bot.state = lc.SCANNING
        elif res.outcome is lc.BruteOutcome.CONTINUE:
            bot.state = res.state
            self._send_cred(bot)
        else:
            bot.state = res.state

    def _on_report(self, record: lc.ReportRecord) -> None:
        target = self.nodes.get(record.victim)
        if target is not None and not target.infected:
            target.state = lc.BotState(lc.Phase.AWAITING_LOAD)
        if self.loader is not None:
            # report server hands the record to the loader
            self.loop.schedule_clipped(self.loop.now + self.cfg.latency_us, self._load, record)

    def _load(self, record: lc.ReportRecord) -> None:
        self.send(Packet(self.loader.addr, record.victim, 41000, record.telnet_port, Proto.TCP,
                         Kind.LOADER_PAYLOAD, LOADER_PAYLOAD_BYTES, 0, record))

    def _on_payload(self, node: lc.NodeProfile, record: lc.ReportRecord) -> None:
        outcome = lc.loader_dispatch(self.loader, record, node)
        if outcome is not lc.LoadOutcome.INFECTED:
            if node.state.phase is lc.Phase.AWAITING_LOAD and not node.infected:
                node.state = lc.DORMANT
            return
        lc.killer_apply(node)
        self.infections.append((self.loop.now, node.addr))
        if self.cfg.cnc is not None:
            self.send(Packet(node.addr, self.cfg.cnc, 41001, lc.CNC_NEW_BOT_PORT, Proto.TCP, Kind.CNC_REGISTER,
                             CNC_BYTES))
        self._start_bot_timers(node)

    # -- timers -----------------------------------------------------------
    def _scan(self, addr: int) -> None:
        node = self.nodes[addr]
        if node.state.phase is lc.Phase.SCANNING:
            cfg = self.cfg
            scan = lc.ScanConfig(cfg.probes_per_tick, cfg.scan_interval_ms * 1000)
            for probe in lc.scan_tick(node, self.scan_rng, scan, self.space, self.draw_exclusions,
                                      sport=1024 + self._scan_sport % 60000):
                if probe.dst == addr:
                    continue
                self.probes_sent += 1
                self.send(probe)
            self._scan_sport += cfg.probes_per_tick
        self.loop.schedule_clipped(self.loop.now + self.cfg.scan_interval_ms * 1000, self._scan, addr)

    def _killer(self, addr: int) -> None:
        lc.killer_apply(self.nodes[addr])
        self.loop.schedule_clipped(self.loop.now + self.cfg.killer_interval_ms * 1000, self._killer, addr)

    def _tick(self, label: str) -> None:
        # samples are evaluated after the run from bins that are final by now:
        # every packet that arrives before ``now`` was sent before ``now``
        self.ticks[label].append(self.loop.now)

    def _issue(self, cmd) -> None:
        now = self.loop.now
        spec = self.cfg.flood_spec(cmd.flood)
        tasked = lc.cnc_issue(self.cnc, lc.AttackCommand(spec, now), self.nodes)
        srtt = default_srtt(self.cfg.latency_us, spec.payload_bytes, self.cfg.bandwidth_bps)
        for addr in tasked:
            if self.cfg.cnc is not None:
                self.send(Packet(self.cfg.cnc, addr, lc.CNC_BOT_PORT, 41002, Proto.TCP, Kind.CNC_COMMAND, CNC_BYTES))
            self.streams.extend(start_flood(self, addr, spec, now, srtt))
            self.loop.schedule(now + spec.duration_us, self._end_attack, addr)

    def _end_attack(self, addr: int) -> None:
        lc.finish_attack(self.nodes[addr], self.loop.now)

    # -- run --------------------------------------------------------------
    def run(self) -> "RunResult":
        n = self.loop.run()
        return RunResult(self, n)


# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    sim: Simulation
    events: int
    ledger: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ledger = self.sim.ledger.to_array()
        self._bins: dict[str, NodeBins] = {}

    @property
    def config(self) -> ScenarioConfig:
        return self.sim.cfg

    @property
    def nodes(self) -> dict[str, int]:
        return dict(self.sim.monitored)

    @property
    def ticks(self) -> dict[str, list[int]]:
        return self.sim.ticks

    def infected_count(self) -> int:
        return sum(1 for n in self.sim.nodes.values() if n.infected)

    def trace(self, label: str) -> np.ndarray:
        """Packets seen on ``label``'s interface: sent onto the wire, or delivered."""
        addr = self.sim.monitored[label]
        led = self.ledger
        sent = (led["src"] == addr) & (led["t_arrive"] != DROPPED)
        recv = (led["dst"] == addr) & (led["t_arrive"] >= 0)
        ts = np.concatenate([led["t_send"][sent], led["t_arrive"][recv]])
        rows = np.concatenate([led[sent], led[recv]])
        order = np.argsort(ts, kind="stable")
        out = np.empty(len(rows), dtype=TRACE_DTYPE)
        out["t_us"] = ts[order]
        for f in ("src", "dst", "sport", "dport", "proto", "kind", "seq"):
            out[f] = rows[f][order]
        out["payload"] = rows["payload"][order]
        return out

    def ledger_counts(self, label: str) -> dict[str, int]:
        addr = self.sim.monitored[label]
        led = self.ledger
        src = led["src"] == addr
        dst = led["dst"] == addr
        return {
            "offered": int(src.sum()),
            "sent": int((src & (led["t_arrive"] != DROPPED)).sum()),
            "dropped": int((src & (led["t_arrive"] == DROPPED)).sum()),
            "delivered": int((dst & (led["t_arrive"] >= 0)).sum()),
        }

    def bins(self, label: str) -> NodeBins:
        if label in self._bins:
            return self._bins[label]
        sim = self.sim
        addr = sim.monitored[label]
        n = sim.cfg.horizon_us // BIN_US + 1
        led = self.ledger
        hdr = np.where(led["proto"] == Proto.TCP, header_bytes(Proto.TCP), header_bytes(Proto.UDP))
        wire = hdr + led["payload"].astype(np.int64)
        src = led["src"] == addr
        on_wire = src & (led["t_arrive"] != DROPPED)
        recv = (led["dst"] == addr) & (led["t_arrive"] >= 0)
        tb_send = led["t_send"] // BIN_US
        tb_recv = np.where(recv, led["t_arrive"], 0) // BIN_US

        def hist(idx, mask, weights=None):
            w = None if weights is None else weights[mask]
            return np.bincount(idx[mask], weights=w, minlength=n)[:n].astype(float)

        log_bytes = np.zeros(n)
        if addr in sim.capture:
            log_bytes = hist(tb_send, on_wire, hdr) + hist(tb_recv, recv, hdr)
        conn = np.zeros(n)
        for t, delta in sim.conn_events.get(addr, []):
            k = -(-t // BIN_US)
            if k < n:
                conn[k] += delta
        bins = NodeBins(hist(tb_send, src), hist(tb_recv, recv), hist(tb_send, on_wire, wire),
                        hist(tb_recv, recv, wire), log_bytes, np.cumsum(conn))
        self._bins[label] = bins
        return bins

    def samples(self, label: str, params: ResourceModelParams | None = None,
                normalized: bool = True) -> list[ResourceSample]:
        """Sample series for ``label``; raw series include the sampling
        harness's own cost, normalized ones have it subtracted."""
        cfg = self.config
        params = params or resolve_params(cfg.params)
        cost = harness_cost(params, cfg.overhead_fraction)
        raw = sample_series(self.bins(label), self.ticks[label], cfg.cadence_us, params, cost)
        if not normalized:
            return raw
        return normalize_series(raw, harness_series(self.ticks[label], cost))

    def delivered(self, dst_label: str, proto: Proto, kind: Kind = Kind.DATA) -> int:
        addr = self.sim.monitored[dst_label]
        led = self.ledger
        return int(((led["dst"] == addr) & (led["t_arrive"] >= 0) & (led["proto"] == proto)
                    & (led["kind"] == kind)).sum())


def run_scenario(cfg: ScenarioConfig, wordlist=None) -> RunResult:
    return Simulation(cfg, wordlist).run()


def load_run_trace(path: str | Path) -> np.ndarray:
    with np.load(path) as data:
        return data["trace"]
