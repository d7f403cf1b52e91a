"""Bot, report server, loader and CNC state machines.

These are the event handlers' state logic only. Packet exchange (probe,
SYN-ACK, telnet prompt/credential round trips, payload delivery) is driven
by :mod:`mirai_sim.scenario`, which calls into the functions here.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import NoReportServer, TargetUnreachable, WordlistError
from .flood import FloodSpec
from .net import Kind, Packet, Proto
from .rng import AddressSpace, Exclusions, SplitMix64, random_public_ipv4

TELNET_PORTS = (23, 2323)
KILLER_PORTS = (22, 23, 80)
CNC_NEW_BOT_PORT = 23
CNC_BOT_PORT = 101
REPORT_PORT = 48101
WORDLIST_SIZE = 62


class Arch(Enum):
    ARM = "arm"
    MIPS = "mips"
    X86 = "x86"
    SH4 = "sh4"
    PPC = "ppc"


class Role(Enum):
    DEVICE = "device"
    CNC = "cnc"
    REPORT = "report-server"
    LOADER = "loader"


class Phase(Enum):
    DORMANT = "dormant"
    SCANNING = "scanning"
    BRUTE_FORCING = "brute-forcing"
    REPORTING = "reporting"
    AWAITING_LOAD = "awaiting-load"
    REGISTERED = "registered"
    ATTACKING = "attacking"


@dataclass(frozen=True)
class BotState:
    phase: Phase = Phase.DORMANT
    target: int | None = None
    port: int = 23
    attempt_index: int = 0
    spec: FloodSpec | None = None
    ends_at: int | None = None


DORMANT = BotState()
SCANNING = BotState(Phase.SCANNING)
REGISTERED = BotState(Phase.REGISTERED)


@dataclass
class NodeProfile:
    addr: int
    architecture: Arch = Arch.ARM
    services: dict[int, str] = field(default_factory=dict)
    telnet_credential: tuple[str, str] | None = None
    infected: bool = False
    watchdog_enabled: bool = True
    competing_malware: bool = False
    reserved_ports: set[int] = field(default_factory=set)
    role: Role = Role.DEVICE
    state: BotState = DORMANT
    self_file_deleted: bool = False
    # bots that should not scan (e.g. the pre-infected testbed device)
    scan_enabled: bool = True
    # previous state to resume once an attack finishes
    resume: BotState = SCANNING

    def listens(self, port: int) -> bool:
        return port in self.services and port not in self.reserved_ports

    def telnet_open(self, port: int) -> bool:
        return self.services.get(port) == "telnet" and port not in self.reserved_ports


# ---------------------------------------------------------------------------
# credentials

@dataclass(frozen=True)
class CredentialEntry:
    username: str
    password: str
    weight: Fraction = Fraction(1)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.username, self.password)


def parse_wordlist(text: str, expected: int | None = WORDLIST_SIZE) -> list[CredentialEntry]:
    """Parse ``username password [weight]`` lines; ``#`` starts a comment."""
    entries: list[CredentialEntry] = []
    seen: set[tuple[str, str]] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise WordlistError(f"line {lineno}: expected 'username password [weight]', got {raw!r}")
        weight = Fraction(1)
        if len(parts) == 3:
            try:
                weight = Fraction(parts[2])
            except (ValueError, ZeroDivisionError) as exc:
                raise WordlistError(f"line {lineno}: bad weight {parts[2]!r}") from exc
            if weight < 0:
                raise WordlistError(f"line {lineno}: negative weight")
        pair = (parts[0], parts[1])
        if pair in seen:
            raise WordlistError(f"line {lineno}: duplicate credential {pair[0]}/{pair[1]}")
        seen.add(pair)
        entries.append(CredentialEntry(pair[0], pair[1], weight))
    if expected is not None and len(entries) != expected:
        raise WordlistError(f"wordlist has {len(entries)} entries, expected {expected}")
    if entries and sum(e.weight for e in entries) == 0:
        raise WordlistError("all weights are zero")
    return entries


def load_wordlist(path: str | Path | None = None, expected: int | None = WORDLIST_SIZE) -> list[CredentialEntry]:
    if path is None:
        text = resources.files("mirai_sim").joinpath("data/wordlist.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_wordlist(text, expected)


def pick_credential(wordlist: list[CredentialEntry], rng: SplitMix64) -> CredentialEntry:
    """Weighted draw from the wordlist."""
    total = sum(e.weight for e in wordlist)
    x = Fraction(rng.next_u64(), 1 << 64) * total
    acc = Fraction(0)
    for entry in wordlist:
        acc += entry.weight
        if x < acc:
            return entry
    return wordlist[-1]


# ---------------------------------------------------------------------------
# scanner

@dataclass(frozen=True)
class ScanConfig:
    probes_per_tick: int = 1
    interval_us: int = 10_000
    # one in ``alt_port_one_in`` probes goes to 2323
    alt_port_one_in: int = 10


def scan_tick(bot: NodeProfile, rng: SplitMix64, scan: ScanConfig, space: AddressSpace,
              exclusions: Exclusions | None = None, sport: int = 0) -> list[Packet]:
    """SYN probes for one scanner tick.

    Per probe the RNG is consumed as: address draw(s) first, then one draw
    whose value mod ``alt_port_one_in`` selects port 2323 when zero.
    """
    if bot.state.phase is not Phase.SCANNING:
        raise ValueError(f"bot {bot.addr} is {bot.state.phase.value}, not scanning")
    if scan.probes_per_tick < 1:
        raise ValueError("probes_per_tick must be >= 1")
    probes = []
    for i in range(scan.probes_per_tick):
        dst = random_public_ipv4(rng, space, exclusions)
        port = 2323 if rng.next_u64() % scan.alt_port_one_in == 0 else 23
        probes.append(Packet(bot.addr, dst, (sport + i) % 65536, port, Proto.TCP, Kind.SYN))
    return probes


# ---------------------------------------------------------------------------
# brute force

class BruteOutcome(Enum):
    SUCCESS = "success"
    CONTINUE = "continue"
    FAILURE = "failure"


class BruteResult(NamedTuple):
    outcome: BruteOutcome
    state: BotState
    credential: CredentialEntry | None = None


def begin_brute_force(bot: NodeProfile, target: int, port: int) -> BotState:
    return BotState(Phase.BRUTE_FORCING, target=target, port=port, attempt_index=0)


def brute_force_step(state: BotState, target: NodeProfile, wordlist: list[CredentialEntry]) -> BruteResult:
    """Try ``wordlist[state.attempt_index]`` against ``target``.

    Returns the outcome and the bot's next state: back to scanning on
    failure, reporting on success, the next index otherwise.
    """
    if state.phase is not Phase.BRUTE_FORCING:
        raise ValueError(f"not brute forcing: {state.phase.value}")
    if not target.telnet_open(state.port):
        raise TargetUnreachable(f"no telnet listener on port {state.port}")
    entry = wordlist[state.attempt_index]
    if target.telnet_credential is not None and entry.pair == tuple(target.telnet_credential):
        return BruteResult(BruteOutcome.SUCCESS, BotState(Phase.REPORTING, target=state.target, port=state.port,
                                                          attempt_index=state.attempt_index), entry)
    if state.attempt_index + 1 >= len(wordlist):
        return BruteResult(BruteOutcome.FAILURE, SCANNING)
    return BruteResult(BruteOutcome.CONTINUE, replace(state, attempt_index=state.attempt_index + 1))


# ---------------------------------------------------------------------------
# report server

@dataclass(frozen=True)
class ReportRecord:
    victim: int
    telnet_port: int
    credential: CredentialEntry
    reported_at: int


@dataclass
class ReportServer:
    addr: int
    records: dict[int, ReportRecord] = field(default_factory=dict)
    # called with each newly stored record (the loader notification)
    on_new: object = None

    def __len__(self) -> int:
        return len(self.records)


def report_compromise(server: ReportServer | None, record: ReportRecord) -> int:
    if server is None:
        raise NoReportServer("scenario defines no report server")
    if record.victim not in server.records:
        server.records[record.victim] = record
        if server.on_new is not None:
            server.on_new(record)
    return len(server.records)


# ---------------------------------------------------------------------------
# loader

class LoadOutcome(Enum):
    INFECTED = "infected"
    UNSUPPORTED_ARCH = "unsupported-arch"
    ALREADY_INFECTED = "already-infected"


@dataclass
class Loader:
    addr: int
    payloads: frozenset[Arch] = frozenset(Arch)


def loader_dispatch(loader: Loader, record: ReportRecord, target: NodeProfile) -> LoadOutcome:
    if target.infected:
        return LoadOutcome.ALREADY_INFECTED
    if target.architecture not in loader.payloads:
        return LoadOutcome.UNSUPPORTED_ARCH
    infect(target)
    return LoadOutcome.INFECTED


def infect(node: NodeProfile) -> None:
    """Bot bootstrap: run from memory, drop the binary, stop the watchdog."""
    node.infected = True
    node.self_file_deleted = True
    node.watchdog_enabled = False
    node.state = SCANNING if node.scan_enabled else REGISTERED


def killer_apply(node: NodeProfile) -> list[int]:
    """Kill and reserve 22/23/80, evict competing malware.

    Telnet daemons on other ports (2323) are killed too but not reserved, so
    an infected node can never be brute forced again.
    """
    if not node.infected:
        raise ValueError("killer runs only on infected nodes")
    closed = []
    for port in KILLER_PORTS:
        if node.services.pop(port, None) is not None:
            closed.append(port)
        node.reserved_ports.add(port)
    for port in [p for p, s in node.services.items() if s == "telnet"]:
        del node.services[port]
        closed.append(port)
    node.competing_malware = False
    return sorted(closed)


# ---------------------------------------------------------------------------
# CNC

class CncOutcome(Enum):
    NEW_BOT_REGISTERED = "new-bot-registered"
    KNOWN_BOT = "known-bot"
    REJECTED = "rejected"


@dataclass(frozen=True)
class AttackCommand:
    spec: FloodSpec
    issue_at: int

    def __post_init__(self):
        if self.spec.duration <= 0:
            raise ValueError("attack duration must be positive")


@dataclass
class CncRegistry:
    addr: int = 0
    registered: set[int] = field(default_factory=set)
    pending_commands: list[AttackCommand] = field(default_factory=list)


def cnc_accept(cnc: CncRegistry, src: int, dst_port: int) -> CncOutcome:
    if dst_port not in (CNC_NEW_BOT_PORT, CNC_BOT_PORT):
        raise ValueError(f"CNC does not listen on port {dst_port}")
    if dst_port == CNC_NEW_BOT_PORT:
        if src in cnc.registered:
            return CncOutcome.KNOWN_BOT
        cnc.registered.add(src)
        return CncOutcome.NEW_BOT_REGISTERED
    return CncOutcome.KNOWN_BOT if src in cnc.registered else CncOutcome.REJECTED


def cnc_issue(cnc: CncRegistry, command: AttackCommand, nodes: Mapping[int, NodeProfile]) -> list[int]:
    """Put every registered bot into Attacking. Returns the tasked addresses
    in ascending order; callers schedule the flood start and the end of the
    attack at ``issue_at + duration``."""
    command.spec.validate()
    ends_at = command.issue_at + command.spec.duration_us
    tasked = []
    for addr in sorted(cnc.registered):
        bot = nodes.get(addr)
        if bot is None or not bot.infected:
            continue
        if bot.state.phase is not Phase.ATTACKING:
            bot.resume = SCANNING if bot.scan_enabled else REGISTERED
        bot.state = BotState(Phase.ATTACKING, spec=command.spec, ends_at=ends_at)
        tasked.append(addr)
    return tasked


def finish_attack(bot: NodeProfile, now: int) -> None:
    if bot.state.phase is Phase.ATTACKING and bot.state.ends_at == now:
        bot.state = bot.resume


def make_device(addr: int, arch: Arch, credential: tuple[str, str] | None,
                telnet_ports: Iterable[int] = (23,), extra: Mapping[int, str] | None = None) -> NodeProfile:
    services = {p: "telnet" for p in telnet_ports} if credential is not None else {}
    if extra:
        services.update(extra)
    return NodeProfile(addr, arch, services, credential)
