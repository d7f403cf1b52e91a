"""Scenario configuration: INI-style ``key = value`` sections plus a command timeline.

Sections and keys (defaults in ``DEFAULTS``)::

    [simulation]      seed, horizon (s), address_space (CIDR)
    [population]      size, vulnerable_fraction, arch_mix, telnet_ports, initial_bots,
                      probes_per_tick, scan_interval_ms, compromised, victim,
                      compromised_scans, wordlist, killer_interval_ms
    [infrastructure]  cnc, report, loader, loader_archs, exclusions
    [link]            bandwidth_mbps, latency_us, queue_packets, mtu_payload, loss
    [flood]           preset, protocol, rate, rate_mode, length, length_unit, streams,
                      duration, target, port
    [telemetry]       cadence_ms, overhead_fraction, nodes, capture, params
    [commands]        one ``t=<time> issue <flood|paper-udp|paper-tcp>`` per line

Either ``flood.preset`` or ``flood.protocol`` is required. Without a
``[commands]`` section the configured flood is issued at t=0; an empty
``[commands]`` section means no attack (the idle baseline).
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, replace
from pathlib import Path

from .engine import US_PER_MS, US_PER_S
from .errors import ConfigError, MissingRequired, RangeViolation, UnknownKey
from .flood import IPERF_PORT, FloodSpec
from .lifecycle import Arch
from .net import Proto
from .rng import AddressSpace, int_to_ip, ip_to_int

PRESETS = ("paper-udp", "paper-tcp")

DEFAULTS: dict[str, dict[str, str]] = {
    "simulation": {"seed": "0", "horizon": "60", "address_space": "10.0.0.0/16"},
    "population": {
        "size": "0", "vulnerable_fraction": "0", "arch_mix": "arm:1", "telnet_ports": "23",
        "initial_bots": "0", "probes_per_tick": "1", "scan_interval_ms": "10",
        "compromised": "10.0.0.2", "victim": "10.0.0.3", "compromised_scans": "false",
        "wordlist": "", "killer_interval_ms": "0",
    },
    "infrastructure": {
        "cnc": "198.51.100.10", "report": "198.51.100.11", "loader": "198.51.100.12",
        "loader_archs": "arm,mips,x86,sh4,ppc", "exclusions": "",
    },
    "link": {"bandwidth_mbps": "100", "latency_us": "200", "queue_packets": "100", "mtu_payload": "1460",
             "loss": "0"},
    "flood": {"preset": "", "protocol": "", "rate": "30M", "rate_mode": "per-stream", "length": "1200",
              "length_unit": "bytes", "streams": "6", "duration": "60", "target": "", "port": str(IPERF_PORT)},
    "telemetry": {"cadence_ms": "100", "overhead_fraction": "0.01", "nodes": "compromised,victim",
                  "capture": "victim", "params": "calibrated"},
}

_SUFFIX = {"": 1, "k": 10**3, "K": 10**3, "m": 10**6, "M": 10**6, "g": 10**9, "G": 10**9}


def parse_rate(text: str) -> int:
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([kKmMgG]?)\s*", text)
    if not m:
        raise ConfigError(f"bad rate {text!r}")
    return round(float(m.group(1)) * _SUFFIX[m.group(2)])


def format_rate(bps: int) -> str:
    for suffix, mult in (("G", 10**9), ("M", 10**6), ("K", 10**3)):
        if bps and bps % mult == 0:
            return f"{bps // mult}{suffix}"
    return str(bps)


def parse_duration_us(text: str) -> int:
    """``5s``, ``100ms``, ``250us`` or a bare number of seconds."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*(s|ms|us)?\s*", text)
    if not m:
        raise ConfigError(f"bad duration {text!r}")
    scale = {"s": US_PER_S, None: US_PER_S, "ms": US_PER_MS, "us": 1}[m.group(2)]
    return round(float(m.group(1)) * scale)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"bad boolean {text!r}")


@dataclass(frozen=True)
class FloodConfig:
    protocol: Proto
    preset: str = ""
    rate: int = 30_000_000
    rate_mode: str = "per-stream"
    length: int = 1200
    length_unit: str = "bytes"
    streams: int = 6
    duration: float = 60.0
    target: int | None = None
    port: int = IPERF_PORT

    @property
    def payload_bytes(self) -> int:
        return self.length if self.length_unit == "bytes" else -(-self.length // 8)

    @property
    def per_stream_rate(self) -> int:
        return self.rate if self.rate_mode == "per-stream" else self.rate // self.streams

    def spec(self, target: int) -> FloodSpec:
        return FloodSpec(self.protocol, self.target if self.target is not None else target, self.port,
                         self.per_stream_rate, self.payload_bytes, self.streams, self.duration)


def preset_flood(name: str) -> FloodConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    proto = Proto.UDP if name == "paper-udp" else Proto.TCP
    return FloodConfig(proto, name, 30_000_000, "per-stream", 1200, "bytes", 6, 60.0)


@dataclass(frozen=True)
class Command:
    at: int  # microseconds
    flood: str  # "flood" or a preset name


@dataclass(frozen=True)
class ScenarioConfig:
    flood: FloodConfig
    seed: int = 0
    horizon: float = 60.0
    address_space: str = "10.0.0.0/16"
    size: int = 0
    vulnerable_fraction: float = 0.0
    arch_mix: tuple[tuple[Arch, float], ...] = ((Arch.ARM, 1.0),)
    telnet_ports: tuple[int, ...] = (23,)
    initial_bots: int = 0
    probes_per_tick: int = 1
    scan_interval_ms: int = 10
    compromised: int | None = ip_to_int("10.0.0.2")
    victim: int | None = ip_to_int("10.0.0.3")
    compromised_scans: bool = False
    wordlist: str = ""
    killer_interval_ms: int = 0
    cnc: int | None = ip_to_int("198.51.100.10")
    report: int | None = ip_to_int("198.51.100.11")
    loader: int | None = ip_to_int("198.51.100.12")
    loader_archs: tuple[Arch, ...] = tuple(Arch)
    exclusions: tuple[str, ...] = ()
    bandwidth_mbps: float = 100.0
    latency_us: int = 200
    queue_packets: int = 100
    mtu_payload: int = 1460
    loss: float = 0.0
    cadence_ms: int = 100
    overhead_fraction: float = 0.01
    nodes: tuple[str, ...] = ("compromised", "victim")
    capture: tuple[str, ...] = ("victim",)
    params: str = "calibrated"
    commands: tuple[Command, ...] | None = None

    @property
    def horizon_us(self) -> int:
        return round(self.horizon * US_PER_S)

    @property
    def cadence_us(self) -> int:
        return self.cadence_ms * US_PER_MS

    @property
    def bandwidth_bps(self) -> int:
        return round(self.bandwidth_mbps * 1_000_000)

    @property
    def space(self) -> AddressSpace:
        return AddressSpace.from_cidr(self.address_space)

    @property
    def timeline(self) -> tuple[Command, ...]:
        return (Command(0, "flood"),) if self.commands is None else self.commands

    def flood_spec(self, name: str = "flood") -> FloodSpec:
        target = self.flood.target if self.flood.target is not None else self.victim
        if target is None:
            raise MissingRequired("flood.target (no victim configured)")
        fc = self.flood if name == "flood" else preset_flood(name)
        return fc.spec(target)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_text(self) -> str:
        return emit_config(self)


# ---------------------------------------------------------------------------
# parsing

def _split_ini(text: str) -> tuple[dict[str, dict[str, str]], list[str] | None]:
    # [commands] holds repeated ``t=...`` lines, which configparser would
    # collapse, so that section is cut out before parsing the rest
    rest: list[str] = []
    commands: list[str] | None = None
    in_commands = False
    for raw in text.splitlines():
        m = re.fullmatch(r"\s*\[([^\]]+)\]\s*", raw)
        if m:
            in_commands = m.group(1).strip().lower() == "commands"
            if in_commands:
                commands = [] if commands is None else commands
                continue
        if in_commands:
            line = re.split(r"[#;]", raw, maxsplit=1)[0].strip()
            if line:
                commands.append(line)
        else:
            rest.append(raw)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), strict=True,
                                       default_section="\0")
    parser.optionxform = str
    try:
        parser.read_string("\n".join(rest))
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from exc
    sections: dict[str, dict[str, str]] = {}
    for name in parser.sections():
        section = name.strip().lower()
        if section not in DEFAULTS:
            raise UnknownKey(f"unknown section [{name}]")
        if section in sections:
            raise ConfigError(f"duplicate section [{name}]")
        values = dict(parser.items(name))
        unknown = sorted(set(values) - set(DEFAULTS[section]))
        if unknown:
            raise UnknownKey(f"unknown key {section}.{unknown[0]}")
        sections[section] = values
    return sections, commands


def _addr_or_none(text: str) -> int | None:
    text = text.strip()
    if not text or text.lower() == "none":
        return None
    try:
        return ip_to_int(text)
    except ValueError as exc:
        raise ConfigError(f"bad IPv4 address {text!r}") from exc


def _csv(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _parse_command(line: str) -> Command:
    m = re.fullmatch(r"t\s*=\s*(\S+)\s+issue\s+(\S+)", line.strip())
    if not m:
        raise ConfigError(f"bad command {line!r}; expected 't=<time> issue <flood>'")
    name = m.group(2)
    if name != "flood" and name not in PRESETS:
        raise ConfigError(f"unknown flood {name!r} in command")
    return Command(parse_duration_us(m.group(1)), name)


def _num(section: str, key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: bad value {text!r}") from exc


def parse_config(text: str) -> ScenarioConfig:
    given, command_lines = _split_ini(text)
    v = {s: {**DEFAULTS[s], **given.get(s, {})} for s in DEFAULTS}
    fl = v["flood"]
    preset = fl["preset"].strip()
    flood_given = given.get("flood", {})
    if preset:
        base = preset_flood(preset)
        if flood_given.get("protocol") and flood_given["protocol"].lower() != base.protocol.name.lower():
            raise ConfigError("flood.protocol contradicts flood.preset")
        defaults_from = {"rate": format_rate(base.rate), "rate_mode": base.rate_mode, "length": str(base.length),
                         "length_unit": base.length_unit, "streams": str(base.streams),
                         "duration": f"{base.duration:g}"}
        fl = {**fl, **defaults_from, **{k: val for k, val in flood_given.items() if k in defaults_from}}
        protocol = base.protocol
    else:
        if not fl["protocol"].strip():
            raise MissingRequired("flood.protocol (or flood.preset) is required")
        try:
            protocol = Proto[fl["protocol"].strip().upper()]
        except KeyError as exc:
            raise ConfigError(f"flood.protocol must be tcp or udp, got {fl['protocol']!r}") from exc
    if fl["rate_mode"] not in ("per-stream", "aggregate"):
        raise ConfigError("flood.rate_mode must be per-stream or aggregate")
    if fl["length_unit"] not in ("bytes", "bits"):
        raise ConfigError("flood.length_unit must be bytes or bits")
    flood = FloodConfig(
        protocol, preset, parse_rate(fl["rate"]), fl["rate_mode"], _num("flood", "length", fl["length"], int),
        fl["length_unit"], _num("flood", "streams", fl["streams"], int),
        parse_duration_us(fl["duration"]) / US_PER_S, _addr_or_none(fl["target"]),
        _num("flood", "port", fl["port"], int),
    )

    pop, infra, link, tel, sim = v["population"], v["infrastructure"], v["link"], v["telemetry"], v["simulation"]
    mix = []
    for part in _csv(pop["arch_mix"]):
        name, _, weight = part.partition(":")
        try:
            mix.append((Arch(name.strip().lower()), float(weight or 1)))
        except ValueError as exc:
            raise ConfigError(f"bad arch_mix entry {part!r}") from exc
    try:
        archs = tuple(Arch(a.lower()) for a in _csv(infra["loader_archs"]))
    except ValueError as exc:
        raise ConfigError(f"bad loader_archs {infra['loader_archs']!r}") from exc
    commands = None if command_lines is None else tuple(_parse_command(c) for c in command_lines)

    cfg = ScenarioConfig(
        flood=flood,
        seed=_num("simulation", "seed", sim["seed"], int),
        horizon=parse_duration_us(sim["horizon"]) / US_PER_S,
        address_space=sim["address_space"],
        size=_num("population", "size", pop["size"], int),
        vulnerable_fraction=_num("population", "vulnerable_fraction", pop["vulnerable_fraction"]),
        arch_mix=tuple(mix),
        telnet_ports=tuple(_num("population", "telnet_ports", p, int) for p in _csv(pop["telnet_ports"])),
        initial_bots=_num("population", "initial_bots", pop["initial_bots"], int),
        probes_per_tick=_num("population", "probes_per_tick", pop["probes_per_tick"], int),
        scan_interval_ms=_num("population", "scan_interval_ms", pop["scan_interval_ms"], int),
        compromised=_addr_or_none(pop["compromised"]),
        victim=_addr_or_none(pop["victim"]),
        compromised_scans=_bool(pop["compromised_scans"]),
        wordlist=pop["wordlist"],
        killer_interval_ms=_num("population", "killer_interval_ms", pop["killer_interval_ms"], int),
        cnc=_addr_or_none(infra["cnc"]),
        report=_addr_or_none(infra["report"]),
        loader=_addr_or_none(infra["loader"]),
        loader_archs=archs,
        exclusions=_csv(infra["exclusions"]),
        bandwidth_mbps=_num("link", "bandwidth_mbps", link["bandwidth_mbps"]),
        latency_us=_num("link", "latency_us", link["latency_us"], int),
        queue_packets=_num("link", "queue_packets", link["queue_packets"], int),
        mtu_payload=_num("link", "mtu_payload", link["mtu_payload"], int),
        loss=_num("link", "loss", link["loss"]),
        cadence_ms=_num("telemetry", "cadence_ms", tel["cadence_ms"], int),
        overhead_fraction=_num("telemetry", "overhead_fraction", tel["overhead_fraction"]),
        nodes=_csv(tel["nodes"]),
        capture=_csv(tel["capture"]),
        params=tel["params"].strip() or "calibrated",
        commands=commands,
    )
    return validate_config(cfg)


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    def bad(msg):
        raise RangeViolation(msg)

    if not 0 <= cfg.vulnerable_fraction <= 1:
        bad(f"population.vulnerable_fraction must be in [0, 1], got {cfg.vulnerable_fraction}")
    if cfg.horizon <= 0:
        bad("simulation.horizon must be positive")
    if cfg.flood.duration <= 0:
        bad("flood.duration must be positive")
    if cfg.horizon_us < round(cfg.flood.duration * US_PER_S):
        bad(f"simulation.horizon ({cfg.horizon:g} s) is shorter than flood.duration ({cfg.flood.duration:g} s)")
    if cfg.cadence_ms <= 0 or cfg.horizon_us % cfg.cadence_us:
        bad("telemetry.cadence_ms must be positive and divide the horizon")
    if not 0 <= cfg.seed < 2**64:
        bad("simulation.seed must be an unsigned 64-bit integer")
    if cfg.size < 0 or cfg.initial_bots < 0 or cfg.initial_bots > cfg.size:
        bad("population.initial_bots must be within [0, size]")
    if cfg.probes_per_tick < 1 or cfg.scan_interval_ms < 1:
        bad("population.probes_per_tick and scan_interval_ms must be >= 1")
    if cfg.flood.streams < 1 or cfg.flood.length < 1:
        bad("flood.streams and flood.length must be >= 1")
    if cfg.flood.protocol == Proto.UDP and cfg.flood.rate <= 0:
        bad("flood.rate must be positive for UDP")
    if cfg.flood.payload_bytes > cfg.mtu_payload:
        bad(f"flood payload {cfg.flood.payload_bytes} B exceeds link.mtu_payload {cfg.mtu_payload} B")
    if cfg.bandwidth_mbps <= 0 or cfg.queue_packets < 1 or cfg.latency_us < 0:
        bad("link parameters out of range")
    if not 0 <= cfg.loss < 1:
        bad("link.loss must be in [0, 1)")
    if not 0 <= cfg.overhead_fraction < 1:
        bad("telemetry.overhead_fraction must be in [0, 1)")
    if any(w < 0 for _, w in cfg.arch_mix) or not cfg.arch_mix or sum(w for _, w in cfg.arch_mix) <= 0:
        bad("population.arch_mix weights must be non-negative with a positive sum")
    try:
        space = cfg.space
    except ValueError as exc:
        raise ConfigError(f"bad address_space {cfg.address_space!r}") from exc
    if cfg.size > space.size:
        bad("population.size exceeds the address space")
    for node in cfg.nodes + cfg.capture:
        if node not in ("compromised", "victim", "all"):
            try:
                ip_to_int(node)
            except ValueError as exc:
                raise ConfigError(f"telemetry node {node!r} is not compromised, victim, all or an IPv4 address") \
                    from exc
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# emitting

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_config(cfg: ScenarioConfig) -> str:
    fl = cfg.flood
    ip = lambda a: "" if a is None else int_to_ip(a)  # noqa: E731
    sections = {
        "simulation": {"seed": cfg.seed, "horizon": f"{cfg.horizon_us}us", "address_space": cfg.address_space},
        "population": {
            "size": cfg.size, "vulnerable_fraction": cfg.vulnerable_fraction,
            "arch_mix": ",".join(f"{a.value}:{w!r}" for a, w in cfg.arch_mix),
            "telnet_ports": ",".join(map(str, cfg.telnet_ports)), "initial_bots": cfg.initial_bots,
            "probes_per_tick": cfg.probes_per_tick, "scan_interval_ms": cfg.scan_interval_ms,
            "compromised": ip(cfg.compromised), "victim": ip(cfg.victim),
            "compromised_scans": cfg.compromised_scans, "wordlist": cfg.wordlist,
            "killer_interval_ms": cfg.killer_interval_ms,
        },
        "infrastructure": {
            "cnc": ip(cfg.cnc), "report": ip(cfg.report), "loader": ip(cfg.loader),
            "loader_archs": ",".join(a.value for a in cfg.loader_archs), "exclusions": ",".join(cfg.exclusions),
        },
        "link": {"bandwidth_mbps": cfg.bandwidth_mbps, "latency_us": cfg.latency_us,
                 "queue_packets": cfg.queue_packets, "mtu_payload": cfg.mtu_payload, "loss": cfg.loss},
        "flood": {
            "preset": fl.preset, "protocol": fl.protocol.name.lower(), "rate": str(fl.rate),
            "rate_mode": fl.rate_mode, "length": fl.length, "length_unit": fl.length_unit, "streams": fl.streams,
            "duration": f"{round(fl.duration * US_PER_S)}us", "target": ip(fl.target), "port": fl.port,
        },
        "telemetry": {"cadence_ms": cfg.cadence_ms, "overhead_fraction": cfg.overhead_fraction,
                      "nodes": ",".join(cfg.nodes), "capture": ",".join(cfg.capture), "params": cfg.params},
    }
    lines = []
    for name, kv in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_fmt(val)}" for k, val in kv.items())
        lines.append("")
    if cfg.commands is not None:
        lines.append("[commands]")
        lines.extend(f"t={c.at}us issue {c.flood}" for c in cfg.commands)
        lines.append("")
    return "\n".join(lines)


def preset_config(name: str, **changes) -> ScenarioConfig:
    """Two-device testbed: one pre-infected bot flooding one victim for 60 s."""
    cfg = ScenarioConfig(flood=preset_flood(name))
    return validate_config(replace(cfg, **changes)) if changes else cfg


__all__ = ["ScenarioConfig", "FloodConfig", "Command", "parse_config", "load_config", "emit_config",
           "preset_config", "preset_flood", "validate_config", "PRESETS", "DEFAULTS", "parse_rate",
           "parse_duration_us"]
