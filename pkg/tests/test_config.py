import pytest
from hypothesis import given, strategies as st

from mirai_sim.config import (DEFAULTS, Command, emit_config, parse_config, parse_duration_us, parse_rate,
                              preset_config, preset_flood)
from mirai_sim.errors import ConfigError, MissingRequired, RangeViolation, UnknownKey
from mirai_sim.flood import FloodSpec
from mirai_sim.net import Proto
from mirai_sim.rng import ip_to_int


def test_preset_expansion():
    cfg = parse_config("[flood]\npreset = paper-udp\n")
    spec = cfg.flood_spec()
    assert spec == FloodSpec(Proto.UDP, ip_to_int("10.0.0.3"), 5201, 30_000_000, 1200, 6, 60.0)
    assert cfg.flood_spec("paper-tcp").protocol == Proto.TCP


def test_missing_protocol():
    with pytest.raises(MissingRequired):
        parse_config("[population]\nsize = 3\n")


def test_fraction_out_of_range():
    with pytest.raises(RangeViolation):
        parse_config("[flood]\nprotocol = udp\n[population]\nvulnerable_fraction = 1.5\n")


def test_unknown_key():
    with pytest.raises(UnknownKey):
        parse_config("[flood]\nprotocol = udp\nbogus = 1\n")
    with pytest.raises(UnknownKey):
        parse_config("[nope]\n")


@pytest.mark.parametrize("text", [
    "[flood]\nprotocol = udp\n[simulation]\nhorizon = 30\n",  # shorter than the 60 s flood
    "[flood]\nprotocol = udp\n[telemetry]\ncadence_ms = 7\n",  # does not divide 60 s
    "[flood]\nprotocol = udp\nlength = 2000\n",  # beyond MTU payload
])
def test_range_violations(text):
    with pytest.raises(RangeViolation):
        parse_config(text)


def test_commands():
    cfg = parse_config("[flood]\npreset = paper-tcp\n[commands]\nt=5s issue paper-udp\nt=250ms issue flood\n")
    assert cfg.commands == (Command(5_000_000, "paper-udp"), Command(250_000, "flood"))
    assert parse_config("[flood]\npreset = paper-tcp\n[commands]\n").timeline == ()
    assert parse_config("[flood]\npreset = paper-tcp\n").timeline == (Command(0, "flood"),)
    with pytest.raises(ConfigError):
        parse_config("[flood]\npreset = paper-tcp\n[commands]\nat 5 go\n")


def test_units():
    assert parse_rate("30M") == 30_000_000
    assert parse_rate("1.5k") == 1500
    assert parse_duration_us("100ms") == 100_000
    assert parse_duration_us("60") == 60_000_000


def test_aggregate_rate_and_bits():
    cfg = parse_config("[flood]\nprotocol = udp\nrate = 180M\nrate_mode = aggregate\nlength_unit = bits\n")
    spec = cfg.flood_spec()
    assert spec.per_stream_rate == 30_000_000 and spec.payload_bytes == 150


def test_presets_are_constant():
    assert preset_flood("paper-udp") == preset_flood("paper-udp")
    assert preset_config("paper-tcp") == preset_config("paper-tcp")
    with pytest.raises(ConfigError):
        preset_flood("paper-icmp")


def test_defaults_documented_for_every_section():
    assert set(DEFAULTS) == {"simulation", "population", "infrastructure", "link", "flood", "telemetry"}


configs = st.builds(
    lambda seed, frac, size, proto, rate, streams, bw, q, cad, cmds: preset_config(
        "paper-udp" if proto == "udp" else "paper-tcp", seed=seed, vulnerable_fraction=frac, size=size,
        bandwidth_mbps=bw, queue_packets=q, cadence_ms=cad,
        flood=type(preset_flood("paper-udp"))(Proto[proto.upper()], "", rate, "per-stream", 1200, "bytes", streams,
                                              60.0),
        commands=cmds),
    st.integers(0, 2**64 - 1), st.floats(0, 1), st.integers(0, 1000), st.sampled_from(["udp", "tcp"]),
    st.integers(1, 10**9), st.integers(1, 16), st.sampled_from([10.0, 100.0, 1000.0, 12.5]), st.integers(1, 500),
    st.sampled_from([100, 200, 500, 1000]),
    st.none() | st.lists(st.builds(Command, st.integers(0, 59_000_000), st.sampled_from(["flood", "paper-udp"])),
                         max_size=3).map(tuple))


@given(configs)
def test_emit_parse_round_trip(cfg):
    assert parse_config(emit_config(cfg)) == cfg
