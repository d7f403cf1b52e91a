import numpy as np
import pytest

from mirai_sim.config import Command, ScenarioConfig, preset_flood
from mirai_sim.errors import HorizonExceeded
from mirai_sim.net import Kind, Proto
from mirai_sim.scenario import DROPPED, IN_FLIGHT, run_scenario

from conftest import population_config, short_config


def test_empty_scenario():
    cfg = ScenarioConfig(flood=preset_flood("paper-udp"), compromised=None, victim=None, cnc=None, report=None,
                         loader=None, commands=(), nodes=(), capture=())
    r = run_scenario(cfg)
    assert r.events == 0 and len(r.ledger) == 0 and r.nodes == {}


def test_command_beyond_horizon():
    cfg = ScenarioConfig(flood=preset_flood("paper-udp"), commands=(Command(10_000_000, "flood"),))
    with pytest.raises(HorizonExceeded):
        run_scenario(cfg)


def test_delayed_command():
    fl = preset_flood("paper-udp")
    fl = type(fl)(**{**fl.__dict__, "duration": 1.0})
    cfg = short_config("paper-udp", 2.0, commands=(Command(1_000_000, "flood"),)).with_(flood=fl)
    r = run_scenario(cfg)
    data = r.ledger[r.ledger["kind"] == Kind.DATA]
    assert data["t_send"].min() == 1_000_000
    assert data["t_send"].max() < 2_000_000
    # back to the pre-attack state once the duration has elapsed
    assert r.sim.nodes[cfg.compromised].state.phase.value == "registered"


@pytest.mark.parametrize("run", ["udp_run", "tcp_run"])
def test_per_flow_conservation(run, request):
    r = request.getfixturevalue(run)
    led = r.ledger
    data = led[(led["kind"] == Kind.DATA) & (led["src"] == r.nodes["compromised"])]
    assert len(np.unique(data["sport"])) == 6
    for sport in np.unique(data["sport"]):
        flow = data[data["sport"] == sport]
        delivered = int((flow["t_arrive"] >= 0).sum())
        dropped = int((flow["t_arrive"] == DROPPED).sum())
        in_flight = int((flow["t_arrive"] == IN_FLIGHT).sum())
        assert delivered + dropped + in_flight == len(flow)
    # 180 Mbps offered into 100 Mbps: the queue must overflow
    assert (data["t_arrive"] == DROPPED).any()


@pytest.mark.parametrize("run", ["udp_run", "tcp_run"])
def test_bottleneck_capacity(run, request):
    r = request.getfixturevalue(run)
    led = r.ledger
    got = led[(led["dst"] == r.nodes["victim"]) & (led["t_arrive"] >= 0)]
    window = 100_000
    bits = np.bincount(got["t_arrive"] // window, weights=got["payload"].astype(float) * 8)
    assert bits.max() <= 100e6 * window / 1e6 + 1460 * 8


@pytest.mark.parametrize("run", ["udp_run", "tcp_run"])
def test_trace_matches_ledger(run, request):
    r = request.getfixturevalue(run)
    for label in ("compromised", "victim"):
        counts = r.ledger_counts(label)
        trace = r.trace(label)
        assert len(trace) == counts["sent"] + counts["delivered"]
        assert np.all(np.diff(trace["t_us"]) >= 0)


def test_udp_flood_ends_on_time(udp_run):
    led = udp_run.ledger
    data = led[led["kind"] == Kind.DATA]
    assert data["t_send"].max() < 60_000_000


def test_tcp_streams_handshake(tcp_run):
    led = tcp_run.ledger
    syn = led[(led["kind"] == Kind.SYN) & (led["proto"] == Proto.TCP)]
    assert len(np.unique(syn["sport"])) == 6
    assert all(s.established for s in tcp_run.sim.streams)


@pytest.fixture(scope="module")
def propagation():
    return run_scenario(population_config())


def test_full_infection_on_slash16(propagation):
    r = propagation
    assert r.infected_count() == 64
    times = [t for t, _ in r.sim.infections]
    assert times == sorted(times)
    assert times[-1] < r.config.horizon_us


def test_infection_is_unique(propagation):
    addrs = [a for _, a in propagation.sim.infections]
    assert len(addrs) == len(set(addrs))


def test_registry_matches_loaded_bots(propagation):
    r = propagation
    assert r.sim.cnc.registered == {a for _, a in r.sim.infections}


def test_infected_nodes_are_closed(propagation):
    for node in propagation.sim.nodes.values():
        if node.infected:
            assert not any(node.telnet_open(p) for p in (23, 2323))


def test_zero_vulnerable_population():
    r = run_scenario(population_config(vulnerable_fraction=0.0, horizon=3))
    assert r.infected_count() == 1  # only the seeded bot
    assert len(r.sim.report_server) == 0


def test_non_wordlist_brute_force_in_simulation():
    # a /28 with one seeded bot and one device holding a credential outside the wordlist
    r = run_scenario(population_config(address_space="10.0.0.0/28", size=2, vulnerable_fraction=0.5, horizon=2))
    target = r.sim.population[1]
    assert not r.sim.nodes[target].infected
    # every finished brute-force session ran through the whole list
    st = r.sim.nodes[r.sim.population[0]].state
    pending = st.attempt_index + 1 if st.phase.value == "brute-forcing" else 0
    done = r.sim.brute_attempts[target] - pending
    assert done >= 62 and done % 62 == 0


def test_unsupported_architecture_is_not_infected():
    r = run_scenario(population_config(address_space="10.0.0.0/26", size=8, horizon=5,
                                       arch_mix=(("sh4", 1.0),), loader_archs=()))
    assert r.infected_count() == 1
