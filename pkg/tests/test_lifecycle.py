import pytest
from hypothesis import given, strategies as st

from mirai_sim import lifecycle as lc
from mirai_sim.errors import NoReportServer, TargetUnreachable, WordlistError
from mirai_sim.flood import paper_preset
from mirai_sim.net import Kind, Proto
from mirai_sim.rng import AddressSpace, SplitMix64

from test_rng import oracle_stream

WORDS = lc.load_wordlist()
SPACE = AddressSpace.from_cidr("10.0.0.0/16")


def bot(addr=1):
    node = lc.make_device(addr, lc.Arch.ARM, WORDS[0].pair)
    lc.infect(node)
    return node


def brute(target, port=23):
    state = lc.begin_brute_force(bot(), target.addr, port)
    attempts = 0
    while True:
        res = lc.brute_force_step(state, target, WORDS)
        attempts += 1
        if res.outcome is not lc.BruteOutcome.CONTINUE:
            return res, attempts
        state = res.state


def test_default_wordlist():
    assert len(WORDS) == 62
    assert len({w.pair for w in WORDS}) == 62


def test_wordlist_errors():
    with pytest.raises(WordlistError):
        lc.parse_wordlist("root root\nroot root\n", expected=None)
    with pytest.raises(WordlistError):
        lc.parse_wordlist("root root\n")
    assert len(lc.parse_wordlist("a b 2\nc d\n", expected=2)) == 2


def test_scan_single_probe():
    probes = lc.scan_tick(bot(), SplitMix64(1), lc.ScanConfig(), SPACE)
    assert len(probes) == 1
    p = probes[0]
    assert p.kind == Kind.SYN and p.proto == Proto.TCP and p.dport in (23, 2323)


def test_scan_matches_rng_composition():
    probes = lc.scan_tick(bot(), SplitMix64(99), lc.ScanConfig(probes_per_tick=5), SPACE)
    draws = oracle_stream(99, 10)
    expected = [(SPACE.base + draws[2 * i] % SPACE.size, 2323 if draws[2 * i + 1] % 10 == 0 else 23)
                for i in range(5)]
    assert [(p.dst, p.dport) for p in probes] == expected


def test_alt_port_fraction():
    rng = SplitMix64(5)
    probes = lc.scan_tick(bot(), rng, lc.ScanConfig(probes_per_tick=10**5), SPACE)
    frac = sum(p.dport == 2323 for p in probes) / len(probes)
    assert abs(frac - 0.10) <= 0.01


def test_scan_requires_scanning_phase():
    node = bot()
    node.state = lc.REGISTERED
    with pytest.raises(ValueError):
        lc.scan_tick(node, SplitMix64(1), lc.ScanConfig(), SPACE)


def test_success_on_fifth_attempt():
    target = lc.make_device(9, lc.Arch.ARM, WORDS[4].pair)
    res, attempts = brute(target)
    assert res.outcome is lc.BruteOutcome.SUCCESS
    assert attempts == 5 and res.state.attempt_index == 4 and res.credential == WORDS[4]


def test_non_wordlist_credential_fails_after_62():
    target = lc.make_device(9, lc.Arch.ARM, ("admin", "not-in-any-list"))
    res, attempts = brute(target)
    assert res.outcome is lc.BruteOutcome.FAILURE and attempts == 62
    assert res.state == lc.SCANNING


def test_no_telnet_unreachable():
    target = lc.make_device(9, lc.Arch.ARM, None)
    with pytest.raises(TargetUnreachable):
        brute(target)


def test_report_dedup_and_loader_notification():
    seen = []
    server = lc.ReportServer(5, on_new=seen.append)
    rec = lc.ReportRecord(9, 23, WORDS[0], 0)
    assert lc.report_compromise(server, rec) == 1
    assert lc.report_compromise(server, rec) == 1
    assert server.records[9].credential == WORDS[0]
    assert seen == [rec]


def test_report_without_server():
    with pytest.raises(NoReportServer):
        lc.report_compromise(None, lc.ReportRecord(9, 23, WORDS[0], 0))


def test_loader_outcomes():
    loader = lc.Loader(6, frozenset({lc.Arch.ARM, lc.Arch.MIPS}))
    rec = lc.ReportRecord(9, 23, WORDS[0], 0)
    arm = lc.make_device(9, lc.Arch.ARM, WORDS[0].pair)
    assert lc.loader_dispatch(loader, rec, arm) is lc.LoadOutcome.INFECTED
    assert arm.infected and arm.self_file_deleted and not arm.watchdog_enabled
    assert arm.state.phase is lc.Phase.SCANNING
    sh4 = lc.make_device(10, lc.Arch.SH4, WORDS[0].pair)
    assert lc.loader_dispatch(loader, rec, sh4) is lc.LoadOutcome.UNSUPPORTED_ARCH
    assert not sh4.infected
    before = (arm.state, dict(arm.services))
    assert lc.loader_dispatch(loader, rec, arm) is lc.LoadOutcome.ALREADY_INFECTED
    assert (arm.state, arm.services) == before


def test_cnc_accept():
    cnc = lc.CncRegistry(1)
    assert lc.cnc_accept(cnc, 7, 23) is lc.CncOutcome.NEW_BOT_REGISTERED
    assert len(cnc.registered) == 1
    assert lc.cnc_accept(cnc, 7, 101) is lc.CncOutcome.KNOWN_BOT
    assert lc.cnc_accept(cnc, 8, 101) is lc.CncOutcome.REJECTED


def test_cnc_issue_and_finish():
    cnc = lc.CncRegistry(1)
    nodes = {a: bot(a) for a in (7, 8)}
    cnc.registered.update(nodes)
    cmd = lc.AttackCommand(paper_preset(Proto.UDP, 3), 1_000)
    assert lc.cnc_issue(cnc, cmd, nodes) == [7, 8]
    assert all(n.state.phase is lc.Phase.ATTACKING for n in nodes.values())
    ends = 1_000 + 60_000_000
    assert nodes[7].state.ends_at == ends
    lc.finish_attack(nodes[7], ends - 1)
    assert nodes[7].state.phase is lc.Phase.ATTACKING
    lc.finish_attack(nodes[7], ends)
    assert nodes[7].state.phase is lc.Phase.SCANNING


def test_cnc_issue_empty():
    assert lc.cnc_issue(lc.CncRegistry(1), lc.AttackCommand(paper_preset(Proto.UDP, 3), 0), {}) == []


def test_killer_ports():
    node = lc.make_device(9, lc.Arch.ARM, WORDS[0].pair, extra={22: "ssh", 80: "http", 8080: "http-alt"})
    node.competing_malware = True
    lc.infect(node)
    assert lc.killer_apply(node) == [22, 23, 80]
    assert {22, 23, 80} <= node.reserved_ports
    assert 8080 in node.services and not node.competing_malware
    assert not node.telnet_open(23)


def test_killer_blocks_brute_force_on_2323():
    node = lc.make_device(9, lc.Arch.ARM, WORDS[0].pair, telnet_ports=(23, 2323))
    lc.infect(node)
    lc.killer_apply(node)
    for port in (23, 2323):
        with pytest.raises(TargetUnreachable):
            brute(node, port)


@given(st.integers(0, 61), st.sampled_from([23, 2323]))
def test_killer_immunity(idx, port):
    node = lc.make_device(9, lc.Arch.ARM, WORDS[idx].pair, telnet_ports=(23, 2323))
    lc.infect(node)
    lc.killer_apply(node)
    state = lc.BotState(lc.Phase.BRUTE_FORCING, target=9, port=port, attempt_index=idx)
    with pytest.raises(TargetUnreachable):
        lc.brute_force_step(state, node, WORDS)


@given(st.text(alphabet="abcdefgh", min_size=1, max_size=6), st.text(alphabet="xyz0123", min_size=1, max_size=6))
def test_outside_wordlist_never_succeeds(user, password):
    pair = (user + "_u", password + "_p")
    target = lc.make_device(9, lc.Arch.ARM, pair)
    res, _ = brute(target)
    assert res.outcome is lc.BruteOutcome.FAILURE
