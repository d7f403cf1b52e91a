import time

import pytest
from hypothesis import settings

from mirai_sim.config import ScenarioConfig, preset_flood
from mirai_sim.suite import run_suite

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


ACCEPTANCE_LINES: list[str] = []
SUITE_TIMING: dict[str, float] = {}


@pytest.fixture(scope="session")
def suite():
    """The calibrated five-scenario run (about 20 s), shared by every test."""
    t0 = time.perf_counter()
    result = run_suite()
    SUITE_TIMING["elapsed"] = time.perf_counter() - t0
    return result


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def udp_run(suite):
    return suite.runs["udp"]


@pytest.fixture(scope="session")
def tcp_run(suite):
    return suite.runs["tcp"]


def short_config(preset: str, seconds: float = 2.0, **changes) -> ScenarioConfig:
    fl = preset_flood(preset)
    fl = type(fl)(**{**fl.__dict__, "duration": seconds})
    return ScenarioConfig(flood=fl, horizon=seconds, **changes)


def population_config(**changes) -> ScenarioConfig:
    base = dict(flood=preset_flood("paper-udp"), seed=3, horizon=15, address_space="10.0.0.0/16", size=64,
                vulnerable_fraction=1.0, initial_bots=1, probes_per_tick=10, compromised=None, victim=None,
                nodes=(), capture=(), commands=())
    base.update(changes)
    return ScenarioConfig(**base)
