"""The five-scenario experiment: idle baseline plus TCP and UDP floods.

Three simulations cover all five scenarios: the idle run provides the
baseline for both devices, and each flood run provides the compromised
(sender) and victim (receiver) scenarios for its protocol.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .analysis import (ATTACKS, PAPER_TARGETS, Aggregate, DeltaTable, ScenarioId, aggregate, checks_text,
                       ordering_checks, report_csv)
from .config import ScenarioConfig, preset_config, preset_flood
from .pcap import write_trace
from .scenario import RunResult, resolve_params, run_scenario
from .telemetry import (DRIVERS, VALUE_FIELDS, DriverVector, ResourceModelParams, ResourceSample,
                        energy_joules, mean_drivers, series_array, write_samples_csv)

log = logging.getLogger(__name__)

RUNS = {"baseline": None, "tcp": "paper-tcp", "udp": "paper-udp"}
SOURCES = {
    ScenarioId.COMPROMISED_TCP: ("tcp", "compromised"),
    ScenarioId.COMPROMISED_UDP: ("udp", "compromised"),
    ScenarioId.VICTIM_TCP: ("tcp", "victim"),
    ScenarioId.VICTIM_UDP: ("udp", "victim"),
}
BASELINE_NODES = ("compromised", "victim")


def suite_configs(base: ScenarioConfig | None = None, seed: int | None = None) -> dict[str, ScenarioConfig]:
    base = base or preset_config("paper-udp")
    if seed is not None:
        base = replace(base, seed=seed)
    base = replace(base, nodes=("compromised", "victim"))
    out = {}
    for name, preset in RUNS.items():
        if preset is None:
            out[name] = replace(base, flood=preset_flood("paper-udp"), commands=())
        else:
            out[name] = replace(base, flood=preset_flood(preset), commands=None)
    return out


@dataclass
class SuiteResult:
    runs: dict[str, RunResult]
    series: dict[tuple[ScenarioId, str], list[ResourceSample]]
    params: ResourceModelParams

    def scenario_series(self, scenario: ScenarioId) -> list[ResourceSample]:
        if scenario is ScenarioId.BASELINE:
            return [s for node in BASELINE_NODES for s in self.series[(scenario, node)]]
        return self.series[(scenario, SOURCES[scenario][1])]

    def stats(self) -> dict[tuple[ScenarioId, str], Aggregate]:
        out = {}
        for s in ScenarioId:
            series = self.scenario_series(s)
            for f in VALUE_FIELDS:
                out[(s, f)] = aggregate(series_array(series, f))
        return out

    def table(self) -> DeltaTable:
        return DeltaTable.from_stats(self.stats())

    def drivers(self) -> dict[ScenarioId, DriverVector]:
        return {s: mean_drivers(self.scenario_series(s)) for s in ScenarioId}

    def energy_j(self) -> dict[ScenarioId, float]:
        cadence = self.runs["baseline"].config.cadence_us
        return {s: energy_joules(self.series[(s, SOURCES[s][1])], cadence) for s in ATTACKS} | {
            ScenarioId.BASELINE: energy_joules(self.series[(ScenarioId.BASELINE, "compromised")], cadence)}


def run_suite(base: ScenarioConfig | None = None, seed: int | None = None,
              params: ResourceModelParams | None = None) -> SuiteResult:
    cfgs = suite_configs(base, seed)
    if params is None:
        params = resolve_params(cfgs["baseline"].params)
    runs = {}
    for name, cfg in cfgs.items():
        log.info("running %s", name)
        runs[name] = run_scenario(cfg)
    series = {}
    for node in BASELINE_NODES:
        series[(ScenarioId.BASELINE, node)] = runs["baseline"].samples(node, params)
    for scen, (run, node) in SOURCES.items():
        series[(scen, node)] = runs[run].samples(node, params)
    return SuiteResult(runs, series, params)


def drivers_csv(drivers: dict[ScenarioId, DriverVector]) -> str:
    lines = ["scenario," + ",".join(DRIVERS)]
    for s in ScenarioId:
        lines.append(s.value + "," + ",".join(repr(float(v)) for v in drivers[s].as_tuple()))
    return "\n".join(lines) + "\n"


def read_drivers_csv(text: str) -> dict[ScenarioId, DriverVector]:
    lines = text.strip().splitlines()
    if lines[0].split(",") != ["scenario", *DRIVERS]:
        raise ValueError("not a drivers.csv")
    out = {}
    for line in lines[1:]:
        name, *vals = line.split(",")
        out[ScenarioId(name)] = DriverVector(*map(float, vals))
    return out


def write_suite(result: SuiteResult, out: str | Path, traces: bool = True) -> DeltaTable:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for (scen, node), series in result.series.items():
        write_samples_csv(series, out / f"samples_{scen.value}_{node}.csv")
    if traces:
        write_trace(result.runs["baseline"].trace("victim"), out / "trace_baseline.pcap")
        for scen, (run, node) in SOURCES.items():
            write_trace(result.runs[run].trace(node), out / f"trace_{scen.value}.pcap")
    table = result.table()
    (out / "report.csv").write_text(report_csv(table, PAPER_TARGETS, result.energy_j()))
    (out / "checks.txt").write_text(checks_text(ordering_checks(table)))
    (out / "drivers.csv").write_text(drivers_csv(result.drivers()))
    return table

