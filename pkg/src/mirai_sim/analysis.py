"""Scenario aggregates, percentage deltas, model calibration and ordering checks."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptySeries, IncompleteTable, InsufficientScenarios, SingularSystem, ZeroBaseline
from .telemetry import DRIVERS, METRICS, DriverVector, MetricParams, ResourceModelParams

ETH_METRICS = ("eth_rx_kbps", "eth_tx_kbps")


class ScenarioId(Enum):
    BASELINE = "baseline"
    COMPROMISED_TCP = "compromised-tcp"
    COMPROMISED_UDP = "compromised-udp"
    VICTIM_TCP = "victim-tcp"
    VICTIM_UDP = "victim-udp"

    @property
    def role(self) -> str:
        return self.value.split("-")[0]

    @property
    def protocol(self) -> str | None:
        return None if self is ScenarioId.BASELINE else self.value.split("-")[1]


ATTACKS = (ScenarioId.COMPROMISED_TCP, ScenarioId.COMPROMISED_UDP, ScenarioId.VICTIM_TCP, ScenarioId.VICTIM_UDP)
CT, CU, VT, VU = ATTACKS

# published per-scenario deltas (percent vs. the non-infected device)
PAPER_TARGETS: dict[str, dict[ScenarioId, float]] = {
    "mem_pct": {CT: -0.93, VT: -0.2, CU: -1.44, VU: -0.96},
    "cpu_pct": {CT: 10.05, VT: -6.42, CU: 18.77, VU: -1.6},
    "power_w": {CT: 35.87, VT: 37.04, CU: 38.44, VU: 34.61},
    "sd_read_kbps": {CT: 39.22, VT: 64.6, CU: 32.03, VU: 49.38},
    "sd_write_kbps": {CT: 34.68, VT: 55.45, CU: 29.22, VU: 42.98},
}


def delta_pct(scenario_mean: float, baseline_mean: float) -> float:
    if baseline_mean <= 0:
        raise ZeroBaseline(f"baseline mean {baseline_mean} is not positive")
    return 100.0 * (scenario_mean - baseline_mean) / baseline_mean


@dataclass(frozen=True)
class Aggregate:
    mean: float
    stdev: float
    count: int


def aggregate(series: Iterable[float]) -> Aggregate:
    """Mean and population standard deviation."""
    x = np.asarray(list(series), dtype=float)
    if x.size == 0:
        raise EmptySeries("cannot aggregate an empty series")
    mean = float(x.mean())
    return Aggregate(mean, float(np.sqrt(np.mean((x - mean) ** 2))), int(x.size))


@dataclass
class DeltaTable:
    """Signed deltas per (attack scenario, modeled metric), plus aggregates.

    ``stats`` optionally holds per-scenario aggregates for every metric,
    including the Ethernet rates, which are compared in absolute Kbps.
    """

    deltas: dict[tuple[ScenarioId, str], float] = field(default_factory=dict)
    stats: dict[tuple[ScenarioId, str], Aggregate] = field(default_factory=dict)

    def delta(self, scenario: ScenarioId, metric: str) -> float:
        if scenario is ScenarioId.BASELINE:
            return 0.0
        return self.deltas[(scenario, metric)]

    def mean(self, scenario: ScenarioId, metric: str) -> float:
        return self.stats[(scenario, metric)].mean

    def has_ethernet(self) -> bool:
        return all((s, m) in self.stats for s in ScenarioId for m in ETH_METRICS)

    @classmethod
    def from_targets(cls, targets: Mapping[str, Mapping[ScenarioId, float]]) -> "DeltaTable":
        return cls({(s, m): float(v) for m, row in targets.items() for s, v in row.items()})

    @classmethod
    def from_stats(cls, stats: Mapping[tuple[ScenarioId, str], Aggregate]) -> "DeltaTable":
        deltas = {}
        for s in ATTACKS:
            for m in METRICS:
                if (s, m) in stats:
                    deltas[(s, m)] = delta_pct(stats[(s, m)].mean, stats[(ScenarioId.BASELINE, m)].mean)
        return cls(deltas, dict(stats))

    def scaled(self, metric: str, factor: float) -> "DeltaTable":
        """Every mean of ``metric`` multiplied by ``factor`` (deltas unchanged)."""
        stats = {k: Aggregate(a.mean * factor, a.stdev * abs(factor), a.count) if k[1] == metric else a
                 for k, a in self.stats.items()}
        return DeltaTable(dict(self.deltas), stats)


# ---------------------------------------------------------------------------
# calibration

@dataclass
class Calibration:
    params: ResourceModelParams
    predicted: dict[tuple[ScenarioId, str], float]
    residuals: dict[tuple[ScenarioId, str], float]  # predicted - target, percentage points

    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals.values()), default=0.0)


def calibrate(targets: DeltaTable, drivers: Mapping[ScenarioId, DriverVector],
              bases: Mapping[str, float] | None = None,
              base_params: ResourceModelParams | None = None) -> Calibration:
    """Fit per-metric driver coefficients so the model reproduces ``targets``.

    With a zero-driver baseline the modeled delta is linear in the
    coefficients: delta_s = 100 * (c . d_s) / base. Each metric is solved by
    least squares over the supplied attack scenarios (exact when square).
    """
    if base_params is None:
        base_params = ResourceModelParams.baseline_only(dict(bases) if bases else None)
    bases = base_params.bases()
    scenarios = [s for s in ATTACKS if s in drivers]
    if len(scenarios) < len(DRIVERS):
        raise InsufficientScenarios(f"{len(scenarios)} scenarios for {len(DRIVERS)} coefficients per metric")
    D = np.array([drivers[s].as_tuple() for s in scenarios], dtype=float)
    scale = np.abs(D).max(axis=0)
    if np.any(scale == 0):
        raise SingularSystem(f"driver column(s) {[d for d, z in zip(DRIVERS, scale == 0) if z]} are all zero")
    Ds = D / scale
    if np.linalg.matrix_rank(Ds) < len(DRIVERS):
        raise SingularSystem("driver matrix is rank-deficient")
    metrics = {}
    predicted, residuals = {}, {}
    for m in METRICS:
        base = bases[m]
        try:
            t = np.array([targets.delta(s, m) for s in scenarios], dtype=float)
        except KeyError as exc:
            raise IncompleteTable(f"no target for {exc.args[0]}") from exc
        b = t * base / 100.0
        # normal equations on the column-scaled system
        y = np.linalg.solve(Ds.T @ Ds, Ds.T @ b)
        coef = y / scale
        metrics[m] = MetricParams(base, *map(float, coef))
        fit = D @ coef * 100.0 / base
        for s, f, tt in zip(scenarios, fit, t):
            predicted[(s, m)] = float(f)
            residuals[(s, m)] = float(f - tt)
    return Calibration(ResourceModelParams(metrics, base_params.pct_range), predicted, residuals)


# ---------------------------------------------------------------------------
# ordering relations

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _relations(table: DeltaTable) -> list[tuple[str, float, str, float]]:
    """(lhs name, lhs value, op, rhs value) rows; op is '>' '<' or '='."""
    d = table.delta
    rows = []

    def gt(name, a, b):
        rows.append((name, a, ">", b))

    for proto in ("tcp", "udp"):
        c, v = ScenarioId(f"compromised-{proto}"), ScenarioId(f"victim-{proto}")
        gt(f"memory: victim-{proto} > compromised-{proto}", d(v, "mem_pct"), d(c, "mem_pct"))
    for role in ("compromised", "victim"):
        t, u = ScenarioId(f"{role}-tcp"), ScenarioId(f"{role}-udp")
        gt(f"memory: {role}-tcp > {role}-udp", d(t, "mem_pct"), d(u, "mem_pct"))
    for role in ("compromised", "victim"):
        t, u = ScenarioId(f"{role}-tcp"), ScenarioId(f"{role}-udp")
        gt(f"cpu: {role}-udp > {role}-tcp", d(u, "cpu_pct"), d(t, "cpu_pct"))
    for s in (CT, CU):
        gt(f"cpu: {s.value} > baseline", d(s, "cpu_pct"), 0.0)
    for s in (VT, VU):
        rows.append((f"cpu: {s.value} < baseline", d(s, "cpu_pct"), "<", 0.0))
    gt("cpu: compromised-tcp > victim-tcp", d(CT, "cpu_pct"), d(VT, "cpu_pct"))
    gt("cpu: compromised-udp > victim-udp", d(CU, "cpu_pct"), d(VU, "cpu_pct"))
    for s in ATTACKS:
        gt(f"energy: {s.value} > baseline", d(s, "power_w"), 0.0)
    gt("energy: compromised-udp > compromised-tcp", d(CU, "power_w"), d(CT, "power_w"))
    gt("energy: victim-tcp > victim-udp", d(VT, "power_w"), d(VU, "power_w"))
    gt("energy: victim-tcp > compromised-tcp", d(VT, "power_w"), d(CT, "power_w"))
    gt("energy: compromised-udp > victim-udp", d(CU, "power_w"), d(VU, "power_w"))
    for s in ATTACKS:
        gt(f"sd: {s.value} reads > writes", d(s, "sd_read_kbps"), d(s, "sd_write_kbps"))
    for m, label in (("sd_read_kbps", "reads"), ("sd_write_kbps", "writes")):
        gt(f"sd {label}: victim-tcp > compromised-tcp", d(VT, m), d(CT, m))
        gt(f"sd {label}: victim-udp > compromised-udp", d(VU, m), d(CU, m))
        gt(f"sd {label}: compromised-tcp > compromised-udp", d(CT, m), d(CU, m))
        gt(f"sd {label}: victim-tcp > victim-udp", d(VT, m), d(VU, m))
    if table.has_ethernet():
        mean = table.mean
        for m in ETH_METRICS:
            rows.append((f"ethernet: baseline {m} = 0", mean(ScenarioId.BASELINE, m), "=", 0.0))
        gt("ethernet: compromised-tcp tx > victim-tcp tx", mean(CT, "eth_tx_kbps"), mean(VT, "eth_tx_kbps"))
        gt("ethernet: compromised-udp tx > victim-udp tx", mean(CU, "eth_tx_kbps"), mean(VU, "eth_tx_kbps"))
    return rows


def ordering_checks(table: DeltaTable) -> list[CheckResult]:
    """Evaluate every relation independently.

    The Ethernet relations need absolute means and are only evaluated when
    the table carries them.
    """
    missing = [(s.value, m) for s in ATTACKS for m in METRICS if (s, m) not in table.deltas]
    if missing:
        raise IncompleteTable(f"missing cells: {missing[:4]}{'...' if len(missing) > 4 else ''}")
    out = []
    for name, a, op, b in _relations(table):
        ok = {">": a > b, "<": a < b, "=": a == b}[op]
        out.append(CheckResult(name, bool(ok), f"{a:.4g} {op} {b:.4g}"))
    return out


def checks_text(results: Sequence[CheckResult]) -> str:
    lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.detail})" for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} relations hold")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# report

REPORT_COLUMNS = ("scenario", "metric", "mean", "stdev", "delta_pct_or_abs", "target", "residual")


def report_csv(table: DeltaTable, targets: Mapping[str, Mapping[ScenarioId, float]] | None = None,
               energy_j: Mapping[ScenarioId, float] | None = None) -> str:
    """One row per (scenario, metric). Modeled metrics carry the percent
    delta; Ethernet rows carry the absolute mean in Kbps."""
    targets = PAPER_TARGETS if targets is None else targets
    buf = io.StringIO()
    buf.write(",".join(REPORT_COLUMNS) + "\n")

    def num(x):
        return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4f}"

    for s in ScenarioId:
        for m in METRICS + ETH_METRICS:
            agg = table.stats.get((s, m))
            if agg is None:
                continue
            if m in ETH_METRICS:
                value, target = agg.mean, None
            else:
                value = table.delta(s, m)
                target = targets.get(m, {}).get(s) if s is not ScenarioId.BASELINE else 0.0
            resid = None if target is None else value - target
            buf.write(f"{s.value},{m},{num(agg.mean)},{num(agg.stdev)},{num(value)},{num(target)},{num(resid)}\n")
        if energy_j and s in energy_j:
            buf.write(f"{s.value},energy_j,{num(energy_j[s])},,,,\n")
    return buf.getvalue()


def read_report(text: str) -> DeltaTable:
    """Rebuild a table (deltas and means) from ``report.csv`` text."""
    lines = text.strip().splitlines()
    if tuple(lines[0].split(",")) != REPORT_COLUMNS:
        raise ValueError("not a report.csv")
    deltas, stats = {}, {}
    for line in lines[1:]:
        scen, metric, mean, stdev, value, *_ = line.split(",")
        if metric not in METRICS + ETH_METRICS:
            continue
        s = ScenarioId(scen)
        stats[(s, metric)] = Aggregate(float(mean), float(stdev), 0)
        if metric in METRICS and s is not ScenarioId.BASELINE:
            deltas[(s, metric)] = float(value)
    return DeltaTable(deltas, stats)


def targets_csv(targets: Mapping[str, Mapping[ScenarioId, float]]) -> str:
    lines = ["metric," + ",".join(s.value for s in ATTACKS)]
    for m in METRICS:
        lines.append(m + "," + ",".join(f"{targets[m][s]:g}" for s in ATTACKS))
    return "\n".join(lines) + "\n"


def parse_targets(text: str) -> dict[str, dict[ScenarioId, float]]:
    """Inverse of :func:`targets_csv`."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip() and not ln.startswith("#")]
    header = [h.strip() for h in lines[0].split(",")]
    if header[0] != "metric":
        raise ValueError("target table must start with a 'metric' column")
    scen = [ScenarioId(h) for h in header[1:]]
    out: dict[str, dict[ScenarioId, float]] = {}
    for line in lines[1:]:
        cells = [c.strip() for c in line.split(",")]
        if cells[0] not in METRICS:
            raise ValueError(f"unknown metric {cells[0]!r}")
        out[cells[0]] = {s: float(v) for s, v in zip(scen, cells[1:])}
    return out
