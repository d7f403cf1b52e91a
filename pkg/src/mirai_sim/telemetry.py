"""Per-node resource surrogate, 100 ms sampler, overhead normalization, CSV output.

The device physics is replaced by a clamped linear model over four traffic
drivers. Activity is accumulated into 1 ms bins; a sample at time ``t``
summarizes the bins of the trailing window ``[t - cadence, t)``. Power is
the mean of 1 kHz sub-samples (one model evaluation per 1 ms bin).
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import SeriesLengthMismatch

METRICS = ("cpu_pct", "mem_pct", "power_w", "sd_read_kbps", "sd_write_kbps")
PCT_METRICS = frozenset({"cpu_pct", "mem_pct"})
DRIVERS = ("tx_pps", "rx_pps", "tcp_state_count", "log_rate")
CSV_COLUMNS = ("t_ms", "cpu_pct", "mem_pct", "power_w", "sd_read_kbps", "sd_write_kbps", "eth_rx_kbps",
               "eth_tx_kbps")
BIN_US = 1000
POWER_SUBSAMPLE_HZ = 1000

# Idle Raspberry Pi 3 placeholders; only relative changes are meaningful.
DEFAULT_BASE = {
    "cpu_pct": 6.5,
    "mem_pct": 21.0,
    "power_w": 1.9,
    "sd_read_kbps": 80.0,
    "sd_write_kbps": 48.0,
}


@dataclass(frozen=True)
class DriverVector:
    tx_pps: float = 0.0
    rx_pps: float = 0.0
    tcp_state_count: float = 0.0
    log_rate: float = 0.0  # Kbps

    def __post_init__(self):
        if min(self.tx_pps, self.rx_pps, self.tcp_state_count, self.log_rate) < 0:
            raise ValueError("driver components must be non-negative")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.tx_pps, self.rx_pps, self.tcp_state_count, self.log_rate)


@dataclass(frozen=True)
class MetricParams:
    base: float
    c_tx: float = 0.0
    c_rx: float = 0.0
    c_conn: float = 0.0
    c_log: float = 0.0

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return (self.c_tx, self.c_rx, self.c_conn, self.c_log)


@dataclass
class ResourceModelParams:
    metrics: dict[str, MetricParams] = field(default_factory=dict)
    pct_range: tuple[float, float] = (0.0, 100.0)

    def __post_init__(self):
        missing = set(METRICS) - set(self.metrics)
        if missing:
            raise ValueError(f"missing metric params: {sorted(missing)}")
        for m in PCT_METRICS:
            if not 0 <= self.metrics[m].base <= 100:
                raise ValueError(f"{m} base must be within [0, 100]")
        if self.metrics["power_w"].base <= 0:
            raise ValueError("power base must be positive")

    @classmethod
    def baseline_only(cls, base: dict[str, float] | None = None) -> "ResourceModelParams":
        base = {**DEFAULT_BASE, **(base or {})}
        return cls({m: MetricParams(base[m]) for m in METRICS})

    def bases(self) -> dict[str, float]:
        return {m: p.base for m, p in self.metrics.items()}

    def to_json(self) -> str:
        return json.dumps({m: asdict(self.metrics[m]) for m in METRICS}, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResourceModelParams":
        raw = json.loads(text)
        return cls({m: MetricParams(**raw[m]) for m in METRICS})

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ResourceModelParams":
        return cls.from_json(Path(path).read_text())


def _clamp(metric: str, value, pct_range=(0.0, 100.0)):
    if metric in PCT_METRICS:
        return np.clip(value, *pct_range) if isinstance(value, np.ndarray) else min(max(value, pct_range[0]),
                                                                                     pct_range[1])
    return np.maximum(value, 0.0) if isinstance(value, np.ndarray) else max(value, 0.0)


def metric_eval(params: ResourceModelParams, metric: str, drivers: DriverVector):
    p = params.metrics[metric]
    value = (p.base + p.c_tx * drivers.tx_pps + p.c_rx * drivers.rx_pps + p.c_conn * drivers.tcp_state_count
             + p.c_log * drivers.log_rate)
    return _clamp(metric, value, params.pct_range)


def metric_eval_array(params: ResourceModelParams, metric: str, tx, rx, conn, log) -> np.ndarray:
    """Vectorized :func:`metric_eval` over aligned driver arrays."""
    p = params.metrics[metric]
    value = p.base + p.c_tx * tx + p.c_rx * rx + p.c_conn * conn + p.c_log * log
    return _clamp(metric, np.asarray(value, dtype=float), params.pct_range)


# ---------------------------------------------------------------------------
# activity bins

@dataclass
class NodeBins:
    """1 ms activity histograms for one node (index k covers [k ms, k+1 ms))."""

    tx_pkts: np.ndarray
    rx_pkts: np.ndarray
    tx_bytes: np.ndarray
    rx_bytes: np.ndarray
    log_bytes: np.ndarray
    conn: np.ndarray  # live TCP connections at the start of each bin

    @classmethod
    def empty(cls, n_bins: int) -> "NodeBins":
        z = np.zeros(n_bins)
        return cls(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    @property
    def n_bins(self) -> int:
        return len(self.tx_pkts)

    def window(self, t_us: int, cadence_us: int) -> slice:
        if t_us % BIN_US or cadence_us % BIN_US:
            raise ValueError("sample times and cadence must be whole milliseconds")
        lo, hi = (t_us - cadence_us) // BIN_US, t_us // BIN_US
        if lo < 0 or hi > self.n_bins:
            raise ValueError(f"window [{lo}, {hi}) ms outside recorded range")
        return slice(lo, hi)

    def drivers(self, t_us: int, cadence_us: int) -> DriverVector:
        w = self.window(t_us, cadence_us)
        secs = cadence_us / 1e6
        return DriverVector(
            float(self.tx_pkts[w].sum()) / secs,
            float(self.rx_pkts[w].sum()) / secs,
            float(self.conn[w].mean()),
            float(self.log_bytes[w].sum()) * 8 / 1000 / secs,
        )


def bin_drivers(bins: NodeBins, w: slice) -> tuple[np.ndarray, ...]:
    """Per-1 ms driver arrays (rates in per-second units) for a bin slice."""
    per_s = 1e6 / BIN_US
    return (bins.tx_pkts[w] * per_s, bins.rx_pkts[w] * per_s, bins.conn[w], bins.log_bytes[w] * 8 / 1000 * per_s)


# ---------------------------------------------------------------------------
# samples

@dataclass(frozen=True)
class ResourceSample:
    t: int  # microseconds
    cpu_pct: float
    mem_pct: float
    power_w: float
    sd_read_kbps: float
    sd_write_kbps: float
    eth_rx_kbps: float
    eth_tx_kbps: float
    power_subsamples: int = 0
    drivers: DriverVector = DriverVector()

    def metric(self, name: str) -> float:
        return getattr(self, name)


def sample_node(bins: NodeBins, t: int, cadence: int, params: ResourceModelParams,
                harness: dict[str, float] | None = None) -> ResourceSample:
    """Evaluate the trailing window ending at ``t`` (both in microseconds).

    ``harness`` adds the measurement script's own cost per metric.
    """
    w = bins.window(t, cadence)
    drv = bins.drivers(t, cadence)
    h = harness or {}
    secs = cadence / 1e6
    values = {}
    for m in METRICS:
        if m == "power_w":
            sub = metric_eval_array(params, m, *bin_drivers(bins, w))
            v = float(sub.mean()) + h.get(m, 0.0)
        else:
            v = float(metric_eval(params, m, drv)) + h.get(m, 0.0)
        values[m] = float(_clamp(m, v, params.pct_range))
    return ResourceSample(
        t, values["cpu_pct"], values["mem_pct"], values["power_w"], values["sd_read_kbps"], values["sd_write_kbps"],
        float(bins.rx_bytes[w].sum()) * 8 / 1000 / secs, float(bins.tx_bytes[w].sum()) * 8 / 1000 / secs,
        w.stop - w.start, drv,
    )


def sample_series(bins: NodeBins, ticks: Sequence[int], cadence: int, params: ResourceModelParams,
                  harness: dict[str, float] | None = None) -> list[ResourceSample]:
    return [sample_node(bins, t, cadence, params, harness) for t in ticks]


def harness_cost(params: ResourceModelParams, fraction: float) -> dict[str, float]:
    """Cost of the sampling script itself, as a fraction of each idle baseline."""
    return {m: fraction * params.metrics[m].base for m in METRICS}


def harness_series(ticks: Sequence[int], cost: dict[str, float]) -> list[ResourceSample]:
    """What a harness-only recording contributes on top of the idle device."""
    return [ResourceSample(t, cost["cpu_pct"], cost["mem_pct"], cost["power_w"], cost["sd_read_kbps"],
                           cost["sd_write_kbps"], 0.0, 0.0) for t in ticks]


VALUE_FIELDS = ("cpu_pct", "mem_pct", "power_w", "sd_read_kbps", "sd_write_kbps", "eth_rx_kbps", "eth_tx_kbps")


def normalize_series(raw: Sequence[ResourceSample], overhead: Sequence[ResourceSample]) -> list[ResourceSample]:
    """Subtract the overhead recording's per-metric means, flooring at zero."""
    if len(raw) != len(overhead):
        raise SeriesLengthMismatch(f"{len(raw)} raw samples vs {len(overhead)} overhead samples")
    if any(a.t != b.t for a, b in zip(raw, overhead)):
        raise SeriesLengthMismatch("raw and overhead timestamps are not aligned")
    if not raw:
        return []
    means = {f: sum(getattr(s, f) for s in overhead) / len(overhead) for f in VALUE_FIELDS}
    out = []
    for s in raw:
        vals = {f: max(getattr(s, f) - means[f], 0.0) for f in VALUE_FIELDS}
        out.append(ResourceSample(s.t, **vals, power_subsamples=s.power_subsamples, drivers=s.drivers))
    return out


def energy_joules(series: Sequence[ResourceSample], cadence: int) -> float:
    return sum(s.power_w for s in series) * cadence / 1e6


def series_array(series: Sequence[ResourceSample], name: str) -> np.ndarray:
    return np.array([getattr(s, name) for s in series], dtype=float)


def mean_drivers(series: Sequence[ResourceSample]) -> DriverVector:
    if not series:
        return DriverVector()
    n = len(series)
    return DriverVector(*(sum(getattr(s.drivers, d) for s in series) / n for d in DRIVERS))


def samples_csv(series: Iterable[ResourceSample]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for s in series:
        row = [s.t / 1000] + [getattr(s, f) for f in VALUE_FIELDS]
        buf.write(",".join(f"{v:.3f}" for v in row) + "\n")
    return buf.getvalue()


def write_samples_csv(series: Iterable[ResourceSample], path: str | Path) -> int:
    data = samples_csv(series).encode()
    Path(path).write_bytes(data)
    return len(data)


def read_samples_csv(path: str | Path) -> list[dict[str, float]]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected header {header}")
    return [dict(zip(header, map(float, line.split(",")))) for line in lines[1:]]

