"""Command-line entry point: run, suite, calibrate, check, trace-export."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import (ATTACKS, PAPER_TARGETS, DeltaTable, ScenarioId, calibrate, checks_text, ordering_checks,
                       parse_targets, read_report)
from .config import PRESETS, load_config, preset_config
from .errors import SimError
from .pcap import write_trace
from .scenario import resolve_params, run_scenario
from .suite import read_drivers_csv, run_suite, write_suite
from .telemetry import ResourceModelParams, write_samples_csv

log = logging.getLogger("mirai_sim")


def _config(args):
    if args.config and args.preset:
        raise SystemExit("--config and --preset are mutually exclusive")
    if args.config:
        cfg = load_config(args.config)
        name = Path(args.config).stem
    else:
        name = args.preset or "paper-udp"
        cfg = preset_config(name)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "params", None):
        cfg = replace(cfg, params=args.params)
    return cfg, name


def store_run(result, path: Path) -> None:
    arrays = {f"trace_{label}": result.trace(label) for label in result.nodes}
    np.savez(path, config=np.array(result.config.to_text()), **arrays)


def cmd_run(args) -> int:
    cfg, name = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(cfg)
    params = resolve_params(cfg.params)
    for label in result.nodes:
        write_samples_csv(result.samples(label, params), out / f"samples_{name}_{label}.csv")
        write_trace(result.trace(label), out / f"trace_{name}_{label}.pcap")
    store_run(result, out / f"run_{name}.npz")
    print(f"{name}: {result.events} events, {result.infected_count()} infected nodes, outputs in {out}")
    return 0


def cmd_suite(args) -> int:
    base, _ = _config(args)
    params = resolve_params(base.params)
    result = run_suite(base, params=params)
    table = write_suite(result, args.out, traces=not args.no_traces)
    failed = [r for r in ordering_checks(table) if not r.passed]
    print(f"suite written to {args.out}; {len(failed)} ordering relation(s) fail")
    return 0


def cmd_calibrate(args) -> int:
    targets = PAPER_TARGETS if not args.targets else parse_targets(Path(args.targets).read_text())
    if args.drivers:
        drivers = read_drivers_csv(Path(args.drivers).read_text())
    else:
        base, _ = _config(args)
        drivers = run_suite(base, params=ResourceModelParams.baseline_only()).drivers()
    fit = calibrate(DeltaTable.from_targets(targets), {s: drivers[s] for s in ATTACKS if s in drivers})
    Path(args.out).write_text(fit.params.to_json())
    for (scen, metric), r in sorted(fit.residuals.items(), key=lambda kv: (kv[0][1], kv[0][0].value)):
        print(f"{metric:14s} {scen.value:16s} fit {fit.predicted[(scen, metric)]:+8.3f}  residual {r:+.2e} pp")
    print(f"max |residual| {fit.max_residual():.2e} pp; parameters written to {args.out}")
    return 0


def cmd_check(args) -> int:
    if args.report:
        path = Path(args.report)
        table = read_report((path / "report.csv" if path.is_dir() else path).read_text())
    elif args.paper:
        table = DeltaTable.from_targets(PAPER_TARGETS)
    else:
        base, _ = _config(args)
        table = run_suite(base, params=resolve_params(base.params)).table()
    results = ordering_checks(table)
    sys.stdout.write(checks_text(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_trace_export(args) -> int:
    with np.load(args.run) as data:
        labels = [k[len("trace_"):] for k in data.files if k.startswith("trace_")]
        if args.node not in labels:
            raise SystemExit(f"node {args.node!r} not in stored run (have: {', '.join(labels)})")
        n = write_trace(data[f"trace_{args.node}"], args.out)
    print(f"wrote {n} bytes to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mirai-sim", description="Botnet flood testbed simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_flags(sp, out_default="out"):
        sp.add_argument("--config", help="scenario INI file")
        sp.add_argument("--preset", choices=PRESETS)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--params", help="model parameter JSON, or 'calibrated'")
        sp.add_argument("--out", default=out_default)

    sp = sub.add_parser("run", help="simulate one scenario")
    scenario_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("suite", help="run the five-scenario experiment")
    scenario_flags(sp)
    sp.add_argument("--no-traces", action="store_true", help="skip pcap output")
    sp.set_defaults(func=cmd_suite)

    sp = sub.add_parser("calibrate", help="fit model parameters to a target delta table")
    scenario_flags(sp, out_default="calibrated_params.json")
    sp.add_argument("--targets", help="CSV: metric,<scenario>... (default: built-in targets)")
    sp.add_argument("--drivers", help="drivers.csv from a previous suite (skips simulation)")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("check", help="evaluate the ordering relations")
    scenario_flags(sp)
    sp.add_argument("--report", help="report.csv (or a suite output directory)")
    sp.add_argument("--paper", action="store_true", help="check the built-in target table")
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("trace-export", help="write a pcap from a stored run")
    sp.add_argument("--run", required=True, help="run_<name>.npz written by 'run'")
    sp.add_argument("--node", default="victim")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_trace_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except SimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
