"""Run the five-scenario experiment and print simulated vs. target deltas."""

import argparse
import logging
import time

from mirai_sim.analysis import ATTACKS, PAPER_TARGETS, ordering_checks
from mirai_sim.suite import run_suite, write_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/suite")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-traces", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    t0 = time.perf_counter()
    result = run_suite(seed=args.seed)
    elapsed = time.perf_counter() - t0
    table = write_suite(result, args.out, traces=not args.no_traces)

    print(f"{'metric':14s}" + "".join(f"{s.value:>18s}" for s in ATTACKS))
    for m, row in PAPER_TARGETS.items():
        cells = "".join(f"{table.delta(s, m):+9.2f} ({row[s]:+6.2f})" for s in ATTACKS)
        print(f"{m:14s}{cells}")
    failed = [r.name for r in ordering_checks(table) if not r.passed]
    print(f"\nsimulated in {elapsed:.1f} s; {len(failed)} ordering relation(s) fail; outputs in {args.out}")


if __name__ == "__main__":
    main()
