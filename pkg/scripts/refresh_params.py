"""Refit the bundled model parameters from fresh simulated drivers.

Driver vectors do not depend on the resource model, so one suite run with
the baseline-only model is enough.
"""

import argparse
import logging
from pathlib import Path

from mirai_sim.analysis import PAPER_TARGETS, DeltaTable, calibrate
from mirai_sim.suite import run_suite
from mirai_sim.telemetry import ResourceModelParams

DEST = Path(__file__).resolve().parents[1] / "src" / "mirai_sim" / "data" / "calibrated_params.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEST)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    result = run_suite(seed=args.seed, params=ResourceModelParams.baseline_only())
    fit = calibrate(DeltaTable.from_targets(PAPER_TARGETS), result.drivers())
    args.out.write_text(fit.params.to_json())
    for (scen, metric), r in sorted(fit.residuals.items(), key=lambda kv: (kv[0][1], kv[0][0].value)):
        print(f"{metric:14s} {scen.value:16s} residual {r:+.2e} pp")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
