"""Infection curves on a /16 for a few vulnerable fractions.

Prints the time at which 25/50/90/100 % of the vulnerable devices are bots.
"""

import argparse

import numpy as np

from mirai_sim.config import ScenarioConfig, preset_flood
from mirai_sim.scenario import run_scenario


def curve(fraction, size, seed, horizon, probes):
    cfg = ScenarioConfig(flood=preset_flood("paper-udp"), seed=seed, horizon=horizon, address_space="10.0.0.0/16",
                         size=size, vulnerable_fraction=fraction, initial_bots=1, probes_per_tick=probes,
                         compromised=None, victim=None, nodes=(), capture=(), commands=())
    r = run_scenario(cfg)
    times = np.array([t for t, _ in r.sim.infections]) / 1e6
    return times, round(fraction * size)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--horizon", type=float, default=30)
    ap.add_argument("--probes", type=int, default=10, help="probes per 10 ms scanner tick")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    print("fraction  seed  " + "  ".join(f"t{q:>3d}%" for q in (25, 50, 90, 100)))
    for fraction in (0.25, 0.5, 1.0):
        for seed in range(args.seeds):
            times, vulnerable = curve(fraction, args.size, seed, args.horizon, args.probes)
            cells = []
            for q in (25, 50, 90, 100):
                k = max(1, int(np.ceil(q / 100 * vulnerable)))
                cells.append(f"{times[k - 1]:6.2f}" if len(times) >= k else "    --")
            print(f"{fraction:8.2f}  {seed:4d}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
