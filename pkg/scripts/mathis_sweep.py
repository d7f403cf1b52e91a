"""Single unpaced TCP stream on a lossy, uncongested link vs. the Mathis estimate."""

import argparse
import math

from mirai_sim.config import FloodConfig, ScenarioConfig
from mirai_sim.flood import default_srtt
from mirai_sim.net import Proto
from mirai_sim.scenario import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=float, default=5.0)
    ap.add_argument("--bandwidth-mbps", type=float, default=10_000)
    args = ap.parse_args()

    print("      p   measured Mbps   estimate Mbps   ratio")
    for p in (0.001, 0.003, 0.01, 0.03, 0.05):
        fl = FloodConfig(Proto.TCP, rate=0, streams=1, duration=args.seconds)
        cfg = ScenarioConfig(flood=fl, horizon=args.seconds, bandwidth_mbps=args.bandwidth_mbps, loss=p, seed=1,
                             capture=())
        r = run_scenario(cfg)
        got = r.delivered("victim", Proto.TCP) * 1200 * 8 / args.seconds
        srtt = default_srtt(cfg.latency_us, 1200, cfg.bandwidth_bps)
        est = 1200 * 8 / (srtt / 1e6) * math.sqrt(3 / (2 * p))
        print(f"{p:7.3f}  {got / 1e6:14.1f}  {est / 1e6:14.1f}  {got / est:6.3f}")


if __name__ == "__main__":
    main()
