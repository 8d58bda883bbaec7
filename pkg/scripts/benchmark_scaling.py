#!/usr/bin/env python3
"""Step-time benchmark across population sizes for both individual variants.

Prints total and per-agent step time at each N, mirroring the efficiency
trade-off analysis: per-agent cost falls with scale until vectorization
saturates.

Usage:
    python scripts/benchmark_scaling.py [--sizes 10,100,1000,10000] [--steps 20]
"""

import argparse
import dataclasses
import time

from econsim.core import config_replace
from econsim.scenario import EpisodeRunner, load_preset


def bench(spec, n, steps, seed=0):
    cfg = config_replace(spec.economy, "population.size", n)
    cfg = config_replace(cfg, "termination.horizon", 100_000)
    runner = EpisodeRunner(dataclasses.replace(spec, economy=cfg), seed)
    for _ in range(3):
        runner.step()
    total = 0.0
    done_steps = 0
    while done_steps < steps:
        t0 = time.perf_counter()
        result = runner.step()
        total += time.perf_counter() - t0
        done_steps += 1
        if result.done:
            seed += 1
            runner = EpisodeRunner(dataclasses.replace(spec, economy=cfg), seed)
    return total / steps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="10,100,1000,10000")
    ap.add_argument("--steps", type=int, default=20)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    scenarios = {
        "olg": load_preset("aging-pension"),
        "ramsey": load_preset("optimal-tax"),
    }
    print(f"{'model':>8} {'N':>8} {'step (ms)':>11} {'per agent (us)':>15}")
    for name, spec in scenarios.items():
        for n in sizes:
            dt = bench(spec, n, args.steps)
            print(f"{name:>8} {n:>8} {dt * 1e3:>11.3f} {dt / n * 1e6:>15.3f}")


if __name__ == "__main__":
    main()
