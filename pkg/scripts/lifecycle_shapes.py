#!/usr/bin/env python3
"""Age profiles of consumption and labor at scale, plus distribution distances.

Runs the aging scenario at a chosen population size, bins consumption and
hours by 10-year age groups mid-run, and (optionally) computes the transport
distance of income/wealth against a reference CSV sample (one value per row).

Usage:
    python scripts/lifecycle_shapes.py [--size 10000] [--steps 12]
                                       [--income-ref ref.csv] [--wealth-ref ref.csv]
"""

import argparse
import dataclasses

import numpy as np

from econsim.core import config_replace
from econsim.metrics import load_reference_distribution, wasserstein_1d
from econsim.scenario import EpisodeRunner, load_preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=10_000)
    ap.add_argument("--steps", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--income-ref", default=None)
    ap.add_argument("--wealth-ref", default=None)
    args = ap.parse_args()

    spec = load_preset("aging-pension")
    cfg = config_replace(spec.economy, "population.size", args.size)
    spec = dataclasses.replace(spec, economy=cfg)
    runner = EpisodeRunner(spec, args.seed)
    for _ in range(args.steps):
        result = runner.step()

    ages = result.agents["age"]
    cons = result.agents["consumption"]
    hours = result.agents["hours"]
    print(f"t={args.steps - 1}, N={ages.size}")
    print(f"{'age bin':>8} {'count':>7} {'mean consumption':>17} {'mean hours':>11}")
    for b in range(0, 110, 10):
        mask = (ages >= b) & (ages < b + 10)
        if mask.sum() == 0:
            continue
        print(f"{b:>5}-{b + 9:<3}{int(mask.sum()):>6} {cons[mask].mean():>17.1f} "
              f"{hours[mask].mean():>11.1f}")

    pop = runner.env.pop
    if args.income_ref:
        ref = load_reference_distribution(args.income_ref)
        print(f"income transport distance vs reference: "
              f"{wasserstein_1d(np.maximum(pop.last_income, 0), ref):.4g}")
    if args.wealth_ref:
        ref = load_reference_distribution(args.wealth_ref)
        print(f"wealth transport distance vs reference: "
              f"{wasserstein_1d(np.maximum(pop.wealth, 0), ref):.4g}")


if __name__ == "__main__":
    main()
