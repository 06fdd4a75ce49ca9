#!/usr/bin/env python3
"""Regenerates data/behavior.csv: synthetic evening-meal carbohydrates and
overnight fasting durations drawn from a fixed logit-normal model."""
import argparse

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=500)
    ap.add_argument("--seed", type=int, default=20181)
    ap.add_argument("--out", default="data/behavior.csv")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    lower = np.array([2.0, 5.2])
    upper = np.array([220.0, 15.0])
    mu = np.array([-0.8, 0.2])
    sd = np.array([0.6, 0.6])
    corr = -0.2
    cov = np.array([[sd[0] ** 2, corr * sd[0] * sd[1]],
                    [corr * sd[0] * sd[1], sd[1] ** 2]])
    z = rng.multivariate_normal(mu, cov, size=args.rows)
    y = lower + (upper - lower) / (1.0 + np.exp(-z))

    with open(args.out, "w", encoding="utf-8") as f:
        f.write("carbs_g,fast_hours\n")
        for carbs, fast in y:
            f.write(f"{carbs:.1f},{fast:.2f}\n")


if __name__ == "__main__":
    main()
