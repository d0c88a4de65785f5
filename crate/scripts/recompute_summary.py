#!/usr/bin/env python3
"""Recompute per-strategy means and sample deviations from results.csv and
compare them with summary.json.

Usage: python3 scripts/recompute_summary.py OUT_DIR [TOLERANCE]
Exits 1 if any statistic differs by more than TOLERANCE (default 1e-9).
"""
import csv
import json
import math
import os
import sys
from collections import defaultdict


def stats(values):
    n = len(values)
    mean = sum(values) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return mean, sd


def main(out_dir, tol):
    rows = defaultdict(list)
    with open(os.path.join(out_dir, "results.csv")) as fh:
        for r in csv.DictReader(fh):
            rows[(r["strategy"], int(r["interaction"]))].append(r)
    with open(os.path.join(out_dir, "summary.json")) as fh:
        summary = json.load(fh)
    worst = 0.0
    for agg in summary["aggregates"]:
        key = (agg["strategy"], agg["interaction"])
        for col in ("congestion", "per_unit_tt", "efficiency_ratio"):
            mean, sd = stats([float(r[col]) for r in rows[key]])
            for name, mine, theirs in (("mean", mean, agg[col]["mean"]), ("sd", sd, agg[col]["sd"])):
                err = abs(mine - theirs) / max(1.0, abs(mine))
                worst = max(worst, err)
                if err > tol:
                    print(f"{key} {col} {name}: csv {mine!r} vs json {theirs!r}")
    print(f"checked {len(summary['aggregates'])} aggregates, worst relative error {worst:.3e}")
    return 0 if worst <= tol else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], float(sys.argv[2]) if len(sys.argv) > 2 else 1e-9))
