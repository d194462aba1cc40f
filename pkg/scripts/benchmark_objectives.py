#!/usr/bin/env python3
"""
Timing harness for the dispersion objectives: value + gradient cost as the class count grows
"""
import argparse
import sys
import time
from pathlib import Path
sys.path.append(str(Path(__file__).parent.parent))

import numpy as np
import pandas as pd

from services.objectives.dispersion import OBJECTIVES


def time_objective(name: str, n: int, d: int, repeats: int, seed: int = 0) -> float:
    """Median wall time (ms) of one objective + gradient evaluation"""
    features = np.random.default_rng(seed).standard_normal((n, d))
    objective = OBJECTIVES[name]
    objective(features)

    timings = []
    for _ in range(repeats):
        start_time = time.perf_counter()
        objective(features)
        timings.append((time.perf_counter() - start_time) * 1000)
    return float(np.median(timings))


def main():
    parser = argparse.ArgumentParser(description="Dispersion objective timing")
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 100, 200, 500, 1000])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--output", help="Optional CSV path for the timing table")
    args = parser.parse_args()

    rows = []
    for n in args.sizes:
        for name in OBJECTIVES:
            ms = time_objective(name, n, args.dim, args.repeats)
            rows.append({"objective": name, "n": n, "d": args.dim, "median_ms": ms})
            print(f"⏱️  {name:18s} N={n:5d}  {ms:9.3f} ms")

    table = pd.DataFrame(rows)
    if args.output:
        table.to_csv(args.output, index=False, float_format="%.6f")
        print(f"✅ Timing table written to {args.output}")


if __name__ == "__main__":
    main()
