#!/usr/bin/env python3
"""Multi-seed decay diagnostic: do the restart-norm columns stay bounded?

Runs the zero-initial-data flow for several noise seeds, computes the
decay-report columns (gauge-invariant connection norm to the power gamma,
and the L^r norm of the scalar remainder) on each trajectory, and prints
the peak of the max column per seed together with its value at an early
reference time.  The production question is whether the peak stays within
a small factor of the early value over long horizons.

The default is a quick demonstration; pass --full for the production size
(M = 64, N = 16, T = 2, dt = 2e-4; several minutes per seed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ahlab.cli import run
from ahlab.io import read_csv


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/decay_study", help="output directory")
    ap.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated noise seeds")
    ap.add_argument("--reference-time", type=float, default=None,
                    help="early reference time (default: an eighth of the horizon)")
    ap.add_argument("--full", action="store_true",
                    help="production size: M=64 N=16 T=2 dt=2e-4")
    args = ap.parse_args()
    out = Path(args.out)
    seeds = [int(s) for s in args.seeds.split(",")]

    if args.full:
        size = ["--M", "64", "--N", "16", "--T", "2", "--dt", "2e-4"]
        horizon = 2.0
    else:
        size = ["--M", "16", "--N", "4", "--T", "0.25", "--dt", "1e-3"]
        horizon = 0.25
    t_ref = args.reference_time if args.reference_time is not None else horizon / 8.0

    print(f"seed   max column at t >= {t_ref:g}   value near t = {t_ref:g}   ratio")
    worst = 0.0
    for seed in seeds:
        dest = out / f"seed{seed}"
        rc = run(["decay-report", *size, "--seed", str(seed), "--out", str(dest)])
        if rc != 0:
            return rc
        _, rows = read_csv(dest / "decay_report.csv")
        data = [(float(r[0]), float(r[3])) for r in rows]
        ref = min((abs(t - t_ref), v) for t, v in data)[1]
        peak = max(v for t, v in data if t >= t_ref)
        ratio = peak / ref if ref > 0 else float("inf")
        worst = max(worst, ratio)
        print(f"  {seed:3d}   {peak:.6e}            {ref:.6e}     {ratio:6.2f}x")
        manifest = json.loads((dest / "manifest.json").read_text())
        flagged = manifest["results"]["flagged_windows"]
        if flagged:
            print(f"        flagged windows: {flagged}")
    print(f"\nworst peak-to-reference ratio over {len(seeds)} seeds: {worst:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
