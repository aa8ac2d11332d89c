#!/usr/bin/env python3
"""Growth of the renormalization variance with the noise cutoff.

Tabulates sigma^2(N) over doubling cutoffs via the command-line tool and
fits the per-doubling increment, which approaches log(2) / (4 pi) as the
cutoff grows (the variance is asymptotically logarithmic).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ahlab.cli import run
from ahlab.io import read_csv

ASYMPTOTIC_INCREMENT = np.log(2.0) / (4.0 * np.pi)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/variance_growth", help="output directory")
    ap.add_argument("--N", default="1,2,4,8,16,32,64,128,256,512", help="cutoff list")
    args = ap.parse_args()
    out = Path(args.out)

    rc = run(["wick-table", "--N", args.N, "--out", str(out)])
    if rc != 0:
        return rc
    _, rows = read_csv(out / "wick_table.csv")
    table = [(float(r[0]), float(r[1])) for r in rows]

    print("      N      sigma^2(N)    increment per doubling")
    prev = None
    increments = []
    for n, s2 in table:
        inc = ""
        if prev is not None and n == 2 * prev[0]:
            d = s2 - prev[1]
            increments.append(d)
            inc = f"   {d:.8f}"
        print(f"  {n:7.0f}  {s2:.8f}{inc}")
        prev = (n, s2)
    if increments:
        print(f"\nlast increment: {increments[-1]:.8f}")
        print(f"asymptotic:     {ASYMPTOTIC_INCREMENT:.8f}  (log 2 / 4 pi)")
        print(f"relative gap:   {abs(increments[-1] / ASYMPTOTIC_INCREMENT - 1.0):.2%}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
