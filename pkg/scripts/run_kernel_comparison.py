#!/usr/bin/env python3
"""Three-backend comparison of the covariant heat kernel.

Evaluates one kernel query through the closed-form constant-connection
oracle, the spectral PDE evolution, and (optionally) the stochastic
path-integral backend, and prints the pairwise agreements.  The first two
must agree to discretization accuracy; the stochastic estimate comes with
its own standard error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ahlab.cli import run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/kernel_comparison", help="output directory")
    ap.add_argument("--M", default="64", help="grid resolution")
    ap.add_argument("--b", default="0.5,-0.25", help="constant connection vector")
    ap.add_argument("--t", default="0.25", help="target time")
    ap.add_argument("--x", default="16,16", help="target point (grid indices)")
    ap.add_argument("--paths", default="20000", help="stochastic paths (0 = skip)")
    ap.add_argument("--seed", default="0", help="stochastic seed")
    args = ap.parse_args()
    out = Path(args.out)

    rc = run(["kernel", "--M", args.M, "--b", args.b, "--t", args.t, "--x", args.x,
              "--paths", args.paths, "--seed", args.seed, "--out", str(out)])
    if rc != 0:
        return rc
    results = json.loads((out / "manifest.json").read_text())["results"]
    print(f"\n|pde - constant| = {results['pde_vs_constant']:.3e}")
    if "fki_vs_constant" in results:
        print(f"|fki - constant| = {results['fki_vs_constant']:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
