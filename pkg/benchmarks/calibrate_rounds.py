"""Estimate the round constant C in rounds <= C (1 + ceil log2 d)(1 + ceil log2 n).

    python benchmarks/calibrate_rounds.py [--seeds 5]
"""

from __future__ import annotations

import argparse

from forgiving.bench import calibrate_rounds
from forgiving.netsim import ROUND_CONST


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="calibrate the round constant")
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args(argv)
    cal = calibrate_rounds(seeds=args.seeds)
    ds = sorted({d for d, _ in cal.grid})
    ns = sorted({n for _, n in cal.grid})
    print("d \\ n  " + " ".join(f"{n:5d}" for n in ns))
    for d in ds:
        cells = [f"{cal.grid[d, n]:5.2f}" if (d, n) in cal.grid else "    -" for n in ns]
        print(f"{d:5d}  " + " ".join(cells))
    print("traces, worst by d: " + " ".join(f"{d}:{c:.2f}" for d, c in sorted(cal.by_degree.items())))
    print(f"worst {cal.worst:.3f}, frozen C = {ROUND_CONST}")


if __name__ == "__main__":
    main()
