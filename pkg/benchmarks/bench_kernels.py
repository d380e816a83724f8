"""Compare the numba and numpy all-pairs BFS kernels.

    python benchmarks/bench_kernels.py [--sizes 64 128 256 512] [--repeats 3]
"""

from __future__ import annotations

import argparse

from forgiving.bench import kernel_timings, simulation_rate


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="all-pairs BFS kernel timings")
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    print(f"{'n':>6} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for t in kernel_timings(args.sizes, args.repeats):
        nb = f"{t.numba_s * 1e3:10.2f}" if t.numba_s is not None else f"{'n/a':>10}"
        sp = f"{t.speedup:8.1f}" if t.speedup is not None else f"{'-':>8}"
        print(f"{t.n:6d} {nb} {t.numpy_s * 1e3:10.2f} {sp}")
    print(f"simulation: {simulation_rate():.0f} steps/s (degree checks only)")


if __name__ == "__main__":
    main()
