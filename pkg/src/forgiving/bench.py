"""Timing of the distance kernels and calibration of the round constant."""

from __future__ import annotations

import random
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .adversary import max_degree_attack, random_connected_graph, random_trace, star_attack
from .graph import ForgivingGraph
from .metrics import to_csr
from .netsim import RecoveryStats, clog2
from .runner import run_trace


@dataclass
class KernelTiming:
    n: int
    numba_s: float | None
    numpy_s: float

    @property
    def speedup(self) -> float | None:
        return None if self.numba_s is None else self.numpy_s / self.numba_s


def _best(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def kernel_timings(sizes=(64, 128, 256, 512), repeats: int = 3, seed: int = 0) -> list[KernelTiming]:
    """Best-of-``repeats`` all-pairs BFS time for both kernels on random sparse graphs."""
    rng = random.Random(seed)
    out = []
    have_numba = _kernels._apsp_numba is not None
    if have_numba:
        _kernels.apsp_numba(np.zeros(2, dtype=np.int64), np.zeros(0, dtype=np.int64), 1)  # compile
    for n in sizes:
        adj: dict[int, set] = {v: set() for v in range(n)}
        for a, b in random_connected_graph(n, rng, extra=n):
            adj[a].add(b)
            adj[b].add(a)
        _, _, indptr, indices = to_csr(adj)
        t_np = _best(lambda: _kernels.apsp_numpy(indptr, indices, n), repeats)
        t_nb = _best(lambda: _kernels.apsp_numba(indptr, indices, n), repeats) if have_numba else None
        if have_numba:
            assert np.array_equal(_kernels.apsp_numpy(indptr, indices, n), _kernels.apsp_numba(indptr, indices, n))
        out.append(KernelTiming(n, t_nb, t_np))
    return out


def normalised_rounds(stats: RecoveryStats) -> float:
    return stats.rounds / ((1 + clog2(max(stats.degree_d, 1))) * (1 + clog2(stats.n_gprime)))


def _hub_case(d: int, n: int, seed: int) -> float:
    # a hub of degree d among reconstruction trees left by earlier deletions
    rng = random.Random(seed)
    edges = set(random_connected_graph(n - 1, rng, extra=n // 4))
    hub = n - 1
    for x in rng.sample(range(n - 1), d):
        edges.add((x, hub))
    fg = ForgivingGraph.from_edges(sorted(edges))
    others = list(range(n - 1))
    rng.shuffle(others)
    worst = 0.0
    for v in others[: n // 4]:
        worst = max(worst, normalised_rounds(fg.delete_fix(v)))
    return max(worst, normalised_rounds(fg.delete_fix(hub)))


@dataclass
class Calibration:
    grid: dict[tuple[int, int], float]
    by_degree: dict[int, float]
    worst: float


def calibrate_rounds(
    ds=(2, 4, 8, 16, 32, 64), ns=(8, 16, 32, 64, 128, 256, 512), seeds: int = 5
) -> Calibration:
    """Largest rounds / ((1 + log d)(1 + log n)) over the sweep.

    The grid deletes a degree-d hub from an n-node graph after a warm-up that
    removes a quarter of the other nodes.  Stars, random traces and
    max-degree traces (seeds from 1000 up) are added on top.
    """
    grid = {}
    for d in ds:
        for n in ns:
            if d < n:
                grid[d, n] = max(_hub_case(d, n, s) for s in range(seeds))
    by_d: dict[int, float] = {}

    def note(stats: RecoveryStats) -> None:
        by_d[stats.degree_d] = max(by_d.get(stats.degree_d, 0.0), normalised_rounds(stats))

    for n in (5, 17, 65, 257):
        for st in run_trace(star_attack(n), check="final", stretch_limit=0).recoveries:
            note(st)
    for s in range(1000, 1000 + 10 * seeds):
        for trace in (random_trace(16, 300, 0.4, s), max_degree_attack(16, 300, s)):
            for st in run_trace(trace, check="final", stretch_limit=0, round_const=float("inf")).recoveries:
                note(st)
    worst = max([*grid.values(), *by_d.values()], default=0.0)
    return Calibration(grid, by_d, worst)


def simulation_rate(traces: int = 5, steps: int = 300) -> float:
    """Trace steps per second with per-step degree checks."""
    total = 0
    t = time.perf_counter()
    for s in range(traces):
        total += len(run_trace(random_trace(16, steps, 0.4, s), stretch_limit=0).reports)
    return total / (time.perf_counter() - t)
