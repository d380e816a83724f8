"""Degree and stretch measurements of G against G'.

Degrees and distances are taken on the healed network G (live processors,
edges of the virtual graph mapped onto the processors simulating them) and
on the insert-only graph G', which keeps deleted processors and all their
edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from . import _kernels
from . import haft as haft_mod
from .graph import ForgivingGraph, Ref
from .netsim import RecoveryStats, clog2


@dataclass
class DistanceTable:
    nodes: list
    index: dict
    matrix: np.ndarray

    def dist(self, x: Hashable, y: Hashable) -> float:
        d = self.matrix[self.index[x], self.index[y]]
        return math.inf if d < 0 else int(d)


def to_csr(adj: Mapping[Hashable, set]) -> tuple[list, dict, np.ndarray, np.ndarray]:
    nodes = sorted(adj)
    index = {v: i for i, v in enumerate(nodes)}
    indptr = np.zeros(len(nodes) + 1, dtype=np.int64)
    cols = []
    for i, v in enumerate(nodes):
        nb = sorted(index[w] for w in adj[v] if w in index)
        cols.extend(nb)
        indptr[i + 1] = len(cols)
    return nodes, index, indptr, np.asarray(cols, dtype=np.int64)


def all_pairs_distances(adj: Mapping[Hashable, set]) -> DistanceTable:
    """Exact BFS distances between every pair of vertices of ``adj``."""
    nodes, index, indptr, indices = to_csr(adj)
    return DistanceTable(nodes, index, _kernels.apsp(indptr, indices, len(nodes)))


def lower_bound_beta(alpha: float, n: int) -> float:
    """Stretch any healer with degree factor ``alpha`` must allow on a star of n."""
    if alpha < 3 or n < 3:
        raise ValueError(f"lower bound needs alpha >= 3 and n >= 3, got {alpha}, {n}")
    return 0.5 * math.log2(n - 1) / math.log2(alpha - 1)


@dataclass
class MetricsReport:
    step: int
    n_gprime: int
    degree_ratio_max: float
    stretch_max: float | None
    bound_degree_ok: bool
    bound_stretch_ok: bool | None
    connected: bool
    recovery: RecoveryStats | None = None
    lower_bound_beta: float | None = None
    violations: list[str] = field(default_factory=list)

    def row(self) -> dict:
        rec = self.recovery
        return {
            "step": self.step,
            "n_gprime": self.n_gprime,
            "degree_ratio_max": self.degree_ratio_max,
            "stretch_max": self.stretch_max,
            "messages_total": rec.messages_total if rec else 0,
            "rounds": rec.rounds if rec else 0,
            "violations": list(self.violations),
        }


def _connected(adj: Mapping[int, set]) -> bool:
    if not adj:
        return True
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


def check_theorem(
    fg: ForgivingGraph,
    step: int = 0,
    recovery: RecoveryStats | None = None,
    stretch: bool = True,
    degree_factor: int = 3,
) -> MetricsReport:
    """Measure degree ratio and stretch and compare with the guaranteed bounds.

    Degree: deg_G(v) <= degree_factor * deg_G'(v) for each live v.
    Stretch: dist_G(x, y) <= ceil(log2 n) * dist_G'(x, y), n = |G'|.
    G is read from the incrementally maintained neighbour tables;
    :func:`check_structure` checks those against a full recomputation.
    """
    g = fg.cached_image_graph()
    gp = fg.gprime
    n = len(gp)
    violations = []

    ratio_max = 1.0 if g else 0.0
    for v in sorted(g):
        dg, dgp = len(g[v]), len(gp[v])
        if dgp == 0:
            if dg:
                violations.append(f"degree: {v} has G-degree {dg} but no G' edges")
            continue
        ratio = dg / dgp
        ratio_max = max(ratio_max, ratio)
        if dg > degree_factor * dgp:
            violations.append(f"degree: {v} has {dg} > {degree_factor}*{dgp}")
    degree_ok = not violations

    connected = _connected(g)
    if not connected:
        violations.append("connectivity: G is disconnected")

    stretch_max = None
    stretch_ok = None
    if stretch and g:
        log_n = clog2(n)
        dg_table = all_pairs_distances(g)
        dgp_table = all_pairs_distances(gp)
        live = [dgp_table.index[v] for v in dg_table.nodes]
        a = dg_table.matrix.astype(np.int64)
        b = dgp_table.matrix[np.ix_(live, live)].astype(np.int64)
        pairs = np.triu(np.ones_like(b, dtype=bool), k=1) & (b > 0)
        unreachable = pairs & (a < 0)
        bad = pairs & (a >= 0) & (a > log_n * b)
        ok_pairs = pairs & (a >= 0)
        stretch_max = float((a[ok_pairs] / b[ok_pairs]).max()) if ok_pairs.any() else 1.0
        if unreachable.any():
            stretch_max = math.inf
        stretch_ok = not (bad.any() or unreachable.any())
        for i, j in list(zip(*np.nonzero(bad | unreachable)))[:3]:
            x, y = dg_table.nodes[i], dg_table.nodes[j]
            violations.append(
                f"stretch: dist_G({x},{y})={dg_table.dist(x, y)} > {log_n}*{int(b[i, j])}"
            )

    beta = lower_bound_beta(3, n) if n >= 3 else None
    return MetricsReport(
        step, n, ratio_max, stretch_max, degree_ok, stretch_ok, connected, recovery, beta, violations
    )


def check_structure(fg: ForgivingGraph) -> list[str]:
    """Quiescent structural invariants of the protocol state."""
    out = []
    fresh = fg.image_graph()
    cached = fg.cached_image_graph()
    if cached != fresh:
        stale = sorted(v for v in fresh.keys() | cached.keys() if fresh.get(v) != cached.get(v))
        out.append(f"neighbor tables stale at {stale[:5]}")
    for v, st in sorted(fg.procs.items()):
        if not st.alive:
            continue
        for e, rec in sorted(st.records.items()):
            if len(rec.helpers) > 1:
                out.append(f"helpers: record {v}@{e} holds {len(rec.helpers)} helpers at quiescence")
            other_alive = fg.procs[rec.other].alive
            if other_alive and rec.rt_parent is not None:
                out.append(f"record {v}@{e}: rt_parent set while {rec.other} is alive")
            want = Ref(rec.other, e, 0) if other_alive else rec.rt_parent
            if rec.endpoint != want:
                out.append(f"record {v}@{e}: endpoint {rec.endpoint} should be {want}")
            for s in rec.helpers:
                r = Ref(v, e, s)
                if len(fg.neighbors(r)) > 3:
                    out.append(f"helper {r} has degree > 3")
    for tree in fg.reconstruction_trees():
        ok, why = haft_mod.validate_haft(tree)
        if not ok:
            out.append(f"RT rooted at {tree.root}: {why}")
            continue
        leaves = tree.leaves()
        if any(r.slot != 0 for r in leaves):
            out.append(f"RT rooted at {tree.root}: helper as leaf")
        if len(set(leaves)) != len(leaves):
            out.append(f"RT rooted at {tree.root}: repeated leaf")
        out.extend(_representative_violations(fg, tree))
    return out


def _representative_violations(fg: ForgivingGraph, tree: haft_mod.Haft) -> list[str]:
    out = []
    free: dict[Ref, set] = {}
    stack = [(tree.root, False)]
    while stack:
        r, done = stack.pop()
        node = tree.nodes[r]
        if node.kind == "leaf":
            free[r] = {r}
            continue
        if not done:
            stack.append((r, True))
            stack.extend(((node.left, False), (node.right, False)))
            continue
        leaves = (free.pop(node.left) | free.pop(node.right)) - {Ref(r.proc, r.edge, 0)}
        rep = fg.representative(r)
        if leaves != {rep}:
            out.append(f"representative of {r} is {rep}, free leaves {sorted(map(str, leaves))}")
        free[r] = leaves
    return out
