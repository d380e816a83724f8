"""Adversarial insert/delete traces and their line-delimited file format.

A trace file starts with a header object and has one action per line::

    {"seed":7,"init_edges":[[0,1],[1,2]]}
    {"op":"insert","id":3,"nbrs":[0,2]}
    {"op":"delete","id":1}

Randomness comes from :class:`random.Random` seeded with the trace seed.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, TextIO, Union


class TraceError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class Insert:
    id: int
    neighbors: tuple[int, ...]


@dataclass(frozen=True)
class Delete:
    id: int


Action = Union[Insert, Delete]


@dataclass
class Trace:
    seed: int
    initial_graph: list[tuple[int, int]]
    actions: list[Action] = field(default_factory=list)

    def nodes(self) -> set[int]:
        return {v for e in self.initial_graph for v in e}

    def validate(self) -> None:
        """Reject actions on dead ids, reused ids and disconnected inserts."""
        live = self.nodes()
        if not _is_connected(live, self.initial_graph):
            raise TraceError("initial graph is not connected", 1)
        seen = set(live)
        for lineno, act in enumerate(self.actions, start=2):
            if isinstance(act, Delete):
                if act.id not in live:
                    raise TraceError(f"delete of dead or unknown id {act.id}", lineno)
                if len(live) == 1:
                    raise TraceError(f"delete of last live node {act.id}", lineno)
                live.remove(act.id)
            else:
                if act.id in seen:
                    raise TraceError(f"insert reuses id {act.id}", lineno)
                dead = [x for x in act.neighbors if x not in live]
                if dead:
                    raise TraceError(f"insert {act.id} names dead neighbors {dead}", lineno)
                if not act.neighbors and live:
                    raise TraceError(f"insert {act.id} has no neighbors", lineno)
                seen.add(act.id)
                live.add(act.id)


def _is_connected(nodes: set[int], edges: Iterable[tuple[int, int]]) -> bool:
    if not nodes:
        return True
    adj = {v: [] for v in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    start = min(nodes)
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(nodes)


# ----------------------------------------------------------------------
# generators


def random_connected_graph(n0: int, rng: random.Random, extra: int | None = None) -> list[tuple[int, int]]:
    """Random spanning tree over 0..n0-1 plus ``extra`` (default n0 // 2) edges."""
    order = list(range(n0))
    rng.shuffle(order)
    edges = set()
    for i in range(1, n0):
        a, b = order[i], order[rng.randrange(i)]
        edges.add((min(a, b), max(a, b)))
    extra = n0 // 2 if extra is None else extra
    for _ in range(extra):
        a, b = rng.sample(range(n0), 2)
        edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def random_trace(n0: int, steps: int, p_delete: float, seed: int) -> Trace:
    """Uniform deletions with probability ``p_delete``, else an insert with 1..4 neighbors."""
    if n0 < 2:
        raise ValueError("n0 must be at least 2")
    if not 0 <= p_delete <= 1:
        raise ValueError("p_delete must lie in [0, 1]")
    rng = random.Random(seed)
    edges = random_connected_graph(n0, rng)
    live = list(range(n0))
    next_id = n0
    actions: list[Action] = []
    for _ in range(steps):
        if rng.random() < p_delete:
            if len(live) == 1:
                if p_delete >= 1:
                    break
            else:
                victim = live.pop(rng.randrange(len(live)))
                actions.append(Delete(victim))
                continue
        k = rng.randint(1, min(4, len(live)))
        nbrs = tuple(sorted(rng.sample(live, k)))
        actions.append(Insert(next_id, nbrs))
        live.append(next_id)
        next_id += 1
    return Trace(seed, edges, actions)


def star_attack(n: int) -> Trace:
    """Star on n vertices with center 0, then delete the center."""
    if n < 3:
        raise ValueError("star attack needs n >= 3")
    return Trace(0, [(0, i) for i in range(1, n)], [Delete(0)])


def max_degree_attack(
    n0: int,
    steps: int,
    seed: int,
    p_delete: float = 0.5,
    initial_graph: list[tuple[int, int]] | None = None,
) -> Trace:
    """Adaptive adversary: every deletion hits the live node of largest G-degree.

    The adversary runs the healing protocol alongside so it always sees the
    current healed topology.  Non-deletion steps insert a node with 1..4
    uniformly chosen live neighbors.
    """
    from .graph import ForgivingGraph

    rng = random.Random(seed)
    edges = list(initial_graph) if initial_graph is not None else random_connected_graph(n0, rng)
    fg = ForgivingGraph.from_edges(edges)
    next_id = max(fg.procs) + 1
    actions: list[Action] = []
    for _ in range(steps):
        live = fg.alive
        if rng.random() < p_delete:
            if len(live) > 1:
                image = fg.cached_image_graph()
                victim = min(live, key=lambda v: (-len(image[v]), v))
                fg.delete_fix(victim)
                actions.append(Delete(victim))
                continue
        k = rng.randint(1, min(4, len(live)))
        nbrs = tuple(sorted(rng.sample(sorted(live), k)))
        fg.init_processor(next_id, nbrs)
        actions.append(Insert(next_id, nbrs))
        next_id += 1
    return Trace(seed, edges, actions)


GENERATORS = {
    "random": lambda seed, n0=16, steps=100, p_delete=0.4: random_trace(int(n0), int(steps), float(p_delete), seed),
    "star": lambda seed, n=9: star_attack(int(n)),
    "maxdeg": lambda seed, n0=16, steps=100, p_delete=0.5: max_degree_attack(
        int(n0), int(steps), seed, float(p_delete)
    ),
}


# ----------------------------------------------------------------------
# file format


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"))


def dumps_trace(trace: Trace) -> str:
    lines = [_dumps({"seed": trace.seed, "init_edges": [list(e) for e in trace.initial_graph]})]
    for act in trace.actions:
        if isinstance(act, Insert):
            lines.append(_dumps({"op": "insert", "id": act.id, "nbrs": list(act.neighbors)}))
        else:
            lines.append(_dumps({"op": "delete", "id": act.id}))
    return "\n".join(lines) + "\n"


def write_trace(trace: Trace, fh: TextIO) -> None:
    fh.write(dumps_trace(trace))


def _int(value, what: str, lineno: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TraceError(f"{what} must be an integer", lineno)
    return value


def loads_trace(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise TraceError("missing header", 1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceError(f"bad JSON: {exc.msg}", 1) from None
    if not isinstance(header, dict) or "seed" not in header or "init_edges" not in header:
        raise TraceError('header needs "seed" and "init_edges"', 1)
    seed = _int(header["seed"], "seed", 1)
    edges = []
    for e in header["init_edges"]:
        if not isinstance(e, list) or len(e) != 2:
            raise TraceError("edges must be [a, b] pairs", 1)
        edges.append((_int(e[0], "node id", 1), _int(e[1], "node id", 1)))
    actions: list[Action] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"bad JSON: {exc.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise TraceError("action must be an object", lineno)
        op = rec.get("op")
        if op == "insert":
            nbrs = rec.get("nbrs")
            if not isinstance(nbrs, list):
                raise TraceError('insert needs a "nbrs" list', lineno)
            actions.append(Insert(_int(rec.get("id"), "id", lineno), tuple(_int(x, "neighbor", lineno) for x in nbrs)))
        elif op == "delete":
            actions.append(Delete(_int(rec.get("id"), "id", lineno)))
        else:
            raise TraceError(f"unknown op {op!r}", lineno)
    return Trace(seed, edges, actions)


def read_trace(fh: TextIO) -> Trace:
    return loads_trace(fh.read())
