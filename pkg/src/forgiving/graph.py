"""Forgiving Graph protocol state and repair.

Every processor keeps one :class:`EdgeRecord` per edge it has ever had in
the insert-only graph G'.  A record owns the processor's *real node* for
that edge and at most one *helper node* (two, transiently, while a repair is
running).  The healed graph G is the image of these virtual nodes under the
map ``ref -> ref.proc``.

When a processor is deleted, its real and helper nodes disappear, the
surviving pieces of the reconstruction trees (RTs) they belonged to are
linked by a temporary balanced tree of anchors, and pieces merge bottom-up
into a single haft.  All coordination runs through :class:`Network`, which
counts messages and rounds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from . import haft as haft_mod
from .netsim import Message, Network, ProtocolError, RecoveryStats

EdgeKey = tuple[int, int]


class InvalidArgument(ValueError):
    pass


def edge_key(a: int, b: int) -> EdgeKey:
    return (a, b) if a < b else (b, a)


class Ref(NamedTuple):
    """A virtual node: the real node (slot 0) or a helper (slot 1, 2) of a record."""

    proc: int
    edge: EdgeKey
    slot: int = 0

    @property
    def role(self) -> str:
        return "real" if self.slot == 0 else "helper"

    def __str__(self) -> str:
        tag = "r" if self.slot == 0 else f"h{self.slot}"
        return f"{self.proc}@{self.edge[0]}-{self.edge[1]}:{tag}"


@dataclass
class Helper:
    parent: Ref | None
    left: Ref | None
    right: Ref | None
    height: int
    count: int  # leaves below this helper ("childrencount")
    representative: Ref


@dataclass
class EdgeRecord:
    key: EdgeKey
    other: int
    endpoint: Ref | None
    rt_parent: Ref | None = None
    representative: Ref | None = None
    helpers: dict[int, Helper] = field(default_factory=dict)

    @property
    def hashelper(self) -> bool:
        return bool(self.helpers)


@dataclass
class ProcessorState:
    id: int
    alive: bool = True
    records: dict[EdgeKey, EdgeRecord] = field(default_factory=dict)
    neighbor_cache: dict[int, frozenset] = field(default_factory=dict)


class RootInfo(NamedTuple):
    ref: Ref
    count: int
    height: int
    rep: Ref


class Join(NamedTuple):
    """One helper to create: ``new`` joins ``left`` and ``right``."""

    new: Ref
    left: Ref
    right: Ref
    height: int
    count: int
    rep: Ref


def compute_haft(*root_lists: Sequence[RootInfo], slot_for=lambda host: 1) -> list[Join]:
    """Blueprint that merges complete trees (given by their roots) into one haft.

    Roots are sorted by (leaf count, id).  Equal-size neighbours are paired
    first, the new helper being simulated by the representative of the first
    root and inheriting the second root's representative.  The remaining
    distinct sizes are then chained, each time hanging the accumulated tree
    as right child under a helper simulated by the larger tree's
    representative.  ``slot_for(host)`` picks the helper slot a host uses.
    """
    roots = sorted(itertools.chain.from_iterable(root_lists), key=lambda r: (r.count, r.ref))
    if len({r.ref for r in roots}) != len(roots):
        raise ProtocolError("primary-root lists overlap")
    joins: list[Join] = []
    hosts: set[Ref] = set()

    def make(host: Ref, left: RootInfo, right: RootInfo, rep: Ref) -> RootInfo:
        if host in hosts:
            raise ProtocolError(f"{host} asked to simulate two helpers in one merge")
        hosts.add(host)
        new = Ref(host.proc, host.edge, slot_for(host))
        height = 1 + max(left.height, right.height)
        count = left.count + right.count
        joins.append(Join(new, left.ref, right.ref, height, count, rep))
        return RootInfo(new, count, height, rep)

    i = 0
    while i < len(roots) - 1:
        a, b = roots[i], roots[i + 1]
        if a.count == b.count:
            joined = make(a.rep, a, b, b.rep)
            del roots[i : i + 2]
            key = (joined.count, joined.ref)
            pos = 0
            while pos < len(roots) and (roots[pos].count, roots[pos].ref) < key:
                pos += 1
            roots.insert(pos, joined)
        else:
            i += 1
    acc = roots[0] if roots else None
    for bigger in roots[1:]:
        acc = make(bigger.rep, bigger, acc, acc.rep)
    return joins


@dataclass
class _Fragment:
    root: Ref
    anchor: Ref
    damaged: bool = False


class ForgivingGraph:
    """Insert/delete driver for the self-healing overlay."""

    def __init__(self):
        self.procs: dict[int, ProcessorState] = {}
        self.gprime: dict[int, set[int]] = {}
        self._image: dict[int, frozenset[int]] = {}
        self.net = Network(self.adjacent, self.exists, processor_of=lambda r: r.proc)
        self.net.handlers["record-update"] = self._on_record_update
        self.anchors: set[Ref] = set()
        # instrumentation, read by tests and the verifier
        self.max_helpers_per_record = 0
        self.repair_violations: list[str] = []
        self.skip_red_removal = False

    @classmethod
    def from_edges(cls, edges: Iterable[Sequence[int]], nodes: Iterable[int] = ()) -> "ForgivingGraph":
        fg = cls()
        ids = set(nodes)
        pairs = []
        for a, b in edges:
            if a == b:
                raise InvalidArgument(f"self loop on {a}")
            ids.update((a, b))
            pairs.append(edge_key(a, b))
        for v in sorted(ids):
            fg.procs[v] = ProcessorState(v)
            fg.gprime[v] = set()
        for a, b in sorted(set(pairs)):
            fg._add_edge(a, b)
        for v in sorted(ids):
            fg._init_records(v)
        fg._refresh_caches(ids)
        return fg

    # ------------------------------------------------------------------
    # field access

    def _rec(self, r: Ref) -> EdgeRecord:
        return self.procs[r.proc].records[r.edge]

    def helper(self, r: Ref) -> Helper:
        return self.procs[r.proc].records[r.edge].helpers[r.slot]

    def exists(self, r: Ref) -> bool:
        st = self.procs.get(r.proc)
        if st is None or not st.alive:
            return False
        rec = st.records.get(r.edge)
        if rec is None:
            return False
        return r.slot == 0 or r.slot in rec.helpers

    def neighbors(self, r: Ref) -> list[Ref]:
        rec = self.procs[r.proc].records[r.edge]
        if r.slot == 0:
            if rec.rt_parent is not None:
                return [rec.rt_parent]
            if self.procs[rec.other].alive:
                return [Ref(rec.other, r.edge, 0)]
            return []
        h = rec.helpers[r.slot]
        return [x for x in (h.parent, h.left, h.right) if x is not None]

    def adjacent(self, a: Ref, b: Ref) -> bool:
        return self.exists(a) and b in self.neighbors(a)

    def parent(self, r: Ref) -> Ref | None:
        rec = self.procs[r.proc].records[r.edge]
        return rec.rt_parent if r.slot == 0 else rec.helpers[r.slot].parent

    def children(self, r: Ref) -> list[Ref]:
        if r.slot == 0:
            return []
        h = self.helper(r)
        return [x for x in (h.left, h.right) if x is not None]

    def count(self, r: Ref) -> int:
        return 1 if r.slot == 0 else self.helper(r).count

    def height(self, r: Ref) -> int:
        return 0 if r.slot == 0 else self.helper(r).height

    def representative(self, r: Ref) -> Ref:
        return r if r.slot == 0 else self.helper(r).representative

    def _set_parent(self, r: Ref, p: Ref | None) -> None:
        rec = self.procs[r.proc].records[r.edge]
        if r.slot == 0:
            rec.rt_parent = p
            rec.endpoint = p
        else:
            rec.helpers[r.slot].parent = p

    def _climb(self, r: Ref) -> Ref:
        p = self.parent(r)
        while p is not None:
            r, p = p, self.parent(p)
        return r

    def refs_of(self, v: int) -> list[Ref]:
        out = []
        for e, rec in sorted(self.procs[v].records.items()):
            out.append(Ref(v, e, 0))
            out.extend(Ref(v, e, s) for s in sorted(rec.helpers))
        return out

    def is_complete(self, r: Ref) -> bool:
        if r.slot == 0:
            return True
        h = self.helper(r)
        return h.count == 1 << h.height

    def test_primary_root(self, r: Ref) -> bool:
        """Heads a complete subtree whose parent does not."""
        if not self.is_complete(r):
            return False
        p = self.parent(r)
        return p is None or not self.is_complete(p)

    # ------------------------------------------------------------------
    # views

    @property
    def alive(self) -> list[int]:
        return [v for v, st in self.procs.items() if st.alive]

    def current_graph(self) -> dict[Ref, set[Ref]]:
        """Virtual graph: real and helper nodes with their links."""
        adj: dict[Ref, set[Ref]] = {}
        for v, st in self.procs.items():
            if not st.alive:
                continue
            for r in self.refs_of(v):
                adj.setdefault(r, set()).update(self.neighbors(r))
        return adj

    def _image_neighbors(self, v: int) -> set[int]:
        out = set()
        procs = self.procs
        for rec in procs[v].records.values():
            if rec.rt_parent is not None:
                out.add(rec.rt_parent.proc)
            elif procs[rec.other].alive:
                out.add(rec.other)
            for h in rec.helpers.values():
                for x in (h.parent, h.left, h.right):
                    if x is not None:
                        out.add(x.proc)
        out.discard(v)
        return out

    def image_graph(self) -> dict[int, set[int]]:
        """The healed network G over live processors."""
        return {v: self._image_neighbors(v) for v, st in self.procs.items() if st.alive}

    def insert_only_graph(self) -> dict[int, set[int]]:
        """G': every processor ever inserted and every edge ever added."""
        return {v: set(nbrs) for v, nbrs in self.gprime.items()}

    def reconstruction_trees(self) -> list[haft_mod.Haft]:
        """Every RT that contains at least one helper, as a haft over refs."""
        roots = set()
        for v, st in self.procs.items():
            if not st.alive:
                continue
            for e, rec in st.records.items():
                for s in rec.helpers:
                    roots.add(self._climb(Ref(v, e, s)))
        trees = []
        for root in sorted(roots):
            nodes = {}
            stack = [root]
            while stack:
                r = stack.pop()
                if r.slot == 0:
                    nodes[r] = haft_mod.HaftNode(r, parent=self.parent(r))
                    continue
                h = self.helper(r)
                nodes[r] = haft_mod.HaftNode(r, h.left, h.right, h.parent, h.height, h.count)
                stack.extend(c for c in (h.left, h.right) if c is not None)
            trees.append(haft_mod.Haft(root, nodes))
        return trees

    # ------------------------------------------------------------------
    # insertion

    def _add_edge(self, a: int, b: int) -> None:
        e = edge_key(a, b)
        self.gprime[a].add(b)
        self.gprime[b].add(a)
        self.procs[a].records[e] = EdgeRecord(e, b, Ref(b, e, 0))
        self.procs[b].records[e] = EdgeRecord(e, a, Ref(a, e, 0))

    def _init_records(self, v: int) -> None:
        for e, rec in self.procs[v].records.items():
            if rec.representative is None:
                rec.representative = Ref(v, e, 0)

    def init_processor(self, v: int, neighbors: Iterable[int]) -> None:
        """Insert processor ``v`` adjacent to the given live processors."""
        nbrs = sorted(set(neighbors))
        if v in self.procs:
            raise InvalidArgument(f"processor id {v} already used")
        for x in nbrs:
            st = self.procs.get(x)
            if st is None or not st.alive:
                raise InvalidArgument(f"neighbor {x} of new processor {v} is not alive")
        if not nbrs and self.alive:
            raise InvalidArgument(f"processor {v} must connect to at least one live processor")
        if self.net.in_repair:
            raise ProtocolError("insertion during a repair")
        self.procs[v] = ProcessorState(v)
        self.gprime[v] = set()
        for x in nbrs:
            self._add_edge(v, x)
        self._init_records(v)
        for x in nbrs:
            self._init_records(x)
        self._refresh_caches({v, *nbrs})

    insert = init_processor

    def snapshot(self) -> dict:
        """JSON-ready dump of every live processor's edge records."""

        def s(r):
            return None if r is None else str(r)

        procs = {}
        for v, st in sorted(self.procs.items()):
            if not st.alive:
                continue
            recs = {}
            for e, rec in sorted(st.records.items()):
                recs[f"{e[0]}-{e[1]}"] = {
                    "other": rec.other,
                    "endpoint": s(rec.endpoint),
                    "rt_parent": s(rec.rt_parent),
                    "helpers": {
                        str(k): {
                            "parent": s(h.parent),
                            "left": s(h.left),
                            "right": s(h.right),
                            "height": h.height,
                            "count": h.count,
                            "representative": s(h.representative),
                        }
                        for k, h in sorted(rec.helpers.items())
                    },
                }
            procs[str(v)] = recs
        return {
            "alive": sorted(self.alive),
            "gprime": {str(v): sorted(n) for v, n in sorted(self.gprime.items())},
            "image": {str(v): sorted(n) for v, n in sorted(self.image_graph().items())},
            "processors": procs,
        }

    def _refresh_caches(self, touched: Iterable[int]) -> None:
        """Recompute G-neighbourhoods of ``touched`` and the neighbor-of-neighbor
        tables of every processor that sees one of them."""
        affected = set()
        for p in touched:
            old = self._image.pop(p, frozenset())
            affected |= old
            if self.procs[p].alive:
                new = frozenset(self._image_neighbors(p))
                self._image[p] = new
                affected.add(p)
                affected |= new
        image = self._image
        for p in affected:
            if p in image:
                self.procs[p].neighbor_cache = {q: image[q] for q in image[p]}

    def cached_image_graph(self) -> dict[int, frozenset[int]]:
        """G as maintained incrementally by the repairs (cheap, for adversaries)."""
        return dict(self._image)

    # ------------------------------------------------------------------
    # deletion

    def _on_record_update(self, msg: Message) -> None:
        if msg.payload and msg.payload[0] == "lost":
            self.helper(msg.dst).count -= msg.payload[1]

    def delete_fix(self, v: int) -> RecoveryStats:
        """Delete processor ``v`` and heal around it."""
        st = self.procs.get(v)
        if st is None or not st.alive:
            raise InvalidArgument(f"processor {v} is not alive")
        net = self.net
        stats = net.begin_repair(v, len(self.gprime[v]), len(self.gprime))

        removed = self.refs_of(v)
        removed_set = set(removed)
        lost = {r: self.count(r) for r in removed}
        contacts = []
        dropped = set()
        for r in removed:
            for b in self.neighbors(r):
                dropped.add(frozenset((r, b)))
                if b not in removed_set:
                    contacts.append((b, r))
        stats.edges_dropped += len(dropped)
        # neighbours of v are told of the deletion by the model itself
        st.alive = False
        damage: list[tuple[Ref, int]] = []
        for b, r in contacts:
            if b.slot == 0:
                self._set_parent(b, None)
                continue
            h = self.helper(b)
            if h.parent == r:
                h.parent = None
            elif h.left == r or h.right == r:
                if h.left == r:
                    h.left = None
                else:
                    h.right = None
                h.count -= lost[r]
                damage.append((b, lost[r]))
        old_records = st.records
        st.records = {}
        touched = {b.proc for b, _ in contacts}

        frags: dict[Ref, _Fragment] = {}
        for b in sorted({b for b, _ in contacts}):
            root = self._climb(b)
            if root not in frags:
                frags[root] = _Fragment(root, b)
        for b, _ in damage:
            frags[self._climb(b)].damaged = True

        # round 1: losses climb to fragment roots while anchors link up
        waves = []
        for b, k in damage:
            path = [b]
            p = self.parent(b)
            while p is not None:
                path.append(p)
                p = self.parent(p)
            waves.append(
                [[Message(path[i], path[i + 1], "record-update", ("lost", k))] for i in range(len(path) - 1)]
            )
        net.run_waves(waves)

        live_frags = []
        for frag in frags.values():
            if self.count(frag.root) == 0:
                touched.add(frag.root.proc)
                stats.red_nodes_removed += self._dissolve(frag.root)
            else:
                live_frags.append(frag)
        order = sorted(live_frags, key=lambda f: (-self.count(f.root), f.anchor))
        anchor = [f.anchor for f in order]
        stats.anchors = len(anchor)
        self.anchors = set(anchor)
        self._check_anchor_knowledge(v, old_records, anchor)
        bt_wave = []
        for i in range(1, len(anchor)):
            a, p = anchor[i], anchor[(i - 1) // 2]
            net.add_bt_edge(a, p)
            bt_wave.append(Message(a, p, "record-update", ("bt-link", a)))
        net.run_waves([[bt_wave]] if bt_wave else [])

        alive_pos = set(range(len(anchor)))
        prroots: dict[int, list[Ref]] = {}
        self_merge = len(anchor) == 1 and order[0].damaged
        while len(alive_pos) > 1 or self_merge:
            groups = []
            for y in sorted(alive_pos):
                kids = [c for c in (2 * y + 1, 2 * y + 2) if c in alive_pos]
                leaves = [c for c in kids if 2 * c + 1 not in alive_pos and 2 * c + 2 not in alive_pos]
                if leaves:
                    groups.append((y, leaves))
            if self_merge:
                groups, self_merge = [(0, [])], False
            touched |= self._merge_round(groups, anchor, prroots, alive_pos)
            stats.merge_rounds += 1
            for _, leaves in groups:
                alive_pos.difference_update(leaves)
            self.anchors = {anchor[p] for p in alive_pos}

        self.anchors = set()
        stats = net.end_repair()
        self._refresh_caches(touched | set(self.gprime[v]) | {v})
        return stats

    def _check_anchor_knowledge(self, v: int, old_records: dict, anchors: list[Ref]) -> None:
        # anchors reach each other through their neighbor-of-neighbor tables
        for a in anchors:
            cache = self.procs[a.proc].neighbor_cache.get(v)
            if cache is None:
                raise ProtocolError(f"anchor {a} has no neighbor table for deleted {v}")
            for b in anchors:
                if b.proc != a.proc and b.proc not in cache:
                    raise ProtocolError(f"anchor {a} cannot name anchor {b}")

    def _dissolve(self, root: Ref) -> int:
        """Remove a fragment that lost all of its leaves."""
        stack = [root]
        n = 0
        while stack:
            r = stack.pop()
            if r.slot == 0:
                raise ProtocolError(f"leaf {r} inside an empty fragment")
            kids = self.children(r)
            stack.extend(kids)
            self.net.stats.edges_dropped += len(kids)
            del self._rec(r).helpers[r.slot]
            n += 1
        return n

    def find_pr_roots(self, anchor: Ref) -> tuple[list[Ref], list[Ref], list[list[Message]]]:
        """Probe the tree holding ``anchor`` for its primary roots.

        Returns (primary roots, red nodes, per-round message batches).  The
        probe climbs to the root, then descends through every node that does
        not head a complete subtree; those nodes are marked red.
        """
        waves: list[list[Message]] = []
        node = anchor
        p = self.parent(node)
        while p is not None:
            waves.append([Message(node, p, "probe", (anchor,))])
            node, p = p, self.parent(p)
        prroots: list[Ref] = []
        red: list[Ref] = []
        frontier = [node]
        while frontier:
            batch = []
            nxt = []
            for y in frontier:
                if self.is_complete(y):
                    prroots.append(y)
                    continue
                red.append(y)
                for c in self.children(y):
                    batch.append(Message(y, c, "probe", (anchor,)))
                    nxt.append(c)
            if batch:
                waves.append(batch)
            frontier = nxt
        return prroots, red, waves

    def _free_slot(self, host: Ref) -> int:
        used = self._rec(host).helpers
        for s in (1, 2):
            if s not in used:
                return s
        raise ProtocolError(f"{host} already simulates two helpers")

    def _merge_round(
        self,
        groups: list[tuple[int, list[int]]],
        anchor: list[Ref],
        prroots: dict[int, list[Ref]],
        alive_pos: set[int],
    ) -> set[int]:
        """One bottom-up step: every group (parent, leaf children) merges.

        Every position of BT_v whose tree changed since its last probe (all
        of them in the first round) is probed, so that red helpers of every
        fragment are gone before their host leaves are reused.
        """
        net = self.net
        stats = net.stats
        touched: set[int] = set()
        red: list[Ref] = []
        probed = []
        waves = []
        for pos in sorted(alive_pos):
            if pos in prroots:
                continue
            pr, rd, w = self.find_pr_roots(anchor[pos])
            prroots[pos] = pr
            red.extend(rd)
            probed.append(pos)
            waves.append(w)
        net.run_waves(waves)
        replies = [
            Message(r, anchor[pos], "probe-reply", (r, self.representative(r)), link=True)
            for pos in probed
            for r in prroots[pos]
            if r != anchor[pos]
        ]
        net.run_waves([[replies]] if replies else [])

        def entries(pos: int) -> tuple:
            return tuple(x for r in prroots[pos] for x in (r, self.representative(r)))

        up, down = [], []
        for y, kids in groups:
            for c in kids:
                up.append(Message(anchor[c], anchor[y], "prroots-list", entries(c)))
                others = entries(y) + tuple(x for o in kids if o != c for x in entries(o))
                down.append(Message(anchor[y], anchor[c], "prroots-list", others))
        net.run_waves([[up], [down]] if up else [])

        blueprints = []
        to_roots, to_hosts = [], []
        for y, kids in groups:
            lists = [
                [RootInfo(r, self.count(r), self.height(r), self.representative(r)) for r in prroots[pos]]
                for pos in (y, *kids)
            ]
            joins = compute_haft(*lists, slot_for=self._free_slot)
            blueprints.append(joins)
            union = tuple(x for pos in (y, *kids) for x in entries(pos))
            hosts = {j.new._replace(slot=0) for j in joins}
            for pos in (y, *kids):
                for r in prroots[pos]:
                    if r != anchor[pos]:
                        to_roots.append(Message(anchor[pos], r, "merge-blueprint", union, link=True))
                    rep = self.representative(r)
                    if rep != r and rep in hosts:
                        to_hosts.append(Message(r, rep, "record-update", ("host", rep), link=True))
        net.run_waves([w for w in ([to_roots], [to_hosts]) if w[0]])

        for joins in blueprints:
            for j in joins:
                rec = self._rec(j.new)
                if j.new.slot in rec.helpers:
                    raise ProtocolError(f"helper slot {j.new} already in use")
                rec.helpers[j.new.slot] = Helper(None, j.left, j.right, j.height, j.count, j.rep)
                self._set_parent(j.left, j.new)
                self._set_parent(j.right, j.new)
                stats.edges_added += 2
                touched.update((j.new.proc, j.left.proc, j.right.proc))
                self.max_helpers_per_record = max(self.max_helpers_per_record, len(rec.helpers))
                self._check_mid_repair(j.new)

        # red anchors that stay in BT_v hand their place to a primary root
        retiring = {c for _, kids in groups for c in kids}
        red_set = set(red)
        handoffs = []
        for pos in sorted(alive_pos - retiring):
            if anchor[pos] in red_set:
                new = min(prroots[pos], key=lambda r: (-self.count(r), r))
                handoffs.append((pos, Message(anchor[pos], new, "anchor-handoff", (new,), link=True)))
        net.run_waves([[[m for _, m in handoffs]]] if handoffs else [])
        for pos, msg in handoffs:
            net.move_bt_edges(msg.src, msg.dst)
            anchor[pos] = msg.dst

        if not self.skip_red_removal:
            for r in red:
                touched |= self._remove_helper(r)
        for y, kids in groups:
            for pos in (y, *kids):
                del prroots[pos]
        return touched

    def _remove_helper(self, r: Ref) -> set[int]:
        h = self.helper(r)
        touched = {r.proc}
        for nb in (h.parent, h.left, h.right):
            if nb is None or not self.exists(nb):
                continue
            touched.add(nb.proc)
            if self.parent(nb) == r:
                self._set_parent(nb, None)
            elif nb.slot:
                nh = self.helper(nb)
                if nh.left == r:
                    nh.left = None
                elif nh.right == r:
                    nh.right = None
            self.net.stats.edges_dropped += 1
        del self._rec(r).helpers[r.slot]
        self.net.forget(r)
        self.net.stats.red_nodes_removed += 1
        return touched

    def _check_mid_repair(self, new: Ref) -> None:
        rec = self._rec(new)
        if len(rec.helpers) > 2:
            self.repair_violations.append(f"record {new.proc}@{new.edge} holds {len(rec.helpers)} helpers")
        anchored = sum(1 for s in rec.helpers if Ref(new.proc, new.edge, s) in self.anchors)
        if anchored > 1:
            self.repair_violations.append(f"record {new.proc}@{new.edge} holds {anchored} anchors")
