"""Half-full trees (hafts).

A haft is a rooted binary tree in which every internal node has two children
and its left child heads a complete binary subtree holding at least half of
the node's leaves.  There is exactly one haft shape per leaf count, which is
what makes hafts usable as self-healing reconstruction trees: they can be
split into complete trees (strip) and recombined like binary addition
(merge).

This module is purely value level and never models processors; the
distributed protocol in :mod:`forgiving.graph` is checked against it.
"""

from __future__ import annotations

import bisect
import dataclasses
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Union

NodeId = Hashable
HaftShape = Union[int, tuple["HaftShape", "HaftShape"]]


class HaftError(ValueError):
    """Invalid argument to a haft operation."""


class SpareNodeError(RuntimeError):
    """Merge ran out of joining nodes."""

    def __init__(self, deficit: int):
        super().__init__(f"merge needs {deficit} more joining node(s)")
        self.deficit = deficit


@dataclass(slots=True)
class HaftNode:
    id: NodeId
    left: NodeId | None = None
    right: NodeId | None = None
    parent: NodeId | None = None
    height: int = 0
    leaf_count: int = 1

    @property
    def kind(self) -> str:
        return "leaf" if self.left is None and self.right is None else "internal"

    @property
    def is_complete(self) -> bool:
        return self.leaf_count == 1 << self.height


@dataclass
class Haft:
    root: NodeId
    nodes: dict[NodeId, HaftNode] = field(default_factory=dict)

    def __getitem__(self, node_id: NodeId) -> HaftNode:
        return self.nodes[node_id]

    @property
    def leaf_count(self) -> int:
        return self.nodes[self.root].leaf_count

    @property
    def height(self) -> int:
        return self.nodes[self.root].height

    def leaves(self) -> list[NodeId]:
        """Leaf ids, left to right."""
        out = []
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            if node.kind == "leaf":
                out.append(node.id)
            else:
                stack.append(node.right)
                stack.append(node.left)
        return out

    def internal_nodes(self) -> list[NodeId]:
        return [nid for nid, node in self.nodes.items() if node.kind == "internal"]

    def subtree(self, node_id: NodeId) -> "Haft":
        """Detached copy of the subtree under ``node_id``."""
        nodes = {}
        stack = [node_id]
        while stack:
            nid = stack.pop()
            src = self.nodes[nid]
            nodes[nid] = HaftNode(nid, src.left, src.right, src.parent, src.height, src.leaf_count)
            if src.left is not None:
                stack.append(src.left)
                stack.append(src.right)
        nodes[node_id].parent = None
        return Haft(node_id, nodes)


def _auto_ids() -> Iterator[NodeId]:
    return (("join", i) for i in itertools.count())


def _join(nodes: dict, nid: NodeId, left: HaftNode, right: HaftNode) -> HaftNode:
    node = HaftNode(
        nid,
        left=left.id,
        right=right.id,
        height=1 + max(left.height, right.height),
        leaf_count=left.leaf_count + right.leaf_count,
    )
    left.parent = nid
    right.parent = nid
    nodes[nid] = node
    return node


def make_haft(leaf_ids: Iterable[NodeId], internal_ids: Iterable[NodeId] | None = None) -> Haft:
    """Build the unique haft over ``leaf_ids``, packed left to right.

    Internal nodes take ids from ``internal_ids`` (default: ``("join", i)``).
    """
    leaves = list(leaf_ids)
    if not leaves:
        raise HaftError("a haft needs at least one leaf")
    if len(set(leaves)) != len(leaves):
        raise HaftError("leaf ids must be distinct")
    ids = iter(internal_ids) if internal_ids is not None else _auto_ids()
    nodes: dict[NodeId, HaftNode] = {}

    def build(lo: int, hi: int) -> HaftNode:
        size = hi - lo
        if size == 1:
            node = HaftNode(leaves[lo])
            nodes[node.id] = node
            return node
        # largest power of two strictly below size, or half when size is one
        split = 1 << (size.bit_length() - 1)
        if split == size:
            split //= 2
        left = build(lo, lo + split)
        right = build(lo + split, hi)
        return _join(nodes, next(ids), left, right)

    root = build(0, len(leaves))
    return Haft(root.id, nodes)


def depth(haft: Haft) -> int:
    return haft.height


def binary_decomposition(l: int) -> list[int]:
    """Powers of two summing to ``l``, in descending order."""
    if l < 1:
        raise HaftError(f"binary decomposition needs l >= 1, got {l}")
    return [1 << i for i in reversed(range(l.bit_length())) if l >> i & 1]


def is_primary_root(haft: Haft, node_id: NodeId) -> bool:
    node = haft.nodes[node_id]
    if not node.is_complete:
        return False
    return node.parent is None or not haft.nodes[node.parent].is_complete


def shape(haft: Haft, node_id: NodeId | None = None) -> HaftShape:
    """Canonical shape: leaf count for complete trees, else (left, right)."""
    node = haft.nodes[haft.root if node_id is None else node_id]
    if node.is_complete:
        return node.leaf_count
    return (shape(haft, node.left), shape(haft, node.right))


@dataclass
class StripResult:
    forest: list[Haft]
    removed: list[NodeId]


def _spine(haft: Haft) -> tuple[list[NodeId], list[NodeId]]:
    """Primary roots (largest first) and the joining nodes above them."""
    roots, removed = [], []
    nid = haft.root
    while not haft.nodes[nid].is_complete:
        node = haft.nodes[nid]
        removed.append(nid)
        roots.append(node.left)
        nid = node.right
    roots.append(nid)
    return roots, removed


def strip(haft: Haft) -> StripResult:
    """Split a haft into its complete subtrees by cutting the right spine."""
    roots, removed = _spine(haft)
    return StripResult([haft.subtree(r) for r in roots], removed)


def merge(hafts: Iterable[Haft], spare_nodes: Iterable[NodeId] = ()) -> Haft:
    """Merge hafts into the haft over the union of their leaves.

    Joining nodes are taken first from the nodes that stripping frees, then
    from ``spare_nodes``.  Raises :class:`SpareNodeError` when both run dry.
    Nodes below the primary roots are shared with the inputs, which are left
    unchanged.
    """
    nodes: dict[NodeId, HaftNode] = {}
    roots: list[HaftNode] = []
    pool: deque[NodeId] = deque()
    for h in hafts:
        prs, removed = _spine(h)
        nodes.update(h.nodes)
        for nid in removed:
            del nodes[nid]
        for nid in prs:
            node = dataclasses.replace(h.nodes[nid], parent=None)
            nodes[nid] = node
            roots.append(node)
        pool.extend(removed)
    if not roots:
        raise HaftError("nothing to merge")
    pool.extend(spare_nodes)
    needed = len(roots) - 1
    if len(pool) < needed:
        raise SpareNodeError(needed - len(pool))

    # pairing pass; sort is stable, ties keep input order
    roots.sort(key=lambda n: n.leaf_count)
    i = 0
    while i < len(roots) - 1:
        a, b = roots[i], roots[i + 1]
        if a.leaf_count == b.leaf_count:
            joined = _join(nodes, pool.popleft(), a, b)
            del roots[i : i + 2]
            sizes = [r.leaf_count for r in roots]
            roots.insert(bisect.bisect_right(sizes, joined.leaf_count), joined)
        else:
            i += 1
    # chaining pass: larger tree always becomes the left child
    acc = roots[0]
    for tree in roots[1:]:
        acc = _join(nodes, pool.popleft(), tree, acc)
    return Haft(acc.id, nodes)


def validate_haft(haft: Haft) -> tuple[bool, str | None]:
    """Check every haft invariant; returns (ok, first violation)."""
    nodes = haft.nodes
    if haft.root not in nodes:
        return False, f"root {haft.root!r} missing"
    if nodes[haft.root].parent is not None:
        return False, f"root {haft.root!r} has a parent"
    seen = set()
    complete: dict[NodeId, bool] = {}
    order = []
    stack = [haft.root]
    while stack:
        nid = stack.pop()
        if nid in seen:
            return False, f"node {nid!r} reached twice"
        seen.add(nid)
        order.append(nid)
        node = nodes.get(nid)
        if node is None:
            return False, f"dangling child {nid!r}"
        if (node.left is None) != (node.right is None):
            return False, f"internal node {nid!r} does not have exactly two children"
        for child in (node.left, node.right):
            if child is not None:
                if child not in nodes:
                    return False, f"dangling child {child!r}"
                if nodes[child].parent != nid:
                    return False, f"parent link of {child!r} is not {nid!r}"
                stack.append(child)
    if len(seen) != len(nodes):
        return False, "unreachable nodes present"
    for nid in reversed(order):
        node = nodes[nid]
        if node.kind == "leaf":
            if node.height != 0 or node.leaf_count != 1:
                return False, f"leaf {nid!r} has height {node.height}, leaf_count {node.leaf_count}"
            complete[nid] = True
            continue
        left, right = nodes[node.left], nodes[node.right]
        if node.leaf_count != left.leaf_count + right.leaf_count:
            return False, f"leaf_count mismatch at {nid!r}"
        if node.height != 1 + max(left.height, right.height):
            return False, f"height mismatch at {nid!r}"
        if not complete[left.id]:
            return False, f"left-completeness violated at {nid!r}"
        if left.leaf_count < right.leaf_count:
            return False, f"left-completeness violated at {nid!r}: left smaller than right"
        complete[nid] = complete[right.id] and left.height == right.height
    return True, None
