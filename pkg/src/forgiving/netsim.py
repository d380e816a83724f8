"""Round-based message passing for repair phases.

Messages travel one hop per round over edges of the current graph, edges of
the temporary anchor tree, or links a node opens to a node whose name it has
learned (the repair model lets nodes add edges to any named node).  Every
message is counted and logged so per-repair cost can be checked against the
O(d log n) message and O(log d log n) time bounds.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Hashable, Iterable, NamedTuple, Sequence, TextIO

# payload limit in node identifiers: size_ids <= MESSAGE_SIZE_CONST * ceil(log2 n)
MESSAGE_SIZE_CONST = 12
# round bound: rounds <= ROUND_CONST * (1 + ceil(log2 d)) * (1 + ceil(log2 n)).
# benchmarks/calibrate_rounds.py measured at most 2.625 (d = 1); frozen with headroom.
ROUND_CONST = 4

MESSAGE_KINDS = (
    "probe",
    "probe-reply",
    "prroots-list",
    "merge-blueprint",
    "anchor-handoff",
    "record-update",
)


class ProtocolError(RuntimeError):
    """The repair protocol broke one of the model's rules."""


def clog2(x: int) -> int:
    """ceil(log2 x) for x >= 1."""
    return (x - 1).bit_length() if x > 1 else 0


class Message(NamedTuple):
    src: Hashable
    dst: Hashable
    kind: str
    payload: tuple = ()
    link: bool = False  # open a link to a named node before sending

    @property
    def size_ids(self) -> int:
        return sum(1 for item in self.payload if isinstance(item, tuple))


@dataclass
class RecoveryStats:
    deleted_id: int
    degree_d: int
    n_gprime: int
    messages_total: int = 0
    max_messages_per_node: int = 0
    max_message_ids: int = 0
    rounds: int = 0
    edges_added: int = 0
    edges_dropped: int = 0
    red_nodes_removed: int = 0
    anchors: int = 0
    merge_rounds: int = 0

    def message_bound(self) -> int:
        """ceil(3d/2) * (12 ceil(log2 n) + 4)."""
        return -(-3 * self.degree_d // 2) * (12 * clog2(self.n_gprime) + 4)

    def size_bound(self) -> int:
        return MESSAGE_SIZE_CONST * max(1, clog2(self.n_gprime))

    def round_bound(self, round_const: float = ROUND_CONST) -> float:
        return round_const * (1 + clog2(max(self.degree_d, 1))) * (1 + clog2(self.n_gprime))

    def violations(self, round_const: float = ROUND_CONST) -> list[str]:
        out = []
        if self.messages_total > self.message_bound():
            out.append(
                f"messages: delete {self.deleted_id} sent {self.messages_total} > {self.message_bound()}"
            )
        if self.max_message_ids > self.size_bound():
            out.append(
                f"message size: delete {self.deleted_id} max {self.max_message_ids} ids > {self.size_bound()}"
            )
        if self.rounds > self.round_bound(round_const):
            out.append(
                f"rounds: delete {self.deleted_id} took {self.rounds} > {self.round_bound(round_const):g}"
            )
        return out

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LogRecord:
    round: int
    src: Hashable
    dst: Hashable
    kind: str
    size: int

    def to_json(self) -> str:
        return json.dumps(
            {"round": self.round, "src": str(self.src), "dst": str(self.dst), "kind": self.kind, "size": self.size},
            separators=(",", ":"),
        )


class Network:
    """Synchronous round delivery with adjacency checks and cost counters.

    ``adjacent(a, b)`` and ``exists(a)`` are supplied by the protocol state so
    the network never inspects processor records itself.
    """

    def __init__(
        self,
        adjacent: Callable[[Hashable, Hashable], bool],
        exists: Callable[[Hashable], bool],
        processor_of: Callable[[Hashable], Hashable] = lambda ref: ref,
    ):
        self._adjacent = adjacent
        self._exists = exists
        self._processor_of = processor_of
        self.handlers: dict[str, Callable[[Message], None]] = {}
        self.log: list[LogRecord] = []
        self.clock = 0
        self.pending: list[Message] = []
        self.links: set[frozenset] = set()
        self.bt_edges: set[frozenset] = set()
        self.stats: RecoveryStats | None = None
        self._sent_by: dict[Hashable, int] = {}

    # repair lifecycle -------------------------------------------------

    def begin_repair(self, deleted_id: int, degree_d: int, n_gprime: int) -> RecoveryStats:
        if self.stats is not None:
            raise ProtocolError("a repair is already in progress")
        self.stats = RecoveryStats(deleted_id, degree_d, n_gprime)
        self._sent_by = {}
        return self.stats

    def end_repair(self) -> RecoveryStats:
        if self.pending:
            raise ProtocolError(f"{len(self.pending)} message(s) undelivered at repair end")
        stats = self.stats
        stats.max_messages_per_node = max(self._sent_by.values(), default=0)
        self.links.clear()
        self.bt_edges.clear()
        self.stats = None
        return stats

    @property
    def in_repair(self) -> bool:
        return self.stats is not None

    def add_bt_edge(self, a: Hashable, b: Hashable) -> None:
        self.bt_edges.add(frozenset((a, b)))

    def move_bt_edges(self, old: Hashable, new: Hashable) -> int:
        moved = [e for e in self.bt_edges if old in e]
        for e in moved:
            self.bt_edges.discard(e)
            (other,) = e - {old} or {old}
            if other != new:
                self.bt_edges.add(frozenset((new, other)))
        return len(moved)

    def link(self, a: Hashable, b: Hashable) -> None:
        self.links.add(frozenset((a, b)))

    def forget(self, ref: Hashable) -> None:
        """Drop repair links of a node that left the graph."""
        self.links = {e for e in self.links if ref not in e}

    # delivery ---------------------------------------------------------

    def _check(self, msg: Message) -> None:
        if msg.kind not in MESSAGE_KINDS:
            raise ProtocolError(f"unknown message kind {msg.kind!r}")
        if not self._exists(msg.src):
            raise ProtocolError(f"sender {msg.src} is not in the graph")
        if not self._exists(msg.dst):
            raise ProtocolError(f"message to removed node {msg.dst}")
        pair = frozenset((msg.src, msg.dst))
        if pair in self.links or pair in self.bt_edges:
            return
        if not self._adjacent(msg.src, msg.dst):
            raise ProtocolError(f"{msg.src} is not adjacent to {msg.dst}")

    def send(self, msg: Message) -> None:
        if self.stats is None:
            raise ProtocolError("send outside a repair")
        if msg.link:
            self.link(msg.src, msg.dst)
        self._check(msg)
        self.pending.append(msg)
        stats = self.stats
        stats.messages_total += 1
        size = msg.size_ids
        stats.max_message_ids = max(stats.max_message_ids, size)
        proc = self._processor_of(msg.src)
        self._sent_by[proc] = self._sent_by.get(proc, 0) + 1
        self.log.append(LogRecord(self.clock, msg.src, msg.dst, msg.kind, size))

    def advance_round(self) -> list[Message]:
        """Deliver everything sent in the current round."""
        if not self.pending:
            return []
        batch = sorted(self.pending, key=lambda m: (m.dst, m.src, m.kind))
        self.pending = []
        self.clock += 1
        if self.stats is not None:
            self.stats.rounds += 1
        for msg in batch:
            handler = self.handlers.get(msg.kind)
            if handler is not None:
                handler(msg)
        return batch

    def run_waves(self, waves: Iterable[Sequence[Sequence[Message]]]) -> int:
        """Run several message sequences in lockstep, one batch per round.

        Each element of ``waves`` is one participant's list of per-round
        batches; participants proceed in parallel.  Returns rounds used.
        """
        waves = [w for w in waves if w]
        length = max((len(w) for w in waves), default=0)
        for i in range(length):
            for w in waves:
                if i < len(w):
                    for msg in w[i]:
                        self.send(msg)
            self.advance_round()
        return length

    # export -----------------------------------------------------------

    def write_log(self, fh: TextIO) -> None:
        """One JSON object per line: round, src, dst, kind, size."""
        for rec in self.log:
            fh.write(rec.to_json() + "\n")


def run_recovery(state, v: int) -> RecoveryStats:
    """Delete ``v`` from ``state`` and drive its repair to quiescence."""
    stats = state.delete_fix(v)
    if state.net.pending or state.net.in_repair:
        raise ProtocolError(f"repair of {v} did not reach quiescence")
    return stats
