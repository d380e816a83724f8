import io
import json

import pytest

from forgiving.adversary import Delete, random_trace
from forgiving.graph import ForgivingGraph
from forgiving.netsim import (
    MESSAGE_SIZE_CONST,
    Message,
    Network,
    ProtocolError,
    RecoveryStats,
    clog2,
    run_recovery,
)

from oracles import ceil_log2, message_bound


def line_net(n=4):
    # refs are plain ints on a path 0-1-...-(n-1)
    alive = set(range(n))
    return Network(
        adjacent=lambda a, b: abs(a - b) == 1,
        exists=lambda r: r in alive,
        processor_of=lambda r: r,
    ), alive


def test_clog2_matches_oracle():
    for x in range(1, 2000):
        assert clog2(x) == ceil_log2(x)


def test_message_bound_d4_n16():
    assert RecoveryStats(0, 4, 16).message_bound() == 312
    assert message_bound(4, 16) == 312


def test_bounds_formulae():
    s = RecoveryStats(0, 5, 100)
    assert s.message_bound() == message_bound(5, 100)
    assert s.size_bound() == MESSAGE_SIZE_CONST * 7
    assert s.round_bound(2.0) == 2.0 * (1 + 3) * (1 + 7)


def test_delivery_next_round():
    net, _ = line_net()
    got = []
    net.handlers["probe"] = got.append
    net.begin_repair(9, 1, 4)
    net.send(Message(0, 1, "probe", ()))
    assert got == []
    net.advance_round()
    assert [m.dst for m in got] == [1]
    stats = net.end_repair()
    assert stats.rounds == 1 and stats.messages_total == 1


def test_non_adjacent_rejected():
    net, _ = line_net()
    net.begin_repair(9, 1, 4)
    with pytest.raises(ProtocolError):
        net.send(Message(0, 2, "probe", ()))


def test_link_opens_edge():
    net, _ = line_net()
    net.begin_repair(9, 1, 4)
    net.send(Message(0, 3, "probe", (), link=True))
    net.send(Message(3, 0, "probe", ()))
    net.advance_round()
    net.end_repair()
    assert not net.links


def test_undelivered_at_end_rejected():
    net, _ = line_net()
    net.begin_repair(9, 1, 4)
    net.send(Message(0, 1, "probe", ()))
    with pytest.raises(ProtocolError):
        net.end_repair()


def test_removed_destination_rejected():
    net, alive = line_net()
    net.begin_repair(9, 1, 4)
    alive.discard(1)
    with pytest.raises(ProtocolError):
        net.send(Message(0, 1, "probe", ()))


def test_unknown_kind_rejected():
    net, _ = line_net()
    net.begin_repair(9, 1, 4)
    with pytest.raises(ProtocolError):
        net.send(Message(0, 1, "gossip", ()))


def test_send_outside_repair():
    net, _ = line_net()
    with pytest.raises(ProtocolError):
        net.send(Message(0, 1, "probe", ()))


def test_per_node_counter():
    net, _ = line_net()
    net.begin_repair(9, 1, 4)
    for _ in range(5):
        net.send(Message(1, 2, "probe", ()))
    net.send(Message(1, 0, "probe", ()))
    net.advance_round()
    assert net.end_repair().max_messages_per_node >= 6


def test_empty_round_is_noop():
    net, _ = line_net()
    net.begin_repair(9, 1, 4)
    assert net.advance_round() == []
    assert net.end_repair().rounds == 0


def test_size_counts_ids():
    m = Message(0, 1, "prroots-list", ((1, 2, 0), (3, 4, 1), "tag"))
    assert m.size_ids == 2


def test_waves_run_in_lockstep():
    net, _ = line_net(6)
    net.begin_repair(9, 1, 6)
    a = [[Message(0, 1, "probe", ())], [Message(1, 2, "probe", ())]]
    b = [[Message(5, 4, "probe", ())]]
    assert net.run_waves([a, b]) == 2
    assert net.end_repair().rounds == 2


def test_delivery_order_deterministic():
    net, _ = line_net()
    seen = []
    net.handlers["probe"] = lambda m: seen.append((m.src, m.dst))
    net.begin_repair(9, 1, 4)
    for m in (Message(2, 1, "probe"), Message(0, 1, "probe"), Message(3, 2, "probe")):
        net.send(m)
    net.advance_round()
    assert seen == [(0, 1), (2, 1), (3, 2)]


def test_degree_one_recovery_trivial():
    fg = ForgivingGraph.from_edges([(0, 1), (1, 2)])
    stats = run_recovery(fg, 0)
    assert stats.merge_rounds == 0
    assert stats.violations() == []


def test_star4_within_bound():
    # centre 0 of degree 4 in a 16-node graph
    fg = ForgivingGraph.from_edges([(0, i) for i in range(1, 5)] + [(i, i + 4) for i in range(1, 12)])
    stats = run_recovery(fg, 0)
    assert (stats.degree_d, stats.n_gprime) == (4, 16)
    assert stats.messages_total <= 312
    assert stats.violations() == []


def test_random_trace_recoveries_within_bounds():
    tr = random_trace(16, 200, 0.4, 5)
    fg = ForgivingGraph.from_edges(tr.initial_graph)
    for act in tr.actions:
        if isinstance(act, Delete):
            stats = run_recovery(fg, act.id)
            assert stats.violations() == [], stats
        else:
            fg.insert(act.id, act.neighbors)


def test_message_log_format():
    fg = ForgivingGraph.from_edges([(0, i) for i in range(1, 6)])
    run_recovery(fg, 0)
    buf = io.StringIO()
    fg.net.write_log(buf)
    lines = buf.getvalue().splitlines()
    assert lines
    for line in lines:
        rec = json.loads(line)
        assert list(rec) == ["round", "src", "dst", "kind", "size"]


def test_recovery_replay_identical_logs():
    def log_of():
        tr = random_trace(12, 80, 0.5, 2)
        fg = ForgivingGraph.from_edges(tr.initial_graph)
        for act in tr.actions:
            if isinstance(act, Delete):
                run_recovery(fg, act.id)
            else:
                fg.insert(act.id, act.neighbors)
        buf = io.StringIO()
        fg.net.write_log(buf)
        return buf.getvalue()

    assert log_of() == log_of()
