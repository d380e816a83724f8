import pytest

from forgiving.adversary import Delete, random_trace
from forgiving.graph import ForgivingGraph, InvalidArgument, Ref, RootInfo, compute_haft, edge_key
from forgiving.haft import is_primary_root, shape, validate_haft
from forgiving.metrics import check_structure
from forgiving.netsim import ProtocolError

from oracles import haft_shape


def star(n):
    return ForgivingGraph.from_edges([(0, i) for i in range(1, n)])


def only_rt(fg):
    trees = fg.reconstruction_trees()
    assert len(trees) == 1
    return trees[0]


def leaf(p, q, of=None):
    """Real ref of processor ``of`` (default p) for edge p-q."""
    return Ref(p if of is None else of, edge_key(p, q), 0)


# ---------------------------------------------------------------- init


def test_fresh_records():
    fg = ForgivingGraph.from_edges([(0, 1)])
    for v, w in ((0, 1), (1, 0)):
        rec = fg.procs[v].records[edge_key(0, 1)]
        assert not rec.hashelper
        assert rec.rt_parent is None
        assert rec.endpoint == leaf(v, w, of=w)
        assert rec.representative == leaf(v, w, of=v)


def test_fresh_cycle_image():
    fg = ForgivingGraph.from_edges([(0, 1), (1, 2), (0, 2)])
    assert fg.image_graph() == {0: {1, 2}, 1: {0, 2}, 2: {0, 1}}
    assert fg.image_graph() == fg.insert_only_graph()
    assert len(fg.current_graph()) == 6


def test_neighbor_of_neighbor_tables():
    fg = ForgivingGraph.from_edges([(0, 1), (1, 2)])
    assert fg.procs[0].neighbor_cache == {1: frozenset({0, 2})}
    fg.insert(3, [2])
    assert fg.procs[1].neighbor_cache[2] == frozenset({1, 3})


def test_insert_errors():
    fg = ForgivingGraph.from_edges([(0, 1)])
    with pytest.raises(InvalidArgument):
        fg.insert(2, [])
    with pytest.raises(InvalidArgument):
        fg.insert(2, [9])
    with pytest.raises(InvalidArgument):
        fg.insert(1, [0])
    fg.delete_fix(1)
    with pytest.raises(InvalidArgument):
        fg.insert(2, [1])


def test_delete_errors():
    fg = ForgivingGraph.from_edges([(0, 1)])
    with pytest.raises(InvalidArgument):
        fg.delete_fix(5)
    fg.delete_fix(0)
    with pytest.raises(InvalidArgument):
        fg.delete_fix(0)


def test_delete_last_processor():
    fg = ForgivingGraph.from_edges([(0, 1)])
    fg.delete_fix(0)
    stats = fg.delete_fix(1)
    assert fg.image_graph() == {}
    assert stats.messages_total == 0


def test_insert_after_delete():
    fg = star(5)
    fg.delete_fix(0)
    fg.insert(9, [2])
    rec = fg.procs[9].records[edge_key(2, 9)]
    assert rec.endpoint == leaf(9, 2, of=2)
    assert edge_key(2, 9) in fg.procs[2].records
    assert 9 in fg.image_graph()[2]
    assert check_structure(fg) == []


# ------------------------------------------------------------- deletion


def test_delete_star_center():
    fg = star(5)
    fg.delete_fix(0)
    t = only_rt(fg)
    assert shape(t) == 4
    assert len(t.internal_nodes()) == 3
    assert sorted(t.leaves()) == [leaf(0, i, of=i) for i in range(1, 5)]
    assert all(len(n) <= 3 for n in fg.image_graph().values())
    assert check_structure(fg) == []


def test_delete_degree_one():
    fg = ForgivingGraph.from_edges([(0, 1), (1, 2)])
    stats = fg.delete_fix(0)
    assert fg.reconstruction_trees() == []
    assert stats.merge_rounds == 0
    assert fg.image_graph() == {1: {2}, 2: {1}}


def test_four_single_leaves_two_rounds():
    fg = star(5)
    stats = fg.delete_fix(0)
    assert stats.anchors == 4
    assert stats.merge_rounds == 2


@pytest.mark.parametrize("n", [3, 5, 8, 9, 17, 33])
def test_star_rt_is_haft(n):
    fg = star(n)
    fg.delete_fix(0)
    t = only_rt(fg)
    assert validate_haft(t) == (True, None)
    assert shape(t) == haft_shape(n - 1)


def test_delete_helper_host_merges_fragments():
    fg = star(9)
    fg.delete_fix(0)
    t = only_rt(fg)
    host = min(r.proc for r in t.internal_nodes())
    stats = fg.delete_fix(host)
    assert stats.anchors >= 2
    t = only_rt(fg)
    assert validate_haft(t) == (True, None)
    assert shape(t) == haft_shape(7)
    assert sorted(r.proc for r in t.leaves()) == sorted(set(range(1, 9)) - {host})
    assert check_structure(fg) == []


def test_gprime_keeps_deleted():
    fg = star(5)
    fg.delete_fix(0)
    assert fg.insert_only_graph()[0] == {1, 2, 3, 4}
    assert 0 not in fg.image_graph()


def test_gprime_degrees_monotone():
    tr = random_trace(10, 60, 0.4, 3)
    fg = ForgivingGraph.from_edges(tr.initial_graph)
    prev = {v: len(n) for v, n in fg.gprime.items()}
    for act in tr.actions:
        if isinstance(act, Delete):
            fg.delete_fix(act.id)
        else:
            fg.insert(act.id, act.neighbors)
        cur = {v: len(n) for v, n in fg.gprime.items()}
        assert all(cur[v] >= d for v, d in prev.items())
        prev = cur


# ------------------------------------------------------- primary roots


def test_find_pr_roots_intact_haft7():
    fg = star(8)
    fg.delete_fix(0)
    t = only_rt(fg)
    pr, red, _ = fg.find_pr_roots(t.leaves()[0])
    assert sorted((fg.count(r) for r in pr), reverse=True) == [4, 2, 1]
    assert len(red) == 2


def test_find_pr_roots_complete():
    fg = star(9)
    fg.delete_fix(0)
    t = only_rt(fg)
    pr, red, _ = fg.find_pr_roots(t.leaves()[5])
    assert pr == [t.root]
    assert red == []


def test_find_pr_roots_after_leaf_loss():
    fg = star(8)
    fg.delete_fix(0)
    t = only_rt(fg)
    # the lone leaf under the right spine is the seventh; the 2-tree holds leaves 5 and 6
    lost = t.leaves()[5].proc
    fg.net.begin_repair(lost, 1, 8)
    h = fg.helper(t.nodes[t.leaves()[5]].parent)
    h.count -= 1  # childrencount after the "lost" update
    sib = t.leaves()[4]
    h.left = sib if h.left == sib else None
    h.right = sib if h.right == sib else None
    fg.procs[lost].records[t.leaves()[5].edge].rt_parent = None
    pr, red, _ = fg.find_pr_roots(t.leaves()[0])
    fg.net.end_repair()
    assert sorted((fg.count(r) for r in pr), reverse=True) == [4, 1, 1]
    assert len(red) == 3


def test_test_primary_root_agrees_with_haft_core():
    for n in (5, 8, 9, 12, 14):
        fg = star(n)
        fg.delete_fix(0)
        t = only_rt(fg)
        for r in t.nodes:
            assert fg.test_primary_root(r) == is_primary_root(t, r)


# --------------------------------------------------------- compute_haft


def R(p, s=0):
    return Ref(p, (p, 100 + p), s)


def roots(*spec):
    # (proc, count, height)
    return [RootInfo(R(p, 1 if c > 1 else 0), c, h, R(p)) for p, c, h in spec]


def test_compute_haft_two_singletons():
    joins = compute_haft(roots((1, 1, 0)), roots((2, 1, 0)), [])
    assert len(joins) == 1
    j = joins[0]
    assert (j.count, j.height) == (2, 1)
    assert j.new.proc == 1 and j.rep == R(2)


def test_compute_haft_binary_addition():
    joins = compute_haft(roots((1, 4, 2), (2, 1, 0)), roots((3, 2, 1)), roots((4, 1, 0)))
    assert [(j.count, j.height) for j in joins] == [(2, 1), (4, 2), (8, 3)]
    # 1 + 1: host is the first root's representative, rep inherited from the second
    assert joins[0].new.proc == 2 and joins[0].rep == R(4)
    assert joins[-1].count == 8


def test_compute_haft_one_one_two():
    joins = compute_haft(roots((1, 1, 0)), roots((2, 1, 0)), roots((3, 2, 1)))
    assert [j.count for j in joins] == [2, 4]
    assert {joins[0].left, joins[0].right} == {R(1), R(2)}


def test_compute_haft_chain_larger_left():
    joins = compute_haft(roots((1, 4, 2)), roots((2, 2, 1)), [])
    assert len(joins) == 1
    assert joins[0].left == R(1, 1) and joins[0].right == R(2, 1)
    assert joins[0].new.proc == 1


def test_compute_haft_overlap_rejected():
    with pytest.raises(ProtocolError):
        compute_haft(roots((1, 1, 0)), roots((1, 1, 0)))


def test_compute_haft_duplicate_host_rejected():
    a = RootInfo(R(1), 1, 0, R(7))
    b = RootInfo(R(2), 1, 0, R(8))
    c = RootInfo(R(3), 1, 0, R(7))
    d = RootInfo(R(4), 1, 0, R(9))
    with pytest.raises(ProtocolError):
        compute_haft([a, b, c, d])


# ------------------------------------------------------ merge mechanics


def test_anchor_handoff_logged():
    tr = random_trace(8, 25, 0.5, 0)
    fg = ForgivingGraph.from_edges(tr.initial_graph)
    for act in tr.actions:
        if isinstance(act, Delete):
            fg.delete_fix(act.id)
        else:
            fg.insert(act.id, act.neighbors)
        assert check_structure(fg) == []
    assert any(rec.kind == "anchor-handoff" for rec in fg.net.log)


def test_skip_red_removal_breaks_helper_count():
    fg = star(9)
    fg.delete_fix(0)
    host = min(r.proc for r in only_rt(fg).internal_nodes())
    fg.skip_red_removal = True
    fg.delete_fix(host)
    problems = check_structure(fg) + fg.repair_violations
    assert any("helpers" in p for p in problems)


def test_helper_lemma_mid_repair():
    tr = random_trace(16, 150, 0.4, 11)
    fg = ForgivingGraph.from_edges(tr.initial_graph)
    for act in tr.actions:
        if isinstance(act, Delete):
            fg.delete_fix(act.id)
        else:
            fg.insert(act.id, act.neighbors)
    assert fg.repair_violations == []
    assert fg.max_helpers_per_record <= 2
