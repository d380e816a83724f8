import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from forgiving.adversary import (
    Delete,
    Insert,
    Trace,
    TraceError,
    dumps_trace,
    loads_trace,
    max_degree_attack,
    random_trace,
    star_attack,
)
from forgiving.graph import ForgivingGraph


def replay(trace):
    fg = ForgivingGraph.from_edges(trace.initial_graph)
    for act in trace.actions:
        if isinstance(act, Delete):
            fg.delete_fix(act.id)
        else:
            fg.insert(act.id, act.neighbors)
        yield fg


def test_pure_growth_keeps_g_equal_gprime():
    tr = random_trace(6, 40, 0.0, 1)
    assert all(isinstance(a, Insert) for a in tr.actions)
    for fg in replay(tr):
        assert fg.image_graph() == fg.insert_only_graph()


def test_all_deletes_stop_at_one():
    tr = random_trace(8, 50, 1.0, 4)
    assert len(tr.actions) == 7
    assert all(isinstance(a, Delete) for a in tr.actions)


def test_random_trace_deterministic():
    assert dumps_trace(random_trace(16, 100, 0.4, 9)) == dumps_trace(random_trace(16, 100, 0.4, 9))
    assert dumps_trace(random_trace(16, 100, 0.4, 9)) != dumps_trace(random_trace(16, 100, 0.4, 10))


@pytest.mark.parametrize("bad", [dict(n0=1), dict(p_delete=-0.1), dict(p_delete=1.5)])
def test_random_trace_preconditions(bad):
    args = dict(n0=8, steps=10, p_delete=0.5, seed=0) | bad
    with pytest.raises(ValueError):
        random_trace(**args)


@pytest.mark.parametrize("n", [5, 257])
def test_star_attack(n):
    tr = star_attack(n)
    assert len(tr.initial_graph) == n - 1
    assert all(0 in e for e in tr.initial_graph)
    assert tr.actions == [Delete(0)]


def test_star_attack_too_small():
    with pytest.raises(ValueError):
        star_attack(2)


def test_max_degree_first_hits_star_center():
    star = [(0, i) for i in range(1, 9)]
    tr = max_degree_attack(9, 5, 0, p_delete=1.0, initial_graph=star)
    assert tr.actions[0] == Delete(0)


def test_max_degree_deterministic():
    assert dumps_trace(max_degree_attack(12, 60, 3)) == dumps_trace(max_degree_attack(12, 60, 3))


def test_max_degree_victims_are_maximal():
    tr = max_degree_attack(12, 80, 5)
    fg = ForgivingGraph.from_edges(tr.initial_graph)
    for act in tr.actions:
        if isinstance(act, Delete):
            g = fg.image_graph()
            top = max(len(n) for n in g.values())
            assert len(g[act.id]) == top
            assert act.id == min(v for v in g if len(g[v]) == top)
            fg.delete_fix(act.id)
        else:
            fg.insert(act.id, act.neighbors)


def test_generated_traces_validate():
    for tr in (random_trace(10, 80, 0.5, 2), max_degree_attack(10, 80, 2), star_attack(6)):
        tr.validate()


def test_round_trip_bytes():
    text = dumps_trace(random_trace(16, 100, 0.4, 7))
    assert dumps_trace(loads_trace(text)) == text


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(0, 60), st.floats(0, 1), st.integers(0, 2**63 - 1))
def test_round_trip_property(n0, steps, p, seed):
    tr = random_trace(n0, steps, p, seed)
    text = dumps_trace(tr)
    back = loads_trace(text)
    assert back == tr
    assert dumps_trace(back) == text


def test_format_example():
    text = '{"seed":7,"init_edges":[[0,1],[1,2]]}\n{"op":"insert","id":3,"nbrs":[0,2]}\n{"op":"delete","id":1}\n'
    tr = loads_trace(text)
    assert tr == Trace(7, [(0, 1), (1, 2)], [Insert(3, (0, 2)), Delete(1)])
    assert dumps_trace(tr) == text


@pytest.mark.parametrize(
    "text,line",
    [
        ("", 1),
        ("not json\n", 1),
        ('{"seed":1}\n', 1),
        ('{"seed":1,"init_edges":[[0,1]]}\n{"op":"delete"}\n', 2),
        ('{"seed":1,"init_edges":[[0,1]]}\n{"op":"insert","id":2,"nbrs":[0]}\n{"op":"jump","id":3}\n', 3),
        ('{"seed":1,"init_edges":[[0,1]]}\n{"op":"insert","id":2,"nbrs":[0]}\n{oops\n', 3),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(TraceError) as exc:
        loads_trace(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


@pytest.mark.parametrize(
    "actions,line",
    [
        ([Delete(5)], 2),
        ([Delete(0), Delete(0)], 3),
        ([Insert(1, (0,))], 2),
        ([Insert(3, (9,))], 2),
        ([Insert(3, ())], 2),
        ([Delete(0), Delete(1), Delete(2)], 4),
    ],
)
def test_validate_rejects(actions, line):
    tr = Trace(0, [(0, 1), (1, 2)], actions)
    with pytest.raises(TraceError) as exc:
        tr.validate()
    assert exc.value.line == line


def test_validate_rejects_disconnected_start():
    with pytest.raises(TraceError):
        Trace(0, [(0, 1), (2, 3)], []).validate()
