from __future__ import annotations

import pytest
from hypothesis import HealthCheck, given, settings

from retreet import corpus
from retreet.bisim import find_bisimulation, match_noncalls
from retreet.blocks import build_block_table
from retreet.lang import check_program, parse_program
from retreet.lang.ast import Call
from retreet.logic import consistent_condition_sets
from retreet.mso import ProgramEncoding, Witness, bounded_conflict, bounded_race, build_conflict, build_datarace, decode_witness
from retreet.oracle import (
    BudgetExceeded,
    ConcreteTree,
    Confirmed,
    Differ,
    Equal,
    NotApplicable,
    Unconfirmed,
    all_races,
    count_trees,
    enumerate_trees,
    explore,
    interpret_all,
    oracle_datarace,
    oracle_equivalent,
    replay_difference,
    replay_witness,
    sweep_equivalence,
    sweep_race,
)

from strategies import programs

ROOT = ConcreteTree.make([()])


def test_tree_counts():
    assert [len(list(enumerate_trees(h))) for h in range(4)] == [1, 2, 5, 26]
    assert [count_trees(h, (0,), ()) for h in range(4)] == [1, 2, 5, 26]
    assert count_trees(2, (0, 1), ("f",)) == 19
    assert len(list(enumerate_trees(0))) == 1 and list(enumerate_trees(0))[0].nodes == frozenset()


def test_tree_count_with_fields():
    # shapes of height <= 2 have 0, 1, 2, 2 and 3 nodes
    assert len(list(enumerate_trees(2, (0, 1), ("f",)))) == 1 + 2 + 4 + 4 + 8
    assert len(list(enumerate_trees(1, (0, 1, 2), ("f", "g")))) == 1 + 9


def test_tree_budget():
    with pytest.raises(BudgetExceeded):
        list(enumerate_trees(3, (0, 1), ("f", "g"), budget=100))


def test_running_example_on_one_node():
    traces = interpret_all(corpus.load("odd_even"), ROOT)
    expected = {("s0", ("l",)), ("s0", ("r",)), ("s7", ()), ("s4", ("l",)), ("s4", ("r",)), ("s3", ()), ("s10", ())}
    assert len(traces) == 20
    for tr in traces:
        assert set(tr.steps) == expected and len(tr.steps) == 7
        assert [r.const for r in tr.returns] == [1, 0]


def test_sequential_program_has_one_trace():
    for t in enumerate_trees(2):
        assert len(interpret_all(corpus.load("odd_even_seq"), t)) == 1


def test_independent_parallel_blocks():
    p = check_program(parse_program("Main(n){ if (n == nil) {} else { { n.f = 1 || n.g = 1 } } }"))
    traces = interpret_all(p, ROOT)
    assert len(traces) == 2
    assert traces[0].outcome() == traces[1].outcome()


def test_running_example_is_race_free_up_to_height_three():
    p = corpus.load("odd_even")
    assert all(oracle_datarace(p, t) is None for t in enumerate_trees(3))


def test_parallel_writes_race():
    w = oracle_datarace(corpus.load("par_write"), ROOT)
    assert w is not None
    assert w.location == ((), "f")
    stores = [dict(o[0]).get(((), "f"), 0) for o in w.outcomes]
    stores = sorted(int(getattr(s, "const", s)) for s in stores)
    assert stores == [0, 1]


def test_cycletree_parallel_race_on_num():
    res = sweep_race(corpus.load("cycletree_par"), height=2, domain=(0,))
    assert res.verdict == "race"
    assert res.witness.location[1] == "num"


def test_equivalence_examples():
    s, f, bad = (corpus.load(n) for n in ("odd_even_seq", "odd_even_fused", "odd_even_fused_bad"))
    for t in enumerate_trees(3):
        assert isinstance(oracle_equivalent(s, f, t), Equal)
        assert isinstance(oracle_equivalent(s, s, t), Equal)
        v = oracle_equivalent(s, bad, t)
        assert isinstance(v, Differ) == (len(t.nodes) >= 2)


def test_equivalence_needs_race_freedom():
    p = corpus.load("par_write")
    assert isinstance(oracle_equivalent(p, p, ROOT), NotApplicable)


def test_sweeps_match_the_manifest_for_small_programs():
    assert sweep_race(corpus.load("odd_even")).verdict == "race-free"
    assert sweep_race(corpus.load("par_write")).verdict == "race"
    r = sweep_equivalence(corpus.load("odd_even_seq"), corpus.load("odd_even_fused_bad"))
    assert r.verdict == "inequivalent"
    v = replay_difference(r.witness.tree, corpus.load("odd_even_seq"), corpus.load("odd_even_fused_bad"))
    assert isinstance(v, Confirmed) and isinstance(v.observable, Differ)


# -- invariants ---------------------------------------------------------------------


def _explore_or_skip(p, t):
    try:
        return interpret_all(p, t, budget=2_000)
    except BudgetExceeded:
        return None


def _calls(s):
    if isinstance(s, Call):
        yield s
    for c in getattr(s, "stmts", ()):
        yield from _calls(c)
    for k in ("then", "orelse", "left", "right", "block"):
        if hasattr(s, k):
            yield from _calls(getattr(s, k))
    for a in getattr(s, "assigns", ()):
        yield from _calls(a)


def _at_most_once(p, t) -> bool:
    """Static over-approximation of activations, ignoring conditions."""
    seen = []

    def go(fname, node):
        seen.append((fname, node))
        if node not in t.nodes:
            return
        for c in _calls(p.function(fname).body):
            go(c.callee, node + c.loc_arg.path)

    go(p.entry, ())
    return len(seen) == len(set(seen))


def _positions(t) -> int:
    # every node plus its nil children, which run the nil branch
    return 2 * len(t.nodes) + 1


@pytest.mark.parametrize("name", ["odd_even", "odd_even_seq", "odd_even_fused", "swap_incr", "css", "cycletree"])
def test_step_bound_on_the_corpus(name):
    p = corpus.load(name)
    table = build_block_table(p)
    for t in enumerate_trees(2):
        assert _at_most_once(p, t)
        tr = interpret_all(p, t, budget=200_000)[0]
        assert len(tr.iterations) <= len(table.all_blocks) * _positions(t)


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs(max_depth=1))
def test_step_bound_confluence_and_determinism(p):
    table = build_block_table(p)
    for t in enumerate_trees(2):
        traces = _explore_or_skip(p, t)
        if traces is None:
            continue
        if _at_most_once(p, t):
            for tr in traces:
                assert len(tr.iterations) <= len(table.all_blocks) * _positions(t)
                assert len(set(tr.steps)) == len(tr.steps)
        assert _explore_or_skip(p, t) == traces
        if explore(p, t, budget=50_000).race is None:
            assert len({tr.outcome() for tr in traces}) == 1


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs(max_depth=1, helpers=False))
def test_programs_without_parallelism_have_one_trace(p):
    from retreet.lang.ast import Par

    def has_par(s):
        return isinstance(s, Par) or any(has_par(c) for c in getattr(s, "stmts", ())) or any(
            has_par(getattr(s, k)) for k in ("then", "orelse") if hasattr(s, k)
        )

    for t in enumerate_trees(2):
        traces = interpret_all(p, t)
        if not has_par(p.function("Main").body):
            assert len(traces) == 1


# -- replay -------------------------------------------------------------------------


def _enc(name):
    t = build_block_table(corpus.load(name))
    return ProgramEncoding(t, consistent_condition_sets(t))


def test_replay_fusion_witness():
    e1, e2 = _enc("odd_even_seq"), _enc("odd_even_fused_bad")
    rel = find_bisimulation(e1.table, e2.table).relation
    q = build_conflict(e1, e2, rel, match_noncalls(e1.table, e2.table))
    w = decode_witness(q, bounded_conflict(q, 2))
    v = replay_witness(w, corpus.load("odd_even_seq"), corpus.load("odd_even_fused_bad"))
    assert isinstance(v, Confirmed)
    assert v.observable is not None and isinstance(v.observable, Differ)


def test_replay_cycletree_race_witness():
    q = build_datarace(_enc("cycletree_par"))
    w = decode_witness(q, bounded_race(q, 2))
    assert isinstance(replay_witness(w, corpus.load("cycletree_par")), Confirmed)


def test_replay_negative_control():
    w = Witness(
        kind="race",
        tree=[()],
        configurations=[],
        labels={},
        conflict={"first": ("s0", ()), "second": ("s1", ("l",)), "node": (), "location": "f"},
    )
    assert isinstance(replay_witness(w, corpus.load("par_write")), Unconfirmed)
    fake = Witness(
        kind="conflict",
        tree=[(), ("l",)],
        configurations=[],
        labels={},
        conflict={"first": ("s3", ()), "second": ("s7", ()), "node": (), "location": "Odd.ret0"},
    )
    v = replay_witness(fake, corpus.load("odd_even_seq"), corpus.load("odd_even_fused"))
    assert isinstance(v, Unconfirmed)


def test_all_races_lists_both_writes():
    races = all_races(corpus.load("par_write"), ROOT)
    assert {frozenset((r.first, r.second)) for r in races} == {frozenset({("s0", ()), ("s1", ())})}
