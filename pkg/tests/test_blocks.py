from __future__ import annotations

import itertools

import pytest
from hypothesis import HealthCheck, given, settings

from retreet import corpus
from retreet.blocks import (
    AccessPath,
    NotACall,
    NotStraight,
    Relation,
    build_block_table,
    block_relation,
    callees,
    describe,
    read_write_sets,
)
from retreet.lang import check_program, parse_program
from retreet.lang.ast import BlockStmt, If, Par, Seq

from strategies import programs


@pytest.fixture(scope="module")
def odd_even():
    return build_block_table(corpus.load("odd_even"))


def test_call_and_noncall_sets(odd_even):
    assert odd_even.all_calls == ["s1", "s2", "s5", "s6", "s8", "s9"]
    assert odd_even.all_non_calls == ["s0", "s3", "s4", "s7", "s10"]
    assert set(odd_even.all_calls) | set(odd_even.all_non_calls) == set(odd_even.all_blocks)


def test_single_block_main_has_empty_path():
    t = build_block_table(check_program(parse_program("Main(n){ return 0 }")))
    assert t.all_blocks == ["s0"]
    assert t.path_of["s0"] == ()


def test_straight_run_is_one_block():
    t = build_block_table(corpus.load("cycletree"))
    last = t.blocks_of["ComputeRouting"][-1]
    assert [a.name for a in t.info(last).block.assigns] == ["max", "min"]


def test_relations_from_the_running_example(odd_even):
    assert block_relation(odd_even, "s5", "s7") is Relation.PRECEDES
    assert block_relation(odd_even, "s7", "s5") is Relation.FOLLOWS
    assert block_relation(odd_even, "s0", "s1") is Relation.BRANCHES
    assert block_relation(odd_even, "s8", "s9") is Relation.PARALLEL
    assert block_relation(odd_even, "s0", "s4") is Relation.DIFFERENT_FUNCTIONS


def test_callees(odd_even):
    assert callees(odd_even, "s2") == ["s4", "s5", "s6", "s7"]
    assert callees(odd_even, "s8") == odd_even.blocks_of["Odd"]
    with pytest.raises(NotACall):
        callees(odd_even, "s0")


def test_callee_with_one_block():
    t = build_block_table(check_program(parse_program("Leaf(n){ return 0 }\nMain(n){ x = Leaf(n) }")))
    call = t.all_calls[0]
    assert callees(t, call) == t.blocks_of["Leaf"] and len(callees(t, call)) == 1


def test_rw_sum_of_results(odd_even):
    rw = read_write_sets(odd_even, "s3")
    assert {(a.disp, a.name) for a in rw.reads} >= {((), "ls"), ((), "rs")}
    assert rw.writes == frozenset({AccessPath((), "ret0", "Odd")})
    with pytest.raises(NotStraight):
        read_write_sets(odd_even, "s1")


def test_rw_left_child_read():
    src = "Incr(n){ if (n == nil) {} else { Incr(n.l)\nif (n.l == nil) {} else { n.v = n.l.v + 1 } } }\nMain(n){ Incr(n) }"
    t = build_block_table(check_program(parse_program(src)))
    (b,) = [b for b in t.all_non_calls if t.function_of(b) == "Incr"]
    rw = t.rw(b)
    assert rw.reads == frozenset({AccessPath(("l",), "v")})
    assert rw.writes == frozenset({AccessPath((), "v")})


def test_rw_constant_write():
    t = build_block_table(corpus.load("par_write"))
    assert t.rw("s0").reads == frozenset()
    assert t.rw("s0").writes == frozenset({AccessPath((), "f")})


def test_describe_is_stable():
    a = describe(build_block_table(corpus.load("par_write")))
    assert "rel s0 s1 = Parallel" in a.splitlines()
    assert a == describe(build_block_table(corpus.load("par_write")))


# -- trichotomy against an execution-based reading of the syntax tree ------------


def _executions(stmt, ids):
    """Every run of ``stmt`` as (blocks executed, happens-before pairs)."""
    if isinstance(stmt, BlockStmt):
        b = ids[id(stmt)]
        return [(frozenset({b}), frozenset())]
    if isinstance(stmt, If):
        return _executions(stmt.then, ids) + _executions(stmt.orelse, ids)
    if isinstance(stmt, Par):
        parts = [_executions(stmt.left, ids), _executions(stmt.right, ids)]
        ordered = False
    else:
        parts = [_executions(s, ids) for s in stmt.stmts]
        ordered = True
    out = []
    for combo in itertools.product(*parts):
        blocks = frozenset().union(*(c[0] for c in combo))
        hb = set().union(*(c[1] for c in combo))
        if ordered:
            for i, j in itertools.combinations(range(len(combo)), 2):
                hb |= {(a, b) for a in combo[i][0] for b in combo[j][0]}
        out.append((blocks, frozenset(hb)))
    return out


def _block_stmts(stmt):
    if isinstance(stmt, BlockStmt):
        yield stmt
    elif isinstance(stmt, If):
        yield from _block_stmts(stmt.then)
        yield from _block_stmts(stmt.orelse)
    elif isinstance(stmt, Par):
        yield from _block_stmts(stmt.left)
        yield from _block_stmts(stmt.right)
    elif isinstance(stmt, Seq):
        for s in stmt.stmts:
            yield from _block_stmts(s)


def _check_trichotomy(p):
    t = build_block_table(p)
    for f in p.functions:
        ids = {id(s): b for s, b in zip(_block_stmts(f.body), t.blocks_of[f.name])}
        runs = _executions(f.body, ids)
        for s, q in itertools.permutations(t.blocks_of[f.name], 2):
            together = [hb for blocks, hb in runs if s in blocks and q in blocks]
            before = bool(together) and all((s, q) in hb for hb in together)
            after = bool(together) and all((q, s) in hb for hb in together)
            branches = not together
            par = bool(together) and not before and not after
            assert sum([before, after, branches, par]) == 1
            expected = (
                Relation.PRECEDES if before else Relation.FOLLOWS if after else Relation.BRANCHES if branches else Relation.PARALLEL
            )
            assert block_relation(t, s, q) is expected, (f.name, s, q)


@pytest.mark.parametrize("name", ["odd_even", "cycletree_par", "css", "par_write"])
def test_trichotomy_corpus(name):
    _check_trichotomy(corpus.load(name))


@settings(max_examples=500, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs())
def test_trichotomy_random(p):
    _check_trichotomy(p)
