from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retreet import corpus
from retreet.blocks import MAIN, SpeculatedCall, StraightCode, build_block_table
from retreet.lang import check_program, parse_program
from retreet.lang.ast import Add, Call, Const, Field, FieldAssign, Loc, Sub, Var, VarAssign
from retreet.logic import Equivalent, lia_equivalent
from retreet.oracle import enumerate_trees, interpret_all
from retreet.semantics import (
    MissingGhost,
    SymbolicValuation,
    UnknownSymbol,
    ghost,
    match_constraint,
    path_condition,
    speculative_execute,
    wp,
    wp_condition,
)
from retreet.semantics.formula import TOP, Lin, conj, eq, evaluate, geq, gt, has_structural, symbols

from strategies import formulas


def test_wp_single_assignment():
    code = [VarAssign("v", Add(Var("v"), Const(1)))]
    assert wp(code, gt(Lin.sym("v"))) == gt(Lin.of({"v": 1}, 1))


def test_wp_two_steps_from_the_small_example():
    t = build_block_table(corpus.load("wp_example"))
    s1 = t.path_of["s2"]
    code = [e for e in s1 if isinstance(e, StraightCode)]
    # n.f < r1, pulled back through "n.f = p + 1; r1 = r0"
    phi = gt(Lin.sym("r1") - Lin.sym("u.f"))
    assert isinstance(lia_equivalent(wp(code, phi), gt(Lin.sym("r0") - Lin.of({"p": 1}, 1))), Equivalent)


def test_wp_call_block_substitutes_the_ghost():
    t = build_block_table(corpus.load("odd_even"))
    call = t.info("s1").block
    phi = gt(Lin.of({"ls": 1, "rs": 1}, 1))
    got = wp([SpeculatedCall("s1", call)], phi)
    want = gt(Lin.of({ghost("M", "s1"): 1, "rs": 1}, 1))
    rng = random.Random(7)
    for _ in range(20):
        env = {s: rng.randint(-9, 9) for s in symbols(got) | symbols(want)}
        assert evaluate(got, env) == evaluate(want, env)


def test_wp_rejects_symbols_outside_the_record():
    t = build_block_table(corpus.load("odd_even"))
    m = SymbolicValuation.for_function(t, "Odd")
    assert m.domain() == {"M.s1", "M.s2"}
    with pytest.raises(UnknownSymbol):
        wp([], gt(Lin.sym("M.s5")), m)


def test_wp_condition_examples():
    t = build_block_table(corpus.load("wp_example"))
    got = wp_condition(t, "c1", polarity=False)
    want = geq(Lin.of({"M.p": 1}, 1), Lin.sym("M.r0"))
    assert isinstance(lia_equivalent(got, want), Equivalent)
    oe = build_block_table(corpus.load("odd_even"))
    nil = wp_condition(oe, "c1", polarity=False)
    assert has_structural(nil) and symbols(nil) == set()
    tt = build_block_table(check_program(parse_program("Main(n){ if (true) { x = 1 } else { x = 2 } }")))
    assert wp_condition(tt, "c0") == TOP


def test_match_constraint():
    t = build_block_table(corpus.load("wp_example"))
    direction, eqs = match_constraint(t, MAIN, "s0")
    assert direction == ()
    assert isinstance(lia_equivalent(eqs, conj(eq(Lin.sym("N.p")), eq(Lin.sym("N.r0")))), Equivalent)
    src = "F(n, p){ return p }\nMain(n){ if (n == nil) {} else { x = F(n.r, 0) } }"
    tc = build_block_table(check_program(parse_program(src)))
    (call,) = tc.all_calls
    direction, eqs = match_constraint(tc, MAIN, call)
    assert direction == ("r",)
    assert isinstance(lia_equivalent(eqs, eq(Lin.sym("N.p"))), Equivalent)
    oe = build_block_table(corpus.load("odd_even"))
    assert match_constraint(oe, MAIN, "s9")[0] == ()


def test_path_condition_of_the_small_example():
    t = build_block_table(corpus.load("wp_example"))
    pc = path_condition(t, "s0", "s2")
    assert pc.direction_str() == "v = u.l"
    want = geq(Lin.of({"M.p": 1}, 1), Lin.sym("M.r0"))
    assert isinstance(lia_equivalent(pc.arith, want), Equivalent)
    assert [str(c.formula) for c in pc.structural] == ["!(isNil(u))"]


def test_path_condition_without_conditions_is_the_match():
    t = build_block_table(corpus.load("odd_even"))
    pc = path_condition(t, MAIN, "s8")
    assert pc.conds == () and pc.arith == TOP


def test_path_condition_into_a_guarded_block():
    t = build_block_table(corpus.load("odd_even"))
    pc = path_condition(t, "s2", "s7")
    assert [(c.cond_id, c.polarity) for c in pc.conds] == [("c1", False)]
    assert pc.arith == TOP


# -- speculative execution ---------------------------------------------------------


@pytest.fixture(scope="module")
def oe():
    return build_block_table(corpus.load("odd_even"))


def test_speculative_even_on_a_node(oe):
    tr = speculative_execute(oe, "Even", {}, {"s5": 3, "s6": 0}, is_nil=lambda path: len(path) > 0)
    assert tr.blocks == ["s5", "s6", "s7"]
    assert tr.returns == {0: 3}


def test_speculative_odd_on_nil(oe):
    tr = speculative_execute(oe, "Odd", {}, {}, is_nil=lambda path: True)
    assert tr.blocks == ["s0"]
    assert tr.returns == {0: 0}


def test_speculative_single_block():
    t = build_block_table(check_program(parse_program("Main(n){ return 0 }")))
    assert len(speculative_execute(t, "Main", {}, {}).records) == 1


def test_speculative_missing_ghost(oe):
    with pytest.raises(MissingGhost):
        speculative_execute(oe, "Even", {}, {}, is_nil=lambda path: False)


@settings(max_examples=100, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5), st.booleans())
def test_speculative_determinism(a, b, nil):
    t = build_block_table(corpus.load("wp_example"))
    runs = [
        speculative_execute(t, "Func", {"p": a, "r0": b}, {"s2": 0}, is_nil=lambda path: nil and not path)
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def _layers(tree, node, odd):
    if tree.is_nil(node):
        return 0
    own = 1 if odd else 0
    return own + _layers(tree, node + ("l",), not odd) + _layers(tree, node + ("r",), not odd)


def test_speculation_with_true_ghosts_matches_the_oracle(oe):
    p = corpus.load("odd_even_seq")
    for tree in enumerate_trees(3):
        (trace,) = interpret_all(p, tree)
        nodes = set(tree.nodes) | {n + (d,) for n in tree.nodes for d in "lr"} | {()}
        for fname, odd in (("Odd", True), ("Even", False)):
            calls = [b for b in oe.blocks_of[fname] if oe.info(b).is_call]
            for u in nodes:
                o = {b: _layers(tree, u + oe.info(b).direction, not odd) for b in calls}
                spec = speculative_execute(oe, fname, {}, o, is_nil=lambda path, u=u: tree.is_nil(u + path))
                seen = [it.block for it in trace.iterations if it.node == u and oe.function_of(it.block) == fname]
                assert [b for b in spec.blocks if not oe.info(b).is_call] == seen
                assert spec.returns[0] == _layers(tree, u, odd)


# -- wp soundness ------------------------------------------------------------------

LOCALS = ("x", "y", "z")
FIELDS = ((), ("l",))


@st.composite
def aexpr(draw):
    atoms = [Var(v) for v in LOCALS] + [Field(Loc("n", p), "f") for p in FIELDS]
    terms = draw(st.lists(st.one_of(st.sampled_from(atoms), st.integers(0, 1).map(Const)), min_size=1, max_size=3))
    e = terms[0]
    for t in terms[1:]:
        e = draw(st.sampled_from((Add, Sub)))(e, t)
    return e


@st.composite
def code(draw):
    out = []
    for _ in range(draw(st.integers(0, 5))):
        kind = draw(st.sampled_from(("var", "field", "call")))
        if kind == "var":
            out.append(VarAssign(draw(st.sampled_from(LOCALS)), draw(aexpr())))
        elif kind == "field":
            out.append(FieldAssign(Loc("n", draw(st.sampled_from(FIELDS))), "f", draw(aexpr())))
        else:
            bid = f"s{len(out)}"
            out.append(SpeculatedCall(bid, Call((draw(st.sampled_from(LOCALS)),), "G", Loc("n", ("l",)))))
    return out


def _value(e, env):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Field):
        return env[".".join(("u",) + e.loc.path + (e.name,))]
    if isinstance(e, Add):
        return _value(e.left, env) + _value(e.right, env)
    return _value(e.left, env) - _value(e.right, env)


def _execute(code, env):
    env = dict(env)
    for c in code:
        if isinstance(c, VarAssign):
            env[c.name] = _value(c.value, env)
        elif isinstance(c, FieldAssign):
            env[".".join(("u",) + c.loc.path + (c.name,))] = _value(c.value, env)
        else:
            env[c.call.results[0]] = env[ghost("M", c.block)]
    return env


STATE_SYMS = LOCALS + ("u.f", "u.l.f")


@settings(max_examples=1000, deadline=None)
@given(code(), formulas(2, STATE_SYMS), st.lists(st.integers(-8, 8), min_size=10, max_size=10))
def test_wp_soundness(c, phi, values):
    sigma = dict(zip(STATE_SYMS, values))
    for i in range(5):
        sigma[ghost("M", f"s{i}")] = values[5 + i]
    assert evaluate(wp(c, phi), sigma) == evaluate(phi, _execute(c, sigma))
