from __future__ import annotations

import itertools
import os
import stat

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from retreet import corpus
from retreet.blocks import build_block_table
from retreet.lang import check_program, parse_program
from retreet.logic import (
    Constraint,
    Equivalent,
    NotEquivalent,
    Sat,
    SmtBackend,
    Unknown,
    Unsat,
    brute_force_condition_sets,
    consistent_condition_sets,
    lia_equivalent,
    lia_satisfiable,
    solve,
)
from retreet.semantics.formula import Conj, Disj, Eq, Geq, Lin, Neg, conj, eq, evaluate, geq, gt

from strategies import SYMS, formulas, programs

BOX = 16


def _compile(f):
    """A Python predicate for ``f`` over the symbols a, b, c (fast box checks)."""

    def lin(x: Lin) -> str:
        return " + ".join([f"({k})*{s}" for s, k in x.terms] + [str(x.const)])

    def go(g) -> str:
        if isinstance(g, Geq):
            return f"({lin(g.lin)} >= 0)"
        if isinstance(g, Eq):
            return f"({lin(g.lin)} == 0)"
        if isinstance(g, Neg):
            return f"(not {go(g.arg)})"
        if isinstance(g, Conj):
            return "(" + " and ".join(go(a) for a in g.args) + ")"
        if isinstance(g, Disj):
            return "(" + " or ".join(go(a) for a in g.args) + ")"
        return "True" if str(g) == "true" else "False"

    return eval(f"lambda {', '.join(SYMS)}: {go(f)}")


def test_small_example_is_satisfiable():
    v = lia_satisfiable(geq(Lin.of({"M.p": 1}, 1), Lin.sym("M.r0")))
    assert isinstance(v, Sat)
    assert v.model["M.p"] + 1 >= v.model["M.r0"]


def test_integer_gap():
    x = Lin.sym("x")
    assert isinstance(lia_satisfiable(conj(gt(x), gt(Lin.num(1), x))), Unsat)


def test_parity_contradiction():
    x, y, z = Lin.sym("x"), Lin.sym("y"), Lin.sym("z")
    f = conj(eq(x.scale(2), y), eq(y, z.scale(2) + Lin.num(1)), eq(x, z))
    assert isinstance(lia_satisfiable(f), Unsat)
    # brute-force confirmation over a box
    for xv, zv in itertools.product(range(-10, 11), repeat=2):
        assert not evaluate(f, {"x": xv, "y": 2 * xv, "z": zv})


def test_equivalence_examples():
    x = Lin.sym("x")
    f = geq(x, Lin.num(3))
    assert isinstance(lia_equivalent(f, f), Equivalent)
    assert isinstance(lia_equivalent(gt(x), geq(x, Lin.num(1))), Equivalent)
    v = lia_equivalent(geq(x), gt(x))
    assert isinstance(v, NotEquivalent) and v.witness == {"x": 0}


def test_omega_needs_the_grey_shadow():
    # 27 <= 11x + 13y <= 45 and -10 <= 7x - 9y <= 4 has no integer point
    cs = [
        Constraint.make({"x": 11, "y": 13}, -27, ">="),
        Constraint.make({"x": -11, "y": -13}, 45, ">="),
        Constraint.make({"x": 7, "y": -9}, 10, ">="),
        Constraint.make({"x": -7, "y": 9}, 4, ">="),
    ]
    assert solve(cs) is None
    hits = [
        (x, y)
        for x, y in itertools.product(range(-30, 31), repeat=2)
        if 27 <= 11 * x + 13 * y <= 45 and -10 <= 7 * x - 9 * y <= 4
    ]
    assert hits == []


@settings(max_examples=400, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(formulas(3))
def test_sat_models_and_bounded_unsat(f):
    v = lia_satisfiable(f)
    assert not isinstance(v, Unknown)
    if isinstance(v, Sat):
        env = {s: v.model.get(s, 0) for s in SYMS}
        assert evaluate(f, env)
    else:
        pred = _compile(f)
        rng = range(-BOX, BOX + 1)
        assert not any(pred(a, b, c) for a in rng for b in rng for c in rng)


@settings(max_examples=150, deadline=None)
@given(formulas(2), formulas(2), formulas(2))
def test_equivalence_is_an_equivalence_relation(f, g, h):
    def eqv(a, b):
        return isinstance(lia_equivalent(a, b), Equivalent)

    assert eqv(f, f)
    assert eqv(f, g) == eqv(g, f)
    if eqv(f, g) and eqv(g, h):
        assert eqv(f, h)


# -- condition-set families --------------------------------------------------------


def test_nil_tests_of_the_running_example():
    t = build_block_table(corpus.load("odd_even"))
    fam = consistent_condition_sets(t)
    assert fam.members() == [frozenset(), frozenset({"c0", "c1"})]


def test_no_conditions():
    t = build_block_table(check_program(parse_program("Main(n){ return 0 }")))
    assert consistent_condition_sets(t).members() == [frozenset()]


def test_integer_condition_both_ways():
    t = build_block_table(corpus.load("wp_example"))
    fam = consistent_condition_sets(t)
    assert frozenset({"c1"}) in {m - {"c0", "c2"} for m in fam.members()}
    assert frozenset() in {m - {"c0", "c2"} for m in fam.members()}


@pytest.mark.parametrize("name", ["odd_even", "wp_example", "swap_incr", "css_fused", "par_write"])
def test_condsets_match_brute_force_corpus(name):
    t = build_block_table(corpus.load(name))
    if len(t.all_conds) > 6:
        pytest.skip("more than six conditions")
    assert set(consistent_condition_sets(t).members()) == set(brute_force_condition_sets(t))


@settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
@given(programs(max_depth=1).map(build_block_table).filter(lambda t: len(t.all_conds) <= 6))
def test_condsets_match_brute_force_random(t):
    fam = consistent_condition_sets(t)
    assert set(fam.members()) == set(brute_force_condition_sets(t))
    assert len(fam) == len(fam.members())
    for m in fam.members():
        assert m in fam


# -- external SMT backend plumbing -------------------------------------------------


def _fake_solver(tmp_path, stdout: str) -> str:
    path = tmp_path / "fake-smt"
    path.write_text(f"#!/bin/sh\ncat <<'OUT'\n{stdout}\nOUT\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_smt_backend_sat(tmp_path):
    binary = _fake_solver(tmp_path, "sat\n((a 3) (b (- 2)))")
    f = conj(geq(Lin.sym("a"), Lin.num(3)), geq(Lin.num(-2), Lin.sym("b")))
    v = SmtBackend(binary).check(f)
    assert isinstance(v, Sat) and v.model == {"a": 3, "b": -2}


def test_smt_backend_rejects_a_wrong_model(tmp_path):
    binary = _fake_solver(tmp_path, "sat\n((a 0))")
    assert isinstance(SmtBackend(binary).check(gt(Lin.sym("a"))), Unknown)


def test_smt_backend_unsat_and_missing_binary(tmp_path):
    binary = _fake_solver(tmp_path, "unsat")
    assert isinstance(lia_satisfiable(gt(Lin.sym("a")), SmtBackend(binary)), Unsat)
    missing = os.path.join(str(tmp_path), "nope")
    assert isinstance(SmtBackend(missing).check(gt(Lin.sym("a"))), Unknown)
