from __future__ import annotations

import json
import stat

import pytest

from retreet import corpus
from retreet.bisim import find_bisimulation, match_noncalls
from retreet.blocks import MAIN, build_block_table
from retreet.lang import check_program, parse_program
from retreet.logic import consistent_condition_sets
from retreet.mso import (
    ALLOC,
    BisimMissing,
    Counterexample,
    DecodeError,
    Encoder,
    FiniteModel,
    FormulaInvalid,
    Inconclusive,
    LabelFamily,
    ProgramEncoding,
    SolverError,
    SolverUnavailable,
    Witness,
    abstract_configurations,
    allocation_closed,
    bounded_conflict,
    bounded_race,
    build_configuration,
    build_conflict,
    build_datarace,
    build_ordered,
    build_parallel,
    decode_configuration,
    decode_witness,
    emit_ws2s,
    evaluate,
    find_solver,
    parse_solver_output,
    run_solver,
    tree_shapes,
)
from retreet.mso.bounded import _Alphabet, _labels_pair, _sets_for
from retreet.mso.ir import FalseF, TrueF, V
from retreet.oracle import enumerate_trees, interpret_all


def _enc(name_or_program) -> ProgramEncoding:
    p = corpus.load(name_or_program) if isinstance(name_or_program, str) else name_or_program
    t = build_block_table(p)
    return ProgramEncoding(t, consistent_condition_sets(t))


@pytest.fixture(scope="module")
def oe():
    return _enc("odd_even")


def _full(enc, cfg):
    alpha = _Alphabet(enc)
    return {n: next(alpha.assignments(at)) for n, at in cfg.req().items()}


def _single_model(enc, cfg, alloc, depth, lab=LabelFamily(1)):
    sets = {ALLOC: frozenset(alloc)}
    sets.update({k: frozenset(v) for k, v in _sets_for(enc, lab, cfg, _full(enc, cfg)).items()})
    return FiniteModel(depth, sets, {lab.x().name: cfg.current[1]})


def _configs_ending(enc, q, alloc, depth):
    return [c for c in abstract_configurations(enc, alloc, depth) if c.current[0] == q]


# -- configurations ----------------------------------------------------------------


def test_running_example_labeling(oe):
    alloc = frozenset({(), ("r",), ("r", "l"), ("r", "l", "l")})
    chain = ((MAIN, ()), ("s9", ()), ("s6", ("r",)), ("s1", ("r", "l")), ("s5", ("r", "l", "l")), ("s3", ("r", "l", "l")))
    (cfg,) = [c for c in _configs_ending(oe, "s3", alloc, 3) if c.records == chain]
    f = build_configuration(oe, "s3")
    m = _single_model(oe, cfg, alloc, 3)
    assert evaluate(f, m)
    # dropping one record label breaks the chain
    broken = dict(m.sets)
    broken["L1_s6"] = frozenset()
    assert not evaluate(f, FiniteModel(3, broken, m.nodes))


def test_single_block_program_forces_two_labels():
    enc = _enc(check_program(parse_program("Main(n){ return 0 }")))
    (cfg,) = abstract_configurations(enc, frozenset({()}), 1)
    assert cfg.records == ((MAIN, ()), ("s0", ()))
    m = _single_model(enc, cfg, {()}, 1)
    assert evaluate(build_configuration(enc, "s0"), m)
    extra = dict(m.sets)
    extra["L1_s0"] = frozenset({(), ("l",)})
    assert not evaluate(build_configuration(enc, "s0"), FiniteModel(1, extra, m.nodes))


def test_configurations_ending_at_s7_match_the_oracle(oe):
    p = corpus.load("odd_even")
    f = build_configuration(oe, "s7")
    for tree in enumerate_trees(2):
        alloc = frozenset(tree.nodes)
        configs = _configs_ending(oe, "s7", alloc, 2)
        for cfg in configs:
            assert evaluate(f, _single_model(oe, cfg, alloc, 2))
        reached = {it.node for tr in interpret_all(p, tree) for it in tr.iterations if it.block == "s7"}
        assert sorted(c.current[1] for c in configs) == sorted(reached)


def _pair_model(enc, a, b, alloc, depth):
    s, z = None, None
    for k in range(min(len(a.records), len(b.records))):
        if a.records[k] != b.records[k]:
            s, z = a.records[k - 1]
            break
    ca, cb = _labels_pair(enc, a, b, s, z)
    sets = {ALLOC: frozenset(alloc)}
    for lab, cfg, conds in ((LabelFamily(1), a, ca), (LabelFamily(2), b, cb)):
        sets.update({k: frozenset(v) for k, v in _sets_for(enc, lab, cfg, conds).items()})
    return FiniteModel(depth, sets, {"x1": a.current[1], "x2": b.current[1]})


def test_parallel_and_ordered_divergence(oe):
    alloc = frozenset({()})
    configs = abstract_configurations(oe, alloc, 1)
    by_path = {tuple(b for b, _ in c.records): c for c in configs}
    odd_root = by_path[(MAIN, "s8", "s3")]
    even_root = by_path[(MAIN, "s9", "s7")]
    m = _pair_model(oe, odd_root, even_root, alloc, 1)
    assert evaluate(build_parallel(oe), m)
    assert not evaluate(build_ordered(oe), m)
    # diverging inside Even at s5 vs s6
    left = by_path[(MAIN, "s9", "s5", "s0")]
    right = by_path[(MAIN, "s9", "s6", "s0")]
    m = _pair_model(oe, left, right, alloc, 1)
    assert evaluate(build_ordered(oe), m)
    assert not evaluate(build_parallel(oe), m)


def test_identical_configurations_are_neither_ordered_nor_parallel(oe):
    alloc = frozenset({()})
    cfg = [c for c in abstract_configurations(oe, alloc, 1) if c.current == ("s3", ())][0]
    one = _single_model(oe, cfg, alloc, 1, LabelFamily(1))
    two = _single_model(oe, cfg, alloc, 1, LabelFamily(2))
    m = FiniteModel(1, {**one.sets, **two.sets}, {"x1": (), "x2": ()})
    assert not evaluate(build_ordered(oe), m)
    assert not evaluate(build_parallel(oe), m)


# -- dependence --------------------------------------------------------------------


def test_overlap_follows_the_access_displacement():
    enc = _enc("swap_incr")
    e = Encoder()
    # IncrmLeft's "n.v = n.r.v + 1" at a node reads v where the child wrote it
    f = e.access_overlap(enc, "s5", V("x1"), "s6", V("x2"))
    assert evaluate(f, FiniteModel(1, {}, {"x1": ("r",), "x2": ()}))
    assert not evaluate(f, FiniteModel(1, {}, {"x1": ("l",), "x2": ()}))


def test_read_only_blocks_have_no_dependence():
    enc = _enc(check_program(parse_program("Main(n){ if (n == nil) {} else { { x = n.f || y = n.f } } }")))
    assert Encoder().access_overlap(enc, "s0", V("x1"), "s1", V("x2")) == FalseF()
    assert isinstance(bounded_race(build_datarace(enc), 2), Inconclusive)


def test_sum_blocks_meet_only_across_parent_and_child(oe):
    f = Encoder().access_overlap(oe, "s3", V("x1"), "s7", V("x2"))
    assert not evaluate(f, FiniteModel(1, {}, {"x1": (), "x2": ()}))
    assert evaluate(f, FiniteModel(1, {}, {"x1": ("l",), "x2": ()}))


# -- race and conflict queries on the bounded backend ------------------------------


def test_running_example_has_no_bounded_race(oe):
    assert isinstance(bounded_race(build_datarace(oe), 3), Inconclusive)


def test_parallel_writes_race_on_the_root():
    q = build_datarace(_enc("par_write"))
    model = bounded_race(q, 2)
    assert isinstance(model, Counterexample)
    w = decode_witness(q, model)
    assert w.conflict["node"] == () and w.conflict["location"] == "f"
    assert {w.conflict["first"][0], w.conflict["second"][0]} == {"s0", "s1"}


def test_sequential_program_race_formula_is_false():
    assert build_datarace(_enc("odd_even_seq")).formula == FalseF()


def test_cycletree_parallel_race_names_num():
    q = build_datarace(_enc("cycletree_par"))
    models = bounded_race(q, 2, all_pairs=True)
    locations = {decode_witness(q, m).conflict["location"] for m in models}
    assert "num" in locations


def _conflict(a: str, b: str):
    e1, e2 = _enc(a), _enc(b)
    res = find_bisimulation(e1.table, e2.table)
    assert res.relation is not None
    return build_conflict(e1, e2, res.relation, match_noncalls(e1.table, e2.table))


def test_conflict_needs_a_relation(oe):
    with pytest.raises(BisimMissing):
        build_conflict(oe, oe, None, match_noncalls(oe.table, oe.table))


def test_self_conflict_has_no_bounded_model():
    assert isinstance(bounded_conflict(_conflict("odd_even_seq", "odd_even_seq"), 2), Inconclusive)


def test_valid_fusion_has_no_bounded_conflict():
    assert isinstance(bounded_conflict(_conflict("odd_even_seq", "odd_even_fused"), 2), Inconclusive)


def test_invalid_fusion_conflict_is_child_to_parent_in_even():
    q = _conflict("odd_even_seq", "odd_even_fused_bad")
    model = bounded_conflict(q, 2)
    assert isinstance(model, Counterexample)
    w = decode_witness(q, model)
    (b1, n1), (b2, n2) = w.conflict["first"], w.conflict["second"]
    t = q.programs[0].table
    assert {t.function_of(b1), t.function_of(b2)} <= {"Even", "Odd"}
    assert "Even" in w.conflict["location"]
    assert {len(n1), len(n2)} == {0, 1}  # a parent and its child
    again = Witness.from_json(json.loads(w.dumps()))
    assert again == w


def test_decode_rejects_broken_labels(oe):
    q = build_datarace(oe)
    with pytest.raises(DecodeError):
        decode_configuration(oe, q.labels[0], Counterexample({ALLOC: frozenset({()})}, {}))


# -- serialization -----------------------------------------------------------------


def test_allocation_constraint_golden():
    assert emit_ws2s(allocation_closed(), ["T"]) == corpus.golden("allocation_closed.mona")


def test_true_emits_a_closed_formula():
    text = emit_ws2s(TrueF())
    assert text.startswith("ws2s;") and text.rstrip().endswith("true;")


def test_race_formula_golden(oe):
    q = build_datarace(oe)
    text = emit_ws2s(q.formula, q.set_names(), q.node_names())
    assert text == corpus.golden("odd_even_race.mona")
    assert text == emit_ws2s(q.formula, q.set_names(), q.node_names())


def test_tree_shapes_counts():
    assert [len(tree_shapes(h)) for h in range(4)] == [1, 2, 5, 26]


# -- solver output and subprocess plumbing -----------------------------------------


def test_parse_unsatisfiable():
    assert isinstance(parse_solver_output("ANALYSIS\nFormula is unsatisfiable\n"), FormulaInvalid)


def test_parse_satisfying_example():
    text = "Formula is satisfiable\n\nA satisfying example:\n\nT = {\"\", 0, 01}\nx1 = 01\nL1_s0 = {}\n"
    v = parse_solver_output(text)
    assert isinstance(v, Counterexample)
    assert v.sets["T"] == frozenset({(), ("l",), ("l", "r")})
    assert v.sets["L1_s0"] == frozenset()
    assert v.nodes["x1"] == ("l", "r")


def test_parse_garbage():
    with pytest.raises(SolverError):
        parse_solver_output("Segmentation fault")


def _script(tmp_path, body: str, code: int = 0) -> str:
    path = tmp_path / "fake-solver"
    path.write_text(f"#!/bin/sh\ncat <<'OUT'\n{body}\nOUT\nexit {code}\n")
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


def test_run_solver_archives_input_and_output(tmp_path):
    binary = _script(tmp_path, "Formula is unsatisfiable")
    work = tmp_path / "work"
    v = run_solver("ws2s;\nfalse;\n", binary, str(work), 10, "probe")
    assert isinstance(v, FormulaInvalid)
    (d,) = list(work.iterdir())
    assert sorted(p.name for p in d.iterdir()) == ["probe.mona", "probe.out"]


def test_run_solver_failure(tmp_path):
    with pytest.raises(SolverError):
        run_solver("ws2s;\n", _script(tmp_path, "error", code=3))


def test_run_solver_missing(monkeypatch):
    monkeypatch.delenv("RETREET_SOLVER_BIN", raising=False)
    with pytest.raises(SolverUnavailable):
        run_solver("ws2s;\n", None)


@pytest.mark.solver
@pytest.mark.skipif(find_solver() is None, reason="no WS2S solver configured")
def test_solver_agrees_with_the_bounded_backend(oe):
    binary = find_solver()
    q = build_datarace(_enc("par_write"))
    v = run_solver(emit_ws2s(q.formula, q.set_names(), q.node_names()), binary)
    assert isinstance(v, Counterexample)
    q = build_datarace(oe)
    assert isinstance(run_solver(emit_ws2s(q.formula, q.set_names(), q.node_names()), binary), FormulaInvalid)
