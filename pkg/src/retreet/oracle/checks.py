"""Race detection, equivalence and witness replay by exhaustive execution."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from ..blocks import BlockTable, build_block_table
from ..lang.ast import Field, If, Par, Positive, Program, Seq
from ..lang.ast import And as BAnd, Not as BNot, Add, Sub, BlockStmt, Call, FieldAssign, Return, VarAssign
from ..lang.errors import RetreetError
from .interp import (
    DEFAULT_STATE_BUDGET,
    ExecutionError,
    Iteration,
    Machine,
    NilAccess,
    StepInfo,
    SymbolicBranch,
    iter_states,
)
from .tree import ConcreteTree, Node, enumerate_trees, node_name, shapes


@dataclass
class RaceWitness:
    tree: ConcreteTree
    first: tuple[str, Node]
    second: tuple[str, Node]
    location: tuple[Node, str]
    configurations: tuple  # call stacks of the two iterations, as (block, node) records
    traces: tuple  # (prefix + first + second, prefix + second + first) as iteration lists
    outcomes: tuple = ()  # final (store, returns) after completing each order

    def describe(self) -> str:
        (b1, n1), (b2, n2) = self.first, self.second
        node, name = self.location
        lines = [
            f"race on {self.tree.describe()}",
            f"  ({b1}, {node_name(n1)}) and ({b2}, {node_name(n2)}) both access {name} at {node_name(node)}",
        ]
        for i, tr in enumerate(self.traces, 1):
            lines.append(f"  order {i}: " + " ".join(str(it) for it in tr))
        for i, (store, rets) in enumerate(self.outcomes, 1):
            lines.append(f"  outcome {i}: {_show_store(store)} returns {_show_returns(rets)}")
        return "\n".join(lines)


def _show_store(store: tuple) -> str:
    return "{" + ", ".join(f"{node_name(n)}.{f}={v}" for (n, f), v in store) + "}"


def _show_returns(rets: tuple) -> str:
    return "(" + ", ".join(str(v) for v in rets) + ")"


@dataclass
class Exploration:
    race: Optional[RaceWitness]
    outcomes: set
    states: int


def _conflict(a: StepInfo, b: StepInfo) -> list:
    shared = (a.writes & (b.reads | b.writes)) | (b.writes & a.reads)
    return sorted(shared, key=repr)


def _complete(m: Machine, st) -> tuple:
    while True:
        paths = m.enabled(st)
        if not paths:
            return m.final(m.drain(st))
        st, _ = m.step(st, paths[0])


def _races_at(m: Machine, st, prefix: tuple, tree: ConcreteTree) -> Iterable[RaceWitness]:
    paths = m.enabled(st)
    if len(paths) < 2:
        return
    infos = [m.step(st, p) for p in paths]
    for (pa, (sa, ia)), (pb, (sb, ib)) in itertools.combinations(zip(paths, infos), 2):
        shared = _conflict(ia, ib)
        if not shared:
            continue
        after_ab, second_ab = m.step(sa, pb)
        after_ba, second_ba = m.step(sb, pa)
        yield RaceWitness(
            tree=tree,
            first=(ia.iteration.block, ia.iteration.node),
            second=(ib.iteration.block, ib.iteration.node),
            location=m.location(shared[0], st, sa, sb),
            configurations=(
                tuple(m.frame_records(ia.frame, sa)) + ((ia.iteration.block, ia.iteration.node),),
                tuple(m.frame_records(ib.frame, sb)) + ((ib.iteration.block, ib.iteration.node),),
            ),
            traces=(
                list(prefix) + [ia.iteration, second_ab.iteration],
                list(prefix) + [ib.iteration, second_ba.iteration],
            ),
            outcomes=(_complete(m, after_ab), _complete(m, after_ba)),
        )


def explore(
    p: Program,
    t: ConcreteTree,
    stop_at_race: bool = True,
    budget: int = DEFAULT_STATE_BUDGET,
    table: Optional[BlockTable] = None,
) -> Exploration:
    """Visit every reachable state once, collecting races and final outcomes."""
    m = Machine(p, t, table)
    race = None
    outcomes = set()
    n = 0
    for st, prefix in iter_states(m, budget):
        n += 1
        if race is None:
            race = next(iter(_races_at(m, st, prefix, t)), None)
            if race is not None and stop_at_race:
                break
        if not m.enabled(st):
            outcomes.add(m.final(m.drain(st)))
    return Exploration(race, outcomes, n)


def oracle_datarace(p: Program, t: ConcreteTree, budget: int = DEFAULT_STATE_BUDGET) -> Optional[RaceWitness]:
    return explore(p, t, True, budget).race


def all_races(p: Program, t: ConcreteTree, budget: int = DEFAULT_STATE_BUDGET) -> list[RaceWitness]:
    """One witness per racing pair of iterations (unordered)."""
    m = Machine(p, t)
    out: dict = {}
    for st, prefix in iter_states(m, budget):
        for w in _races_at(m, st, prefix, t):
            out.setdefault(frozenset((w.first, w.second)), w)
    return list(out.values())


# -- equivalence -------------------------------------------------------------------


@dataclass(frozen=True)
class Equal:
    outcome: tuple


@dataclass(frozen=True)
class Differ:
    tree: ConcreteTree
    first: tuple  # (store, returns) of P
    second: tuple  # (store, returns) of P'

    def describe(self) -> str:
        return (
            f"outcomes differ on {self.tree.describe()}\n"
            f"  first:  {_show_store(self.first[0])} returns {_show_returns(self.first[1])}\n"
            f"  second: {_show_store(self.second[0])} returns {_show_returns(self.second[1])}"
        )


@dataclass(frozen=True)
class NotApplicable:
    """Equivalence is only defined for race-free programs."""

    which: int  # 1 or 2
    race: RaceWitness


class Nondeterministic(RetreetError):
    """A program with no race produced two outcomes: the interpreter is broken."""


def _single_outcome(ex: Exploration) -> tuple:
    if len(ex.outcomes) != 1:
        raise Nondeterministic(f"race-free run produced {len(ex.outcomes)} outcomes")
    return next(iter(ex.outcomes))


def oracle_equivalent(
    p: Program, p2: Program, t: ConcreteTree, budget: int = DEFAULT_STATE_BUDGET
) -> Union[Equal, Differ, NotApplicable]:
    e1 = explore(p, t, True, budget)
    if e1.race:
        return NotApplicable(1, e1.race)
    e2 = explore(p2, t, True, budget)
    if e2.race:
        return NotApplicable(2, e2.race)
    o1, o2 = _single_outcome(e1), _single_outcome(e2)
    return Equal(o1) if o1 == o2 else Differ(t, o1, o2)


# -- sweeps over all small trees ------------------------------------------------------


def _cond_fields(c, out: set) -> None:
    if isinstance(c, Positive):
        _expr_fields(c.expr, out)
    elif isinstance(c, BNot):
        _cond_fields(c.arg, out)
    elif isinstance(c, BAnd):
        _cond_fields(c.left, out)
        _cond_fields(c.right, out)


def _expr_fields(e, out: set) -> None:
    if isinstance(e, Field):
        out.add(e.name)
    elif isinstance(e, (Add, Sub)):
        _expr_fields(e.left, out)
        _expr_fields(e.right, out)


def _walk(stmt):
    yield stmt
    if isinstance(stmt, If):
        yield from _walk(stmt.then)
        yield from _walk(stmt.orelse)
    elif isinstance(stmt, Seq):
        for s in stmt.stmts:
            yield from _walk(s)
    elif isinstance(stmt, Par):
        yield from _walk(stmt.left)
        yield from _walk(stmt.right)


def field_names(p: Program) -> tuple[set[str], set[str]]:
    """(fields read anywhere, fields read by a branch condition)."""
    read: set[str] = set()
    cond: set[str] = set()
    for f in p.functions:
        for s in _walk(f.body):
            if isinstance(s, If):
                _cond_fields(s.cond, cond)
                _cond_fields(s.cond, read)
            elif isinstance(s, BlockStmt):
                b = s.block
                if isinstance(b, Call):
                    for a in b.int_args:
                        _expr_fields(a, read)
                    continue
                for a in b.assigns:
                    if isinstance(a, (FieldAssign, VarAssign)):
                        _expr_fields(a.value, read)
                    elif isinstance(a, Return):
                        for _, v in a.slots():
                            _expr_fields(v, read)
    return read, cond


@dataclass
class SweepResult:
    """Outcome of checking every tree up to a height.

    ``trees`` counts the runs; ``covered`` counts the concrete trees they
    stand for (fields that never reach a branch are kept symbolic, so one
    run covers every assignment of them).
    """

    verdict: str  # "race-free", "race", "equivalent", "inequivalent", "not-applicable"
    height: int
    domain: tuple
    trees: int = 0
    covered: int = 0
    skipped: int = 0  # trees on which a program reads or writes a field of nil
    concrete_fields: tuple = ()
    symbolic_fields: tuple = ()
    witness: object = None

    def describe(self) -> str:
        head = (
            f"{self.verdict}: {self.trees} run(s) covering {self.covered} tree(s) of height <= {self.height} "
            f"with fields over {{{', '.join(map(str, self.domain))}}}"
        )
        if self.skipped:
            head += f" ({self.skipped} skipped: nil access)"
        if self.witness is not None:
            head += "\n" + self.witness.describe()
        return head


def _sweep(programs: list[Program], height: int, domain: Iterable[int], check, budget: int, tree_budget: Optional[int]):
    domain = tuple(sorted(set(domain)))
    read: set[str] = set()
    cond: set[str] = set()
    for p in programs:
        r, c = field_names(p)
        read |= r
        cond |= c
    concrete = set(cond)
    while True:
        symbolic = sorted(read - concrete)
        trees = covered = skipped = 0
        try:
            for t in enumerate_trees(height, domain, sorted(concrete), tree_budget, symbolic):
                try:
                    found = check(t)
                except NilAccess:
                    skipped += 1
                    continue
                trees += 1
                covered += len(domain) ** (len(symbolic) * len(t.nodes))
                if found is not None:
                    return found, trees, covered, skipped, concrete, symbolic
        except SymbolicBranch as e:
            if not (e.fields - concrete):
                raise
            concrete |= e.fields
            continue
        return None, trees, covered, skipped, concrete, symbolic


def sweep_race(
    p: Program,
    height: int = 2,
    domain: Iterable[int] = (0, 1),
    budget: int = DEFAULT_STATE_BUDGET,
    tree_budget: Optional[int] = 100_000,
) -> SweepResult:
    table = build_block_table(p)
    found, trees, covered, skipped, conc, sym = _sweep(
        [p], height, domain, lambda t: explore(p, t, True, budget, table).race, budget, tree_budget
    )
    return SweepResult(
        "race" if found else "race-free", height, tuple(sorted(set(domain))), trees, covered, skipped,
        tuple(sorted(conc)), tuple(sym), found,
    )


def sweep_equivalence(
    p: Program,
    p2: Program,
    height: int = 2,
    domain: Iterable[int] = (0, 1),
    budget: int = DEFAULT_STATE_BUDGET,
    tree_budget: Optional[int] = 100_000,
) -> SweepResult:
    t1, t2 = build_block_table(p), build_block_table(p2)

    def check(t: ConcreteTree):
        e1 = explore(p, t, True, budget, t1)
        if e1.race:
            return NotApplicable(1, e1.race)
        e2 = explore(p2, t, True, budget, t2)
        if e2.race:
            return NotApplicable(2, e2.race)
        o1, o2 = _single_outcome(e1), _single_outcome(e2)
        return None if o1 == o2 else Differ(t, o1, o2)

    found, trees, covered, skipped, conc, sym = _sweep([p, p2], height, domain, check, budget, tree_budget)
    if found is None:
        verdict = "equivalent"
    elif isinstance(found, NotApplicable):
        verdict = "not-applicable"
    else:
        verdict = "inequivalent"
    wit = found.race if isinstance(found, NotApplicable) else found
    return SweepResult(
        verdict, height, tuple(sorted(set(domain))), trees, covered, skipped, tuple(sorted(conc)), tuple(sym), wit
    )


# -- replaying decoded witnesses ---------------------------------------------------------


@dataclass(frozen=True)
class Confirmed:
    detail: str
    observable: Optional[Differ] = None  # for conflicts: a tree where the outputs differ


@dataclass(frozen=True)
class Unconfirmed:
    reason: str


def _run_with_steps(p: Program, t: ConcreteTree) -> list[StepInfo]:
    m = Machine(p, t)
    st = m.initial()
    out = []
    while True:
        paths = m.enabled(st)
        if not paths:
            return out
        st, info = m.step(st, paths[0])
        out.append(info)


def _find(steps: list[StepInfo], it: tuple[str, Node]) -> Optional[int]:
    for i, s in enumerate(steps):
        if (s.iteration.block, s.iteration.node) == it:
            return i
    return None


def _dependence_reversed(p: Program, p2: Program, t: ConcreteTree, w) -> Union[str, None]:
    """``None`` if P runs first-then-second with a shared access and P' the reverse, else why not."""
    (q1, x1), (q2, x2) = w.conflict["first"], w.conflict["second"]
    s1 = _run_with_steps(p, t)
    i, j = _find(s1, (q1, x1)), _find(s1, (q2, x2))
    if i is None or j is None:
        return f"the first program does not run ({q1}, {node_name(x1)}) and ({q2}, {node_name(x2)}) on this tree"
    if not i < j:
        return f"the first program runs ({q2}, {node_name(x2)}) before ({q1}, {node_name(x1)})"
    if not _conflict(s1[i], s1[j]):
        return "the two iterations of the first program share no location on this tree"
    r1, r2 = w.configurations[2][-1][0], w.configurations[3][-1][0]
    s2 = _run_with_steps(p2, t)
    a, b = _find(s2, (r1, x1)), _find(s2, (r2, x2))
    if a is None or b is None:
        return f"the second program does not run ({r1}, {node_name(x1)}) and ({r2}, {node_name(x2)}) on this tree"
    if not b < a:
        return "the second program keeps the dependent iterations in the same order"
    if not _conflict(s2[a], s2[b]):
        return "the two iterations of the second program share no location on this tree"
    return None


def _extensions(t: ConcreteTree, max_height: int) -> list[ConcreteTree]:
    return [
        ConcreteTree(s, t.values, t.symbolic)
        for s in shapes(max_height)
        if t.nodes <= s
    ]


def replay_witness(w, p: Program, p2: Optional[Program] = None, max_height: int = 2) -> Union[Confirmed, Unconfirmed]:
    """Check a decoded race or conflict witness on its tree (fields default to 0).

    A race is confirmed when the two claimed iterations can both be next to
    run and touch a common location with a write.  A conflict is confirmed
    when the first program runs the two claimed iterations in one order and
    the second program in the other, with a shared access in both; the
    result also names a tree (the witness tree or a larger one up to
    ``max_height``) on which the outputs actually differ, if there is one.
    """
    try:
        tree = ConcreteTree.make(w.tree)
    except ValueError as e:
        return Unconfirmed(f"witness tree is malformed: {e}")
    first, second = tuple(w.conflict["first"]), tuple(w.conflict["second"])
    first = (first[0], tuple(first[1]))
    second = (second[0], tuple(second[1]))
    try:
        if w.kind == "race":
            for r in all_races(p, tree):
                if {r.first, r.second} == {first, second}:
                    node, name = r.location
                    return Confirmed(f"race on {name} at {node_name(node)}:\n" + r.describe())
            return Unconfirmed(
                f"({first[0]}, {node_name(first[1])}) and ({second[0]}, {node_name(second[1])}) do not race on this tree"
            )
        if p2 is None:
            return Unconfirmed("a conflict witness needs both programs")
        why = _dependence_reversed(p, p2, tree, w)
        if why is not None:
            return Unconfirmed(why)
        observable = None
        for t in _extensions(tree, max(max_height, tree.height)):
            try:
                v = oracle_equivalent(p, p2, t)
            except NilAccess:
                continue
            if isinstance(v, Differ):
                observable = v
                break
        detail = (
            f"({first[0]}, {node_name(first[1])}) before ({second[0]}, {node_name(second[1])}) in the first program, "
            "reversed in the second"
        )
        return Confirmed(detail, observable)
    except ExecutionError as e:
        return Unconfirmed(f"the witness tree cannot be executed: {e}")


def replay_difference(t: ConcreteTree, p: Program, p2: Program) -> Union[Confirmed, Unconfirmed]:
    """Re-run both programs on a recorded tree and check their outputs still differ."""
    try:
        v = oracle_equivalent(p, p2, t)
    except ExecutionError as e:
        return Unconfirmed(f"the tree cannot be executed: {e}")
    if isinstance(v, Differ):
        return Confirmed(f"outputs differ on {t.describe()}", v)
    if isinstance(v, NotApplicable):
        return Unconfirmed(f"program {v.which} races on this tree")
    return Unconfirmed("both programs produce the same outputs on this tree")
