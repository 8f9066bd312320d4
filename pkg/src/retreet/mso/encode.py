"""Configurations, their relations and the two verification queries as MSO formulas.

A configuration is represented by labels on the tree.  ``L{k}_{s}`` holds
the node ``u`` of every record ``(s, u)`` of configuration ``k`` (for a call
block, ``u`` is where the callee runs; for the current non-call block, the
node of its function).  ``C{k}_{c}`` holds the nodes where condition ``c``
is true for the record running there.  ``T`` is the set of allocated
nodes; everything outside it is nil.

Match is abstracted to its structural part: the child step from the caller
node to the callee node.  Its integer part only reaches the encoding through
the condition labels and the consistent-condition-set alphabet.

The queries factor the configuration formula: the parts that do not depend
on the current block (main at the root, Next, Prev, the alphabet) are
conjoined once per configuration, and only the Current conjunct sits inside
the disjunction over block pairs.  This is logically equivalent to repeating
the whole configuration formula in every disjunct and keeps the output
linear in the number of pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..blocks import MAIN, BlockTable, block_relation, callees, conflicting_pairs, Relation
from ..lang.errors import RetreetError
from ..logic.condsets import CondSetFamily, scoped_conditions
from .ir import (
    TRUE,
    V,
    EqN,
    In,
    IsRoot,
    Mso,
    Reach,
    all1,
    and_,
    big_and,
    big_or,
    ex1,
    iff,
    implies,
    not_,
    or_,
)


class BisimMissing(RetreetError):
    """An equivalence query was built without a verified call-block relation."""


ALLOC = "T"


@dataclass(frozen=True)
class LabelFamily:
    """Set-variable names of configuration ``index``."""

    index: int

    def L(self, bid: str) -> str:
        return f"L{self.index}_{bid}"

    def C(self, cid: str) -> str:
        return f"C{self.index}_{cid}"

    def x(self) -> V:
        return V(f"x{self.index}")


@dataclass
class ProgramEncoding:
    """Everything the encoder needs to know about one program."""

    table: BlockTable
    family: CondSetFamily
    node_level: bool = False
    nil_conds: dict[str, tuple[tuple[str, ...], bool]] = field(init=False)

    def __post_init__(self):
        self.nil_conds = {}
        for sc in scoped_conditions(self.table):
            if sc.nil_path is not None:
                positive = type(sc.formula).__name__ != "Neg"
                self.nil_conds[sc.cond_id] = (sc.nil_path, positive)
        self._pre: dict[str, set[str]] = {}

    @property
    def record_blocks(self) -> list[str]:
        """Blocks that can carry a record with successors: main and every call."""
        return [MAIN] + self.table.all_calls

    @property
    def label_blocks(self) -> list[str]:
        return [MAIN] + self.table.all_blocks

    def direction(self, bid: str) -> tuple[str, ...]:
        return self.table.info(bid).direction

    def path_literals(self, t: str) -> list[tuple[str, bool]]:
        from ..blocks import Assume

        return [(e.cond_id, e.polarity) for e in self.table.path_of[t] if isinstance(e, Assume)]

    def same_node_prefix(self, s: str) -> set[str]:
        """Blocks whose records can precede a record of ``s`` on the same node."""
        if s in self._pre:
            return self._pre[s]
        out = {s}
        frontier = [s]
        while frontier:
            b = frontier.pop()
            if b == MAIN or self.direction(b):
                continue
            for c in self.table.callers(b):
                if c not in out:
                    out.add(c)
                    frontier.append(c)
        self._pre[s] = out
        return out

    def prefix_conds(self, s: str) -> list[str]:
        funcs = {self.table.callee_of(b) for b in self.same_node_prefix(s)}
        return [c for c in self.table.conds if self.table.conds[c].function in funcs]


class Encoder:
    """Builds formulas for one or two programs; bound variable names are fresh."""

    def __init__(self):
        self._n = 0

    def fresh(self, base: str) -> str:
        self._n += 1
        return f"{base}{self._n}"

    # -- configuration pieces ------------------------------------------------

    def literals(self, enc: ProgramEncoding, lab: LabelFamily, t: str, u: V) -> Mso:
        parts = []
        for cid, pol in enc.path_literals(t):
            atom = In(u, lab.C(cid))
            parts.append(atom if pol else not_(atom))
        return big_and(parts)

    def next_(self, enc: ProgramEncoding, lab: LabelFamily, s: str, t: str, u: V) -> Mso:
        """Record (s, u) is followed by a record of block t."""
        return and_(In(u.child(*enc.direction(t)), lab.L(t)), self.literals(enc, lab, t, u))

    def dom(self, enc: ProgramEncoding, lab: LabelFamily, u: V) -> Mso:
        return big_or(In(u, lab.L(b)) for b in enc.label_blocks)

    def main_at_root(self, enc: ProgramEncoding, lab: LabelFamily) -> Mso:
        u = V(self.fresh("u"))
        return all1(u.name, iff(In(u, lab.L(MAIN)), IsRoot(u)))

    def current(self, enc: ProgramEncoding, lab: LabelFamily, q: str, x: V) -> Mso:
        """q is the current block, at x, and no other non-call block is labeled."""
        u = V(self.fresh("u"))
        others = [not_(In(u, lab.L(b))) for b in enc.table.all_non_calls if b != q]
        return and_(In(x, lab.L(q)), all1(u.name, and_(implies(In(u, lab.L(q)), EqN(u, x)), *others)))

    def next_clauses(self, enc: ProgramEncoding, lab: LabelFamily) -> Mso:
        """Every record of main or a call has exactly one successor."""
        parts = []
        for s in enc.record_blocks:
            u = V(self.fresh("u"))
            options = [self.next_(enc, lab, s, t, u) for t in callees(enc.table, s)]
            unique = []
            for i in range(len(options)):
                for j in range(i + 1, len(options)):
                    unique.append(not_(and_(options[i], options[j])))
            parts.append(all1(u.name, implies(In(u, lab.L(s)), and_(big_or(options), *unique))))
        return big_and(parts)

    def prev_clauses(self, enc: ProgramEncoding, lab: LabelFamily) -> Mso:
        """Every labeled block other than main has exactly one predecessor record."""
        parts = []
        for t in enc.table.all_blocks:
            v = V(self.fresh("v"))
            d = enc.direction(t)
            preds = []
            for s in enc.table.callers(t):
                if d:
                    u = V(self.fresh("p"))
                    preds.append(
                        ex1(u.name, and_(EqN(u.child(*d), v), In(u, lab.L(s)), self.literals(enc, lab, t, u)))
                    )
                else:
                    preds.append(and_(In(v, lab.L(s)), self.literals(enc, lab, t, v)))
            unique = []
            for i in range(len(preds)):
                for j in range(i + 1, len(preds)):
                    unique.append(not_(and_(preds[i], preds[j])))
            parts.append(all1(v.name, implies(In(v, lab.L(t)), and_(big_or(preds), *unique))))
        return big_and(parts)

    def condset_clauses(self, enc: ProgramEncoding, lab: LabelFamily) -> Mso:
        """Condition labels form a consistent set on labeled nodes and vanish elsewhere.

        Nil tests are tied to the allocation set so they agree with the tree.
        """
        u = V(self.fresh("u"))
        comps = []
        for comp in enc.family.components:
            members = []
            for m in comp.members:
                lits = [In(u, lab.C(c)) if c in m else not_(In(u, lab.C(c))) for c in comp.conds]
                members.append(big_and(lits))
            comps.append(big_or(members))
        ties = []
        for cid, (path, positive) in enc.nil_conds.items():
            nil = not_(In(u.child(*path), ALLOC))
            ties.append(iff(In(u, lab.C(cid)), nil if positive else not_(nil)))
        inside = implies(self.dom(enc, lab, u), and_(*comps, *ties))
        outside = implies(not_(self.dom(enc, lab, u)), big_and(not_(In(u, lab.C(c))) for c in enc.table.conds))
        return all1(u.name, and_(inside, outside))

    def configuration_base(self, enc: ProgramEncoding, lab: LabelFamily) -> Mso:
        """The configuration formula without its Current conjunct."""
        return and_(
            self.main_at_root(enc, lab),
            self.next_clauses(enc, lab),
            self.prev_clauses(enc, lab),
            self.condset_clauses(enc, lab),
        )

    def configuration(self, enc: ProgramEncoding, lab: LabelFamily, q: str, x: Optional[V] = None) -> Mso:
        """Labels of ``lab`` form a configuration whose current record is q at x."""
        if enc.table.info(q).is_call:
            raise ValueError(f"{q} is a call block; configurations end at non-call blocks")
        x = x or lab.x()
        return and_(self.configuration_base(enc, lab), self.current(enc, lab, q, x))

    # -- relations between two configurations ---------------------------------

    def consistent(
        self, enc: ProgramEncoding, a: LabelFamily, b: LabelFamily, s: str, t1: str, t2: str
    ) -> Mso:
        """Both configurations share every record up to (s, z), then continue with t1 and t2."""
        z = V(self.fresh("z"))
        w = V(self.fresh("w"))
        above = []
        for blk in enc.label_blocks:
            above.append(iff(In(w, a.L(blk)), In(w, b.L(blk))))
        for c in enc.table.conds:
            above.append(iff(In(w, a.C(c)), In(w, b.C(c))))
        strict_anc = and_(Reach(w, z), not_(EqN(w, z)))
        at_z = [iff(In(z, a.L(blk)), In(z, b.L(blk))) for blk in sorted(enc.same_node_prefix(s) - {s})]
        at_z += [iff(In(z, a.C(c)), In(z, b.C(c))) for c in enc.prefix_conds(s)]
        return ex1(
            z.name,
            and_(
                In(z, a.L(s)),
                In(z, b.L(s)),
                self.next_(enc, a, s, t1, z),
                self.next_(enc, b, s, t2, z),
                all1(w.name, implies(strict_anc, big_and(above))),
                *at_z,
            ),
        )

    def _related(self, enc: ProgramEncoding, a: LabelFamily, b: LabelFamily, rel: Relation) -> Mso:
        parts = []
        for s in enc.record_blocks:
            cs = callees(enc.table, s)
            for t1 in cs:
                for t2 in cs:
                    if t1 != t2 and block_relation(enc.table, t1, t2) is rel:
                        parts.append(self.consistent(enc, a, b, s, t1, t2))
        return big_or(parts)

    def ordered(self, enc: ProgramEncoding, a: LabelFamily, b: LabelFamily) -> Mso:
        """Configuration a runs entirely before configuration b."""
        return self._related(enc, a, b, Relation.PRECEDES)

    def parallel(self, enc: ProgramEncoding, a: LabelFamily, b: LabelFamily) -> Mso:
        return self._related(enc, a, b, Relation.PARALLEL)

    # -- dependence ------------------------------------------------------------

    def access_overlap(self, enc: ProgramEncoding, q1: str, x1: V, q2: str, x2: V) -> Mso:
        """Some location is accessed by q1 at x1 and by q2 at x2, at least once for writing."""
        pairs = conflicting_pairs(enc.table.rw(q1), enc.table.rw(q2), enc.node_level)
        disps = sorted({(a1.disp, a2.disp) for a1, a2 in pairs})
        return big_or(EqN(x1.child(*d1), x2.child(*d2)) for d1, d2 in disps)

    def dependence(
        self, enc: ProgramEncoding, a: LabelFamily, q1: str, b: LabelFamily, q2: str
    ) -> Mso:
        """Two configurations ending at q1 and q2 whose blocks touch a common location."""
        return and_(
            self.configuration(enc, a, q1),
            self.configuration(enc, b, q2),
            self.access_overlap(enc, q1, a.x(), q2, b.x()),
        )


def allocation_closed() -> Mso:
    """The allocation set is closed under parents: below a nil node everything is nil."""
    u = V("a")
    return all1(
        u.name,
        and_(implies(In(u.child("l"), ALLOC), In(u, ALLOC)), implies(In(u.child("r"), ALLOC), In(u, ALLOC))),
    )


def feasible_pairs(enc: ProgramEncoding, ordered_pairs: bool) -> list[tuple[str, str]]:
    nc = enc.table.all_non_calls
    out = []
    for i, q1 in enumerate(nc):
        for j, q2 in enumerate(nc):
            if not ordered_pairs and j < i:
                continue
            if conflicting_pairs(enc.table.rw(q1), enc.table.rw(q2), enc.node_level):
                out.append((q1, q2))
    return out


@dataclass
class Query:
    """An emitted formula plus what is needed to decode its models."""

    kind: str  # "race" or "conflict"
    formula: Mso
    programs: tuple[ProgramEncoding, ...]
    labels: tuple[LabelFamily, ...]
    pairs: list  # the (q1, q2[, q1', q2']) disjuncts

    def set_names(self) -> list[str]:
        names = [ALLOC]
        for lab, enc in zip(self.labels, self._enc_per_label()):
            names += [lab.L(b) for b in enc.label_blocks]
            names += [lab.C(c) for c in enc.table.conds]
        return names

    def node_names(self) -> list[str]:
        return [lab.x().name for lab in self.labels[:2]]

    def _enc_per_label(self) -> list[ProgramEncoding]:
        if self.kind == "race":
            return [self.programs[0]] * 2
        return [self.programs[0]] * 2 + [self.programs[1]] * 2


def build_datarace(enc: ProgramEncoding) -> Query:
    """Satisfiable exactly when two parallel configurations have a dependence.

    Without a parallel composition the Parallel disjunction is empty and the
    formula is ``false``.
    """
    e = Encoder()
    l1, l2 = LabelFamily(1), LabelFamily(2)
    pairs = feasible_pairs(enc, ordered_pairs=False)
    par = e.parallel(enc, l1, l2)
    body = big_or(
        and_(e.current(enc, l1, q1, l1.x()), e.current(enc, l2, q2, l2.x()), e.access_overlap(enc, q1, l1.x(), q2, l2.x()))
        for q1, q2 in pairs
    )
    if par == big_or([]) or body == big_or([]):
        formula = big_or([])
    else:
        formula = and_(
            allocation_closed(),
            e.configuration_base(enc, l1),
            e.configuration_base(enc, l2),
            par,
            body,
        )
    return Query("race", formula, (enc,), (l1, l2), pairs)


def build_conflict(p: ProgramEncoding, p2: ProgramEncoding, relation, beta: dict[str, list[str]]) -> Query:
    """Satisfiable exactly when P orders a dependent pair one way and P' the other way.

    ``beta`` maps each non-call block of P to the matching blocks of P'.
    """
    if relation is None:
        raise BisimMissing("an equivalence query needs a verified bisimulation relation")
    e = Encoder()
    l1, l2, l3, l4 = (LabelFamily(i) for i in (1, 2, 3, 4))
    x1, x2 = l1.x(), l2.x()
    disjuncts = []
    pairs = []
    for q1, q2 in feasible_pairs(p, ordered_pairs=True):
        for r1 in beta.get(q1, []):
            for r2 in beta.get(q2, []):
                dep2 = e.access_overlap(p2, r1, x1, r2, x2)
                if dep2 == big_or([]):
                    continue
                pairs.append((q1, q2, r1, r2))
                disjuncts.append(
                    and_(
                        e.current(p, l1, q1, x1),
                        e.current(p, l2, q2, x2),
                        e.access_overlap(p, q1, x1, q2, x2),
                        e.current(p2, l3, r1, x1),
                        e.current(p2, l4, r2, x2),
                        dep2,
                    )
                )
    if not disjuncts:
        formula = big_or([])
    else:
        formula = and_(
            allocation_closed(),
            e.configuration_base(p, l1),
            e.configuration_base(p, l2),
            e.configuration_base(p2, l3),
            e.configuration_base(p2, l4),
            e.ordered(p, l1, l2),
            e.ordered(p2, l4, l3),
            big_or(disjuncts),
        )
    return Query("conflict", formula, (p, p2), (l1, l2, l3, l4), pairs)
