"""The per-node alphabet of consistent condition sets.

Every condition of the program labels tree nodes.  A set C of conditions is
consistent when the conditions in C can all hold, and the others all fail,
for records at one node:

* nil tests are structural: ``isNil(u.d)`` atoms are shared by path across
  functions and must describe a real tree shape (nil is closed downward);
* integer conditions use their WP formulas.  Record parameters, ghosts and
  havoc unknowns are private to the function the condition lives in.  A
  field that no block ever writes has one value per node and is shared by
  all functions; a written field may change between activations, so its
  entry value is private to the function as well.

Conditions that share no symbol are independent, so the family is stored
factorized into components whose product is the full family.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from ..blocks import BlockTable
from ..lang.ast import BlockStmt, FieldAssign, Straight, iter_blocks
from ..semantics.formula import Formula, Neg, Nil, conj, neg, rename, symbols
from ..semantics.wp import wp_condition
from .sat import Sat, Unknown, lia_satisfiable

SHAPE = "#shape"


def written_fields(table: BlockTable) -> set[str]:
    out = set()
    for f in table.program.functions:
        for b in iter_blocks(f.body):
            if isinstance(b, Straight):
                out |= {a.name for a in b.assigns if isinstance(a, FieldAssign)}
    return out


def _scope(sym: str, fn: str, written: set[str]) -> str:
    if sym.startswith("u."):
        name = sym.rsplit(".", 1)[1]
        return f"{fn}:{sym}" if name in written else sym
    return f"{fn}:{sym}"


@dataclass(frozen=True)
class ScopedCond:
    cond_id: str
    nil_path: Optional[tuple[str, ...]]  # set for nil tests
    formula: Formula  # WP(c) with symbols scoped; for nil tests the Nil atom


def scoped_conditions(table: BlockTable) -> list[ScopedCond]:
    written = written_fields(table)
    out = []
    for cid, info in table.conds.items():
        f = wp_condition(table, cid, True)
        if isinstance(f, Nil):
            out.append(ScopedCond(cid, f.path, f))
        elif isinstance(f, Neg) and isinstance(f.arg, Nil):
            # only reachable for hand-built tables; keep the atom positive
            out.append(ScopedCond(cid, f.arg.path, f))
        else:
            out.append(ScopedCond(cid, None, rename(f, lambda s, fn=info.function: _scope(s, fn, written))))
    return out


def shape_consistent(signed: list[tuple[tuple[str, ...], bool]]) -> bool:
    """Is there a tree where each path is nil exactly when its flag says so?"""
    nil = [p for p, v in signed if v]
    alive = [p for p, v in signed if not v]
    for n in nil:
        for a in alive:
            if a[: len(n)] == n:
                return False
    return True


def signed_consistent(conds: list[ScopedCond], values: list[bool], backend=None) -> Optional[bool]:
    """Joint consistency of a signed condition list; ``None`` if undecided."""
    shape = []
    arith = []
    for c, v in zip(conds, values):
        if c.nil_path is not None:
            positive = not isinstance(c.formula, Neg)
            shape.append((c.nil_path, v if positive else not v))
        else:
            arith.append(c.formula if v else neg(c.formula))
    if not shape_consistent(shape):
        return False
    verdict = lia_satisfiable(conj(*arith), backend)
    if isinstance(verdict, Unknown):
        return None
    return isinstance(verdict, Sat)


@dataclass(frozen=True)
class Component:
    conds: tuple[str, ...]
    members: tuple[frozenset, ...]  # each member lists the conditions that hold


@dataclass(frozen=True)
class CondSetFamily:
    conds: tuple[str, ...]
    components: tuple[Component, ...]
    undecided: int = 0  # subsets dropped because the integer check was inconclusive

    def members(self) -> list[frozenset]:
        out = []
        for combo in itertools.product(*(c.members for c in self.components)):
            out.append(frozenset().union(*combo))
        return sorted(out, key=lambda s: (len(s), sorted(s)))

    def __contains__(self, c) -> bool:
        c = frozenset(c)
        for comp in self.components:
            if frozenset(x for x in c if x in comp.conds) not in comp.members:
                return False
        return all(x in self.conds for x in c)

    def __len__(self) -> int:
        n = 1
        for c in self.components:
            n *= len(c.members)
        return n


def _components(conds: list[ScopedCond]) -> list[list[ScopedCond]]:
    parent = list(range(len(conds)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[str, int] = {}
    for i, c in enumerate(conds):
        keys = {SHAPE} if c.nil_path is not None else symbols(c.formula)
        for k in keys:
            if k in owner:
                parent[find(i)] = find(owner[k])
            else:
                owner[k] = i
    groups: dict[int, list[ScopedCond]] = {}
    for i, c in enumerate(conds):
        groups.setdefault(find(i), []).append(c)
    return sorted(groups.values(), key=lambda g: conds.index(g[0]))


def _enumerate(group: list[ScopedCond], backend) -> tuple[list[frozenset], int]:
    members: list[frozenset] = []
    undecided = 0

    def go(k: int, values: list[bool]) -> None:
        nonlocal undecided
        if k:
            ok = signed_consistent(group[:k], values, backend)
            if ok is None:
                undecided += 1
                return
            if not ok:
                return
        if k == len(group):
            members.append(frozenset(c.cond_id for c, v in zip(group, values) if v))
            return
        go(k + 1, values + [True])
        go(k + 1, values + [False])

    go(0, [])
    return sorted(members, key=lambda s: (len(s), sorted(s))), undecided


def consistent_condition_sets(table: BlockTable, backend=None) -> CondSetFamily:
    conds = scoped_conditions(table)
    comps = []
    undecided = 0
    for group in _components(conds):
        members, u = _enumerate(group, backend)
        undecided += u
        comps.append(Component(tuple(c.cond_id for c in group), tuple(members)))
    return CondSetFamily(tuple(c.cond_id for c in conds), tuple(comps), undecided)


def brute_force_condition_sets(table: BlockTable) -> Iterator[frozenset]:
    """Every subset checked as a whole (reference for the factorized search)."""
    conds = scoped_conditions(table)
    for values in itertools.product([True, False], repeat=len(conds)):
        if signed_consistent(conds, list(values)):
            yield frozenset(c.cond_id for c, v in zip(conds, values) if v)
