"""Call-block correspondences between two programs built from the same blocks.

An equivalence query compares configurations of P with configurations of
P'.  That comparison is meaningful when every configuration of one program
has a counterpart in the other that runs the same non-call block on the
same node under equivalent path conditions.  The relation R pairs call
blocks of P with call blocks of P' to witness this.

A relation is accepted when

* every related pair, and every pair of matching non-call blocks reachable
  from a related pair, has equivalent path conditions (same child step,
  same nil tests, equivalent integer parts), and
* every chain of records of P, followed from ``main``, can be followed in
  lock step through related blocks of P', ending at a matching non-call
  block, and vice versa.

Path conditions only depend on the target block, so the check runs on the
finite graph of related pairs rather than on concrete configurations.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .blocks import MAIN, BlockTable, build_block_table, callees
from .lang.ast import Add, Const, Field, FieldAssign, Program, Return, Sub, Var, VarAssign
from .lang.errors import RetreetError
from .logic.sat import Equivalent, lia_equivalent
from .semantics.formula import Conj, conj, rename, symbols
from .semantics.wp import PathCond, path_condition

DEFAULT_CAP = 10_000


class NonCallMismatch(RetreetError):
    """The two programs are not built from the same straight-line blocks."""

    def __init__(self, only_p: list[str], only_p2: list[str]):
        self.only_p = only_p
        self.only_p2 = only_p2
        parts = []
        if only_p:
            parts.append("only in the first program: " + "; ".join(only_p))
        if only_p2:
            parts.append("only in the second program: " + "; ".join(only_p2))
        super().__init__("non-call blocks differ: " + " / ".join(parts))


@dataclass(frozen=True)
class BisimRelation:
    pairs: frozenset
    provenance: str = ""

    def __iter__(self):
        return iter(sorted(self.pairs, key=_pair_key))

    def __len__(self) -> int:
        return len(self.pairs)

    def __str__(self) -> str:
        return ", ".join(f"({a}, {b})" for a, b in self)


@dataclass(frozen=True)
class Accepted:
    pass


@dataclass(frozen=True)
class Rejected:
    reason: str


def _pair_key(p: tuple[str, str]):
    return tuple(int(x[1:]) if x[1:].isdigit() else -1 for x in p)


def _as_table(p: Union[Program, BlockTable]) -> BlockTable:
    return p if isinstance(p, BlockTable) else build_block_table(p)


# -- matching non-call blocks --------------------------------------------------------


def canonical_body(table: BlockTable, bid: str) -> str:
    """Block text with locals and return slots renamed by first appearance."""
    names: dict[str, str] = {}
    slots: dict[int, str] = {}

    def var(n: str) -> str:
        if n not in names:
            names[n] = f"#{len(names)}"
        return names[n]

    def expr(e) -> str:
        if isinstance(e, Const):
            return str(e.value)
        if isinstance(e, Var):
            return var(e.name)
        if isinstance(e, Field):
            return ".".join(("@",) + e.loc.path + (e.name,))
        if isinstance(e, Add):
            return f"({expr(e.left)} + {expr(e.right)})"
        if isinstance(e, Sub):
            return f"({expr(e.left)} - {expr(e.right)})"
        raise TypeError(e)

    out = []
    for a in table.blocks[bid].block.assigns:
        if isinstance(a, FieldAssign):
            rhs = expr(a.value)
            out.append(f"{'.'.join(('@',) + a.loc.path + (a.name,))} = {rhs}")
        elif isinstance(a, VarAssign):
            rhs = expr(a.value)
            out.append(f"{var(a.name)} = {rhs}")
        elif isinstance(a, Return):
            for slot, v in a.slots():
                rhs = expr(v)
                if slot not in slots:
                    slots[slot] = f"ret#{len(slots)}"
                out.append(f"{slots[slot]} = {rhs}")
    return "; ".join(out)


def match_noncalls(t1: BlockTable, t2: BlockTable) -> dict[str, list[str]]:
    """β: each non-call block of P to the blocks of P' with the same canonical body.

    Raises :class:`NonCallMismatch` unless both programs have the same set
    of block bodies.
    """
    b1 = {b: canonical_body(t1, b) for b in t1.all_non_calls}
    b2 = {b: canonical_body(t2, b) for b in t2.all_non_calls}
    only1 = sorted(set(b1.values()) - set(b2.values()))
    only2 = sorted(set(b2.values()) - set(b1.values()))
    if only1 or only2:
        raise NonCallMismatch(only1, only2)
    return {b: [c for c in t2.all_non_calls if b2[c] == body] for b, body in b1.items()}


# -- path-condition comparison -------------------------------------------------------


class _Comparer:
    def __init__(self, t1: BlockTable, t2: BlockTable, backend=None):
        self.t1, self.t2 = t1, t2
        self.backend = backend
        self._pc1: dict[str, PathCond] = {}
        self._pc2: dict[str, PathCond] = {}
        self._cache: dict = {}

    def pc(self, side: int, t: str) -> PathCond:
        table, cache = (self.t1, self._pc1) if side == 1 else (self.t2, self._pc2)
        if t not in cache:
            caller = next(iter(table.callers(t)), None)
            cache[t] = path_condition(table, caller, t)
        return cache[t]

    def _ghost_map(self, f1: str, f2: str, pairs: frozenset) -> dict[str, str]:
        out: dict[str, str] = {}
        calls1 = [b for b in self.t1.blocks_of[f1] if self.t1.blocks[b].is_call]
        calls2 = [b for b in self.t2.blocks_of[f2] if self.t2.blocks[b].is_call]
        for c2 in calls2:
            partners = [c1 for c1 in calls1 if (c1, c2) in pairs]
            if len(partners) == 1:
                out[c2] = partners[0]
        return out

    def differs(self, t: str, t2: str, pairs: frozenset) -> Optional[str]:
        """``None`` if PathCond(t) and PathCond(t2) are equivalent, else why not."""
        f1, f2 = self.t1.blocks[t].function, self.t2.blocks[t2].function
        ghosts = self._ghost_map(f1, f2, pairs)
        key = (t, t2, tuple(sorted(ghosts.items())))
        if key in self._cache:
            return self._cache[key]
        a, b = self.pc(1, t), self.pc(2, t2)
        reason = self._compare(a, b, f1, f2, t, t2, ghosts)
        self._cache[key] = reason
        return reason

    def _compare(self, a: PathCond, b: PathCond, f1: str, f2: str, t: str, t2: str, ghosts) -> Optional[str]:
        if a.direction != b.direction:
            return f"{t} and {t2} move to different children ({a.direction_str()} vs {b.direction_str()})"
        s1 = sorted(str(c.formula) for c in a.structural)
        s2 = sorted(str(c.formula) for c in b.structural)
        if s1 != s2:
            return f"{t} and {t2} have different nil tests ({' & '.join(s1) or 'none'} vs {' & '.join(s2) or 'none'})"
        params1 = self.t1.params_of[f1]
        params2 = self.t2.params_of[f2]
        pmap = {f"M.{p2}": f"M.{p1}" for p1, p2 in zip(params1, params2)}
        for g2, g1 in ghosts.items():
            pmap[f"M.{g2}"] = f"M.{g1}"
        callee1 = self.t1.blocks[t].callee
        callee2 = self.t2.blocks[t2].callee
        n1 = self.t1.params_of[callee1] if callee1 else ()
        n2 = self.t2.params_of[callee2] if callee2 else ()
        nmap = {f"N.{q2}": f"N.{q1}" for q1, q2 in zip(n1, n2)}

        def keep_eqs(match, allowed: set[str]):
            eqs = match.args if isinstance(match, Conj) else (match,)
            return conj(*(e for e in eqs if symbols(e) & {s for s in symbols(e) if s.startswith("N.")} <= allowed))

        match1 = keep_eqs(a.match, {f"N.{q}" for q in n1[: len(n2)]})
        match2 = keep_eqs(b.match, {f"N.{q}" for q in n2[: len(n1)]})
        arith1 = conj(*(c.formula for c in a.conds if not c.structural), match1)
        arith2 = conj(*(c.formula for c in b.conds if not c.structural), match2)

        def ren(s: str) -> str:
            if s in pmap:
                return pmap[s]
            if s in nmap:
                return nmap[s]
            if s.startswith(("M.", "N.")):
                return "P2:" + s  # no counterpart in the first program
            return s

        arith2 = rename(arith2, ren)
        verdict = lia_equivalent(arith1, arith2, self.backend)
        if isinstance(verdict, Equivalent):
            return None
        return f"path conditions of {t} and {t2} differ: {arith1} vs {arith2} ({type(verdict).__name__})"


# -- checking a relation ------------------------------------------------------------


def _steps(table: BlockTable, s: str) -> list[str]:
    return callees(table, s)


def check_bisimulation(
    p: Union[Program, BlockTable], p2: Union[Program, BlockTable], r: BisimRelation, backend=None
) -> Union[Accepted, Rejected]:
    t1, t2 = _as_table(p), _as_table(p2)
    beta = match_noncalls(t1, t2)
    cmp = _Comparer(t1, t2, backend)
    return _check(t1, t2, beta, r.pairs, cmp)


def _related(t1: BlockTable, t2: BlockTable, beta, pairs, t: str, t2b: str) -> bool:
    if t1.blocks[t].is_call:
        return (t, t2b) in pairs
    return t2b in beta.get(t, [])


def _check(t1: BlockTable, t2: BlockTable, beta, pairs: frozenset, cmp: _Comparer) -> Union[Accepted, Rejected]:
    for a, b in pairs:
        if a not in t1.blocks or not t1.blocks[a].is_call or b not in t2.blocks or not t2.blocks[b].is_call:
            return Rejected(f"({a}, {b}) is not a pair of call blocks")
    # Clause 3 on every pair reachable from a related pair of records.
    record_pairs = [(MAIN, MAIN)] + sorted(pairs, key=_pair_key)
    for s, s2 in record_pairs:
        for t in _steps(t1, s):
            for tb in _steps(t2, s2):
                if _related(t1, t2, beta, pairs, t, tb):
                    why = cmp.differs(t, tb, pairs)
                    if why:
                        return Rejected(why)
    # Every configuration of either program has a counterpart in the other.
    for forward in (True, False):
        why = _cover(t1, t2, beta, pairs, forward)
        if why:
            return Rejected(why)
    return Accepted()


def _cover(t1: BlockTable, t2: BlockTable, beta, pairs: frozenset, forward: bool) -> Optional[str]:
    """Follow every record chain of one program with the set of possible partners in the other."""
    src, dst = (t1, t2) if forward else (t2, t1)

    def related(a: str, b: str) -> bool:
        return _related(t1, t2, beta, pairs, a, b) if forward else _related(t1, t2, beta, pairs, b, a)

    start = (MAIN, frozenset({MAIN}))
    seen = {start}
    todo = [start]
    while todo:
        s, partners = todo.pop()
        for t in _steps(src, s):
            nxt = frozenset(tb for sb in partners for tb in _steps(dst, sb) if related(t, tb))
            if not nxt:
                which = "first" if forward else "second"
                return f"a configuration of the {which} program reaching {t} has no counterpart"
            if src.blocks[t].is_call:
                state = (t, nxt)
                if state not in seen:
                    seen.add(state)
                    todo.append(state)
    return None


# -- finding a relation ---------------------------------------------------------------


def _name_aligned(t1: BlockTable, t2: BlockTable) -> frozenset:
    def key_list(table: BlockTable) -> dict:
        out: dict = {}
        for b in table.all_calls:
            info = table.blocks[b]
            k = (info.function, info.callee, info.direction)
            out.setdefault(k, []).append(b)
        return out

    k1, k2 = key_list(t1), key_list(t2)
    pairs = set()
    for k, bs in k1.items():
        for a, b in zip(bs, k2.get(k, [])):
            pairs.add((a, b))
    return frozenset(pairs)


def _refine(t1: BlockTable, t2: BlockTable, beta, cmp: _Comparer) -> frozenset:
    """Greatest relation whose pairs and reachable block matches have equal path conditions."""
    pairs = {
        (a, b)
        for a in t1.all_calls
        for b in t2.all_calls
        if t1.blocks[a].direction == t2.blocks[b].direction
    }
    changed = True
    while changed:
        changed = False
        frozen = frozenset(pairs)
        for a, b in sorted(frozen, key=_pair_key):
            if cmp.differs(a, b, frozen):
                pairs.discard((a, b))
                changed = True
        if changed:
            continue
        for s, s2 in sorted(frozen, key=_pair_key):
            bad = False
            for t in _steps(t1, s):
                if t1.blocks[t].is_call:
                    continue
                for tb in beta.get(t, []):
                    if tb in _steps(t2, s2) and cmp.differs(t, tb, frozen):
                        bad = True
            if bad:
                pairs.discard((s, s2))
                changed = True
    return frozenset(_reachable(t1, t2, beta, frozenset(pairs)))


def _reachable(t1: BlockTable, t2: BlockTable, beta, pairs: frozenset) -> set:
    out = set()
    todo = [(MAIN, MAIN)]
    seen = {(MAIN, MAIN)}
    while todo:
        s, s2 = todo.pop()
        for t in _steps(t1, s):
            if not t1.blocks[t].is_call:
                continue
            for tb in _steps(t2, s2):
                if (t, tb) in pairs and (t, tb) not in seen:
                    seen.add((t, tb))
                    out.add((t, tb))
                    todo.append((t, tb))
    return out


def enumerate_bisimulations(
    p: Union[Program, BlockTable], p2: Union[Program, BlockTable], cap: int = DEFAULT_CAP, backend=None
) -> Iterator[BisimRelation]:
    """Candidate relations, most plausible first.

    1. calls paired by enclosing function, callee and child step, in order
       (the identity for a program compared with itself);
    2. the largest relation whose pairs all have equal path conditions,
       restricted to pairs reachable from ``main``;
    3. subsets of that relation by decreasing size, up to ``cap`` candidates
       in total.
    """
    t1, t2 = _as_table(p), _as_table(p2)
    match_noncalls(t1, t2)  # raises NonCallMismatch
    cmp = _Comparer(t1, t2, backend)
    beta = match_noncalls(t1, t2)
    yielded: set = set()
    count = 0
    first = _name_aligned(t1, t2)
    if first:
        yielded.add(first)
        count += 1
        yield BisimRelation(first, "order-preserving")
    top = _refine(t1, t2, beta, cmp)
    if top not in yielded:
        yielded.add(top)
        count += 1
        yield BisimRelation(top, "largest consistent")
    ordered = sorted(top, key=_pair_key)
    for k in range(len(ordered) - 1, 0, -1):
        for combo in itertools.combinations(ordered, k):
            if count >= cap:
                return
            cand = frozenset(combo)
            if cand in yielded:
                continue
            yielded.add(cand)
            count += 1
            yield BisimRelation(cand, f"subset of size {k}")


@dataclass
class SearchResult:
    relation: Optional[BisimRelation]
    tried: int
    reasons: list = field(default_factory=list)  # (relation, reason) for rejected candidates
    exhausted: bool = False  # the cap stopped the search


def find_bisimulation(
    p: Union[Program, BlockTable], p2: Union[Program, BlockTable], cap: int = DEFAULT_CAP, backend=None
) -> SearchResult:
    """First accepted candidate, with the reasons the earlier ones failed."""
    t1, t2 = _as_table(p), _as_table(p2)
    beta = match_noncalls(t1, t2)
    cmp = _Comparer(t1, t2, backend)
    reasons = []
    tried = 0
    for r in enumerate_bisimulations(t1, t2, cap, backend):
        tried += 1
        verdict = _check(t1, t2, beta, r.pairs, cmp)
        if isinstance(verdict, Accepted):
            return SearchResult(r, tried, reasons)
        if len(reasons) < 20:
            reasons.append((r, verdict.reason))
    return SearchResult(None, tried, reasons, exhausted=tried >= cap)
