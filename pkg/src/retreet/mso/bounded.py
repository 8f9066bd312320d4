"""Bounded model search for race and conflict formulas.

Without a WS2S solver the queries can still be refuted on small trees.
For every tree shape up to a height, the search enumerates the abstract
configurations the encoding allows (record chains from main at the root,
with the signed conditions each record needs at each node), picks pairs or
quadruples that meet the query's side conditions, builds the label model
and checks it against the emitted formula with the finite evaluator.  A
found model is a genuine model of the formula; finding none proves nothing
beyond the searched height.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

from ..blocks import MAIN, Relation, block_relation, callees, conflicting_pairs
from ..lang.errors import RetreetError
from .encode import ALLOC, ProgramEncoding, Query
from .ir import FiniteModel, evaluate
from .solver import Counterexample, Inconclusive

Node = tuple[str, ...]


class EncodingMismatch(RetreetError):
    """A configuration pair the search built does not satisfy the formula."""


def tree_shapes(max_height: int) -> list[frozenset]:
    """Allocated-node sets of every tree with at most ``max_height`` levels, smallest first."""
    def go(h: int) -> list[frozenset]:
        if h == 0:
            return [frozenset()]
        sub = go(h - 1)
        out = [frozenset()]
        for a in sub:
            for b in sub:
                out.append(frozenset({()} | {("l",) + n for n in a} | {("r",) + n for n in b}))
        return out

    return sorted(set(go(max_height)), key=lambda s: (len(s), sorted(s)))


@dataclass(frozen=True)
class AbsConfig:
    records: tuple[tuple[str, Node], ...]
    reqs: tuple[tuple[Node, tuple[tuple[str, bool], ...]], ...]

    @property
    def current(self) -> tuple[str, Node]:
        return self.records[-1]

    def req(self) -> dict[Node, dict[str, bool]]:
        return {n: dict(r) for n, r in self.reqs}


class _Alphabet:
    """Membership tests against the factorized condition-set family."""

    def __init__(self, enc: ProgramEncoding):
        self.enc = enc
        self.comps = enc.family.components
        self.where = {c: i for i, comp in enumerate(self.comps) for c in comp.conds}

    def matching(self, at: dict[str, bool], comp_index: int) -> list[frozenset]:
        comp = self.comps[comp_index]
        return [
            m for m in comp.members if all((c in m) == v for c, v in at.items() if self.where.get(c) == comp_index)
        ]

    def allows(self, at: dict[str, bool]) -> bool:
        return all(self.matching(at, i) for i in range(len(self.comps)))

    def assignments(self, at: dict[str, bool]) -> Iterator[dict[str, bool]]:
        """Every full truth assignment in the family extending ``at``."""
        options = [self.matching(at, i) for i in range(len(self.comps))]
        for combo in itertools.product(*options):
            full = {}
            for comp, m in zip(self.comps, combo):
                for c in comp.conds:
                    full[c] = c in m
            yield full

    def ties(self, node: Node, alloc: frozenset) -> dict[str, bool]:
        out = {}
        for cid, (path, positive) in self.enc.nil_conds.items():
            nil = (node + path) not in alloc
            out[cid] = nil if positive else not nil
        return out


def abstract_configurations(enc: ProgramEncoding, alloc: frozenset, depth: int) -> list[AbsConfig]:
    """Every configuration the labels can describe on the tree ``alloc``."""
    alpha = _Alphabet(enc)
    out: list[AbsConfig] = []
    root_req = alpha.ties((), alloc)
    if not alpha.allows(root_req):
        return out

    def go(records: list, reqs: dict) -> None:
        s, u = records[-1]
        for t in callees(enc.table, s):
            at = dict(reqs[u])
            ok = True
            for c, pol in enc.path_literals(t):
                if at.get(c, pol) != pol:
                    ok = False
                    break
                at[c] = pol
            if not ok or not alpha.allows(at):
                continue
            new = dict(reqs)
            new[u] = at
            if not enc.table.info(t).is_call:
                rec = tuple(records) + ((t, u),)
                out.append(AbsConfig(rec, tuple(sorted((n, tuple(sorted(r.items()))) for n, r in new.items()))))
                continue
            v = u + enc.direction(t)
            if len(v) > depth:
                continue
            if v not in new:
                tv = alpha.ties(v, alloc)
                if not alpha.allows(tv):
                    continue
                new[v] = tv
            go(records + [(t, v)], new)

    go([(MAIN, ())], {(): root_req})
    return out


def _diverge(a: AbsConfig, b: AbsConfig) -> Optional[tuple[str, Node, str, str]]:
    k = 0
    while k < min(len(a.records), len(b.records)) and a.records[k] == b.records[k]:
        k += 1
    if k == len(a.records) or k == len(b.records):
        return None
    s, z = a.records[k - 1]
    return s, z, a.records[k][0], b.records[k][0]


def _overlap(enc: ProgramEncoding, q1: str, x1: Node, q2: str, x2: Node) -> bool:
    pairs = conflicting_pairs(enc.table.rw(q1), enc.table.rw(q2), enc.node_level)
    return any(x1 + a1.disp == x2 + a2.disp for a1, a2 in pairs)


def _labels_pair(enc: ProgramEncoding, a: AbsConfig, b: AbsConfig, s: str, z: Node):
    """Condition assignments for two configurations agreeing where the encoding asks."""
    alpha = _Alphabet(enc)
    ra, rb = a.req(), b.req()

    def plain(req: dict) -> Optional[dict]:
        out = {}
        for n, at in req.items():
            if n == z:
                continue
            full = next(alpha.assignments(at), None)
            if full is None:
                return None
            out[n] = full
        return out

    ca, cb = plain(ra), plain(rb)
    if ca is None or cb is None:
        return None
    shared = enc.prefix_conds(s)
    for fa in alpha.assignments(ra[z]):
        want = dict(rb[z])
        clash = False
        for c in shared:
            if want.get(c, fa[c]) != fa[c]:
                clash = True
                break
            want[c] = fa[c]
        if clash:
            continue
        fb = next(alpha.assignments(want), None)
        if fb is not None:
            ca[z], cb[z] = fa, fb
            return ca, cb
    return None


def _sets_for(enc: ProgramEncoding, lab, cfg: AbsConfig, conds: dict) -> dict:
    sets = {lab.L(b): set() for b in enc.label_blocks}
    sets.update({lab.C(c): set() for c in enc.table.conds})
    for b, n in cfg.records:
        sets[lab.L(b)].add(n)
    for n, full in conds.items():
        for c, v in full.items():
            if v:
                sets[lab.C(c)].add(n)
    return sets


def _model(query: Query, alloc: frozenset, depth: int, parts: list, x1: Node, x2: Node) -> Counterexample:
    sets: dict = {ALLOC: set(alloc)}
    for enc, lab, cfg, conds in parts:
        sets.update(_sets_for(enc, lab, cfg, conds))
    frozen = {k: frozenset(v) for k, v in sets.items()}
    return Counterexample(frozen, {"x1": x1, "x2": x2}, raw="", source="bounded")


def _check(query: Query, model: Counterexample, depth: int) -> None:
    fm = FiniteModel(depth, model.sets, model.nodes)
    if not evaluate(query.formula, fm):
        raise EncodingMismatch(f"bounded {query.kind} model does not satisfy the emitted formula")


def _race_candidates(query: Query, max_height: int) -> Iterator[tuple[frozenset, int, Counterexample, tuple]]:
    enc = query.programs[0]
    l1, l2 = query.labels
    feasible = set(query.pairs)
    for alloc in tree_shapes(max_height):
        depth = max_height
        configs = abstract_configurations(enc, alloc, depth)
        for i, a in enumerate(configs):
            for b in configs[i + 1 :]:
                if (a.current[0], b.current[0]) not in feasible:
                    a, b = b, a
                (q1, x1), (q2, x2) = a.current, b.current
                if (q1, q2) not in feasible or not _overlap(enc, q1, x1, q2, x2):
                    continue
                d = _diverge(a, b)
                if d is None:
                    continue
                s, z, t1, t2 = d
                if block_relation(enc.table, t1, t2) is not Relation.PARALLEL:
                    continue
                labels = _labels_pair(enc, a, b, s, z)
                if labels is None:
                    continue
                ca, cb = labels
                model = _model(query, alloc, depth, [(enc, l1, a, ca), (enc, l2, b, cb)], x1, x2)
                yield alloc, depth, model, (q1, q2)


def bounded_race(query: Query, max_height: int = 3, all_pairs: bool = False):
    """First race model (or one per racing block pair), else Inconclusive."""
    found = []
    seen = set()
    for alloc, depth, model, key in _race_candidates(query, max_height):
        k = frozenset(key)
        if k in seen:
            continue
        _check(query, model, depth)
        found.append(model)
        seen.add(k)
        if not all_pairs:
            break
    if not found:
        return Inconclusive(f"no race on trees of height <= {max_height}")
    return found if all_pairs else found[0]


def bounded_conflict(query: Query, max_height: int = 3):
    p, p2 = query.programs
    l1, l2, l3, l4 = query.labels
    wanted: dict[tuple[str, str], list[tuple[str, str]]] = {}
    for q1, q2, r1, r2 in query.pairs:
        wanted.setdefault((q1, q2), []).append((r1, r2))
    for alloc in tree_shapes(max_height):
        depth = max_height
        cp = abstract_configurations(p, alloc, depth)
        cp2 = abstract_configurations(p2, alloc, depth)
        by_cur: dict = {}
        for c in cp2:
            by_cur.setdefault(c.current, []).append(c)
        for a in cp:
            for b in cp:
                if a is b:
                    continue
                (q1, x1), (q2, x2) = a.current, b.current
                if (q1, q2) not in wanted or not _overlap(p, q1, x1, q2, x2):
                    continue
                d = _diverge(a, b)
                if d is None or block_relation(p.table, d[2], d[3]) is not Relation.PRECEDES:
                    continue
                labels = _labels_pair(p, a, b, d[0], d[1])
                if labels is None:
                    continue
                for r1, r2 in wanted[(q1, q2)]:
                    if not _overlap(p2, r1, x1, r2, x2):
                        continue
                    for c3 in by_cur.get((r1, x1), []):
                        for c4 in by_cur.get((r2, x2), []):
                            d2 = _diverge(c4, c3)
                            if d2 is None or block_relation(p2.table, d2[2], d2[3]) is not Relation.PRECEDES:
                                continue
                            labels2 = _labels_pair(p2, c4, c3, d2[0], d2[1])
                            if labels2 is None:
                                continue
                            c4c, c3c = labels2
                            model = _model(
                                query,
                                alloc,
                                depth,
                                [(p, l1, a, labels[0]), (p, l2, b, labels[1]), (p2, l3, c3, c3c), (p2, l4, c4, c4c)],
                                x1,
                                x2,
                            )
                            _check(query, model, depth)
                            return model
    return Inconclusive(f"no conflict on trees of height <= {max_height}")
