"""Language restrictions, normalization and lint."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional

from .ast import (
    ATOMIC_CONDS,
    Add,
    And,
    BlockStmt,
    Call,
    Field,
    FieldAssign,
    Function,
    If,
    IsNil,
    Loc,
    LocAssign,
    Not,
    Par,
    PointerAssign,
    Positive,
    Program,
    Return,
    Seq,
    Span,
    Straight,
    Sub,
    TrueCond,
    Var,
    VarAssign,
    seq,
)
from .errors import NormalizeError, RetreetError


class ViolationKind(enum.Enum):
    SelfCall = "SelfCall"
    MultiLocParam = "MultiLocParam"
    NonAtomicCond = "NonAtomicCond"
    UnguardedDeref = "UnguardedDeref"
    TreeMutation = "TreeMutation"
    UnresolvedCall = "UnresolvedCall"
    ArityMismatch = "ArityMismatch"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    location: Optional[Span]
    message: str
    function: str = ""

    def __str__(self) -> str:
        where = str(self.location) if self.location else "?"
        return f"{where}: {self.kind.value}: {self.message}"


# -- generic walkers --------------------------------------------------------


def _walk_stmts(stmt) -> Iterator:
    yield stmt
    if isinstance(stmt, If):
        yield from _walk_stmts(stmt.then)
        yield from _walk_stmts(stmt.orelse)
    elif isinstance(stmt, Seq):
        for s in stmt.stmts:
            yield from _walk_stmts(s)
    elif isinstance(stmt, Par):
        yield from _walk_stmts(stmt.left)
        yield from _walk_stmts(stmt.right)


def _calls(f: Function) -> Iterator[Call]:
    for s in _walk_stmts(f.body):
        if isinstance(s, BlockStmt) and isinstance(s.block, Call):
            yield s.block


def _expr_locs(e) -> Iterator[Loc]:
    """Every Loc mentioned by an arithmetic expression (field bases, stray Locs)."""
    if isinstance(e, Field):
        yield e.loc
    elif isinstance(e, Loc):
        yield e
    elif isinstance(e, (Add, Sub)):
        yield from _expr_locs(e.left)
        yield from _expr_locs(e.right)


def _cond_locs(b) -> Iterator[Loc]:
    if isinstance(b, IsNil):
        yield b.loc
    elif isinstance(b, Positive):
        yield from _expr_locs(b.expr)
    elif isinstance(b, Not):
        yield from _cond_locs(b.arg)
    elif isinstance(b, And):
        yield from _cond_locs(b.left)
        yield from _cond_locs(b.right)


def _assign_locs(a) -> Iterator[Loc]:
    if isinstance(a, FieldAssign):
        yield a.loc
        yield from _expr_locs(a.value)
    elif isinstance(a, (VarAssign,)):
        yield from _expr_locs(a.value)
    elif isinstance(a, Return):
        for v in a.values:
            yield from _expr_locs(v)
    elif isinstance(a, PointerAssign):
        yield a.target
        yield a.value
    elif isinstance(a, LocAssign):
        yield a.value


# -- individual checks ----------------------------------------------------------


def _self_calls(p: Program) -> list[Violation]:
    """Calls on an empty-displacement cycle of the call graph."""
    same_node: dict[str, set[str]] = {f.name: set() for f in p.functions}
    for f in p.functions:
        for c in _calls(f):
            if c.callee in same_node and not c.loc_arg.path and c.loc_arg.var == f.loc_param:
                same_node[f.name].add(c.callee)

    def reaches(src: str, dst: str) -> bool:
        seen, todo = set(), [src]
        while todo:
            g = todo.pop()
            if g == dst:
                return True
            if g in seen:
                continue
            seen.add(g)
            todo.extend(same_node.get(g, ()))
        return False

    out = []
    for f in p.functions:
        for c in _calls(f):
            if c.callee in same_node and not c.loc_arg.path and c.loc_arg.var == f.loc_param:
                if reaches(c.callee, f.name):
                    out.append(
                        Violation(
                            ViolationKind.SelfCall,
                            c.span,
                            f"{f.name} reaches itself on the same node through {c.callee}({c.loc_arg})",
                            f.name,
                        )
                    )
    return out


def _multi_loc(p: Program) -> list[Violation]:
    out = []
    for f in p.functions:
        def bad(loc: Loc, what: str):
            out.append(
                Violation(
                    ViolationKind.MultiLocParam,
                    loc.span,
                    f"{what} {loc} is not rooted at the Loc parameter {f.loc_param}",
                    f.name,
                )
            )

        for s in _walk_stmts(f.body):
            if isinstance(s, If):
                for loc in _cond_locs(s.cond):
                    if loc.var != f.loc_param:
                        bad(loc, "node expression")
            elif isinstance(s, BlockStmt):
                b = s.block
                if isinstance(b, Call):
                    if b.loc_arg.var != f.loc_param:
                        bad(b.loc_arg, "call argument")
                    for a in b.int_args:
                        if isinstance(a, Loc):
                            out.append(
                                Violation(
                                    ViolationKind.MultiLocParam,
                                    a.span or b.span,
                                    f"call to {b.callee} passes a second Loc argument {a}",
                                    f.name,
                                )
                            )
                        for loc in _expr_locs(a):
                            if not isinstance(a, Loc) and loc.var != f.loc_param:
                                bad(loc, "node expression")
                else:
                    for a in b.assigns:
                        for loc in _assign_locs(a):
                            if loc.var != f.loc_param:
                                bad(loc, "node expression")
    return out


def _non_atomic(p: Program) -> list[Violation]:
    out = []
    for f in p.functions:
        for s in _walk_stmts(f.body):
            if isinstance(s, If) and not isinstance(s.cond, ATOMIC_CONDS):
                out.append(
                    Violation(ViolationKind.NonAtomicCond, s.span, "condition is not atomic", f.name)
                )
    return out


def _tree_mutation(p: Program) -> list[Violation]:
    out = []
    for f in p.functions:
        for s in _walk_stmts(f.body):
            if isinstance(s, BlockStmt) and isinstance(s.block, Straight):
                for a in s.block.assigns:
                    if isinstance(a, PointerAssign):
                        out.append(
                            Violation(
                                ViolationKind.TreeMutation,
                                a.span,
                                f"assignment to pointer field {a.target}",
                                f.name,
                            )
                        )
                    elif isinstance(a, LocAssign):
                        out.append(
                            Violation(
                                ViolationKind.TreeMutation,
                                a.span,
                                f"Loc-valued local {a.name} = {a.value}",
                                f.name,
                            )
                        )
    return out


def _unresolved(p: Program) -> list[Violation]:
    out = []
    for f in p.functions:
        for c in _calls(f):
            if c.callee not in p:
                out.append(
                    Violation(ViolationKind.UnresolvedCall, c.span, f"call to undefined function {c.callee}", f.name)
                )
    return out


def _arity(p: Program) -> list[Violation]:
    out = []
    for f in p.functions:
        full: set[int] = set()
        slots: list[Return] = []
        for s in _walk_stmts(f.body):
            if isinstance(s, BlockStmt) and isinstance(s.block, Straight):
                for a in s.block.assigns:
                    if isinstance(a, Return):
                        if a.slot is None:
                            if a.values:
                                full.add(len(a.values))
                        else:
                            slots.append(a)
        if len(full) > 1:
            out.append(
                Violation(
                    ViolationKind.ArityMismatch,
                    f.span,
                    f"{f.name} returns tuples of different sizes {sorted(full)}",
                    f.name,
                )
            )
        elif full:
            (n,) = full
            for r in slots:
                if r.slot >= n:
                    out.append(
                        Violation(
                            ViolationKind.ArityMismatch,
                            r.span,
                            f"return slot {r.slot} outside the {n} values {f.name} returns",
                            f.name,
                        )
                    )
        for c in _calls(f):
            if c.callee not in p:
                continue
            g = p.function(c.callee)
            if len(c.int_args) != len(g.int_params):
                out.append(
                    Violation(
                        ViolationKind.ArityMismatch,
                        c.span,
                        f"{c.callee} takes {len(g.int_params)} Int arguments, given {len(c.int_args)}",
                        f.name,
                    )
                )
            if c.results and g.return_arity and len(c.results) != g.return_arity:
                out.append(
                    Violation(
                        ViolationKind.ArityMismatch,
                        c.span,
                        f"{c.callee} returns {g.return_arity} values, {len(c.results)} targets given",
                        f.name,
                    )
                )
    return out


# -- nil-guard analysis ---------------------------------------------------------


def _required(loc: Loc, deref: bool) -> list[Loc]:
    """Locs that must be non-nil before ``loc`` is dereferenced (or merely named)."""
    n = len(loc.path) + (1 if deref else 0)
    return [Loc(loc.var, loc.path[:k]) for k in range(n)]


def _cond_facts(b, positive: bool) -> set[Loc]:
    """Non-nil facts established when ``b`` evaluates to ``positive``."""
    if isinstance(b, Not):
        return _cond_facts(b.arg, not positive)
    if isinstance(b, IsNil):
        return set() if positive else {Loc(b.loc.var, b.loc.path)}
    if isinstance(b, And) and positive:
        return _cond_facts(b.left, True) | _cond_facts(b.right, True)
    return set()


def _cond_derefs(b, known: set[Loc]) -> Iterator[tuple[Loc, set[Loc]]]:
    """Pairs (required-non-nil loc, facts available at that point), short-circuit aware."""
    if isinstance(b, IsNil):
        for r in _required(b.loc, False):
            yield r, known
    elif isinstance(b, Positive):
        for loc in _expr_locs(b.expr):
            for r in _required(loc, True):
                yield r, known
    elif isinstance(b, Not):
        yield from _cond_derefs(b.arg, known)
    elif isinstance(b, And):
        yield from _cond_derefs(b.left, known)
        yield from _cond_derefs(b.right, known | _cond_facts(b.left, True))


def _unguarded(p: Program) -> list[Violation]:
    out: list[Violation] = []

    def report(f: Function, loc: Loc, need: Loc, span):
        out.append(
            Violation(
                ViolationKind.UnguardedDeref,
                span or loc.span,
                f"{need} may be nil when {loc} is used (no dominating '{need} != nil' guard)",
                f.name,
            )
        )

    def strip(loc: Loc) -> Loc:
        return Loc(loc.var, loc.path)

    def visit(f: Function, stmt, known: set[Loc]):
        if isinstance(stmt, If):
            for need, facts in _cond_derefs(stmt.cond, known):
                if strip(need) not in facts:
                    report(f, need, need, stmt.span)
            visit(f, stmt.then, known | _cond_facts(stmt.cond, True))
            visit(f, stmt.orelse, known | _cond_facts(stmt.cond, False))
        elif isinstance(stmt, Seq):
            for s in stmt.stmts:
                visit(f, s, known)
        elif isinstance(stmt, Par):
            visit(f, stmt.left, known)
            visit(f, stmt.right, known)
        elif isinstance(stmt, BlockStmt):
            b = stmt.block
            if isinstance(b, Call):
                uses = [(r, b.span) for r in _required(b.loc_arg, False)]
                for a in b.int_args:
                    if not isinstance(a, Loc):
                        uses += [(r, b.span) for loc in _expr_locs(a) for r in _required(loc, True)]
            else:
                uses = []
                for a in b.assigns:
                    if isinstance(a, FieldAssign):
                        uses += [(r, a.span) for r in _required(a.loc, True)]
                        uses += [(r, a.span) for loc in _expr_locs(a.value) for r in _required(loc, True)]
                    elif isinstance(a, VarAssign):
                        uses += [(r, a.span) for loc in _expr_locs(a.value) for r in _required(loc, True)]
                    elif isinstance(a, Return):
                        for v in a.values:
                            uses += [(r, a.span) for loc in _expr_locs(v) for r in _required(loc, True)]
            seen = set()
            for need, span in uses:
                key = strip(need)
                if key not in known and key not in seen and need.var == f.loc_param:
                    seen.add(key)
                    report(f, need, need, span)

    for f in p.functions:
        visit(f, f.body, set())
    return out


def validate_restrictions(p: Program, require_normal_form: bool = False) -> list[Violation]:
    """Every violated language restriction, each pinned to a source span.

    ``NonAtomicCond`` is only reported with ``require_normal_form``: compound
    conditions are legal input and are removed by :func:`normalize`.
    """
    out: list[Violation] = []
    out += _self_calls(p)
    out += _multi_loc(p)
    if require_normal_form:
        out += _non_atomic(p)
    out += _unguarded(p)
    out += _tree_mutation(p)
    out += _unresolved(p)
    out += _arity(p)
    return out


# -- normalization -----------------------------------------------------------


def _split_if(cond, then, orelse, span):
    if isinstance(cond, ATOMIC_CONDS):
        return If(cond, then, orelse, span=span)
    if isinstance(cond, Not):
        return _split_if(cond.arg, orelse, then, span)
    if isinstance(cond, And):
        inner = _split_if(cond.right, then, orelse, span)
        return _split_if(cond.left, inner, orelse, span)
    raise TypeError(f"unexpected condition {cond!r}")


def _norm_stmt(stmt):
    if isinstance(stmt, If):
        return _split_if(stmt.cond, _norm_stmt(stmt.then), _norm_stmt(stmt.orelse), stmt.span)
    if isinstance(stmt, Seq):
        if not stmt.stmts:
            return stmt
        return seq(*[_norm_stmt(s) for s in stmt.stmts])
    if isinstance(stmt, Par):
        return Par(_norm_stmt(stmt.left), _norm_stmt(stmt.right), span=stmt.span)
    return stmt


def normalize(p: Program, allow_deep_loc: bool = False) -> Program:
    """Split compound conditions into nested atomic Ifs and check nil guards.

    Negations swap branches; ``a && b`` becomes ``if (a) { if (b) A else B }
    else B``.  Raises :class:`NormalizeError` on an unguarded dereference, or
    on a call argument deeper than one child step unless ``allow_deep_loc``.
    """
    unguarded = _unguarded(p)
    if unguarded:
        v = unguarded[0]
        raise NormalizeError(f"{v.function}: {v.message}", v.location)
    if not allow_deep_loc:
        for f in p.functions:
            for c in _calls(f):
                if len(c.loc_arg.path) > 1:
                    raise NormalizeError(
                        f"{f.name}: call argument {c.loc_arg} is deeper than one child step "
                        "(pass allow_deep_loc to accept it)",
                        c.span,
                    )
    funcs = []
    for f in p.functions:
        funcs.append(replace(f, body=_norm_stmt(f.body)))
    return Program(tuple(funcs), p.entry)


@dataclass(frozen=True)
class LintWarning:
    location: Optional[Span]
    message: str

    def __str__(self) -> str:
        where = str(self.location) if self.location else "?"
        return f"{where}: warning: {self.message}"


def lint(p: Program) -> list[LintWarning]:
    """Non-fatal observations: same-node calls outside Main."""
    out = []
    for f in p.functions:
        if f.name == p.entry:
            continue
        for c in _calls(f):
            if not c.loc_arg.path:
                out.append(
                    LintWarning(c.span, f"{f.name} calls {c.callee} on its own node {c.loc_arg}")
                )
    return out


def check_program(p: Program, allow_deep_loc: bool = False) -> Program:
    """Validate then normalize; raises on the first problem.  Convenience for pipelines."""
    violations = validate_restrictions(p)
    if violations:
        raise ProgramRejected(violations)
    if p.entry not in p:
        raise ProgramRejected([])
    return normalize(p, allow_deep_loc=allow_deep_loc)


class ProgramRejected(RetreetError):
    def __init__(self, violations: Iterable[Violation]):
        self.violations = list(violations)
        if self.violations:
            msg = "; ".join(str(v) for v in self.violations)
        else:
            msg = "program has no Main function"
        super().__init__(msg)
