"""Syntax tree for Retreet programs.

Every node is a frozen dataclass.  Source spans are carried on every node but
excluded from equality, so two parses of semantically identical text compare
equal regardless of layout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

POINTER_FIELDS = ("l", "r")


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _span() -> Optional[Span]:
    return field(default=None, compare=False, repr=False)


# -- location expressions ----------------------------------------------------


@dataclass(frozen=True)
class Loc:
    """``n``, ``n.l``, ``n.l.r`` ...: a base variable followed by child steps."""

    var: str
    path: tuple[str, ...] = ()
    span: Optional[Span] = _span()

    def child(self, d: str) -> "Loc":
        return Loc(self.var, self.path + (d,), self.span)

    @property
    def parent(self) -> "Loc":
        return Loc(self.var, self.path[:-1], self.span)

    def __str__(self) -> str:
        return ".".join((self.var,) + self.path)


# -- arithmetic ------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: int
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Field:
    loc: Loc
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Add:
    left: "AExpr"
    right: "AExpr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Sub:
    left: "AExpr"
    right: "AExpr"
    span: Optional[Span] = _span()


AExpr = Union[Const, Var, Field, Add, Sub]


# -- conditions ------------------------------------------------------------


@dataclass(frozen=True)
class IsNil:
    loc: Loc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class TrueCond:
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Positive:
    """``expr > 0``; every comparison is desugared into this form."""

    expr: AExpr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Not:
    arg: "BExpr"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class And:
    left: "BExpr"
    right: "BExpr"
    span: Optional[Span] = _span()


BExpr = Union[IsNil, TrueCond, Positive, Not, And]
ATOMIC_CONDS = (IsNil, TrueCond, Positive)


# -- assignments -----------------------------------------------------------


@dataclass(frozen=True)
class FieldAssign:
    loc: Loc
    name: str
    value: AExpr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class VarAssign:
    name: str
    value: AExpr
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Return:
    """``return e1, e2`` writes every slot; ``return[i] e`` writes slot ``i`` only.

    A return is an ordinary write to the activation's output slots; it does
    not transfer control.
    """

    values: tuple[AExpr, ...]
    slot: Optional[int] = None
    span: Optional[Span] = _span()

    def slots(self) -> list[tuple[int, AExpr]]:
        if self.slot is not None:
            return [(self.slot, self.values[0])]
        return list(enumerate(self.values))


@dataclass(frozen=True)
class PointerAssign:
    """``n.l = n.r``: tree mutation.  Parsed only so it can be reported."""

    target: Loc
    value: Loc
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class LocAssign:
    """``tmp = n.l``: a Loc-valued local.  Parsed only so it can be reported."""

    name: str
    value: Loc
    span: Optional[Span] = _span()


Assign = Union[FieldAssign, VarAssign, Return, PointerAssign, LocAssign]


# -- blocks and statements -------------------------------------------------


@dataclass(frozen=True)
class Call:
    results: tuple[str, ...]
    callee: str
    loc_arg: Loc
    int_args: tuple[AExpr, ...] = ()
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Straight:
    assigns: tuple[Assign, ...]
    span: Optional[Span] = _span()


Block = Union[Call, Straight]


@dataclass(frozen=True)
class BlockStmt:
    block: Block
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class If:
    cond: BExpr
    then: "Stmt"
    orelse: "Stmt"
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Seq:
    stmts: tuple["Stmt", ...]
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Par:
    left: "Stmt"
    right: "Stmt"
    span: Optional[Span] = _span()


Stmt = Union[BlockStmt, If, Seq, Par]


@dataclass(frozen=True)
class Function:
    name: str
    loc_param: str
    int_params: tuple[str, ...]
    body: Stmt
    return_arity: int = 0
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Program:
    functions: tuple[Function, ...]
    entry: str = "Main"

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {f.name: f for f in self.functions})

    def function(self, name: str) -> Function:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.functions]


# -- traversal helpers -----------------------------------------------------


def iter_blocks(stmt: Stmt) -> Iterator[Block]:
    """Blocks of ``stmt`` in document order."""
    if isinstance(stmt, BlockStmt):
        yield stmt.block
    elif isinstance(stmt, If):
        yield from iter_blocks(stmt.then)
        yield from iter_blocks(stmt.orelse)
    elif isinstance(stmt, Seq):
        for s in stmt.stmts:
            yield from iter_blocks(s)
    elif isinstance(stmt, Par):
        yield from iter_blocks(stmt.left)
        yield from iter_blocks(stmt.right)


def iter_ifs(stmt: Stmt) -> Iterator[If]:
    if isinstance(stmt, If):
        yield stmt
        yield from iter_ifs(stmt.then)
        yield from iter_ifs(stmt.orelse)
    elif isinstance(stmt, Seq):
        for s in stmt.stmts:
            yield from iter_ifs(s)
    elif isinstance(stmt, Par):
        yield from iter_ifs(stmt.left)
        yield from iter_ifs(stmt.right)


def aexpr_parts(e: AExpr) -> Iterator[Union[Var, Field, Const]]:
    if isinstance(e, (Add, Sub)):
        yield from aexpr_parts(e.left)
        yield from aexpr_parts(e.right)
    else:
        yield e


def bexpr_parts(b: BExpr) -> Iterator[Union[Var, Field, Const, IsNil]]:
    if isinstance(b, IsNil):
        yield b
    elif isinstance(b, Positive):
        yield from aexpr_parts(b.expr)
    elif isinstance(b, Not):
        yield from bexpr_parts(b.arg)
    elif isinstance(b, And):
        yield from bexpr_parts(b.left)
        yield from bexpr_parts(b.right)


def seq(*stmts: Stmt) -> Stmt:
    """Flatten nested sequences; a singleton sequence is its only element."""
    flat: list[Stmt] = []
    for s in stmts:
        if isinstance(s, Seq):
            flat.extend(s.stmts)
        else:
            flat.append(s)
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def strip_spans(node):
    """Copy of ``node`` with every span removed (handy for golden comparisons)."""
    from dataclasses import fields, is_dataclass, replace

    if isinstance(node, tuple):
        return tuple(strip_spans(x) for x in node)
    if not is_dataclass(node) or isinstance(node, Span):
        return node
    changes = {}
    for f in fields(node):
        if f.name == "span":
            changes["span"] = None
        else:
            changes[f.name] = strip_spans(getattr(node, f.name))
    if isinstance(node, Program):
        return Program(changes["functions"], changes["entry"])
    return replace(node, **changes)
