"""Block extraction, the block relation algebra, Path(t) and read/write sets.

Blocks are numbered ``s0, s1, ...`` and conditions ``c0, c1, ...`` in
document order across the whole program.  A pseudo-block ``main`` stands for
the implicit call of the entry function on the tree root.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from .lang.ast import (
    Add,
    And,
    BlockStmt,
    Call,
    Const,
    Field,
    FieldAssign,
    Function,
    If,
    IsNil,
    Loc,
    Not,
    Par,
    Positive,
    Program,
    Return,
    Seq,
    Straight,
    Sub,
    TrueCond,
    Var,
    VarAssign,
)
from .lang.errors import RetreetError

MAIN = "main"


class NotACall(RetreetError):
    pass


class NotStraight(RetreetError):
    pass


class Relation(enum.Enum):
    PRECEDES = "Precedes"  # s ≺ q
    FOLLOWS = "Follows"  # q ≺ s
    BRANCHES = "Branches"
    PARALLEL = "Parallel"
    DIFFERENT_FUNCTIONS = "DifferentFunctions"


# -- Path entries ------------------------------------------------------------------


@dataclass(frozen=True)
class StraightCode:
    block: str
    assigns: tuple


@dataclass(frozen=True)
class SpeculatedCall:
    block: str
    call: Call


@dataclass(frozen=True)
class Assume:
    cond_id: str
    cond: object
    polarity: bool


@dataclass(frozen=True)
class Havoc:
    """A preceding conditional whose branch is unknown: its targets get fresh values."""

    cond_id: str
    targets: tuple[str, ...]  # symbol names as used inside the function ("x", "u.f", "u.l.f")


PathEntry = Union[StraightCode, SpeculatedCall, Assume, Havoc]


@dataclass(frozen=True)
class AccessPath:
    """A location touched by a block, relative to the node the block runs on.

    ``disp`` is the child path (``()`` for the node itself).  Field accesses
    have ``owner=None``; activation locals and return slots are tagged with
    the function owning the activation (``name`` is ``ret0``, ``ret1`` ... for
    return slots).
    """

    disp: tuple[str, ...]
    name: str
    owner: Optional[str] = None

    @property
    def is_field(self) -> bool:
        return self.owner is None

    def __str__(self) -> str:
        where = ".".join(("self",) + self.disp) if self.disp else "self"
        if self.owner is None:
            return f"{where}:{self.name}"
        return f"{where}:{self.owner}.{self.name}"


@dataclass(frozen=True)
class RWSets:
    reads: frozenset
    writes: frozenset

    @property
    def accesses(self) -> frozenset:
        return self.reads | self.writes


@dataclass
class BlockInfo:
    id: str
    function: Optional[str]
    block: Optional[Union[Call, Straight]]
    trail: tuple  # ((kind, child_index), ...) from the function body root
    index: int  # document-order number (-1 for main)

    @property
    def is_call(self) -> bool:
        return self.id == MAIN or isinstance(self.block, Call)

    @property
    def callee(self) -> Optional[str]:
        if self.id == MAIN:
            return None
        return self.block.callee if isinstance(self.block, Call) else None

    @property
    def direction(self) -> tuple[str, ...]:
        """Child path from the function's node to the node this block acts on."""
        if isinstance(self.block, Call):
            return self.block.loc_arg.path
        return ()


@dataclass
class CondInfo:
    id: str
    function: str
    cond: object
    trail: tuple
    index: int


@dataclass
class BlockTable:
    program: Program
    blocks: dict[str, BlockInfo]
    conds: dict[str, CondInfo]
    order: list[str]
    blocks_of: dict[str, list[str]]
    conds_of: dict[str, list[str]]
    params_of: dict[str, tuple[str, ...]]
    path_of: dict[str, tuple] = field(default_factory=dict)
    cond_prefix: dict[str, tuple] = field(default_factory=dict)
    _rw: dict = field(default_factory=dict)

    # -- per-block access sets --------------------------------------------------
    @property
    def all_blocks(self) -> list[str]:
        return list(self.order)

    @property
    def all_calls(self) -> list[str]:
        return [b for b in self.order if self.blocks[b].is_call]

    @property
    def all_non_calls(self) -> list[str]:
        return [b for b in self.order if not self.blocks[b].is_call]

    @property
    def all_conds(self) -> list[str]:
        return list(self.conds)

    @property
    def entry(self) -> str:
        return self.program.entry

    def function_of(self, bid: str) -> Optional[str]:
        return self.blocks[bid].function

    def info(self, bid: str) -> BlockInfo:
        if bid == MAIN:
            return _MAIN_INFO
        return self.blocks[bid]

    def callee_of(self, bid: str) -> str:
        if bid == MAIN:
            return self.entry
        info = self.blocks[bid]
        if not info.is_call:
            raise NotACall(f"{bid} is not a call block")
        return info.callee

    def callers(self, bid: str) -> list[str]:
        """Every s with s ⊲ bid (including ``main`` for blocks of the entry)."""
        f = self.blocks[bid].function
        out = [s for s in self.all_calls if self.blocks[s].callee == f]
        if f == self.entry:
            out.insert(0, MAIN)
        return out

    def same_function(self, a: str, b: str) -> bool:
        return self.blocks[a].function == self.blocks[b].function

    def rw(self, bid: str) -> RWSets:
        return read_write_sets(self, bid)


_MAIN_INFO = BlockInfo(MAIN, None, None, (), -1)


def build_block_table(p: Program) -> BlockTable:
    """Number blocks/conditions in document order and compute every Path."""
    if p.entry not in p:
        raise RetreetError(f"program has no {p.entry} function")
    blocks: dict[str, BlockInfo] = {}
    conds: dict[str, CondInfo] = {}
    order: list[str] = []
    blocks_of: dict[str, list[str]] = {}
    conds_of: dict[str, list[str]] = {}
    stmt_ids: dict[tuple, str] = {}  # (function, trail) -> block or condition id

    def walk(f: Function, stmt, trail: tuple):
        if isinstance(stmt, BlockStmt):
            bid = f"s{len(order)}"
            blocks[bid] = BlockInfo(bid, f.name, stmt.block, trail, len(order))
            order.append(bid)
            blocks_of[f.name].append(bid)
            stmt_ids[(f.name, trail)] = bid
        elif isinstance(stmt, If):
            cid = f"c{len(conds)}"
            conds[cid] = CondInfo(cid, f.name, stmt.cond, trail, len(conds))
            conds_of[f.name].append(cid)
            stmt_ids[(f.name, trail)] = cid
            walk(f, stmt.then, trail + (("if", 0),))
            walk(f, stmt.orelse, trail + (("if", 1),))
        elif isinstance(stmt, Seq):
            for k, s in enumerate(stmt.stmts):
                walk(f, s, trail + (("seq", k),))
        elif isinstance(stmt, Par):
            walk(f, stmt.left, trail + (("par", 0),))
            walk(f, stmt.right, trail + (("par", 1),))

    for f in p.functions:
        blocks_of[f.name] = []
        conds_of[f.name] = []
        walk(f, f.body, ())

    table = BlockTable(
        program=p,
        blocks=blocks,
        conds=conds,
        order=order,
        blocks_of=blocks_of,
        conds_of=conds_of,
        params_of={f.name: f.int_params for f in p.functions},
    )
    for f in p.functions:
        _compute_paths(table, f, stmt_ids)
    return table


# -- Path(t) -----------------------------------------------------------------------


def _assigned_symbols(stmt) -> list[str]:
    """Function-local symbols possibly written by ``stmt`` (for havoc entries)."""
    out: list[str] = []

    def add(x):
        if x not in out:
            out.append(x)

    def go(s):
        if isinstance(s, BlockStmt):
            b = s.block
            if isinstance(b, Call):
                for r in b.results:
                    add(r)
            else:
                for a in b.assigns:
                    if isinstance(a, FieldAssign):
                        add(field_symbol(a.loc.path, a.name))
                    elif isinstance(a, VarAssign):
                        add(a.name)
        elif isinstance(s, If):
            go(s.then)
            go(s.orelse)
        elif isinstance(s, Seq):
            for x in s.stmts:
                go(x)
        elif isinstance(s, Par):
            go(s.left)
            go(s.right)

    go(stmt)
    return out


def field_symbol(path: tuple[str, ...], name: str) -> str:
    return ".".join(("u",) + tuple(path) + (name,))


def _entries_of(fname: str, stmt, trail: tuple, stmt_ids) -> list:
    """Path entries for executing ``stmt`` completely (a preceding sibling)."""
    if isinstance(stmt, BlockStmt):
        bid = stmt_ids[(fname, trail)]
        if isinstance(stmt.block, Call):
            return [SpeculatedCall(bid, stmt.block)]
        return [StraightCode(bid, stmt.block.assigns)]
    if isinstance(stmt, Seq):
        out = []
        for k, s in enumerate(stmt.stmts):
            out += _entries_of(fname, s, trail + (("seq", k),), stmt_ids)
        return out
    if isinstance(stmt, Par):
        return _entries_of(fname, stmt.left, trail + (("par", 0),), stmt_ids) + _entries_of(
            fname, stmt.right, trail + (("par", 1),), stmt_ids
        )
    if isinstance(stmt, If):
        targets = _assigned_symbols(stmt)
        if not targets:
            return []
        return [Havoc(stmt_ids[(fname, trail)], tuple(targets))]
    raise TypeError(stmt)


def _compute_paths(table: BlockTable, f: Function, stmt_ids) -> None:
    def go(stmt, trail: tuple, prefix: list):
        if isinstance(stmt, BlockStmt):
            table.path_of[stmt_ids[(f.name, trail)]] = tuple(prefix)
        elif isinstance(stmt, If):
            cid = stmt_ids[(f.name, trail)]
            table.cond_prefix[cid] = tuple(prefix)
            go(stmt.then, trail + (("if", 0),), prefix + [Assume(cid, stmt.cond, True)])
            go(stmt.orelse, trail + (("if", 1),), prefix + [Assume(cid, stmt.cond, False)])
        elif isinstance(stmt, Seq):
            acc = list(prefix)
            for k, s in enumerate(stmt.stmts):
                t = trail + (("seq", k),)
                go(s, t, acc)
                acc = acc + _entries_of(f.name, s, t, stmt_ids)
        elif isinstance(stmt, Par):
            go(stmt.left, trail + (("par", 0),), prefix)
            go(stmt.right, trail + (("par", 1),), prefix)

    go(f.body, (), [])


def path_conditions(table: BlockTable, bid: str) -> list[Assume]:
    return [e for e in table.path_of[bid] if isinstance(e, Assume)]


# -- relations --------------------------------------------------------------------


def block_relation(table: BlockTable, s: str, q: str) -> Relation:
    """Relation of two distinct blocks by the kind of their syntax-tree LCA."""
    if s == q:
        raise ValueError("block_relation needs two distinct blocks")
    a, b = table.blocks[s], table.blocks[q]
    if a.function != b.function:
        return Relation.DIFFERENT_FUNCTIONS
    k = 0
    while k < min(len(a.trail), len(b.trail)) and a.trail[k] == b.trail[k]:
        k += 1
    # Distinct blocks of one function always diverge at some common node.
    kind, ia = a.trail[k]
    _, ib = b.trail[k]
    if kind == "seq":
        return Relation.PRECEDES if ia < ib else Relation.FOLLOWS
    if kind == "if":
        return Relation.BRANCHES
    return Relation.PARALLEL


def precedes(table: BlockTable, s: str, q: str) -> bool:
    return s != q and block_relation(table, s, q) is Relation.PRECEDES


def parallel(table: BlockTable, s: str, q: str) -> bool:
    return s != q and block_relation(table, s, q) is Relation.PARALLEL


def callees(table: BlockTable, s: str) -> list[str]:
    """{ q | s ⊲ q }."""
    return list(table.blocks_of[table.callee_of(s)])


# -- read/write analysis -----------------------------------------------------------


def _expr_accesses(e, f: Function, table: BlockTable, out: set) -> None:
    if isinstance(e, Field):
        out.add(AccessPath(e.loc.path, e.name))
    elif isinstance(e, Var):
        out.add(AccessPath((), e.name, f.name))
        for call_bid in _defining_calls(table, f.name, e.name):
            call = table.blocks[call_bid].block
            slot = call.results.index(e.name)
            out.add(AccessPath(call.loc_arg.path, f"ret{slot}", call.callee))
    elif isinstance(e, (Add, Sub)):
        _expr_accesses(e.left, f, table, out)
        _expr_accesses(e.right, f, table, out)


def _cond_accesses(c, f: Function, table: BlockTable, out: set) -> None:
    if isinstance(c, Positive):
        _expr_accesses(c.expr, f, table, out)
    elif isinstance(c, Not):
        _cond_accesses(c.arg, f, table, out)
    elif isinstance(c, And):
        _cond_accesses(c.left, f, table, out)
        _cond_accesses(c.right, f, table, out)


def _defining_calls(table: BlockTable, fname: str, var: str) -> list[str]:
    key = ("defs", fname, var)
    if key not in table._rw:
        table._rw[key] = [
            b
            for b in table.blocks_of[fname]
            if isinstance(table.blocks[b].block, Call) and var in table.blocks[b].block.results
        ]
    return table._rw[key]


def read_write_sets(table: BlockTable, bid: str) -> RWSets:
    """Locations read and written by a non-call block.

    Reads: right-hand sides plus every condition on Path(bid).  A local that
    some call block of the same function assigns is also a read of that
    callee's return slot at the call's displacement.  Writes: left-hand
    sides; ``return`` writes this activation's return slots.
    """
    info = table.blocks[bid]
    if info.is_call:
        raise NotStraight(f"{bid} is a call block")
    key = ("rw", bid)
    if key in table._rw:
        return table._rw[key]
    f = table.program.function(info.function)
    reads: set = set()
    writes: set = set()
    for e in table.path_of[bid]:
        if isinstance(e, Assume):
            _cond_accesses(e.cond, f, table, reads)
    for a in info.block.assigns:
        if isinstance(a, FieldAssign):
            _expr_accesses(a.value, f, table, reads)
            writes.add(AccessPath(a.loc.path, a.name))
        elif isinstance(a, VarAssign):
            _expr_accesses(a.value, f, table, reads)
            writes.add(AccessPath((), a.name, f.name))
        elif isinstance(a, Return):
            for slot, v in a.slots():
                _expr_accesses(v, f, table, reads)
                writes.add(AccessPath((), f"ret{slot}", f.name))
    result = RWSets(frozenset(reads), frozenset(writes))
    table._rw[key] = result
    return result


def conflicting_pairs(rw1: RWSets, rw2: RWSets, node_level: bool = False) -> list[tuple[AccessPath, AccessPath]]:
    """Access pairs (a1 of block 1, a2 of block 2) that may touch one location, ≥ 1 write.

    Field-sensitive by default: both accesses must name the same field, or
    the same local of the same function.  ``node_level`` only asks for a
    common node, as in the literal node-overlap formula.
    """
    out = []
    for a1 in sorted(rw1.accesses, key=str):
        for a2 in sorted(rw2.accesses, key=str):
            if not (a1 in rw1.writes or a2 in rw2.writes):
                continue
            if node_level or (a1.name == a2.name and a1.owner == a2.owner):
                out.append((a1, a2))
    return out


def describe(table: BlockTable) -> str:
    """Stable key-value report of the table (used by the ``blocks`` command)."""
    lines = []
    lines.append("functions = " + " ".join(f.name for f in table.program.functions))
    for f in table.program.functions:
        lines.append(f"blocks[{f.name}] = " + " ".join(table.blocks_of[f.name]))
        lines.append(f"params[{f.name}] = " + " ".join(f.int_params))
        lines.append(f"conds[{f.name}] = " + " ".join(table.conds_of[f.name]))
    lines.append("all_calls = " + " ".join(table.all_calls))
    lines.append("all_non_calls = " + " ".join(table.all_non_calls))
    from .lang.printer import assign_str, bexpr_str, call_str

    for bid in table.order:
        info = table.blocks[bid]
        body = call_str(info.block) if info.is_call else "; ".join(assign_str(a) for a in info.block.assigns)
        lines.append(f"block {bid} = {info.function}: {body}")
    for cid, c in table.conds.items():
        lines.append(f"cond {cid} = {c.function}: {bexpr_str(c.cond)}")
    for bid in table.order:
        lines.append(f"path {bid} = " + "; ".join(_entry_str(e) for e in table.path_of[bid]))
    for s in ["main"] + table.all_calls:
        lines.append(f"calls {s} = " + " ".join(callees(table, s)))
    for f in table.program.functions:
        bs = table.blocks_of[f.name]
        for i, a in enumerate(bs):
            for b in bs[i + 1 :]:
                lines.append(f"rel {a} {b} = {block_relation(table, a, b).value}")
    for bid in table.all_non_calls:
        rw = read_write_sets(table, bid)
        lines.append(f"reads {bid} = " + " ".join(sorted(str(a) for a in rw.reads)))
        lines.append(f"writes {bid} = " + " ".join(sorted(str(a) for a in rw.writes)))
    return "\n".join(lines) + "\n"


def _entry_str(e) -> str:
    from .lang.printer import bexpr_str

    if isinstance(e, StraightCode):
        return e.block
    if isinstance(e, SpeculatedCall):
        return e.block
    if isinstance(e, Assume):
        return f"assume({'' if e.polarity else '!'}{e.cond_id})"
    if isinstance(e, Havoc):
        return f"havoc[{e.cond_id}]({', '.join(e.targets)})"
    return str(e)
