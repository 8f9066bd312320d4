"""Deterministic speculative execution of one function body.

Every call block is replaced by its predicted result; the body runs
sequentially (both branches of a parallel statement, left first), with
branch conditions evaluated on the concrete values at hand.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

from ..blocks import BlockTable, field_symbol
from ..lang.ast import (
    Add,
    And,
    BlockStmt,
    Call,
    Const,
    Field,
    FieldAssign,
    If,
    IsNil,
    Not,
    Par,
    Positive,
    Return,
    Seq,
    Sub,
    TrueCond,
    Var,
    VarAssign,
)
from ..lang.errors import RetreetError


class MissingGhost(RetreetError):
    pass


class NeedsTree(RetreetError):
    """A nil test was reached without a nil oracle."""


@dataclass(frozen=True)
class SpecRecord:
    block: str
    displacement: tuple[str, ...]
    valuation: tuple[tuple[str, int], ...]  # locals and parameters before the block


@dataclass
class SpecTrace:
    records: list[SpecRecord]
    returns: dict[int, int] = field(default_factory=dict)
    fields: dict[str, int] = field(default_factory=dict)  # field symbols written

    @property
    def blocks(self) -> list[str]:
        return [r.block for r in self.records]


def speculative_execute(
    table: BlockTable,
    fname: str,
    i: Mapping[str, int],
    o: Mapping[str, Union[int, tuple]],
    is_nil: Optional[Callable[[tuple], bool]] = None,
    read_field: Optional[Callable[[tuple, str], int]] = None,
) -> SpecTrace:
    """Run ``fname`` with initial parameters ``i`` and ghost outputs ``o``.

    ``is_nil(path)`` answers nil tests relative to the function's node and
    ``read_field(path, name)`` supplies field values not written yet
    (default 0).
    """
    f = table.program.function(fname)
    by_trail = {table.blocks[b].trail: b for b in table.blocks_of[fname]}
    env: dict[str, int] = {p: int(i[p]) for p in f.int_params}
    fields: dict[str, int] = {}
    trace = SpecTrace([])

    def value(e) -> int:
        if isinstance(e, Const):
            return e.value
        if isinstance(e, Var):
            return env.get(e.name, 0)
        if isinstance(e, Field):
            sym = field_symbol(e.loc.path, e.name)
            if sym in fields:
                return fields[sym]
            return read_field(e.loc.path, e.name) if read_field else 0
        if isinstance(e, Add):
            return value(e.left) + value(e.right)
        if isinstance(e, Sub):
            return value(e.left) - value(e.right)
        raise TypeError(e)

    def holds(c) -> bool:
        if isinstance(c, TrueCond):
            return True
        if isinstance(c, IsNil):
            if is_nil is None:
                raise NeedsTree(f"nil test on {c.loc} needs a tree context")
            return is_nil(c.loc.path)
        if isinstance(c, Positive):
            return value(c.expr) > 0
        if isinstance(c, Not):
            return not holds(c.arg)
        if isinstance(c, And):
            return holds(c.left) and holds(c.right)
        raise TypeError(c)

    def run(stmt, trail: tuple) -> None:
        if isinstance(stmt, BlockStmt):
            bid = by_trail[trail]
            b = stmt.block
            disp = b.loc_arg.path if isinstance(b, Call) else ()
            trace.records.append(SpecRecord(bid, disp, tuple(sorted(env.items()))))
            if isinstance(b, Call):
                if b.results:
                    if bid not in o:
                        raise MissingGhost(f"no speculative output for {bid}")
                    out = o[bid]
                    vals = out if isinstance(out, tuple) else (out,)
                    for k, r in enumerate(b.results):
                        env[r] = int(vals[k])
                return
            for a in b.assigns:
                if isinstance(a, FieldAssign):
                    fields[field_symbol(a.loc.path, a.name)] = value(a.value)
                elif isinstance(a, VarAssign):
                    env[a.name] = value(a.value)
                elif isinstance(a, Return):
                    for slot, v in a.slots():
                        trace.returns[slot] = value(v)
        elif isinstance(stmt, If):
            if holds(stmt.cond):
                run(stmt.then, trail + (("if", 0),))
            else:
                run(stmt.orelse, trail + (("if", 1),))
        elif isinstance(stmt, Seq):
            for k, s in enumerate(stmt.stmts):
                run(s, trail + (("seq", k),))
        elif isinstance(stmt, Par):
            run(stmt.left, trail + (("par", 0),))
            run(stmt.right, trail + (("par", 1),))

    run(f.body, ())
    trace.fields = fields
    return trace
