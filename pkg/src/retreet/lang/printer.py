"""Canonical text rendering of programs.

The output re-parses to an equal AST: adjacent straight-line blocks are kept
apart with braces, and every condition is printed in the core forms the
parser maps back one-to-one (``e > 0``, ``l == nil``, ``!``, ``&&``).
"""
from __future__ import annotations

from .ast import (
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
    LocAssign,
    Not,
    Par,
    PointerAssign,
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

INDENT = "  "


def aexpr_str(e) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Field):
        return f"{e.loc}.{e.name}"
    if isinstance(e, Loc):
        return str(e)
    if isinstance(e, (Add, Sub)):
        op = "+" if isinstance(e, Add) else "-"
        right = aexpr_str(e.right)
        if isinstance(e.right, (Add, Sub)):
            right = f"({right})"
        return f"{aexpr_str(e.left)} {op} {right}"
    raise TypeError(f"not an arithmetic expression: {e!r}")


def bexpr_str(b) -> str:
    if isinstance(b, TrueCond):
        return "true"
    if isinstance(b, IsNil):
        return f"{b.loc} == nil"
    if isinstance(b, Positive):
        return f"{aexpr_str(b.expr)} > 0"
    if isinstance(b, Not):
        if isinstance(b.arg, IsNil):
            return f"{b.arg.loc} != nil"
        if isinstance(b.arg, TrueCond):
            return "false"
        return f"!({bexpr_str(b.arg)})"
    if isinstance(b, And):
        left = bexpr_str(b.left)
        right = bexpr_str(b.right)
        if isinstance(b.right, And):
            right = f"({right})"
        return f"{left} && {right}"
    raise TypeError(f"not a condition: {b!r}")


def assign_str(a) -> str:
    if isinstance(a, FieldAssign):
        return f"{a.loc}.{a.name} = {aexpr_str(a.value)}"
    if isinstance(a, VarAssign):
        return f"{a.name} = {aexpr_str(a.value)}"
    if isinstance(a, Return):
        if a.slot is not None:
            return f"return[{a.slot}] {aexpr_str(a.values[0])}"
        if not a.values:
            return "return"
        return "return " + ", ".join(aexpr_str(v) for v in a.values)
    if isinstance(a, PointerAssign):
        return f"{a.target} = {a.value}"
    if isinstance(a, LocAssign):
        return f"{a.name} = {a.value}"
    raise TypeError(f"not an assignment: {a!r}")


def call_str(c: Call) -> str:
    args = [str(c.loc_arg)] + [aexpr_str(a) for a in c.int_args]
    text = f"{c.callee}({', '.join(args)})"
    if c.results:
        return f"{', '.join(c.results)} = {text}"
    return text


def _stmt_lines(stmt, depth: int, out: list[str], braced: bool = False) -> None:
    pad = INDENT * depth
    if isinstance(stmt, BlockStmt):
        b = stmt.block
        if isinstance(b, Call):
            out.append(pad + call_str(b))
        elif braced:
            out.append(pad + "{ " + "; ".join(assign_str(a) for a in b.assigns) + " }")
        else:
            out.extend(pad + assign_str(a) for a in b.assigns)
    elif isinstance(stmt, Seq):
        prev_straight = False
        for s in stmt.stmts:
            is_straight = isinstance(s, BlockStmt) and isinstance(s.block, Straight)
            _stmt_lines(s, depth, out, braced=is_straight and prev_straight)
            prev_straight = is_straight
    elif isinstance(stmt, If):
        out.append(pad + f"if ({bexpr_str(stmt.cond)}) {{")
        _stmt_lines(stmt.then, depth + 1, out)
        if isinstance(stmt.orelse, Seq) and not stmt.orelse.stmts:
            out.append(pad + "}")
        else:
            out.append(pad + "} else {")
            _stmt_lines(stmt.orelse, depth + 1, out)
            out.append(pad + "}")
    elif isinstance(stmt, Par):
        branches = []
        s = stmt
        while isinstance(s, Par):
            branches.append(s.left)
            s = s.right
        branches.append(s)
        out.append(pad + "{")
        for k, br in enumerate(branches):
            if k:
                out.append(pad + "||")
            _stmt_lines(br, depth + 1, out)
        out.append(pad + "}")
    else:
        raise TypeError(f"not a statement: {stmt!r}")


def function_str(f: Function) -> str:
    params = ", ".join((f.loc_param,) + f.int_params)
    body: list[str] = []
    _stmt_lines(f.body, 1, body)
    if not body:
        return f"{f.name}({params}) {{ }}"
    return "\n".join([f"{f.name}({params}) {{"] + body + ["}"])


def pretty_print(p: Program) -> str:
    return "\n\n".join(function_str(f) for f in p.functions) + "\n"
