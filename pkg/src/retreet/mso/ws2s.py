"""Serialization to the tree-mode input language of WS2S solvers (MONA syntax).

The output is deterministic: declarations are sorted and the formula is
printed exactly as built, so equal queries give byte-identical files.
"""
from __future__ import annotations

from .ir import (
    All1,
    All2,
    And,
    EqN,
    Ex1,
    Ex2,
    FalseF,
    In,
    IsRoot,
    Mso,
    Not,
    Or,
    Reach,
    TrueF,
    V,
    node_vars,
    set_vars,
)

PRELUDE = [
    "ws2s;",
    "",
    "# x is the root: it is nobody's child",
    "pred isroot(var1 x) = all1 y: y.0 ~= x & y.1 ~= x;",
    "",
    "# y is x or below x: every parent-closed set holding y holds x",
    "pred reach(var1 x, var1 y) = all2 S: (y in S & (all1 z: (z.0 in S | z.1 in S) => z in S)) => x in S;",
]

_STEP = {"l": "0", "r": "1"}


def term(t: V) -> str:
    return t.name + "".join("." + _STEP[d] for d in t.path)


def _needs_var(t: V, what: str) -> str:
    if t.path:
        raise ValueError(f"{what} takes a plain variable, got {term(t)}")
    return t.name


def show(f: Mso) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, In):
        return f"{term(f.term)} in {f.set}"
    if isinstance(f, EqN):
        return f"{term(f.left)} = {term(f.right)}"
    if isinstance(f, IsRoot):
        return f"isroot({_needs_var(f.term, 'isroot')})"
    if isinstance(f, Reach):
        return f"reach({_needs_var(f.above, 'reach')}, {_needs_var(f.below, 'reach')})"
    if isinstance(f, Not):
        a = f.arg
        if isinstance(a, In):
            return f"{term(a.term)} notin {a.set}"
        if isinstance(a, EqN):
            return f"{term(a.left)} ~= {term(a.right)}"
        return f"~({show(a)})"
    if isinstance(f, Or):
        # print a two-way "~a | b" as an implication
        if len(f.args) == 2 and isinstance(f.args[0], Not) and not isinstance(f.args[0].arg, (In, EqN)):
            return f"({show(f.args[0].arg)}) => ({show(f.args[1])})"
        if len(f.args) == 2 and isinstance(f.args[0], Not):
            return f"{show(f.args[0].arg)} => ({show(f.args[1])})"
        return " | ".join(_group(a) for a in f.args)
    if isinstance(f, And):
        return " & ".join(_group(a) for a in f.args)
    if isinstance(f, (Ex1, All1, Ex2, All2)):
        kw = {Ex1: "ex1", All1: "all1", Ex2: "ex2", All2: "all2"}[type(f)]
        return f"{kw} {f.var}: {_group(f.body)}"
    raise TypeError(f)


def _group(f: Mso) -> str:
    if isinstance(f, (And, Or, Ex1, All1, Ex2, All2)):
        return f"({show(f)})"
    return show(f)


def emit_ws2s(f: Mso, set_names: list[str] | None = None, node_names: list[str] | None = None) -> str:
    """Solver input declaring every free variable of ``f``.

    ``set_names`` / ``node_names`` add declarations for variables the formula
    does not mention (so decoded models always cover a whole label family).
    """
    sets = sorted(set(set_names or []) | set_vars(f))
    nodes = sorted(set(node_names or []) | node_vars(f))
    lines = list(PRELUDE)
    lines.append("")
    if sets:
        lines.append(f"var2 {', '.join(sets)};")
    if nodes:
        lines.append(f"var1 {', '.join(nodes)};")
    lines.append("")
    lines.append(show(f) + ";")
    return "\n".join(lines) + "\n"
