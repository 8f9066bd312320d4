"""Weakest preconditions, per-condition WP, Match and path conditions.

Inside one function body the symbols are the raw names: parameters and
locals by name, fields as ``u.f``/``u.l.f``.  :func:`finalize` then maps a
formula into record terms: parameters ``p`` become ``M.p``, locals that were
never assigned on the path become 0 (locals start at zero).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..blocks import (
    MAIN,
    Assume,
    BlockTable,
    Havoc,
    SpeculatedCall,
    StraightCode,
    callees,
    field_symbol,
)
from ..lang.ast import (
    Add,
    And,
    Call,
    Const,
    Field,
    FieldAssign,
    IsNil,
    Not,
    Positive,
    Return,
    Sub,
    TrueCond,
    Var,
    VarAssign,
)
from ..lang.errors import RetreetError
from .formula import (
    TOP,
    Formula,
    Lin,
    Nil,
    conj,
    eq,
    gt,
    has_structural,
    neg,
    subst,
    symbols,
)


class UnknownSymbol(RetreetError):
    pass


class NotCallee(RetreetError):
    pass


def ghost(prefix: str, bid: str, index: int = 0) -> str:
    """Symbol for result ``index`` of call block ``bid`` in record ``prefix``."""
    return f"{prefix}.{bid}" if index == 0 else f"{prefix}.{bid}#{index}"


def aexpr_lin(e) -> Lin:
    if isinstance(e, Const):
        return Lin.num(e.value)
    if isinstance(e, Var):
        return Lin.sym(e.name)
    if isinstance(e, Field):
        return Lin.sym(field_symbol(e.loc.path, e.name))
    if isinstance(e, Add):
        return aexpr_lin(e.left) + aexpr_lin(e.right)
    if isinstance(e, Sub):
        return aexpr_lin(e.left) - aexpr_lin(e.right)
    raise TypeError(f"not an arithmetic expression: {e!r}")


def cond_formula(c) -> Formula:
    """A source condition as a formula; nil tests become structural atoms."""
    if isinstance(c, TrueCond):
        return TOP
    if isinstance(c, IsNil):
        return Nil(c.loc.path)
    if isinstance(c, Positive):
        return gt(aexpr_lin(c.expr))
    if isinstance(c, Not):
        return neg(cond_formula(c.arg))
    if isinstance(c, And):
        return conj(cond_formula(c.left), cond_formula(c.right))
    raise TypeError(f"not a condition: {c!r}")


@dataclass(frozen=True)
class SymbolicValuation:
    """The domain of a record valuation: Params(f) plus the call blocks of f."""

    prefix: str
    params: tuple[str, ...]
    calls: dict = field(default_factory=dict, hash=False)  # call block id -> number of results

    @staticmethod
    def for_function(table: BlockTable, fname: str, prefix: str = "M") -> "SymbolicValuation":
        calls = {
            b: max(1, len(table.blocks[b].block.results))
            for b in table.blocks_of[fname]
            if table.blocks[b].is_call
        }
        return SymbolicValuation(prefix, tuple(table.params_of[fname]), calls)

    def domain(self) -> set[str]:
        out = {f"{self.prefix}.{p}" for p in self.params}
        for b, k in self.calls.items():
            out |= {ghost(self.prefix, b, i) for i in range(k)}
        return out


def _assign_steps(assigns) -> list[tuple[str, Lin]]:
    out = []
    for a in assigns:
        if isinstance(a, FieldAssign):
            out.append((field_symbol(a.loc.path, a.name), aexpr_lin(a.value)))
        elif isinstance(a, VarAssign):
            out.append((a.name, aexpr_lin(a.value)))
        elif isinstance(a, Return):
            pass  # return slots are never read inside the body
        else:
            raise TypeError(f"unsupported assignment in wp: {a!r}")
    return out


def _steps(code: Sequence, prefix: str) -> list[dict[str, Lin]]:
    """One simultaneous substitution per elementary step, in program order."""
    steps: list[dict[str, Lin]] = []
    havocs: dict[str, int] = {}
    for e in code:
        if isinstance(e, StraightCode):
            for target, value in _assign_steps(e.assigns):
                steps.append({target: value})
        elif isinstance(e, (FieldAssign, VarAssign, Return)):
            for target, value in _assign_steps([e]):
                steps.append({target: value})
        elif isinstance(e, SpeculatedCall):
            steps.append({r: Lin.sym(ghost(prefix, e.block, i)) for i, r in enumerate(e.call.results)})
        elif isinstance(e, Havoc):
            m = {}
            for sym in e.targets:
                j = havocs.get(sym, 0)
                havocs[sym] = j + 1
                m[sym] = Lin.sym(f"H{j}.{sym}")
            steps.append(m)
        elif isinstance(e, Assume):
            continue
        else:
            raise TypeError(f"not a path entry: {e!r}")
    return steps


def wp(code: Sequence, phi: Formula, m: Optional[SymbolicValuation] = None) -> Formula:
    """Weakest precondition of straight-line ``code`` for ``phi``.

    Assignments substitute their right-hand side, a call substitutes the
    ghost ``M(s)`` for each result, and a havoc substitutes a fresh unknown.
    With ``m`` given, any record symbol outside its domain is an error.
    """
    prefix = m.prefix if m is not None else "M"
    if m is not None:
        _check_domain(phi, m)
    for step in reversed(_steps(code, prefix)):
        phi = subst(phi, step)
    if m is not None:
        _check_domain(phi, m)
    return phi


def wp_term(code: Sequence, term: Lin, prefix: str = "M") -> Lin:
    for step in reversed(_steps(code, prefix)):
        term = term.subst(step)
    return term


def _check_domain(phi: Formula, m: SymbolicValuation) -> None:
    dom = m.domain()
    for s in symbols(phi):
        if s.startswith(m.prefix + ".") and s not in dom:
            raise UnknownSymbol(f"{s} is outside the record domain")


def finalize_map(syms: Iterable[str], params: Sequence[str], prefix: str = "M") -> dict[str, Lin]:
    """Parameters to record symbols, leftover locals to their initial 0."""
    out: dict[str, Lin] = {}
    for s in syms:
        if "." in s:
            continue
        out[s] = Lin.sym(f"{prefix}.{s}") if s in params else Lin.num(0)
    return out


def finalize(phi: Formula, params: Sequence[str], prefix: str = "M") -> Formula:
    return subst(phi, finalize_map(symbols(phi), params, prefix))


def finalize_term(t: Lin, params: Sequence[str], prefix: str = "M") -> Lin:
    return t.subst(finalize_map(t.symbols(), params, prefix))


# -- per-condition WP, Match and PathCond ------------------------------------------


def wp_condition(table: BlockTable, cond_id: str, polarity: bool = True, prefix: str = "M") -> Formula:
    """WP(c, M): the condition pulled back to function entry, over record symbols.

    Nil tests come back as a (possibly negated) structural :class:`Nil` atom
    with no integer content.
    """
    info = table.conds[cond_id]
    f = cond_formula(info.cond)
    if not polarity:
        f = neg(f)
    if has_structural(f):
        return f
    code = table.cond_prefix[cond_id]
    params = table.params_of[info.function]
    return finalize(wp(code, f), params, prefix)


def match_constraint(table: BlockTable, s: str, t: str, m: str = "M", n: str = "N") -> tuple[tuple[str, ...], Formula]:
    """(direction of v from u, equations fixing N's parameters).

    The direction is the Loc argument path of ``t`` when ``t`` is a call and
    ``()`` otherwise.  Parameter equations exist only for call targets.
    """
    if t not in callees(table, s):
        raise NotCallee(f"{s} does not call the function of {t}")
    info = table.blocks[t]
    if not info.is_call:
        return (), TOP
    call: Call = info.block
    params = table.params_of[info.function]
    callee_params = table.params_of[call.callee]
    code = table.path_of[t]
    eqs = []
    for p, arg in zip(callee_params, call.int_args):
        value = finalize_term(wp_term(code, aexpr_lin(arg), m), params, m)
        eqs.append(eq(Lin.sym(f"{n}.{p}"), value))
    return call.loc_arg.path, conj(*eqs)


@dataclass(frozen=True)
class SignedCond:
    cond_id: str
    polarity: bool
    formula: Formula  # WP(c, M) with the polarity applied

    @property
    def structural(self) -> bool:
        return has_structural(self.formula)


@dataclass(frozen=True)
class PathCond:
    """PathCond_{s,t}(u, v, M, N) split into its three parts."""

    s: str
    t: str
    direction: tuple[str, ...]  # v = u.<direction>
    conds: tuple[SignedCond, ...]
    match: Formula

    @property
    def structural(self) -> tuple[SignedCond, ...]:
        return tuple(c for c in self.conds if c.structural)

    @property
    def arith(self) -> Formula:
        return conj(*(c.formula for c in self.conds if not c.structural), self.match)

    def direction_str(self) -> str:
        return "v = " + ".".join(("u",) + self.direction)

    def __str__(self) -> str:
        parts = [self.direction_str()]
        parts += [str(c.formula) for c in self.structural]
        a = self.arith
        if a != TOP:
            parts.append(str(a))
        return " & ".join(f"({x})" if " | " in x else x for x in parts)


def path_condition(table: BlockTable, s: str, t: str, m: str = "M", n: str = "N") -> PathCond:
    direction, match = match_constraint(table, s, t, m, n)
    conds = []
    for e in table.path_of[t]:
        if isinstance(e, Assume):
            conds.append(SignedCond(e.cond_id, e.polarity, wp_condition(table, e.cond_id, e.polarity, m)))
    return PathCond(s, t, direction, tuple(conds), match)


def record_function(table: BlockTable, s: str) -> str:
    """The function whose activation a record for ``s`` describes."""
    return table.entry if s == MAIN else table.callee_of(s)
