"""Satisfiability and equivalence for quantifier-free linear integer formulas."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from ..semantics.formula import (
    Bot,
    Conj,
    Disj,
    Eq,
    Formula,
    Geq,
    Lin,
    Neg,
    Nil,
    Top,
    conj,
    evaluate,
    neg,
    symbols,
)
from .omega import EQ, GEQ, Budget, Constraint, solve


@dataclass(frozen=True)
class Sat:
    model: dict = field(hash=False)

    def __bool__(self) -> bool:
        return True


@dataclass(frozen=True)
class Unsat:
    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class Unknown:
    reason: str

    def __bool__(self) -> bool:
        return False


SatVerdict = Union[Sat, Unsat, Unknown]


@dataclass(frozen=True)
class Equivalent:
    pass


@dataclass(frozen=True)
class NotEquivalent:
    witness: dict = field(hash=False)


@dataclass(frozen=True)
class EquivUnknown:
    reason: str


class StructuralAtom(ValueError):
    pass


def nnf(f: Formula, positive: bool = True) -> Formula:
    """Negation normal form; negated equalities become two strict sides."""
    if isinstance(f, Top):
        return f if positive else neg(f)
    if isinstance(f, Bot):
        return f if positive else neg(f)
    if isinstance(f, Geq):
        return f if positive else neg(f)
    if isinstance(f, Eq):
        if positive:
            return f
        one = Lin.num(1)
        return Disj((Geq(f.lin - one), Geq(-f.lin - one)))
    if isinstance(f, Nil):
        raise StructuralAtom(f"structural atom {f} in an integer query")
    if isinstance(f, Neg):
        return nnf(f.arg, not positive)
    if isinstance(f, Conj):
        parts = tuple(nnf(a, positive) for a in f.args)
        return Conj(parts) if positive else Disj(parts)
    if isinstance(f, Disj):
        parts = tuple(nnf(a, positive) for a in f.args)
        return Disj(parts) if positive else Conj(parts)
    raise TypeError(f)


def _constraint(a: Formula) -> Constraint:
    kind = GEQ if isinstance(a, Geq) else EQ
    return Constraint.make(a.lin.coeffs, a.lin.const, kind)


def _cubes(todo: list[Formula], acc: list[Constraint], budget: int) -> Iterator[list[Constraint]]:
    """Depth-first expansion of the disjunctions, pruning unsatisfiable prefixes."""
    while todo:
        f, todo = todo[0], todo[1:]
        if isinstance(f, Top):
            continue
        if isinstance(f, Bot):
            return
        if isinstance(f, Conj):
            todo = list(f.args) + todo
            continue
        if isinstance(f, Disj):
            if acc and solve(acc, budget) is None:
                return
            for a in f.args:
                yield from _cubes([a] + todo, acc, budget)
            return
        acc = acc + [_constraint(f)]
    yield acc


def lia_satisfiable(f: Formula, backend=None, budget: int = 200_000) -> SatVerdict:
    """Decide ``f`` over the integers.

    The internal Omega-test procedure is complete; ``Unknown`` only comes from
    an exhausted step budget or from an external ``backend`` (an object with a
    ``check(formula)`` method returning a verdict).
    """
    if backend is not None:
        return backend.check(f)
    syms = sorted(symbols(f))
    try:
        for cube in _cubes([nnf(f)], [], budget):
            model = solve(cube, budget)
            if model is not None:
                full = {s: model.get(s, 0) for s in syms}
                if not evaluate(f, full):
                    raise AssertionError(f"model {full} does not satisfy {f}")
                return Sat(full)
    except Budget:
        return Unknown("elimination budget exhausted")
    return Unsat()


def lia_equivalent(f: Formula, g: Formula, backend=None, budget: int = 200_000):
    """Equivalent, NotEquivalent(witness) or EquivUnknown, via two satisfiability calls."""
    reasons = []
    for probe in (conj(f, neg(g)), conj(neg(f), g)):
        v = lia_satisfiable(probe, backend, budget)
        if isinstance(v, Sat):
            return NotEquivalent(v.model)
        if isinstance(v, Unknown):
            reasons.append(v.reason)
    if reasons:
        return EquivUnknown("; ".join(reasons))
    return Equivalent()


def lia_valid(f: Formula, backend=None) -> Optional[bool]:
    v = lia_satisfiable(neg(f), backend)
    if isinstance(v, Unknown):
        return None
    return isinstance(v, Unsat)
