"""Quantifier-free linear integer formulas over named integer symbols.

Symbols are plain strings.  The conventions used across the toolkit:

* ``M.p`` / ``N.p``: a parameter of the caller record M or callee record N,
* ``M.s1`` / ``M.s1#1``: the ghost value returned by call block ``s1``
  (``#i`` selects result ``i`` of a multi-value call),
* ``u.f`` / ``u.l.f``: field ``f`` of the record's node or of one of its
  descendants, read at function entry,
* ``H0.x``: the unknown value of ``x`` after a preceding conditional whose
  branch is not on the path.

Besides the arithmetic atoms there is one structural atom, :class:`Nil`,
stating that a descendant of the record's node is nil.  The integer decision
procedures refuse it; callers split it off first.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Union


@dataclass(frozen=True)
class Lin:
    """``sum(coef * sym) + const`` with nonzero coefficients, sorted by symbol."""

    terms: tuple[tuple[str, int], ...] = ()
    const: int = 0

    @staticmethod
    def of(coeffs: Mapping[str, int], const: int = 0) -> "Lin":
        return Lin(tuple(sorted((s, c) for s, c in coeffs.items() if c)), const)

    @staticmethod
    def sym(name: str) -> "Lin":
        return Lin(((name, 1),), 0)

    @staticmethod
    def num(k: int) -> "Lin":
        return Lin((), k)

    @property
    def coeffs(self) -> dict[str, int]:
        return dict(self.terms)

    def symbols(self) -> set[str]:
        return {s for s, _ in self.terms}

    def __add__(self, other: "Lin") -> "Lin":
        c = self.coeffs
        for s, k in other.terms:
            c[s] = c.get(s, 0) + k
        return Lin.of(c, self.const + other.const)

    def scale(self, k: int) -> "Lin":
        return Lin.of({s: c * k for s, c in self.terms}, self.const * k)

    def __neg__(self) -> "Lin":
        return self.scale(-1)

    def __sub__(self, other: "Lin") -> "Lin":
        return self + (-other)

    def subst(self, mapping: Mapping[str, "Lin"]) -> "Lin":
        out = Lin.num(self.const)
        for s, c in self.terms:
            out = out + (mapping[s].scale(c) if s in mapping else Lin(((s, c),)))
        return out

    def rename(self, f: Callable[[str], str]) -> "Lin":
        c: dict[str, int] = {}
        for s, k in self.terms:
            t = f(s)
            c[t] = c.get(t, 0) + k
        return Lin.of(c, self.const)

    def evaluate(self, env: Mapping[str, int]) -> int:
        return self.const + sum(c * env[s] for s, c in self.terms)

    def __str__(self) -> str:
        parts: list[str] = []
        for s, c in sorted(self.terms, key=lambda t: t[1] < 0):
            mag = abs(c)
            text = s if mag == 1 else f"{mag}*{s}"
            if not parts:
                parts.append(text if c > 0 else "-" + text)
            else:
                parts.append(("+ " if c > 0 else "- ") + text)
        if self.const or not parts:
            if not parts:
                parts.append(str(self.const))
            else:
                parts.append(("+ " if self.const > 0 else "- ") + str(abs(self.const)))
        return " ".join(parts)


# -- formulas ----------------------------------------------------------------


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Bot:
    def __str__(self) -> str:
        return "false"


TOP = Top()
BOT = Bot()


@dataclass(frozen=True)
class Geq:
    """``lin >= 0``."""

    lin: Lin

    def __str__(self) -> str:
        return _cmp_str(self.lin, ">=")


@dataclass(frozen=True)
class Eq:
    """``lin = 0``."""

    lin: Lin

    def __str__(self) -> str:
        return _cmp_str(self.lin, "=")


@dataclass(frozen=True)
class Nil:
    """Structural atom: the descendant ``path`` of the record's node is nil."""

    path: tuple[str, ...] = ()

    def __str__(self) -> str:
        return "isNil(" + ".".join(("u",) + self.path) + ")"


@dataclass(frozen=True)
class Conj:
    args: tuple["Formula", ...]

    def __str__(self) -> str:
        return " & ".join(_paren(a) for a in self.args)


@dataclass(frozen=True)
class Disj:
    args: tuple["Formula", ...]

    def __str__(self) -> str:
        return " | ".join(_paren(a) for a in self.args)


@dataclass(frozen=True)
class Neg:
    arg: "Formula"

    def __str__(self) -> str:
        return f"!({self.arg})"


Formula = Union[Top, Bot, Geq, Eq, Nil, Conj, Disj, Neg]
ATOMS = (Geq, Eq, Nil)


def _cmp_str(lin: Lin, op: str) -> str:
    # Print "a - b >= c" style: move the constant to the right.
    left = Lin(lin.terms, 0)
    if not lin.terms:
        return f"{lin.const} {op} 0"
    return f"{left} {op} {-lin.const}"


def _paren(f: Formula) -> str:
    if isinstance(f, (Conj, Disj)):
        return f"({f})"
    return str(f)


# -- smart constructors ------------------------------------------------------


def _const_atom(f: Formula) -> Formula:
    if isinstance(f, (Geq, Eq)) and not f.lin.terms:
        ok = f.lin.const >= 0 if isinstance(f, Geq) else f.lin.const == 0
        return TOP if ok else BOT
    return f


def geq(a: Lin, b: Lin = Lin()) -> Formula:
    """``a >= b``."""
    return _const_atom(Geq(a - b))


def gt(a: Lin, b: Lin = Lin()) -> Formula:
    """``a > b`` over the integers, i.e. ``a - b - 1 >= 0``."""
    return _const_atom(Geq(a - b - Lin.num(1)))


def eq(a: Lin, b: Lin = Lin()) -> Formula:
    return _const_atom(Eq(a - b))


def conj(*fs: Formula) -> Formula:
    out: list[Formula] = []
    for f in fs:
        if isinstance(f, Bot):
            return BOT
        if isinstance(f, Top):
            continue
        items = f.args if isinstance(f, Conj) else (f,)
        for g in items:
            if g not in out:
                out.append(g)
    if not out:
        return TOP
    if len(out) == 1:
        return out[0]
    return Conj(tuple(out))


def disj(*fs: Formula) -> Formula:
    out: list[Formula] = []
    for f in fs:
        if isinstance(f, Top):
            return TOP
        if isinstance(f, Bot):
            continue
        items = f.args if isinstance(f, Disj) else (f,)
        for g in items:
            if g not in out:
                out.append(g)
    if not out:
        return BOT
    if len(out) == 1:
        return out[0]
    return Disj(tuple(out))


def neg(f: Formula) -> Formula:
    if isinstance(f, Top):
        return BOT
    if isinstance(f, Bot):
        return TOP
    if isinstance(f, Neg):
        return f.arg
    if isinstance(f, Geq):
        # not (L >= 0) is L <= -1 over the integers
        return Geq(-f.lin - Lin.num(1))
    return Neg(f)


def implies(a: Formula, b: Formula) -> Formula:
    return disj(neg(a), b)


def iff(a: Formula, b: Formula) -> Formula:
    return conj(implies(a, b), implies(b, a))


# -- traversal ---------------------------------------------------------------


def map_lins(f: Formula, g: Callable[[Lin], Lin]) -> Formula:
    if isinstance(f, Geq):
        return _const_atom(Geq(g(f.lin)))
    if isinstance(f, Eq):
        return _const_atom(Eq(g(f.lin)))
    if isinstance(f, Conj):
        return conj(*(map_lins(a, g) for a in f.args))
    if isinstance(f, Disj):
        return disj(*(map_lins(a, g) for a in f.args))
    if isinstance(f, Neg):
        return neg(map_lins(f.arg, g))
    return f


def subst(f: Formula, mapping: Mapping[str, Lin]) -> Formula:
    return map_lins(f, lambda lin: lin.subst(mapping))


def rename(f: Formula, r: Callable[[str], str]) -> Formula:
    return map_lins(f, lambda lin: lin.rename(r))


def symbols(f: Formula) -> set[str]:
    if isinstance(f, (Geq, Eq)):
        return f.lin.symbols()
    if isinstance(f, (Conj, Disj)):
        out: set[str] = set()
        for a in f.args:
            out |= symbols(a)
        return out
    if isinstance(f, Neg):
        return symbols(f.arg)
    return set()


def atoms(f: Formula) -> list[Formula]:
    if isinstance(f, ATOMS):
        return [f]
    if isinstance(f, (Conj, Disj)):
        out: list[Formula] = []
        for a in f.args:
            out += [x for x in atoms(a) if x not in out]
        return out
    if isinstance(f, Neg):
        return atoms(f.arg)
    return []


def has_structural(f: Formula) -> bool:
    return any(isinstance(a, Nil) for a in atoms(f))


def evaluate(f: Formula, env: Mapping[str, int], is_nil: Optional[Callable[[tuple], bool]] = None) -> bool:
    """Truth value of ``f``; symbols missing from ``env`` are an error."""
    if isinstance(f, Top):
        return True
    if isinstance(f, Bot):
        return False
    if isinstance(f, Geq):
        return f.lin.evaluate(env) >= 0
    if isinstance(f, Eq):
        return f.lin.evaluate(env) == 0
    if isinstance(f, Nil):
        if is_nil is None:
            raise ValueError("structural atom needs a nil oracle")
        return is_nil(f.path)
    if isinstance(f, Conj):
        return all(evaluate(a, env, is_nil) for a in f.args)
    if isinstance(f, Disj):
        return any(evaluate(a, env, is_nil) for a in f.args)
    if isinstance(f, Neg):
        return not evaluate(f.arg, env, is_nil)
    raise TypeError(f)


def big_conj(fs: Iterable[Formula]) -> Formula:
    return conj(*list(fs))


def big_disj(fs: Iterable[Formula]) -> Formula:
    return disj(*list(fs))
