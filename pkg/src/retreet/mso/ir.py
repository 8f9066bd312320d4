"""Monadic second-order formulas over the infinite binary tree.

First-order variables range over tree nodes, second-order variables over
finite node sets.  Nodes are written as tuples of directions (``()`` is the
root, ``("l", "r")`` its left child's right child).  Set variables are free
in the formulas built here: a query asks for an assignment to them.

The finite evaluator interprets a formula over every node of depth at most
``depth``; successors leaving that universe denote no node, so membership
and equality involving them are false.  It is a test aid and the checking
half of the bounded backend, not a decision procedure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

DIRS = ("l", "r")


# -- terms -------------------------------------------------------------------


@dataclass(frozen=True)
class V:
    """A first-order node variable, optionally followed by child steps."""

    name: str
    path: tuple[str, ...] = ()

    def child(self, *dirs: str) -> "V":
        return V(self.name, self.path + tuple(dirs))


# -- formulas ----------------------------------------------------------------


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class In:
    term: V
    set: str


@dataclass(frozen=True)
class EqN:
    left: V
    right: V


@dataclass(frozen=True)
class IsRoot:
    term: V


@dataclass(frozen=True)
class Reach:
    """``below`` is ``above`` or one of its descendants."""

    above: V
    below: V


@dataclass(frozen=True)
class Not:
    arg: "Mso"


@dataclass(frozen=True)
class And:
    args: tuple["Mso", ...]


@dataclass(frozen=True)
class Or:
    args: tuple["Mso", ...]


@dataclass(frozen=True)
class Ex1:
    var: str
    body: "Mso"


@dataclass(frozen=True)
class All1:
    var: str
    body: "Mso"


@dataclass(frozen=True)
class Ex2:
    var: str
    body: "Mso"


@dataclass(frozen=True)
class All2:
    var: str
    body: "Mso"


Mso = Union[TrueF, FalseF, In, EqN, IsRoot, Reach, Not, And, Or, Ex1, All1, Ex2, All2]

TRUE = TrueF()
FALSE = FalseF()


def and_(*fs: Mso) -> Mso:
    out: list[Mso] = []
    for f in fs:
        if isinstance(f, FalseF):
            return FALSE
        if isinstance(f, TrueF):
            continue
        for g in f.args if isinstance(f, And) else (f,):
            if g not in out:
                out.append(g)
    if not out:
        return TRUE
    return out[0] if len(out) == 1 else And(tuple(out))


def or_(*fs: Mso) -> Mso:
    out: list[Mso] = []
    for f in fs:
        if isinstance(f, TrueF):
            return TRUE
        if isinstance(f, FalseF):
            continue
        for g in f.args if isinstance(f, Or) else (f,):
            if g not in out:
                out.append(g)
    if not out:
        return FALSE
    return out[0] if len(out) == 1 else Or(tuple(out))


def not_(f: Mso) -> Mso:
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def implies(a: Mso, b: Mso) -> Mso:
    return or_(not_(a), b)


def iff(a: Mso, b: Mso) -> Mso:
    if a == b:
        return TRUE
    return and_(implies(a, b), implies(b, a))


def ex1(var: str, body: Mso) -> Mso:
    return body if isinstance(body, (TrueF, FalseF)) else Ex1(var, body)


def all1(var: str, body: Mso) -> Mso:
    return body if isinstance(body, (TrueF, FalseF)) else All1(var, body)


def big_and(fs: Iterable[Mso]) -> Mso:
    return and_(*list(fs))


def big_or(fs: Iterable[Mso]) -> Mso:
    return or_(*list(fs))


# -- inspection --------------------------------------------------------------


def set_vars(f: Mso) -> set[str]:
    """Free second-order variables."""
    if isinstance(f, In):
        return {f.set}
    if isinstance(f, Not):
        return set_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for a in f.args:
            out |= set_vars(a)
        return out
    if isinstance(f, (Ex1, All1)):
        return set_vars(f.body)
    if isinstance(f, (Ex2, All2)):
        return set_vars(f.body) - {f.var}
    return set()


def node_vars(f: Mso) -> set[str]:
    """Free first-order variables."""
    if isinstance(f, In):
        return {f.term.name}
    if isinstance(f, IsRoot):
        return {f.term.name}
    if isinstance(f, (EqN, Reach)):
        a, b = (f.left, f.right) if isinstance(f, EqN) else (f.above, f.below)
        return {a.name, b.name}
    if isinstance(f, Not):
        return node_vars(f.arg)
    if isinstance(f, (And, Or)):
        out: set[str] = set()
        for a in f.args:
            out |= node_vars(a)
        return out
    if isinstance(f, (Ex1, All1)):
        return node_vars(f.body) - {f.var}
    if isinstance(f, (Ex2, All2)):
        return node_vars(f.body)
    return set()


def size(f: Mso) -> int:
    if isinstance(f, Not):
        return 1 + size(f.arg)
    if isinstance(f, (And, Or)):
        return 1 + sum(size(a) for a in f.args)
    if isinstance(f, (Ex1, All1, Ex2, All2)):
        return 1 + size(f.body)
    return 1


# -- finite evaluation -------------------------------------------------------


def nodes_upto(depth: int) -> list[tuple[str, ...]]:
    """Every node of depth at most ``depth``, in breadth-first order."""
    out: list[tuple[str, ...]] = [()]
    layer: list[tuple[str, ...]] = [()]
    for _ in range(depth):
        layer = [n + (d,) for n in layer for d in DIRS]
        out += layer
    return out


@dataclass
class FiniteModel:
    """An assignment of node sets and nodes over the nodes of depth ≤ ``depth``."""

    depth: int
    sets: Mapping[str, frozenset]
    nodes: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        self.universe = nodes_upto(self.depth)


class EvalError(ValueError):
    pass


def _term(t: V, env: Mapping[str, tuple], depth: int) -> Optional[tuple]:
    if t.name not in env:
        raise EvalError(f"unbound node variable {t.name}")
    base = env[t.name]
    if base is None:
        return None
    node = base + t.path
    return node if len(node) <= depth else None


def evaluate(f: Mso, model: FiniteModel) -> bool:
    return _eval(f, model, dict(model.nodes))


def _eval(f: Mso, m: FiniteModel, env: dict) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, In):
        node = _term(f.term, env, m.depth)
        if f.set not in m.sets:
            raise EvalError(f"unassigned set variable {f.set}")
        return node is not None and node in m.sets[f.set]
    if isinstance(f, EqN):
        a = _term(f.left, env, m.depth)
        b = _term(f.right, env, m.depth)
        return a is not None and a == b
    if isinstance(f, IsRoot):
        return _term(f.term, env, m.depth) == ()
    if isinstance(f, Reach):
        a = _term(f.above, env, m.depth)
        b = _term(f.below, env, m.depth)
        return a is not None and b is not None and b[: len(a)] == a
    if isinstance(f, Not):
        return not _eval(f.arg, m, env)
    if isinstance(f, And):
        return all(_eval(a, m, env) for a in f.args)
    if isinstance(f, Or):
        return any(_eval(a, m, env) for a in f.args)
    if isinstance(f, (Ex1, All1)):
        saved = env.get(f.var, _MISSING)
        want_any = isinstance(f, Ex1)
        result = not want_any
        for node in m.universe:
            env[f.var] = node
            if _eval(f.body, m, env) == want_any:
                result = want_any
                break
        if saved is _MISSING:
            env.pop(f.var, None)
        else:
            env[f.var] = saved
        return result
    if isinstance(f, (Ex2, All2)):
        raise EvalError("second-order quantifiers are not evaluated; use free set variables")
    raise TypeError(f)


_MISSING = object()
