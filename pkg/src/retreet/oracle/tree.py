"""Small concrete trees with integer fields, and their exhaustive enumeration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from ..lang.errors import RetreetError
from ..semantics.formula import Lin

Node = tuple[str, ...]

DEFAULT_TREE_BUDGET = 1_000_000


class BudgetExceeded(RetreetError):
    """An enumeration or exploration would exceed its configured budget."""


def node_name(node: Node) -> str:
    return ".".join(("root",) + tuple(node))


@dataclass(frozen=True)
class ConcreteTree:
    """A finite binary tree: allocated nodes plus a field store.

    Fields missing from ``values`` read as 0, except the fields listed in
    ``symbolic``, which read as the input symbol ``root.l.f`` so that one run
    stands for every value of that field.
    """

    nodes: frozenset
    values: tuple = ()  # sorted ((node, field), value)
    symbolic: frozenset = frozenset()

    @staticmethod
    def make(nodes: Iterable[Node], values: Optional[dict] = None, symbolic: Iterable[str] = ()) -> "ConcreteTree":
        nodes = frozenset(tuple(n) for n in nodes)
        for n in nodes:
            if n and n[:-1] not in nodes:
                raise ValueError(f"{node_name(n)} has no parent in the tree")
        vals = tuple(sorted((values or {}).items()))
        return ConcreteTree(nodes, vals, frozenset(symbolic))

    def is_nil(self, node: Node) -> bool:
        return node not in self.nodes

    def read(self, node: Node, name: str) -> Lin:
        for (n, f), v in self.values:
            if n == node and f == name:
                return Lin.num(v)
        if name in self.symbolic:
            return Lin.sym(f"{node_name(node)}.{name}")
        return Lin.num(0)

    @property
    def height(self) -> int:
        return max((len(n) + 1 for n in self.nodes), default=0)

    def sorted_nodes(self) -> list[Node]:
        return sorted(self.nodes, key=lambda n: (len(n), n))

    def describe(self) -> str:
        if not self.nodes:
            return "nil"
        parts = []
        for n in self.sorted_nodes():
            fields = ", ".join(f"{f}={v}" for (m, f), v in self.values if m == n)
            parts.append(node_name(n) + (f" {{{fields}}}" if fields else ""))
        return "; ".join(parts)


def shapes(max_height: int) -> list[frozenset]:
    """Node sets of all trees with at most ``max_height`` levels, smallest first."""
    if max_height < 0:
        raise ValueError("max_height must be non-negative")

    def go(h: int) -> list[frozenset]:
        if h == 0:
            return [frozenset()]
        sub = go(h - 1)
        out = [frozenset()]
        for a, b in itertools.product(sub, sub):
            out.append(frozenset({()} | {("l",) + n for n in a} | {("r",) + n for n in b}))
        return out

    return sorted(set(go(max_height)), key=lambda s: (len(s), sorted(s)))


def count_trees(max_height: int, value_domain: Iterable[int], fields: Iterable[str]) -> int:
    d, k = len(set(value_domain)), len(set(fields))
    return sum(d ** (k * len(s)) for s in shapes(max_height))


def enumerate_trees(
    max_height: int,
    value_domain: Iterable[int] = (0,),
    fields: Iterable[str] = (),
    budget: Optional[int] = DEFAULT_TREE_BUDGET,
    symbolic: Iterable[str] = (),
) -> Iterator[ConcreteTree]:
    """Every tree up to ``max_height`` with every assignment of ``fields`` over ``value_domain``.

    Raises :class:`BudgetExceeded` before yielding anything when the total
    count is above ``budget``.
    """
    domain = sorted(set(value_domain))
    names = sorted(set(fields))
    total = count_trees(max_height, domain, names)
    if budget is not None and total > budget:
        raise BudgetExceeded(f"{total} trees exceed the budget of {budget}")
    for s in shapes(max_height):
        nodes = sorted(s, key=lambda n: (len(n), n))
        slots = [(n, f) for n in nodes for f in names]
        for combo in itertools.product(domain, repeat=len(slots)):
            yield ConcreteTree(frozenset(s), tuple(sorted(zip(slots, combo))), frozenset(symbolic))
