"""Omega test: satisfiability of conjunctions of linear integer constraints.

A constraint is ``sum(a_i * x_i) + c >= 0`` or ``= 0``.  Equalities are
eliminated first (unit coefficients by substitution, others with the
symmetric-modulo trick), then inequalities by Fourier-Motzkin with integer
shadows: exact elimination when a coefficient is 1, otherwise the dark
shadow, the real shadow as a refutation test, and finally the grey-shadow
splinters.  Models are rebuilt by back-substitution.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Optional

GEQ = ">="
EQ = "="


@dataclass(frozen=True)
class Constraint:
    coeffs: tuple[tuple[str, int], ...]  # sorted, nonzero
    const: int
    kind: str  # GEQ or EQ

    @staticmethod
    def make(coeffs: dict[str, int], const: int, kind: str) -> "Constraint":
        return Constraint(tuple(sorted((v, a) for v, a in coeffs.items() if a)), const, kind)

    def coef(self, v: str) -> int:
        for x, a in self.coeffs:
            if x == v:
                return a
        return 0

    @property
    def vars(self) -> list[str]:
        return [v for v, _ in self.coeffs]

    def value(self, model: dict[str, int]) -> int:
        return self.const + sum(a * model[v] for v, a in self.coeffs)

    def holds(self, model: dict[str, int]) -> bool:
        x = self.value(model)
        return x >= 0 if self.kind == GEQ else x == 0


class Budget(Exception):
    """Raised when the elimination exceeds its step budget."""


def _floor_div(a: int, b: int) -> int:
    return a // b


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def _mod_hat(a: int, m: int) -> int:
    # symmetric residue in [-m/2, m/2)
    return a - m * _floor_div(2 * a + m, 2 * m)


def _normalize(c: Constraint) -> Optional[Constraint]:
    """Divide by the coefficient gcd; ``None`` means the constraint is false."""
    if not c.coeffs:
        ok = c.const >= 0 if c.kind == GEQ else c.const == 0
        return c if ok else None
    g = 0
    for _, a in c.coeffs:
        g = gcd(g, abs(a))
    if g == 1:
        return c
    if c.kind == EQ:
        if c.const % g:
            return None
        return Constraint(tuple((v, a // g) for v, a in c.coeffs), c.const // g, EQ)
    return Constraint(tuple((v, a // g) for v, a in c.coeffs), _floor_div(c.const, g), GEQ)


def _substitute(c: Constraint, v: str, expr: dict[str, int], expr_const: int) -> Constraint:
    """Replace ``v`` by ``expr + expr_const`` in ``c``."""
    a = c.coef(v)
    if not a:
        return c
    coeffs = {x: k for x, k in c.coeffs if x != v}
    for x, k in expr.items():
        coeffs[x] = coeffs.get(x, 0) + a * k
    return Constraint.make(coeffs, c.const + a * expr_const, c.kind)


# Back-substitution records: ("def", v, expr, const) means v := expr + const;
# ("bounds", v, constraints) means pick any v satisfying the constraints.


class _Solver:
    def __init__(self, budget: int):
        self.budget = budget
        self.fresh = 0

    def tick(self) -> None:
        self.budget -= 1
        if self.budget < 0:
            raise Budget()

    def solve(self, cs: list[Constraint]) -> Optional[dict[str, int]]:
        self.tick()
        norm = []
        for c in cs:
            n = _normalize(c)
            if n is None:
                return None
            if n.coeffs and n not in norm:
                norm.append(n)
        cs = norm
        eqs = [c for c in cs if c.kind == EQ]
        if eqs:
            return self._eliminate_equality(cs, eqs[0])
        cs = self._tighten_pairs(cs)
        if cs is None:
            return None
        if any(c.kind == EQ for c in cs):
            return self.solve(cs)
        if not cs:
            return {}
        return self._eliminate_inequality(cs)

    # -- equalities -----------------------------------------------------------
    def _eliminate_equality(self, cs: list[Constraint], e: Constraint) -> Optional[dict[str, int]]:
        unit = [v for v, a in e.coeffs if abs(a) == 1]
        rest = [c for c in cs if c is not e]
        if unit:
            v = unit[0]
            a = e.coef(v)
            # a*v + sum + c = 0  ->  v = -(sum + c)/a
            expr = {x: -k * a for x, k in e.coeffs if x != v}
            const = -e.const * a
            model = self.solve([_substitute(c, v, expr, const) for c in rest])
            if model is None:
                return None
            model[v] = const + sum(k * model.setdefault(x, 0) for x, k in expr.items())
            return model
        # Symmetric-modulo step: introduce sigma with a smaller coefficient system.
        v, ak = min(e.coeffs, key=lambda t: (abs(t[1]), t[0]))
        m = abs(ak) + 1
        self.fresh += 1
        sigma = f"_sigma{self.fresh}"
        sign = 1 if ak > 0 else -1
        # x_v = sign * ( -m*sigma + sum_{i != v} mod_hat(a_i, m) x_i + mod_hat(c, m) )
        expr = {sigma: -m * sign}
        for x, k in e.coeffs:
            if x != v:
                expr[x] = sign * _mod_hat(k, m)
        const = sign * _mod_hat(e.const, m)
        model = self.solve([_substitute(c, v, expr, const) for c in cs])
        if model is None:
            return None
        model[v] = const + sum(k * model.setdefault(x, 0) for x, k in expr.items())
        model.pop(sigma, None)
        return model

    # -- inequalities -----------------------------------------------------------
    def _tighten_pairs(self, cs: list[Constraint]) -> Optional[list[Constraint]]:
        """Detect ``L >= 0`` with ``-L + k >= 0``: contradiction or equality."""
        by_coeffs: dict[tuple, Constraint] = {}
        for c in cs:
            key = c.coeffs
            prev = by_coeffs.get(key)
            if prev is None or c.const < prev.const:
                by_coeffs[key] = c
        out = list(by_coeffs.values())
        for c in list(out):
            neg = tuple((v, -a) for v, a in c.coeffs)
            d = by_coeffs.get(neg)
            if d is None:
                continue
            # c: L + c1 >= 0, d: -L + c2 >= 0  =>  -c1 <= L <= c2
            if c.const + d.const < 0:
                return None
            if c.const + d.const == 0 and c in out and d in out:
                out.remove(c)
                out.remove(d)
                out.append(Constraint(c.coeffs, c.const, EQ))
        return out

    def _eliminate_inequality(self, cs: list[Constraint]) -> Optional[dict[str, int]]:
        variables = sorted({v for c in cs for v in c.vars})
        # Variables bounded on one side only: drop their constraints.
        for v in variables:
            signs = {1 if c.coef(v) > 0 else -1 for c in cs if c.coef(v)}
            if len(signs) == 1:
                keep = [c for c in cs if not c.coef(v)]
                mine = [c for c in cs if c.coef(v)]
                model = self.solve(keep)
                if model is None:
                    return None
                model[v] = _pick(v, mine, model)
                return model

        def cost(v: str):
            lows = [c.coef(v) for c in cs if c.coef(v) > 0]
            ups = [-c.coef(v) for c in cs if c.coef(v) < 0]
            exact = all(a == 1 for a in lows) or all(b == 1 for b in ups)
            return (0 if exact else 1, len(lows) * len(ups), v)

        v = min(variables, key=cost)
        lows = [c for c in cs if c.coef(v) > 0]
        ups = [c for c in cs if c.coef(v) < 0]
        others = [c for c in cs if not c.coef(v)]
        exact = all(c.coef(v) == 1 for c in lows) or all(c.coef(v) == -1 for c in ups)

        def combine(dark: bool) -> list[Constraint]:
            out = list(others)
            for lo in lows:
                a = lo.coef(v)
                for up in ups:
                    b = -up.coef(v)
                    coeffs: dict[str, int] = {}
                    for x, k in lo.coeffs:
                        if x != v:
                            coeffs[x] = coeffs.get(x, 0) + b * k
                    for x, k in up.coeffs:
                        if x != v:
                            coeffs[x] = coeffs.get(x, 0) + a * k
                    const = b * lo.const + a * up.const
                    if dark:
                        const -= (a - 1) * (b - 1)
                    out.append(Constraint.make(coeffs, const, GEQ))
            return out

        mine = lows + ups
        if exact:
            model = self.solve(combine(False))
            if model is None:
                return None
            model[v] = _pick(v, mine, model)
            return model
        model = self.solve(combine(True))
        if model is not None:
            model[v] = _pick(v, mine, model)
            return model
        if self.solve(combine(False)) is None:
            return None
        # Grey shadow: some lower bound is nearly tight.
        bmax = max(-c.coef(v) for c in ups)
        for lo in lows:
            a = lo.coef(v)
            limit = _floor_div(a * bmax - a - bmax, bmax)
            for i in range(limit + 1):
                splinter = cs + [Constraint(lo.coeffs, lo.const - i, EQ)]
                model = self.solve(splinter)
                if model is not None:
                    return model
        return None


def _pick(v: str, mine: list[Constraint], model: dict[str, int]) -> int:
    """An integer for ``v`` meeting every constraint, as close to 0 as possible."""
    lo: Optional[int] = None
    hi: Optional[int] = None
    for c in mine:
        a = c.coef(v)
        rest = c.const + sum(k * model.setdefault(x, 0) for x, k in c.coeffs if x != v)
        if c.kind == EQ:
            # a*v + rest = 0
            if rest % a:
                raise AssertionError("back-substitution hit a non-integral equality")
            val = -rest // a
            lo = val if lo is None else max(lo, val)
            hi = val if hi is None else min(hi, val)
        elif a > 0:
            b = _ceil_div(-rest, a)
            lo = b if lo is None else max(lo, b)
        else:
            b = _floor_div(rest, -a)
            hi = b if hi is None else min(hi, b)
    if lo is not None and hi is not None and lo > hi:
        raise AssertionError("back-substitution found an empty interval")
    if lo is not None and lo > 0:
        return lo
    if hi is not None and hi < 0:
        return hi
    return 0


def solve(constraints: list[Constraint], budget: int = 200_000) -> Optional[dict[str, int]]:
    """A model of the conjunction, or ``None`` if unsatisfiable.

    Raises :class:`Budget` when the elimination needs more steps than allowed.
    The model covers every variable mentioned in ``constraints``.
    """
    model = _Solver(budget).solve(list(constraints))
    if model is None:
        return None
    for c in constraints:
        for v in c.vars:
            model.setdefault(v, 0)
    return {v: model[v] for v in sorted(model) if not v.startswith("_sigma")}
