"""Optional external backend speaking SMT-LIB2 (QF_LIA) over files."""
from __future__ import annotations

import os
import re
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Optional

from ..semantics.formula import Bot, Conj, Disj, Eq, Formula, Geq, Lin, Neg, Nil, Top, evaluate, symbols
from .sat import Sat, StructuralAtom, Unknown, Unsat


def _q(sym: str) -> str:
    return f"|{sym}|"


def _term(lin: Lin) -> str:
    parts = []
    for s, c in lin.terms:
        parts.append(_q(s) if c == 1 else f"(* {_num(c)} {_q(s)})")
    if lin.const or not parts:
        parts.append(_num(lin.const))
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


def _num(k: int) -> str:
    return str(k) if k >= 0 else f"(- {-k})"


def to_smt(f: Formula) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bot):
        return "false"
    if isinstance(f, Geq):
        return f"(>= {_term(f.lin)} 0)"
    if isinstance(f, Eq):
        return f"(= {_term(f.lin)} 0)"
    if isinstance(f, Neg):
        return f"(not {to_smt(f.arg)})"
    if isinstance(f, Conj):
        return f"(and {' '.join(to_smt(a) for a in f.args)})"
    if isinstance(f, Disj):
        return f"(or {' '.join(to_smt(a) for a in f.args)})"
    if isinstance(f, Nil):
        raise StructuralAtom(str(f))
    raise TypeError(f)


def script(f: Formula) -> str:
    syms = sorted(symbols(f))
    lines = ["(set-logic QF_LIA)", "(set-option :produce-models true)"]
    lines += [f"(declare-fun {_q(s)} () Int)" for s in syms]
    lines.append(f"(assert {to_smt(f)})")
    lines.append("(check-sat)")
    if syms:
        lines.append(f"(get-value ({' '.join(_q(s) for s in syms)}))")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\(|\)|\|[^|]*\||[^\s()]+")


def _sexprs(text: str):
    stack: list[list] = [[]]
    for tok in _TOKEN.findall(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    return stack[0]


def _int(v) -> int:
    if isinstance(v, list):
        if len(v) == 2 and v[0] == "-":
            return -_int(v[1])
        raise ValueError(f"not an integer value: {v}")
    return int(v)


def parse_output(text: str, syms: list[str]):
    items = _sexprs(text)
    if not items:
        return Unknown("empty solver output")
    head = items[0]
    if head == "unsat":
        return Unsat()
    if head != "sat":
        return Unknown(f"solver said {head}")
    model = {s: 0 for s in syms}
    for item in items[1:]:
        if isinstance(item, list):
            for pair in item:
                if isinstance(pair, list) and len(pair) == 2 and isinstance(pair[0], str):
                    model[pair[0].strip("|")] = _int(pair[1])
    return Sat(model)


@dataclass
class SmtBackend:
    binary: str
    timeout: float = 30.0
    workdir: Optional[str] = None

    def check(self, f: Formula):
        syms = sorted(symbols(f))
        text = script(f)
        with tempfile.TemporaryDirectory(dir=self.workdir) as d:
            path = os.path.join(d, "query.smt2")
            with open(path, "w") as fh:
                fh.write(text)
            try:
                proc = subprocess.run(
                    [self.binary, path], capture_output=True, text=True, timeout=self.timeout
                )
            except subprocess.TimeoutExpired:
                return Unknown(f"timeout after {self.timeout}s")
            except OSError as e:
                return Unknown(f"cannot run {self.binary}: {e}")
        verdict = parse_output(proc.stdout, syms)
        if isinstance(verdict, Sat) and not evaluate(f, verdict.model):
            return Unknown("solver model does not satisfy the formula")
        return verdict
