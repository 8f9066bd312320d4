"""Hand-written lexer and recursive-descent parser for ``.rtt`` sources.

Concrete syntax, by example::

    // line comments
    Odd(n) {
      if (n == nil) { return 0 }
      else {
        ls = Even(n.l)
        rs = Even(n.r)
        return ls + rs + 1
      }
    }
    Main(n) {
      { o = Odd(n) || e = Even(n) }
      return o, e
    }

Statements are separated by newlines or ``;``.  Consecutive assignments in
the same statement list form one straight-line block; a bare ``{ ... }``
group starts a new block.  Comparison sugar (``<``, ``>=``, ``==``, ``!=``,
``||`` ...) is desugared here into the core ``e > 0`` / ``!`` / ``&&`` forms.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

from .ast import (
    POINTER_FIELDS,
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
    Span,
    Straight,
    Sub,
    TrueCond,
    Var,
    VarAssign,
    iter_blocks,
    seq,
)
from .errors import ParseError

KEYWORDS = {"if", "else", "return", "nil", "true", "false"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+<>=!(){}\[\],;.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "op", "eof"
    text: str
    line: int
    col: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.col)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("int", "ident", "op"):
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        self.loc_param: Optional[str] = None

    # -- token helpers -------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "ident") and t.text == text

    def error(self, msg: str, tok: Optional[Token] = None) -> ParseError:
        t = tok or self.tok
        return ParseError(msg, t.line, t.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            raise self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def attempt(self, fn: Callable):
        saved = self.i
        try:
            return fn()
        except (ParseError, _Backtrack):
            self.i = saved
            return None

    # -- program structure ---------------------------------------------

    def program(self) -> Program:
        funcs: list[Function] = []
        seen: set[str] = set()
        while self.tok.kind != "eof":
            if self.accept(";"):
                continue
            start = self.tok
            f = self.function()
            if f.name in seen:
                raise self.error(f"duplicate function {f.name!r}", start)
            seen.add(f.name)
            funcs.append(f)
        return Program(tuple(funcs))

    def function(self) -> Function:
        name = self.ident()
        self.expect("(")
        loc = self.ident().text
        params: list[str] = []
        while self.accept(","):
            params.append(self.ident().text)
        self.expect(")")
        self.loc_param = loc
        self.expect("{")
        body = self.stmt_list(("}",))
        self.expect("}")
        arity = _return_arity(body)
        return Function(name.text, loc, tuple(params), body, arity, span=name.span)

    def stmt_list(self, stops: tuple[str, ...]):
        """Statements up to (not including) one of ``stops``."""
        items: list = []
        run: list = []
        run_span: list[Optional[Span]] = [None]

        def flush():
            if run:
                items.append(BlockStmt(Straight(tuple(run), span=run_span[0]), span=run_span[0]))
                run.clear()

        while not any(self.at(s) for s in stops) and self.tok.kind != "eof":
            if self.accept(";"):
                continue
            stmt = self.statement()
            if isinstance(stmt, list):  # plain assignments
                if not run:
                    run_span[0] = stmt[0].span
                run.extend(stmt)
            else:
                flush()
                items.append(stmt)
        flush()
        if not items:
            return Seq(())
        return seq(*items)

    def statement(self):
        t = self.tok
        if self.at("if"):
            return self.if_stmt()
        if self.at("{"):
            stmt = self.brace_stmt()
            return stmt.stmt if isinstance(stmt, _Group) else stmt
        if self.at("return"):
            return [self.return_stmt()]
        if self.at("("):
            names = self.attempt(self.tuple_target)
            if names is not None:
                return self.call_block(names, t)
            raise self.error("expected statement")
        if t.kind == "ident" and t.text not in KEYWORDS:
            nxt = self.peek()
            if nxt.text == "(" and nxt.kind == "op":
                return self.call_block((), t)
            if (
                nxt.text == "="
                and self.peek(2).kind == "ident"
                and self.peek(2).text not in KEYWORDS
                and self.peek(3).text == "("
            ):
                self.i += 2
                return self.call_block((t.text,), t)
            if nxt.text == ",":
                names = [self.ident().text]
                while self.accept(","):
                    names.append(self.ident().text)
                self.expect("=")
                return self.call_block(tuple(names), t)
            return self.assignment()
        raise self.error(f"expected statement, found {t.text or 'end of input'!r}")

    def tuple_target(self) -> tuple[str, ...]:
        self.expect("(")
        names = [self.ident().text]
        while self.accept(","):
            names.append(self.ident().text)
        self.expect(")")
        self.expect("=")
        if not (self.tok.kind == "ident" and self.peek().text == "("):
            raise _Backtrack()
        return tuple(names)

    def call_block(self, results: tuple[str, ...], start: Token) -> BlockStmt:
        callee = self.ident()
        self.expect("(")
        loc_arg = self.loc_expr()
        args: list = []
        while self.accept(","):
            args.append(self.call_arg())
        self.expect(")")
        call = Call(tuple(results), callee.text, loc_arg, tuple(args), span=start.span)
        return BlockStmt(call, span=start.span)

    def call_arg(self):
        # A Loc-valued extra argument is kept so validation can report it.
        saved = self.i
        chain = self.attempt(self.dotted)
        if chain is not None and isinstance(chain, Loc) and self.at_arg_end():
            return chain
        self.i = saved
        return self.aexpr()

    def at_arg_end(self) -> bool:
        return self.at(",") or self.at(")")

    def assignment(self) -> list:
        start = self.tok
        target = self.dotted()
        self.expect("=")
        rhs_start = self.tok
        if self.tok.kind == "ident" and self.peek().text == "(" and self.tok.text not in KEYWORDS:
            raise self.error("call results must be plain variables", start)
        value = self.rhs()
        if isinstance(target, Loc):
            if not target.path or target.path[-1] not in POINTER_FIELDS:
                raise self.error("cannot assign to a Loc parameter", start)
            if not isinstance(value, Loc):
                raise self.error("pointer field assigned a non-Loc value", rhs_start)
            return [PointerAssign(target, value, span=start.span)]
        if isinstance(target, Field):
            if isinstance(value, Loc):
                raise self.error("integer field assigned a Loc value", rhs_start)
            return [FieldAssign(target.loc, target.name, value, span=start.span)]
        if isinstance(value, Loc):
            return [LocAssign(target.name, value, span=start.span)]
        return [VarAssign(target.name, value, span=start.span)]

    def rhs(self):
        saved = self.i
        chain = self.attempt(self.dotted)
        if isinstance(chain, Loc) and not self._continues_expr():
            return chain
        self.i = saved
        return self.aexpr()

    def _continues_expr(self) -> bool:
        return self.tok.kind == "op" and self.tok.text in ("+", "-")

    def return_stmt(self) -> Return:
        start = self.expect("return")
        slot = None
        if self.at("[") and self.tok.line == start.line:
            self.expect("[")
            t = self.tok
            if t.kind != "int":
                raise self.error("expected return slot index")
            self.i += 1
            slot = int(t.text)
            self.expect("]")
            value = self.aexpr()
            return Return((value,), slot, span=start.span)
        if self.tok.line != start.line or self.tok.kind == "eof" or self.at("}") or self.at(";") or self.at("||"):
            return Return((), span=start.span)
        packed = self.attempt(self.packed_values)
        if packed is not None:
            return Return(packed, span=start.span)
        values = [self.aexpr()]
        while self.accept(","):
            values.append(self.aexpr())
        return Return(tuple(values), span=start.span)

    def packed_values(self) -> tuple:
        self.expect("(")
        values = [self.aexpr()]
        if not self.at(","):
            raise _Backtrack()
        while self.accept(","):
            values.append(self.aexpr())
        self.expect(")")
        if self.tok.kind == "op" and self.tok.text in ("+", "-", ","):
            raise _Backtrack()
        return tuple(values)

    def if_stmt(self) -> If:
        start = self.expect("if")
        self.expect("(")
        cond = self.bexpr()
        self.expect(")")
        then = self.branch()
        orelse = Seq(())
        if self.accept("else"):
            if self.at("if"):
                orelse = self.if_stmt()
            else:
                orelse = self.branch()
        return If(cond, then, orelse, span=start.span)

    def branch(self):
        if self.at("{"):
            self.expect("{")
            body = self.stmt_list(("}",))
            self.expect("}")
            return body
        stmt = self.statement()
        if isinstance(stmt, list):
            return BlockStmt(Straight(tuple(stmt), span=stmt[0].span), span=stmt[0].span)
        return stmt

    def brace_stmt(self):
        start = self.expect("{")
        branches = [self.stmt_list(("}", "||"))]
        while self.accept("||"):
            branches.append(self.stmt_list(("}", "||")))
        self.expect("}")
        if len(branches) == 1:
            return _Group(branches[0])
        for b in branches:
            if isinstance(b, Seq) and not b.stmts:
                raise ParseError("empty parallel branch", start.line, start.col)
        stmt = branches[-1]
        for b in reversed(branches[:-1]):
            stmt = Par(b, stmt, span=start.span)
        return stmt

    # -- expressions -----------------------------------------------------

    def dotted(self):
        """``x``, ``n.l.r`` (a Loc) or ``n.l.f`` (a Field)."""
        first = self.ident()
        parts = [first.text]
        while self.at("."):
            self.expect(".")
            parts.append(self.ident().text)
        span = first.span
        base = parts[0]
        if len(parts) == 1:
            if base == self.loc_param:
                return Loc(base, (), span=span)
            return Var(base, span=span)
        if parts[-1] in POINTER_FIELDS:
            path = tuple(parts[1:])
            return Loc(base, path, span=span)
        path = tuple(parts[1:-1])
        for d in path:
            if d not in POINTER_FIELDS:
                raise ParseError(f"{d!r} is not a pointer field", first.line, first.col)
        return Field(Loc(base, path, span=span), parts[-1], span=span)

    def loc_expr(self) -> Loc:
        t = self.tok
        chain = self.dotted()
        if isinstance(chain, Var):
            return Loc(chain.name, (), span=chain.span)
        if not isinstance(chain, Loc):
            raise self.error("expected a node expression", t)
        return chain

    def aexpr(self):
        left = self.aterm()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok
            self.i += 1
            right = self.aterm()
            left = (Add if op.text == "+" else Sub)(left, right, span=op.span)
        return left

    def aterm(self):
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Const(int(t.text), span=t.span)
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "int":
                v = self.tok
                self.i += 1
                return Const(-int(v.text), span=t.span)
            return Sub(Const(0, span=t.span), self.aterm(), span=t.span)
        if self.at("("):
            self.i += 1
            e = self.aexpr()
            self.expect(")")
            return e
        if t.kind == "ident" and t.text not in KEYWORDS:
            if self.peek().text == "(" and self.peek().kind == "op":
                raise self.error("calls are only allowed as whole blocks")
            chain = self.dotted()
            if isinstance(chain, Loc):
                raise ParseError("node expression used as an integer", t.line, t.col)
            return chain
        raise self.error(f"expected expression, found {t.text or 'end of input'!r}")

    def bexpr(self):
        left = self.band()
        while self.at("||"):
            op = self.tok
            self.i += 1
            right = self.band()
            left = Not(And(Not(left, span=op.span), Not(right, span=op.span), span=op.span), span=op.span)
        return left

    def band(self):
        left = self.bunary()
        while self.at("&&"):
            op = self.tok
            self.i += 1
            right = self.bunary()
            left = And(left, right, span=op.span)
        return left

    def bunary(self):
        t = self.tok
        if self.at("!"):
            self.i += 1
            return Not(self.bunary(), span=t.span)
        if self.at("true"):
            self.i += 1
            return TrueCond(span=t.span)
        if self.at("false"):
            self.i += 1
            return Not(TrueCond(span=t.span), span=t.span)
        if self.at("("):
            cmp = self.attempt(self.comparison)
            if cmp is not None:
                return cmp
            self.expect("(")
            b = self.bexpr()
            self.expect(")")
            return b
        return self.comparison()

    def comparison(self):
        t = self.tok
        saved = self.i
        if t.kind == "ident" and t.text not in KEYWORDS:
            chain = self.attempt(self.dotted)
            if isinstance(chain, Loc) and (self.at("==") or self.at("!=")) and self.peek().text == "nil":
                op = self.tok.text
                self.i += 2
                nil = IsNil(chain, span=t.span)
                return nil if op == "==" else Not(nil, span=t.span)
            self.i = saved
        left = self.aexpr()
        op = self.tok
        if not (op.kind == "op" and op.text in ("==", "!=", "<", ">", "<=", ">=")):
            raise self.error(f"expected comparison operator, found {op.text or 'end of input'!r}")
        self.i += 1
        right = self.aexpr()
        return _compare(left, op.text, right, t.span)


@dataclass
class _Group:
    """A braced statement group: kept apart from neighbouring assignments."""

    stmt: object


def _compare(a, op: str, b, span: Span):
    def gt(x, y):
        if isinstance(y, Const) and y.value == 0:
            return Positive(x, span=span)
        return Positive(Sub(x, y, span=span), span=span)

    def ge(x, y):
        return Positive(Add(Sub(x, y, span=span), Const(1, span=span), span=span), span=span)

    if op == ">":
        return gt(a, b)
    if op == "<":
        return gt(b, a)
    if op == ">=":
        return ge(a, b)
    if op == "<=":
        return ge(b, a)
    eq = And(Not(gt(a, b), span=span), Not(gt(b, a), span=span), span=span)
    if op == "==":
        return eq
    return Not(eq, span=span)


def _return_arity(stmt) -> int:
    arity = 0
    for b in iter_blocks(stmt):
        if isinstance(b, Straight):
            for a in b.assigns:
                if isinstance(a, Return):
                    n = (a.slot + 1) if a.slot is not None else len(a.values)
                    arity = max(arity, n)
    return arity


def parse_program(source: str) -> Program:
    """Parse ``.rtt`` text into a :class:`Program` (no validation)."""
    return Parser(source).program()
