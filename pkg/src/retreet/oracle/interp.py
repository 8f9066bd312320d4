"""Concrete execution of a program on a tree under block-level interleaving.

Each parallel statement forks two threads.  A thread step runs one
straight-line block atomically, together with the control flow leading to
it (branch conditions, call entries) and the result transfers of calls that
end with it.  Calls are not atomic: the blocks of a callee interleave with
the other threads.

Values are linear terms so that fields listed as symbolic in the tree stay
symbolic; branch conditions must evaluate to constants.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator, Optional

from ..blocks import MAIN, BlockTable, build_block_table
from ..lang.ast import (
    Add,
    And,
    BlockStmt,
    Call,
    Const,
    Field,
    FieldAssign,
    If,
    IsNil,
    Not,
    Par,
    Positive,
    Program,
    Return,
    Seq,
    Sub,
    TrueCond,
    Var,
    VarAssign,
)
from ..lang.errors import RetreetError
from ..semantics.formula import Lin
from .tree import BudgetExceeded, ConcreteTree, Node, node_name

DEFAULT_TRACE_BUDGET = 100_000
DEFAULT_STATE_BUDGET = 500_000

FrameId = tuple[str, ...]


class ExecutionError(RetreetError):
    """The program cannot run on this tree (e.g. it touches a field of nil)."""


class NilAccess(ExecutionError):
    pass


class SymbolicBranch(ExecutionError):
    """A branch condition depends on a symbolic field value."""

    def __init__(self, fields: set[str]):
        self.fields = fields
        super().__init__("branch depends on symbolic fields: " + ", ".join(sorted(fields)))


@dataclass(frozen=True)
class Iteration:
    block: str
    node: Node
    pre_hash: str = ""

    def __str__(self) -> str:
        return f"({self.block}, {node_name(self.node)})"


@dataclass(frozen=True)
class Trace:
    iterations: tuple[Iteration, ...]
    store: tuple  # sorted ((node, field), value) for every field the run changed
    returns: tuple  # Main's return slots

    @property
    def steps(self) -> list[tuple[str, Node]]:
        return [(i.block, i.node) for i in self.iterations]

    def outcome(self) -> tuple:
        return (self.store, self.returns)


@dataclass
class _Frame:
    function: str
    node: Node
    env: dict
    rets: dict


def _state_hash(store: dict) -> str:
    text = repr(sorted((k, str(v)) for k, v in store.items()))
    return hashlib.blake2b(text.encode(), digest_size=6).hexdigest()


class _State:
    __slots__ = ("cont", "store", "frames")

    def __init__(self, cont: tuple, store: dict, frames: dict):
        self.cont = cont
        self.store = store
        self.frames = frames

    def copy(self) -> "_State":
        return _State(self.cont, dict(self.store), dict(self.frames))

    def key(self) -> tuple:
        frames = tuple(
            sorted(
                (fid, tuple(sorted(f.env.items())), tuple(sorted(f.rets.items())))
                for fid, f in self.frames.items()
            )
        )
        return (self.cont, tuple(sorted(self.store.items())), frames)


@dataclass
class StepInfo:
    iteration: Iteration
    reads: set
    writes: set
    frame: FrameId


class Machine:
    """Step semantics for one program on one tree."""

    def __init__(self, program: Program, tree: ConcreteTree, table: Optional[BlockTable] = None):
        self.program = program
        self.table = table or build_block_table(program)
        self.tree = tree
        self.stmts: dict = {}
        self.bids: dict = {}
        for f in program.functions:
            self._index(f.name, f.body, ())
        for bid, info in self.table.blocks.items():
            self.bids[(info.function, info.trail)] = bid

    def _index(self, fname: str, stmt, trail: tuple) -> None:
        self.stmts[(fname, trail)] = stmt
        if isinstance(stmt, If):
            self._index(fname, stmt.then, trail + (("if", 0),))
            self._index(fname, stmt.orelse, trail + (("if", 1),))
        elif isinstance(stmt, Seq):
            for k, s in enumerate(stmt.stmts):
                self._index(fname, s, trail + (("seq", k),))
        elif isinstance(stmt, Par):
            self._index(fname, stmt.left, trail + (("par", 0),))
            self._index(fname, stmt.right, trail + (("par", 1),))

    # -- states ----------------------------------------------------------------

    def initial(self) -> _State:
        entry = self.program.function(self.program.entry)
        fid: FrameId = (MAIN,)
        env = {p: Lin.num(0) for p in entry.int_params}
        frames = {fid: _Frame(entry.name, (), env, {})}
        return _State((("s", fid, entry.name, ()),), {}, frames)

    def frame_records(self, fid: FrameId, st: _State) -> list[tuple[str, Node]]:
        """The configuration stack of a frame: (main, root), then one record per call."""
        out = [(MAIN, ())]
        for k in range(1, len(fid)):
            out.append((fid[k], st.frames[fid[: k + 1]].node))
        return out

    # -- evaluation ------------------------------------------------------------

    def _read_field(self, st: _State, node: Node, name: str, reads: set) -> Lin:
        if self.tree.is_nil(node):
            raise NilAccess(f"read of {name} on nil node {node_name(node)}")
        reads.add(("f", node, name))
        if (node, name) in st.store:
            return st.store[(node, name)]
        return self.tree.read(node, name)

    def _value(self, e, st: _State, fid: FrameId, reads: set) -> Lin:
        fr = st.frames[fid]
        if isinstance(e, Const):
            return Lin.num(e.value)
        if isinstance(e, Var):
            reads.add(("v", fid, e.name))
            return fr.env.get(e.name, Lin.num(0))
        if isinstance(e, Field):
            return self._read_field(st, fr.node + e.loc.path, e.name, reads)
        if isinstance(e, Add):
            return self._value(e.left, st, fid, reads) + self._value(e.right, st, fid, reads)
        if isinstance(e, Sub):
            return self._value(e.left, st, fid, reads) - self._value(e.right, st, fid, reads)
        raise TypeError(e)

    def _holds(self, c, st: _State, fid: FrameId, reads: set) -> bool:
        if isinstance(c, TrueCond):
            return True
        if isinstance(c, IsNil):
            return self.tree.is_nil(st.frames[fid].node + c.loc.path)
        if isinstance(c, Positive):
            v = self._value(c.expr, st, fid, reads)
            if v.terms:
                raise SymbolicBranch({s.rsplit(".", 1)[-1] for s in v.symbols()})
            return v.const > 0
        if isinstance(c, Not):
            return not self._holds(c.arg, st, fid, reads)
        if isinstance(c, And):
            return self._holds(c.left, st, fid, reads) and self._holds(c.right, st, fid, reads)
        raise TypeError(c)

    def _set_local(self, st: _State, fid: FrameId, name: str, v: Lin, writes: set) -> None:
        fr = st.frames[fid]
        st.frames[fid] = _Frame(fr.function, fr.node, {**fr.env, name: v}, fr.rets)
        writes.add(("v", fid, name))

    def _transfer(self, item: tuple, st: _State, reads: set, writes: set) -> None:
        _, callee, caller, results = item
        rets = st.frames[callee].rets
        for k, r in enumerate(results):
            reads.add(("ret", callee, k))
            self._set_local(st, caller, r, rets.get(k, Lin.num(0)), writes)

    # -- control -----------------------------------------------------------------

    def resolve(self, cont: tuple, st: _State, reads: set, writes: set) -> tuple:
        """Run internal steps until the head is a straight block, a fork, or nothing."""
        while cont:
            head = cont[0]
            if head[0] == "p":
                return cont
            if head[0] == "r":
                self._transfer(head, st, reads, writes)
                cont = cont[1:]
                continue
            _, fid, fname, trail = head
            stmt = self.stmts[(fname, trail)]
            if isinstance(stmt, Seq):
                cont = tuple(("s", fid, fname, trail + (("seq", k),)) for k in range(len(stmt.stmts))) + cont[1:]
            elif isinstance(stmt, If):
                branch = 0 if self._holds(stmt.cond, st, fid, reads) else 1
                cont = (("s", fid, fname, trail + (("if", branch),)),) + cont[1:]
            elif isinstance(stmt, Par):
                left = (("s", fid, fname, trail + (("par", 0),)),)
                right = (("s", fid, fname, trail + (("par", 1),)),)
                cont = (("p", left, right),) + cont[1:]
            elif isinstance(stmt.block, Call):
                call = stmt.block
                bid = self.bids[(fname, trail)]
                callee = self.program.function(call.callee)
                args = [self._value(a, st, fid, reads) for a in call.int_args]
                new: FrameId = fid + (bid,)
                node = st.frames[fid].node + call.loc_arg.path
                st.frames[new] = _Frame(callee.name, node, dict(zip(callee.int_params, args)), {})
                cont = (("s", new, callee.name, ()), ("r", new, fid, call.results)) + cont[1:]
            else:
                return cont
        return cont

    def _cleanup(self, cont: tuple, st: _State, reads: set, writes: set) -> tuple:
        while cont and cont[0][0] == "r":
            self._transfer(cont[0], st, reads, writes)
            cont = cont[1:]
        return cont

    def _run_block(self, head: tuple, st: _State, reads: set, writes: set) -> Iteration:
        _, fid, fname, trail = head
        block = self.stmts[(fname, trail)].block
        fr = st.frames[fid]
        it = Iteration(self.bids[(fname, trail)], fr.node, _state_hash(st.store))
        for a in block.assigns:
            if isinstance(a, FieldAssign):
                v = self._value(a.value, st, fid, reads)
                node = fr.node + a.loc.path
                if self.tree.is_nil(node):
                    raise NilAccess(f"write of {a.name} on nil node {node_name(node)}")
                st.store[(node, a.name)] = v
                writes.add(("f", node, a.name))
            elif isinstance(a, VarAssign):
                self._set_local(st, fid, a.name, self._value(a.value, st, fid, reads), writes)
            elif isinstance(a, Return):
                for slot, e in a.slots():
                    v = self._value(e, st, fid, reads)
                    fr = st.frames[fid]
                    st.frames[fid] = _Frame(fr.function, fr.node, fr.env, {**fr.rets, slot: v})
                    writes.add(("ret", fid, slot))
            else:
                raise ExecutionError(f"unsupported assignment {type(a).__name__}")
        return it

    def _step(self, cont: tuple, st: _State, path: tuple, reads: set, writes: set) -> tuple[tuple, Iteration, FrameId]:
        cont = self.resolve(cont, st, reads, writes)
        head = cont[0]
        if not path:
            if head[0] != "s":
                raise AssertionError("step path ends at a fork")
            it = self._run_block(head, st, reads, writes)
            return self._cleanup(cont[1:], st, reads, writes), it, head[1]
        side = path[0]
        sub, other = head[1 + side], head[2 - side]
        sub, it, fid = self._step(sub, st, path[1:], reads, writes)
        if not sub and not other:
            return self._cleanup(cont[1:], st, reads, writes), it, fid
        fork = ("p", sub, other) if side == 0 else ("p", other, sub)
        return (fork,) + cont[1:], it, fid

    def enabled(self, st: _State) -> list[tuple]:
        """Paths (fork sides from the top) to every runnable block."""

        def go(cont: tuple, scratch: _State) -> list[tuple]:
            cont = self.resolve(cont, scratch, set(), set())
            if not cont:
                return []
            head = cont[0]
            if head[0] == "s":
                return [()]
            return [(0,) + p for p in go(head[1], scratch.copy())] + [(1,) + p for p in go(head[2], scratch.copy())]

        return go(st.cont, st.copy())

    def step(self, st: _State, path: tuple) -> tuple[_State, StepInfo]:
        new = st.copy()
        reads: set = set()
        writes: set = set()
        new.cont, it, fid = self._step(st.cont, new, path, reads, writes)
        return new, StepInfo(it, reads, writes, fid)

    def drain(self, st: _State) -> _State:
        """Finish a state with no runnable block: pending transfers, left thread first."""
        new = st.copy()

        def go(cont: tuple) -> None:
            cont = self.resolve(cont, new, set(), set())
            if not cont:
                return
            head = cont[0]
            if head[0] == "s":
                raise AssertionError("drain reached a runnable block")
            go(head[1])
            go(head[2])
            go(cont[1:])

        go(new.cont)
        new.cont = ()
        return new

    def final(self, st: _State) -> tuple[tuple, tuple]:
        changed = tuple(
            sorted((k, v) for k, v in st.store.items() if v != self.tree.read(*k))
        )
        rets = st.frames[(MAIN,)].rets
        width = max(rets, default=-1) + 1
        return changed, tuple(rets.get(k, Lin.num(0)) for k in range(width))

    def location(self, loc: tuple, *states: _State) -> tuple[Node, str]:
        """(node, readable name) for an access; the frame may only exist after one of the steps."""
        if loc[0] == "f":
            return loc[1], loc[2]
        fr = next(s.frames[loc[1]] for s in states if loc[1] in s.frames)
        name = loc[2] if loc[0] == "v" else f"ret{loc[2]}"
        return fr.node, f"{fr.function}.{name}"


def interpret_all(
    p: Program, t: ConcreteTree, budget: int = DEFAULT_TRACE_BUDGET, table: Optional[BlockTable] = None
) -> list[Trace]:
    """Every complete interleaving, deduplicated, in a fixed order.

    Raises :class:`BudgetExceeded` when more than ``budget`` traces exist.
    """
    m = Machine(p, t, table)
    out: dict[Trace, None] = {}

    def dfs(st: _State, prefix: tuple) -> None:
        paths = m.enabled(st)
        if not paths:
            done = m.drain(st)
            store, rets = m.final(done)
            out.setdefault(Trace(prefix, store, rets))
            if len(out) > budget:
                raise BudgetExceeded(f"more than {budget} traces")
            return
        for path in paths:
            nxt, info = m.step(st, path)
            dfs(nxt, prefix + (info.iteration,))

    dfs(m.initial(), ())
    return list(out)


def iter_states(m: Machine, budget: int = DEFAULT_STATE_BUDGET) -> Iterator[tuple[_State, tuple]]:
    """Depth-first walk over distinct reachable states with one prefix leading to each."""
    seen = set()
    stack = [(m.initial(), ())]
    while stack:
        st, prefix = stack.pop()
        k = st.key()
        if k in seen:
            continue
        seen.add(k)
        if len(seen) > budget:
            raise BudgetExceeded(f"more than {budget} states")
        yield st, prefix
        for path in reversed(m.enabled(st)):
            nxt, info = m.step(st, path)
            stack.append((nxt, prefix + (info.iteration,)))
