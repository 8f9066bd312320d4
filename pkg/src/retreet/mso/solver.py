"""Running an external WS2S solver and reading its verdict."""
from __future__ import annotations

import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Union

from ..lang.errors import RetreetError

SOLVER_ENV = "RETREET_SOLVER_BIN"


class SolverError(RetreetError):
    """The solver could not be run, failed, or printed something unreadable."""


class SolverUnavailable(SolverError):
    pass


@dataclass(frozen=True)
class FormulaInvalid:
    """The violation formula has no model: the property holds."""

    raw: str = ""


@dataclass(frozen=True)
class Counterexample:
    """A model of the violation formula."""

    sets: dict = field(hash=False)  # set name -> frozenset of nodes
    nodes: dict = field(hash=False)  # node variable -> node
    raw: str = ""
    source: str = "solver"


@dataclass(frozen=True)
class Inconclusive:
    """No answer: e.g. the bounded search found no model up to its height."""

    reason: str


Verdict = Union[FormulaInvalid, Counterexample, Inconclusive]


def find_solver(explicit: Optional[str] = None) -> Optional[str]:
    path = explicit or os.environ.get(SOLVER_ENV)
    if not path:
        return None
    if os.path.sep in path:
        return path if os.access(path, os.X_OK) else None
    return shutil.which(path)


_STEPS = {"0": "l", "1": "r"}
_SET_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*\{([^}]*)\}\s*$")
_NODE_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([01]*|ε|root)\s*$")


def _node(text: str) -> tuple[str, ...]:
    text = text.strip().strip('"')
    if text in ("", "ε", "root"):
        return ()
    if not set(text) <= {"0", "1"}:
        raise SolverError(f"unreadable tree position {text!r}")
    return tuple(_STEPS[c] for c in text)


def parse_solver_output(text: str) -> Verdict:
    """Interpret solver stdout for a satisfiability question.

    ``Formula is unsatisfiable`` means no model exists.  Otherwise the first
    satisfying example is read from ``NAME = {p, q}`` (sets) and
    ``NAME = p`` (nodes) lines, positions written as 0/1 strings from the
    root.  Validity of a formula with free variables also implies it is
    satisfiable, so ``Formula is valid`` yields an empty model.
    """
    if "Formula is unsatisfiable" in text:
        return FormulaInvalid(text)
    lines = text.splitlines()
    start = None
    for i, line in enumerate(lines):
        if "satisfying example" in line.lower():
            start = i + 1
            break
    if start is None:
        if "Formula is valid" in text:
            return Counterexample({}, {}, text)
        raise SolverError("solver output has neither a verdict nor a satisfying example")
    sets: dict = {}
    nodes: dict = {}
    for line in lines[start:]:
        if "counter-example" in line.lower():
            break
        m = _SET_LINE.match(line)
        if m:
            body = m.group(2).strip()
            sets[m.group(1)] = frozenset(_node(s) for s in body.split(",")) if body else frozenset()
            continue
        m = _NODE_LINE.match(line)
        if m:
            nodes[m.group(1)] = _node(m.group(2))
    return Counterexample(sets, nodes, text)


def run_solver(
    text: str,
    binary: Optional[str] = None,
    workdir: Optional[str] = None,
    timeout: Optional[float] = None,
    name: str = "query",
) -> Verdict:
    """Write ``text`` to a fresh directory, run the solver on it, parse the answer.

    The input and the captured output stay next to each other in the work
    directory when one is given.
    """
    exe = find_solver(binary)
    if exe is None:
        raise SolverUnavailable(
            f"no WS2S solver configured (pass --solver-bin or set {SOLVER_ENV})"
        )
    keep = workdir is not None
    if keep:
        os.makedirs(workdir, exist_ok=True)
        d = tempfile.mkdtemp(prefix=f"{name}-", dir=workdir)
    else:
        d = tempfile.mkdtemp(prefix="retreet-")
    try:
        src = os.path.join(d, f"{name}.mona")
        with open(src, "w") as fh:
            fh.write(text)
        try:
            proc = subprocess.run([exe, "-q", src], capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return Inconclusive(f"solver timed out after {timeout}s")
        except OSError as e:
            raise SolverError(f"cannot run {exe}: {e}") from e
        with open(os.path.join(d, f"{name}.out"), "w") as fh:
            fh.write(proc.stdout)
            if proc.stderr:
                fh.write("\n# stderr\n" + proc.stderr)
        if proc.returncode != 0:
            raise SolverError(f"solver exited with {proc.returncode}: {proc.stderr.strip() or proc.stdout.strip()}")
        return parse_solver_output(proc.stdout)
    finally:
        if not keep:
            shutil.rmtree(d, ignore_errors=True)
