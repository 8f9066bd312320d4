"""Command-line front end.

Exit codes: 0 the property holds or the command succeeded, 1 the property
is refuted (a witness file is written), 2 usage, configuration or input
error, 3 no answer (inconclusive search, exhausted budget, no relation).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

from . import __version__, corpus
from .bisim import NonCallMismatch, find_bisimulation, match_noncalls
from .blocks import MAIN, build_block_table, describe
from .lang import ParseError, ProgramRejected, lint, normalize, parse_program, pretty_print, validate_restrictions
from .lang.errors import NormalizeError
from .logic import SmtBackend, consistent_condition_sets
from .mso import (
    Counterexample,
    DecodeError,
    EncodingMismatch,
    FiniteModel,
    FormulaInvalid,
    Inconclusive,
    ProgramEncoding,
    SolverError,
    SolverUnavailable,
    Witness,
    bounded_conflict,
    bounded_race,
    build_conflict,
    build_datarace,
    decode_witness,
    emit_ws2s,
    evaluate,
    find_solver,
    run_solver,
)
from .mso.solver import SOLVER_ENV
from .oracle import (
    BudgetExceeded,
    ConcreteTree,
    Confirmed,
    Differ,
    RaceWitness,
    replay_witness,
    sweep_equivalence,
    sweep_race,
)
from .oracle.checks import replay_difference
from .semantics.wp import path_condition

SMT_ENV = "RETREET_SMT_BIN"
REPORT_SCHEMA = 1
EXIT_OK, EXIT_REFUTED, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    solver_bin: Optional[str] = None
    smt_bin: Optional[str] = None
    backend: str = "mona"
    workdir: Optional[str] = None
    height: int = 3
    oracle_height: int = 2
    domain: tuple = (0, 1)
    state_budget: int = 500_000
    bisim_cap: int = 10_000
    timeout: Optional[float] = None
    node_level: bool = False
    output: str = "text"

    def smt_backend(self):
        return SmtBackend(self.smt_bin) if self.smt_bin else None

    def echo(self) -> dict:
        d = asdict(self)
        d["domain"] = list(self.domain)
        return d


@dataclass
class Report:
    command: str
    verdict: str
    exit_code: int
    programs: list = field(default_factory=list)
    lines: list = field(default_factory=list)  # text rendering
    details: dict = field(default_factory=dict)
    witness: Optional[dict] = None
    witness_file: Optional[str] = None
    replay: Optional[dict] = None
    timings: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "command": self.command,
            "verdict": self.verdict,
            "exit_code": self.exit_code,
            "programs": self.programs,
            "details": self.details,
            "witness": self.witness,
            "witness_file": self.witness_file,
            "replay": self.replay,
            "timings": {k: round(v, 4) for k, v in self.timings.items()},
            "config": self.config,
        }

    def text(self) -> str:
        out = list(self.lines)
        if self.witness_file:
            out.append(f"witness written to {self.witness_file}")
        if self.replay:
            out.append(f"replay: {self.replay['status']}: {self.replay['detail']}")
        if self.timings:
            out.append("time: " + ", ".join(f"{k} {v:.2f}s" for k, v in self.timings.items()))
        return "\n".join(out)


# -- inputs ------------------------------------------------------------------------


def read_source(arg: str) -> tuple[str, str]:
    """(display name, source text) for a file path or a bundled corpus name."""
    if os.path.isfile(arg):
        with open(arg) as fh:
            return arg, fh.read()
    name = os.path.basename(arg)
    if name.endswith(".rtt"):
        name = name[:-4]
    if name in corpus.names():
        return name, corpus.source(name)
    raise UsageError(f"no such file or corpus program: {arg}")


def load_checked(arg: str):
    name, src = read_source(arg)
    p = parse_program(src)
    violations = validate_restrictions(p)
    if violations:
        raise ProgramRejected(violations)
    return name, normalize(p)


def _encoding(p, cfg: RunConfig) -> ProgramEncoding:
    table = build_block_table(p)
    return ProgramEncoding(table, consistent_condition_sets(table, cfg.smt_backend()), cfg.node_level)


def _stem(name: str) -> str:
    base = os.path.basename(name)
    return base[:-4] if base.endswith(".rtt") else base


def _write_witness(cfg: RunConfig, stem: str, payload: dict, explicit: Optional[str] = None) -> str:
    path = explicit or os.path.join(cfg.workdir or "retreet-out", f"{stem}.witness.json")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _replay_dict(v) -> dict:
    if isinstance(v, Confirmed):
        d = {"status": "confirmed", "detail": v.detail.splitlines()[0].rstrip(":")}
        if v.observable is not None:
            d["observable_on"] = v.observable.tree.describe()
        return d
    return {"status": "unconfirmed", "detail": v.reason + " (possible over-approximation)"}


# -- solver plumbing ------------------------------------------------------------------


def _model_depth(model: Counterexample) -> int:
    nodes = [n for s in model.sets.values() for n in s] + list(model.nodes.values())
    return max((len(n) for n in nodes), default=0) + 1


def _solve(query, cfg: RunConfig, name: str, all_pairs: bool = False):
    """Verdict(s) for a query: a list of models, FormulaInvalid or Inconclusive."""
    if cfg.backend == "bounded":
        if query.kind == "race":
            r = bounded_race(query, cfg.height, all_pairs)
            return r if isinstance(r, Inconclusive) else (r if all_pairs else [r])
        r = bounded_conflict(query, cfg.height)
        return r if isinstance(r, Inconclusive) else [r]
    binary = find_solver(cfg.solver_bin)
    if binary is None:
        raise SolverUnavailable(
            f"no WS2S solver configured: pass --solver-bin or set {SOLVER_ENV} "
            "(or use --backend bounded for a bounded search)"
        )
    text = emit_ws2s(query.formula, query.set_names(), query.node_names())
    v = run_solver(text, binary, cfg.workdir, cfg.timeout, name)
    if isinstance(v, Counterexample):
        if not evaluate(query.formula, FiniteModel(_model_depth(v), v.sets, v.nodes)):
            raise DecodeError("the solver's model does not satisfy the emitted formula on its finite tree")
        return [v]
    return v


# -- commands ------------------------------------------------------------------------------


def cmd_check(args, cfg: RunConfig) -> Report:
    name, src = read_source(args.file)
    p = parse_program(src)
    violations = validate_restrictions(p)
    rep = Report("check", "ok", EXIT_OK, [name])
    for w in lint(p):
        rep.lines.append(str(w))
    if violations:
        rep.verdict, rep.exit_code = "rejected", EXIT_REFUTED
        rep.lines += [str(v) for v in violations]
        rep.details["violations"] = [{"kind": v.kind.value, "function": v.function, "message": v.message, "location": str(v.location) if v.location else None} for v in violations]
        return rep
    try:
        norm = normalize(p, allow_deep_loc=args.allow_deep_loc)
    except NormalizeError as e:
        rep.verdict, rep.exit_code = "rejected", EXIT_REFUTED
        rep.lines.append(str(e))
        return rep
    text = pretty_print(norm)
    rep.lines.append(text.rstrip("\n"))
    rep.details["normalized"] = text
    return rep


def cmd_blocks(args, cfg: RunConfig) -> Report:
    name, p = load_checked(args.file)
    table = build_block_table(p)
    text = describe(table)
    rep = Report("blocks", "ok", EXIT_OK, [name], [text.rstrip("\n")])
    rep.details["blocks"] = {b: table.blocks[b].function for b in table.all_blocks}
    return rep


def cmd_pathcond(args, cfg: RunConfig) -> Report:
    name, p = load_checked(args.file)
    table = build_block_table(p)
    for b in (args.s, args.t):
        if b != MAIN and b not in table.blocks:
            raise UsageError(f"unknown block {b}")
    pc = path_condition(table, args.s, args.t)
    rep = Report("pathcond", "ok", EXIT_OK, [name], [f"PathCond[{args.s},{args.t}] = {pc}"])
    rep.details = {
        "s": args.s,
        "t": args.t,
        "direction": list(pc.direction),
        "conditions": [{"cond": c.cond_id, "polarity": c.polarity, "formula": str(c.formula)} for c in pc.conds],
        "match": str(pc.match),
        "formula": str(pc),
    }
    return rep


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)


def cmd_encode_race(args, cfg: RunConfig) -> Report:
    name, p = load_checked(args.file)
    q = build_datarace(_encoding(p, cfg))
    text = emit_ws2s(q.formula, q.set_names(), q.node_names())
    _emit(args, text)
    rep = Report("encode-race", "ok", EXIT_OK, [name])
    rep.lines.append(f"wrote {args.out}" if args.out else text.rstrip("\n"))
    rep.details = {"pairs": [list(x) for x in q.pairs], "bytes": len(text)}
    return rep


def _relation(p, p2, cfg: RunConfig):
    res = find_bisimulation(p, p2, cfg.bisim_cap, cfg.smt_backend())
    return res


def cmd_encode_equiv(args, cfg: RunConfig) -> Report:
    n1, p = load_checked(args.first)
    n2, p2 = load_checked(args.second)
    e1, e2 = _encoding(p, cfg), _encoding(p2, cfg)
    res = _relation(e1.table, e2.table, cfg)
    rep = Report("encode-equiv", "ok", EXIT_OK, [n1, n2])
    if res.relation is None:
        rep.verdict, rep.exit_code = "no-bisimulation", EXIT_UNKNOWN
        rep.lines.append(f"no bisimulation found after {res.tried} candidate(s)")
        return rep
    q = build_conflict(e1, e2, res.relation, match_noncalls(e1.table, e2.table))
    text = emit_ws2s(q.formula, q.set_names(), q.node_names())
    _emit(args, text)
    rep.lines.append(f"wrote {args.out}" if args.out else text.rstrip("\n"))
    rep.details = {"relation": [list(x) for x in res.relation], "bytes": len(text)}
    return rep


def _oracle_witness(w: RaceWitness, programs: list[str]) -> Witness:
    return Witness(
        kind="race",
        tree=w.tree.sorted_nodes(),
        configurations=[list(c) for c in w.configurations],
        labels={},
        conflict={"first": w.first, "second": w.second, "node": w.location[0], "location": w.location[1]},
        programs=programs,
        source="oracle",
    )


def cmd_race(args, cfg: RunConfig) -> Report:
    name, p = load_checked(args.file)
    t0 = time.perf_counter()
    enc = _encoding(p, cfg)
    q = build_datarace(enc)
    t1 = time.perf_counter()
    v = _solve(q, cfg, "race", args.all_pairs)
    t2 = time.perf_counter()
    rep = Report("race", "", EXIT_OK, [name], timings={"encode": t1 - t0, "solve": t2 - t1})
    rep.details["backend"] = cfg.backend
    if isinstance(v, FormulaInvalid):
        rep.verdict = "race-free"
        rep.lines.append(f"{name}: race-free")
        return rep
    if isinstance(v, Inconclusive):
        rep.verdict, rep.exit_code = "unknown", EXIT_UNKNOWN
        rep.lines.append(f"{name}: unknown ({v.reason})")
        return rep
    witnesses = []
    replays = []
    for model in v:
        w = decode_witness(q, model)
        w.programs = [name]
        witnesses.append(w)
        replays.append(_replay_dict(replay_witness(w, p)))
    rep.verdict, rep.exit_code = "race", EXIT_REFUTED
    rep.lines.append(f"{name}: data race")
    for w, r in zip(witnesses, replays):
        rep.lines.append(w.describe())
        rep.lines.append(f"  replay: {r['status']}")
    rep.witness = witnesses[0].to_json()
    rep.replay = replays[0]
    if len(witnesses) > 1:
        rep.details["all_witnesses"] = [w.to_json() for w in witnesses]
        rep.details["all_replays"] = replays
    rep.witness_file = _write_witness(cfg, f"race-{_stem(name)}", rep.witness, args.witness_out)
    return rep


def cmd_equiv(args, cfg: RunConfig) -> Report:
    n1, p = load_checked(args.first)
    n2, p2 = load_checked(args.second)
    t0 = time.perf_counter()
    e1, e2 = _encoding(p, cfg), _encoding(p2, cfg)
    rep = Report("equiv", "", EXIT_OK, [n1, n2])
    rep.details["backend"] = cfg.backend
    res = _relation(e1.table, e2.table, cfg)
    t1 = time.perf_counter()
    if res.relation is None:
        rep.verdict, rep.exit_code = "unknown", EXIT_UNKNOWN
        rep.lines.append(f"no bisimulation found after {res.tried} candidate(s): equivalence not provable by this method")
        for r, why in res.reasons[:5]:
            rep.lines.append(f"  {{{r}}}: {why}")
        rep.timings = {"bisim": t1 - t0}
        return rep
    rep.details["relation"] = [list(x) for x in res.relation]
    rep.details["relation_provenance"] = res.relation.provenance
    q = build_conflict(e1, e2, res.relation, match_noncalls(e1.table, e2.table))
    t2 = time.perf_counter()
    v = _solve(q, cfg, "conflict")
    t3 = time.perf_counter()
    rep.timings = {"bisim": t1 - t0, "encode": t2 - t1, "solve": t3 - t2}
    rep.lines.append(f"bisimulation ({res.relation.provenance}): {res.relation}")
    if isinstance(v, FormulaInvalid):
        rep.verdict = "equivalent"
        rep.lines.append(f"{n1} and {n2}: equivalent")
        return rep
    if isinstance(v, Inconclusive):
        rep.verdict, rep.exit_code = "unknown", EXIT_UNKNOWN
        rep.lines.append(f"{n1} and {n2}: unknown ({v.reason})")
        return rep
    w = decode_witness(q, v[0])
    w.programs = [n1, n2]
    rep.verdict, rep.exit_code = "not-equivalent", EXIT_REFUTED
    rep.lines.append(f"{n1} and {n2}: not equivalent")
    rep.lines.append(w.describe())
    rep.witness = w.to_json()
    rep.replay = _replay_dict(replay_witness(w, p, p2))
    rep.witness_file = _write_witness(cfg, f"conflict-{_stem(n1)}-{_stem(n2)}", rep.witness, args.witness_out)
    return rep


def cmd_bisim(args, cfg: RunConfig) -> Report:
    n1, p = load_checked(args.first)
    n2, p2 = load_checked(args.second)
    rep = Report("bisim", "", EXIT_OK, [n1, n2])
    try:
        res = _relation(p, p2, cfg)
    except NonCallMismatch as e:
        rep.verdict, rep.exit_code = "non-call-mismatch", EXIT_REFUTED
        rep.lines.append(str(e))
        rep.details = {"only_first": e.only_p, "only_second": e.only_p2}
        return rep
    for r, why in res.reasons:
        rep.lines.append(f"rejected ({r.provenance}) {{{r}}}: {why}")
    rep.details["tried"] = res.tried
    rep.details["rejected"] = [{"relation": [list(x) for x in r], "provenance": r.provenance, "reason": why} for r, why in res.reasons]
    if res.relation is None:
        rep.verdict, rep.exit_code = "not-found", EXIT_UNKNOWN
        more = " (candidate cap reached)" if res.exhausted else ""
        rep.lines.append(f"no bisimulation found after {res.tried} candidate(s){more}")
        return rep
    rep.verdict = "found"
    rep.lines.append(f"accepted ({res.relation.provenance}): {res.relation}")
    rep.details["relation"] = [list(x) for x in res.relation]
    rep.details["provenance"] = res.relation.provenance
    return rep


def _domain(text: str) -> tuple:
    try:
        return tuple(sorted({int(x) for x in text.split(",") if x.strip()}))
    except ValueError:
        raise UsageError(f"bad value domain {text!r}: expected comma-separated integers")


def cmd_oracle_race(args, cfg: RunConfig) -> Report:
    name, p = load_checked(args.file)
    t0 = time.perf_counter()
    r = sweep_race(p, cfg.oracle_height, cfg.domain, cfg.state_budget)
    rep = Report("oracle-race", r.verdict, EXIT_OK, [name], timings={"oracle": time.perf_counter() - t0})
    rep.lines.append(f"{name}: " + r.describe())
    rep.details = _sweep_details(r)
    if r.witness is not None:
        rep.exit_code = EXIT_REFUTED
        w = _oracle_witness(r.witness, [name])
        rep.witness = w.to_json()
        rep.witness["values"] = _values_json(r.witness.tree)
        rep.replay = _replay_dict(replay_witness(w, p))
        rep.witness_file = _write_witness(cfg, f"oracle-race-{_stem(name)}", rep.witness, args.witness_out)
    return rep


def _values_json(t: ConcreteTree) -> dict:
    out: dict = {}
    for (n, f), v in t.values:
        out.setdefault(".".join(("root",) + n), {})[f] = v
    return out


def _sweep_details(r) -> dict:
    return {
        "height": r.height,
        "domain": list(r.domain),
        "runs": r.trees,
        "trees_covered": r.covered,
        "skipped_nil_access": r.skipped,
        "concrete_fields": list(r.concrete_fields),
        "symbolic_fields": list(r.symbolic_fields),
    }


def cmd_oracle_equiv(args, cfg: RunConfig) -> Report:
    n1, p = load_checked(args.first)
    n2, p2 = load_checked(args.second)
    t0 = time.perf_counter()
    r = sweep_equivalence(p, p2, cfg.oracle_height, cfg.domain, cfg.state_budget)
    rep = Report("oracle-equiv", r.verdict, EXIT_OK, [n1, n2], timings={"oracle": time.perf_counter() - t0})
    rep.lines.append(f"{n1} vs {n2}: " + r.describe())
    rep.details = _sweep_details(r)
    if r.verdict == "not-applicable":
        rep.exit_code = EXIT_UNKNOWN
    elif isinstance(r.witness, Differ):
        rep.exit_code = EXIT_REFUTED
        d = r.witness
        rep.witness = {
            "schema": 1,
            "kind": "difference",
            "programs": [n1, n2],
            "tree": [".".join(("root",) + n) for n in d.tree.sorted_nodes()],
            "values": _values_json(d.tree),
            "first": {"store": _store_json(d.first[0]), "returns": [str(x) for x in d.first[1]]},
            "second": {"store": _store_json(d.second[0]), "returns": [str(x) for x in d.second[1]]},
        }
        rep.replay = _replay_dict(replay_difference(d.tree, p, p2))
        rep.witness_file = _write_witness(cfg, f"difference-{_stem(n1)}-{_stem(n2)}", rep.witness, args.witness_out)
    return rep


def _store_json(store) -> dict:
    return {".".join(("root",) + n) + "." + f: str(v) for (n, f), v in store}


def _tree_from_json(d: dict) -> ConcreteTree:
    from .mso.witness import parse_node

    nodes = [parse_node(n) for n in d["tree"]]
    values = {}
    for n, fields in d.get("values", {}).items():
        for f, v in fields.items():
            values[(parse_node(n), f)] = int(v)
    return ConcreteTree.make(nodes, values)


def cmd_replay(args, cfg: RunConfig) -> Report:
    try:
        with open(args.witness) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read witness {args.witness}: {e}")
    names = [args.program] + ([args.second] if args.second else [])
    if not args.program:
        names = list(data.get("programs", []))
    if not names:
        raise UsageError("name the program(s) the witness refers to")
    loaded = [load_checked(n) for n in names]
    progs = [p for _, p in loaded]
    kind = data.get("kind")
    if kind == "difference":
        if len(progs) != 2:
            raise UsageError("a difference witness needs two programs")
        v = replay_difference(_tree_from_json(data), progs[0], progs[1])
    else:
        try:
            w = Witness.from_json(data)
        except (KeyError, ValueError) as e:
            raise UsageError(f"malformed witness: {e}")
        if w.kind == "conflict" and len(progs) != 2:
            raise UsageError("a conflict witness needs two programs")
        v = replay_witness(w, progs[0], progs[1] if len(progs) > 1 else None)
    rep = Report("replay", "", EXIT_OK, [n for n, _ in loaded])
    rep.details["replay"] = _replay_dict(v)
    if isinstance(v, Confirmed):
        rep.verdict = "confirmed"
        rep.lines.append("confirmed: " + v.detail)
        if v.observable is not None:
            rep.lines.append(v.observable.describe())
    else:
        rep.verdict, rep.exit_code = "unconfirmed", EXIT_REFUTED
        rep.lines.append("unconfirmed: " + v.reason)
    return rep


# -- corpus -------------------------------------------------------------------------------


def _solver_race(p, cfg: RunConfig, name: str) -> str:
    q = build_datarace(_encoding(p, cfg))
    v = _solve(q, cfg, f"race-{name}")
    if isinstance(v, FormulaInvalid):
        return "race-free"
    if isinstance(v, Inconclusive):
        return "unknown"
    return "race"


def _solver_equiv(p, p2, cfg: RunConfig, name: str) -> str:
    e1, e2 = _encoding(p, cfg), _encoding(p2, cfg)
    res = find_bisimulation(e1.table, e2.table, cfg.bisim_cap, cfg.smt_backend())
    if res.relation is None:
        return "no-bisimulation"
    q = build_conflict(e1, e2, res.relation, match_noncalls(e1.table, e2.table))
    v = _solve(q, cfg, f"conflict-{name}")
    if isinstance(v, FormulaInvalid):
        return "equivalent"
    if isinstance(v, Inconclusive):
        return "unknown"
    return "inequivalent"


_HOLDS = {"race-free", "equivalent"}


def _agrees(expected: str, got: str) -> bool:
    """A symbolic verdict contradicts the expectation only when it is definite."""
    if got in ("unknown", "skipped", "no-bisimulation"):
        return True
    return got == expected


def cmd_corpus(args, cfg: RunConfig) -> Report:
    man = corpus.manifest()
    rep = Report("corpus", "", EXIT_OK)
    rows = []
    failures = 0
    solver_ok = cfg.backend == "bounded" or find_solver(cfg.solver_bin) is not None
    backend_label = cfg.backend if solver_ok else "none"
    rep.lines.append(f"symbolic backend: {backend_label}; oracle: height <= {cfg.oracle_height}, fields over {{{', '.join(map(str, cfg.domain))}}}")
    for entry in man["rejected"]:
        name = entry["name"]
        p = parse_program(corpus.source(name))
        kinds = sorted({v.kind.value for v in validate_restrictions(p)})
        ok = entry["violation"] in kinds
        failures += not ok
        rows.append({"kind": "check", "name": name, "expected": entry["violation"], "got": ",".join(kinds) or "accepted", "ok": ok})
    for entry in man["programs"]:
        name = entry["name"]
        p = corpus.load(name)
        t0 = time.perf_counter()
        sym = _solver_race(p, cfg, name) if solver_ok else "skipped"
        t1 = time.perf_counter()
        orc = sweep_race(p, cfg.oracle_height, cfg.domain, cfg.state_budget).verdict
        t2 = time.perf_counter()
        ok = _agrees(entry["race"], sym) and orc == entry["race"]
        failures += not ok
        rows.append({"kind": "race", "name": name, "expected": entry["race"], "symbolic": sym, "oracle": orc, "ok": ok, "time": {"symbolic": t1 - t0, "oracle": t2 - t1}})
    for entry in man["pairs"]:
        a, b = entry["first"], entry["second"]
        label = f"{a} ~ {b}"
        if entry.get("slow") and args.skip_slow:
            rows.append({"kind": "equiv", "name": label, "expected": entry["expected"], "symbolic": "skipped", "oracle": "skipped", "ok": True})
            continue
        p, p2 = corpus.load(a), corpus.load(b)
        t0 = time.perf_counter()
        sym = _solver_equiv(p, p2, cfg, f"{a}-{b}") if solver_ok else "skipped"
        t1 = time.perf_counter()
        orc = sweep_equivalence(p, p2, cfg.oracle_height, cfg.domain, cfg.state_budget).verdict
        t2 = time.perf_counter()
        ok = _agrees(entry["expected"], sym) and orc == entry["expected"]
        failures += not ok
        rows.append({"kind": "equiv", "name": label, "expected": entry["expected"], "symbolic": sym, "oracle": orc, "ok": ok, "time": {"symbolic": t1 - t0, "oracle": t2 - t1}})
    for r in rows:
        status = "ok" if r["ok"] else "MISMATCH"
        if r["kind"] == "check":
            line = f"{status:8} check  {r['name']:36} expected {r['expected']:12} got {r['got']}"
        else:
            line = (
                f"{status:8} {r['kind']:6} {r['name']:36} expected {r['expected']:12} "
                f"symbolic {r['symbolic']:15} oracle {r['oracle']}"
            )
            if "time" in r:
                line += f"  [{r['time']['symbolic']:.2f}s + {r['time']['oracle']:.2f}s]"
        rep.lines.append(line)
    rep.lines.append(f"{len(rows) - failures}/{len(rows)} as expected")
    rep.details = {"rows": rows, "symbolic_backend": backend_label}
    rep.verdict = "ok" if not failures else "mismatch"
    rep.exit_code = EXIT_OK if not failures else EXIT_REFUTED
    return rep


# -- argument parsing ----------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver-bin", help=f"WS2S solver executable (default: ${SOLVER_ENV})")
    common.add_argument("--smt-bin", help=f"SMT-LIB solver for integer queries (default: ${SMT_ENV}; built-in procedure otherwise)")
    common.add_argument("--backend", choices=("mona", "bounded"), default="mona", help="external WS2S solver or bounded model search")
    common.add_argument("--workdir", help="keep solver inputs/outputs and witness files here")
    common.add_argument("--height", type=int, default=3, help="tree height bound of the bounded backend (default 3)")
    common.add_argument("--oracle-height", type=int, default=None, help="tree height bound of the oracle (default 2)")
    common.add_argument("--domain", default="0,1", help="field values the oracle enumerates (default 0,1)")
    common.add_argument("--state-budget", type=int, default=500_000, help="oracle states per tree before giving up")
    common.add_argument("--bisim-cap", type=int, default=10_000, help="bisimulation candidates to try")
    common.add_argument("--timeout", type=float, default=None, help="solver timeout in seconds")
    common.add_argument("--node-level", action="store_true", help="blocks touching a common node conflict even on different fields")
    common.add_argument("--format", choices=("text", "json"), default="text")

    ap = argparse.ArgumentParser(prog="retreet", description="Race and fusion checking for recursive tree traversals.")
    ap.add_argument("--version", action="version", version=f"retreet {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text)
        sp.set_defaults(func=fn)
        return sp

    sp = add("check", cmd_check, "parse, validate and normalize a program")
    sp.add_argument("file")
    sp.add_argument("--allow-deep-loc", action="store_true")
    add("blocks", cmd_blocks, "list blocks, conditions, paths and read/write sets").add_argument("file")
    sp = add("pathcond", cmd_pathcond, "path condition between two blocks")
    sp.add_argument("file")
    sp.add_argument("s", help="caller record block (a call block or main)")
    sp.add_argument("t", help="target block")
    sp = add("encode-race", cmd_encode_race, "emit the data-race formula")
    sp.add_argument("file")
    sp.add_argument("-o", "--out")
    sp = add("encode-equiv", cmd_encode_equiv, "emit the reordering-conflict formula")
    sp.add_argument("first")
    sp.add_argument("second")
    sp.add_argument("-o", "--out")
    sp = add("race", cmd_race, "check a program for data races")
    sp.add_argument("file")
    sp.add_argument("--all-pairs", action="store_true", help="bounded backend: one witness per racing block pair")
    sp.add_argument("--witness-out")
    sp = add("equiv", cmd_equiv, "check that a transformed program is equivalent to the original")
    sp.add_argument("first")
    sp.add_argument("second")
    sp.add_argument("--witness-out")
    sp = add("bisim", cmd_bisim, "find a call-block bisimulation between two programs")
    sp.add_argument("first")
    sp.add_argument("second")
    sp = add("oracle-race", cmd_oracle_race, "look for races by running the program on every small tree")
    sp.add_argument("file")
    sp.add_argument("--witness-out")
    sp = add("oracle-equiv", cmd_oracle_equiv, "compare two programs on every small tree")
    sp.add_argument("first")
    sp.add_argument("second")
    sp.add_argument("--witness-out")
    sp = add("replay", cmd_replay, "check a witness file on its concrete tree")
    sp.add_argument("witness")
    sp.add_argument("program", nargs="?")
    sp.add_argument("second", nargs="?")
    sp = add("corpus", cmd_corpus, "run every bundled example against its expected verdict")
    sp.add_argument("--skip-slow", action="store_true", help="skip pairs marked slow in the manifest")
    return ap


def _config(args) -> RunConfig:
    smt = args.smt_bin or os.environ.get(SMT_ENV) or None
    oracle_height = args.oracle_height if args.oracle_height is not None else 2
    if args.height < 0 or oracle_height < 0:
        raise UsageError("heights must be non-negative")
    return RunConfig(
        solver_bin=args.solver_bin,
        smt_bin=smt,
        backend=args.backend,
        workdir=args.workdir,
        height=args.height,
        oracle_height=oracle_height,
        domain=_domain(args.domain),
        state_budget=args.state_budget,
        bisim_cap=args.bisim_cap,
        timeout=args.timeout,
        node_level=args.node_level,
        output=args.format,
    )


def _error(cfg_format: str, command: str, code: int, msg: str) -> int:
    if cfg_format == "json":
        print(json.dumps({"schema": REPORT_SCHEMA, "command": command, "verdict": "error", "exit_code": code, "error": msg}, indent=2))
    else:
        print(f"retreet {command}: {msg}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    fmt = args.format
    try:
        cfg = _config(args)
        rep = args.func(args, cfg)
    except UsageError as e:
        return _error(fmt, args.command, EXIT_USAGE, str(e))
    except (ParseError, ProgramRejected, NormalizeError) as e:
        return _error(fmt, args.command, EXIT_USAGE, f"invalid program: {e}")
    except SolverUnavailable as e:
        return _error(fmt, args.command, EXIT_USAGE, str(e))
    except NonCallMismatch as e:
        return _error(fmt, args.command, EXIT_USAGE, f"cannot compare: {e}")
    except BudgetExceeded as e:
        return _error(fmt, args.command, EXIT_UNKNOWN, f"budget exhausted: {e}")
    except (SolverError, DecodeError, EncodingMismatch) as e:
        return _error(fmt, args.command, EXIT_UNKNOWN, f"{type(e).__name__}: {e}")
    except OSError as e:
        return _error(fmt, args.command, EXIT_USAGE, str(e))
    rep.config = cfg.echo()
    if fmt == "json":
        print(json.dumps(rep.to_json(), indent=2, sort_keys=True))
    else:
        print(rep.text())
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
