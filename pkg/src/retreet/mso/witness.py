"""Turning models of a race or conflict formula into readable witnesses."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from ..blocks import MAIN, callees, conflicting_pairs
from ..lang.errors import RetreetError
from .encode import ALLOC, LabelFamily, ProgramEncoding, Query
from .solver import Counterexample

DEFAULT_DEPTH_CAP = 12
SCHEMA_VERSION = 1


class DecodeError(RetreetError):
    """The labels do not describe a configuration: the encoding is broken."""


def node_str(node: tuple[str, ...]) -> str:
    return ".".join(("root",) + tuple(node))


def parse_node(text: str) -> tuple[str, ...]:
    parts = text.split(".")
    if parts[0] != "root" or any(p not in ("l", "r") for p in parts[1:]):
        raise ValueError(f"not a node name: {text!r}")
    return tuple(parts[1:])


@dataclass
class Witness:
    kind: str  # "race" or "conflict"
    tree: list  # allocated nodes
    configurations: list  # per configuration: [(block, node), ...] from main to the current block
    labels: dict  # node -> sorted label names
    conflict: dict  # first/second: (block, node); node: shared node; location: accessed name
    programs: list = field(default_factory=list)
    source: str = "solver"

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "source": self.source,
            "programs": list(self.programs),
            "tree": [node_str(n) for n in sorted(self.tree, key=lambda n: (len(n), n))],
            "labels": {node_str(n): list(v) for n, v in sorted(self.labels.items(), key=lambda kv: (len(kv[0]), kv[0]))},
            "configurations": [
                [{"block": b, "node": node_str(n)} for b, n in cfg] for cfg in self.configurations
            ],
            "conflict": {
                "first": {"block": self.conflict["first"][0], "node": node_str(self.conflict["first"][1])},
                "second": {"block": self.conflict["second"][0], "node": node_str(self.conflict["second"][1])},
                "node": node_str(self.conflict["node"]),
                "location": self.conflict["location"],
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(d: dict) -> "Witness":
        c = d["conflict"]
        return Witness(
            kind=d["kind"],
            tree=[parse_node(n) for n in d["tree"]],
            configurations=[[(r["block"], parse_node(r["node"])) for r in cfg] for cfg in d["configurations"]],
            labels={parse_node(k): list(v) for k, v in d.get("labels", {}).items()},
            conflict={
                "first": (c["first"]["block"], parse_node(c["first"]["node"])),
                "second": (c["second"]["block"], parse_node(c["second"]["node"])),
                "node": parse_node(c["node"]),
                "location": c["location"],
            },
            programs=list(d.get("programs", [])),
            source=d.get("source", "solver"),
        )

    def describe(self) -> str:
        first, second = self.conflict["first"], self.conflict["second"]
        lines = [
            f"{self.kind} witness on a tree with {len(self.tree)} node(s): "
            + (", ".join(node_str(n) for n in sorted(self.tree, key=lambda n: (len(n), n))) or "(empty)"),
            f"  {first[0]} at {node_str(first[1])} and {second[0]} at {node_str(second[1])} "
            f"both access {self.conflict['location']} at {node_str(self.conflict['node'])}",
        ]
        for i, cfg in enumerate(self.configurations, 1):
            lines.append(f"  configuration {i}: " + " -> ".join(f"({b}, {node_str(n)})" for b, n in cfg))
        return "\n".join(lines)


def _holds(model: Counterexample, name: str, node: tuple) -> bool:
    return node in model.sets.get(name, frozenset())


def decode_configuration(
    enc: ProgramEncoding, lab: LabelFamily, model: Counterexample, depth_cap: int = DEFAULT_DEPTH_CAP
) -> list[tuple[str, tuple]]:
    """Follow the unique successor from main at the root down to the current block."""
    if not _holds(model, lab.L(MAIN), ()):
        raise DecodeError(f"configuration {lab.index}: main is not labeled at the root")
    records = [(MAIN, ())]
    s, u = MAIN, ()
    while True:
        nxt = []
        for t in callees(enc.table, s):
            v = u + enc.direction(t)
            if not _holds(model, lab.L(t), v):
                continue
            if all(_holds(model, lab.C(c), u) == pol for c, pol in enc.path_literals(t)):
                nxt.append((t, v if enc.table.info(t).is_call else u))
        if len(nxt) != 1:
            raise DecodeError(
                f"configuration {lab.index}: record ({s}, {node_str(u)}) has {len(nxt)} successors"
            )
        t, v = nxt[0]
        records.append((t, v))
        if not enc.table.info(t).is_call:
            return records
        if len(v) > depth_cap:
            raise DecodeError(f"configuration {lab.index}: deeper than the decode cap {depth_cap}")
        s, u = t, v


def _location(enc: ProgramEncoding, q1: str, x1: tuple, q2: str, x2: tuple):
    for a1, a2 in conflicting_pairs(enc.table.rw(q1), enc.table.rw(q2), enc.node_level):
        if x1 + a1.disp == x2 + a2.disp:
            name = a1.name if a1.owner is None else f"{a1.owner}.{a1.name}"
            if a1.name != a2.name or a1.owner != a2.owner:
                other = a2.name if a2.owner is None else f"{a2.owner}.{a2.name}"
                name = f"{name}/{other}"
            return x1 + a1.disp, name
    raise DecodeError(f"{q1} at {node_str(x1)} and {q2} at {node_str(x2)} share no location")


def decode_witness(query: Query, model: Counterexample, depth_cap: int = DEFAULT_DEPTH_CAP) -> Witness:
    encs = query._enc_per_label()
    configs = [decode_configuration(enc, lab, model, depth_cap) for enc, lab in zip(encs, query.labels)]
    (q1, x1), (q2, x2) = configs[0][-1], configs[1][-1]
    node, location = _location(query.programs[0], q1, x1, q2, x2)
    labels: dict = {}
    for name, nodes in model.sets.items():
        if name == ALLOC:
            continue
        for n in nodes:
            labels.setdefault(n, []).append(name)
    labels = {n: sorted(v) for n, v in labels.items()}
    tree = sorted(model.sets.get(ALLOC, frozenset()), key=lambda n: (len(n), n))
    return Witness(
        kind=query.kind,
        tree=tree,
        configurations=configs,
        labels=labels,
        conflict={"first": (q1, x1), "second": (q2, x2), "node": node, "location": location},
        source=model.source,
    )
