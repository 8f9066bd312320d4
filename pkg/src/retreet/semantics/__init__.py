"""Symbolic layer: formulas, weakest preconditions, path conditions, speculation."""
from .formula import BOT, TOP, Formula, Lin, Nil, conj, disj, evaluate, neg
from .speculative import MissingGhost, NeedsTree, SpecRecord, SpecTrace, speculative_execute
from .wp import (
    PathCond,
    SignedCond,
    SymbolicValuation,
    UnknownSymbol,
    cond_formula,
    ghost,
    match_constraint,
    path_condition,
    wp,
    wp_condition,
)

__all__ = [
    "BOT",
    "TOP",
    "Formula",
    "Lin",
    "MissingGhost",
    "NeedsTree",
    "Nil",
    "PathCond",
    "SignedCond",
    "SpecRecord",
    "SpecTrace",
    "SymbolicValuation",
    "UnknownSymbol",
    "conj",
    "cond_formula",
    "disj",
    "evaluate",
    "ghost",
    "match_constraint",
    "neg",
    "path_condition",
    "speculative_execute",
    "wp",
    "wp_condition",
]
