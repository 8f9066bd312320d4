"""Reference semantics: run programs on small trees and check the claims concretely."""
from .checks import (
    Confirmed,
    Differ,
    Equal,
    Exploration,
    Nondeterministic,
    NotApplicable,
    RaceWitness,
    SweepResult,
    Unconfirmed,
    all_races,
    explore,
    field_names,
    oracle_datarace,
    oracle_equivalent,
    replay_difference,
    replay_witness,
    sweep_equivalence,
    sweep_race,
)
from .interp import ExecutionError, Iteration, Machine, NilAccess, SymbolicBranch, Trace, interpret_all
from .tree import BudgetExceeded, ConcreteTree, count_trees, enumerate_trees, node_name, shapes

__all__ = [
    "BudgetExceeded",
    "ConcreteTree",
    "Confirmed",
    "Differ",
    "Equal",
    "ExecutionError",
    "Exploration",
    "Iteration",
    "Machine",
    "NilAccess",
    "Nondeterministic",
    "NotApplicable",
    "RaceWitness",
    "SweepResult",
    "SymbolicBranch",
    "Trace",
    "Unconfirmed",
    "all_races",
    "count_trees",
    "enumerate_trees",
    "explore",
    "field_names",
    "interpret_all",
    "node_name",
    "oracle_datarace",
    "oracle_equivalent",
    "replay_difference",
    "replay_witness",
    "shapes",
    "sweep_equivalence",
    "sweep_race",
]
