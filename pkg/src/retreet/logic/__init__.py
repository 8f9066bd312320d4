"""Decision procedures: linear integer arithmetic and condition-set alphabets."""
from .condsets import (
    CondSetFamily,
    Component,
    brute_force_condition_sets,
    consistent_condition_sets,
)
from .omega import Budget, Constraint, solve
from .sat import (
    EquivUnknown,
    Equivalent,
    NotEquivalent,
    Sat,
    StructuralAtom,
    Unknown,
    Unsat,
    lia_equivalent,
    lia_satisfiable,
    lia_valid,
)
from .smtlib import SmtBackend

__all__ = [
    "Budget",
    "Component",
    "CondSetFamily",
    "Constraint",
    "EquivUnknown",
    "Equivalent",
    "NotEquivalent",
    "Sat",
    "SmtBackend",
    "StructuralAtom",
    "Unknown",
    "Unsat",
    "brute_force_condition_sets",
    "consistent_condition_sets",
    "lia_equivalent",
    "lia_satisfiable",
    "lia_valid",
    "solve",
]
