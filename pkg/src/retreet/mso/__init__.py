"""MSO encoding of configurations, races and reorderings, and its solver interface."""
from .bounded import EncodingMismatch, abstract_configurations, bounded_conflict, bounded_race, tree_shapes
from .encode import (
    ALLOC,
    BisimMissing,
    Encoder,
    LabelFamily,
    ProgramEncoding,
    Query,
    allocation_closed,
    build_conflict,
    build_datarace,
)
from .ir import FiniteModel, evaluate
from .solver import (
    Counterexample,
    FormulaInvalid,
    Inconclusive,
    SolverError,
    SolverUnavailable,
    find_solver,
    parse_solver_output,
    run_solver,
)
from .witness import DecodeError, Witness, decode_configuration, decode_witness
from .ws2s import emit_ws2s


def build_configuration(enc: ProgramEncoding, q: str, cfg_index: int = 1):
    """Labels of configuration ``cfg_index`` describe a configuration ending at q."""
    return Encoder().configuration(enc, LabelFamily(cfg_index), q)


def build_ordered(enc: ProgramEncoding, first: int = 1, second: int = 2):
    return Encoder().ordered(enc, LabelFamily(first), LabelFamily(second))


def build_parallel(enc: ProgramEncoding, first: int = 1, second: int = 2):
    return Encoder().parallel(enc, LabelFamily(first), LabelFamily(second))


def build_dependence(enc: ProgramEncoding, q1: str, q2: str):
    return Encoder().dependence(enc, LabelFamily(1), q1, LabelFamily(2), q2)


__all__ = [
    "ALLOC",
    "BisimMissing",
    "Counterexample",
    "DecodeError",
    "EncodingMismatch",
    "Encoder",
    "FiniteModel",
    "FormulaInvalid",
    "Inconclusive",
    "LabelFamily",
    "ProgramEncoding",
    "Query",
    "SolverError",
    "SolverUnavailable",
    "Witness",
    "abstract_configurations",
    "allocation_closed",
    "bounded_conflict",
    "bounded_race",
    "build_configuration",
    "build_conflict",
    "build_datarace",
    "build_dependence",
    "build_ordered",
    "build_parallel",
    "decode_configuration",
    "decode_witness",
    "emit_ws2s",
    "evaluate",
    "find_solver",
    "parse_solver_output",
    "run_solver",
    "tree_shapes",
]
