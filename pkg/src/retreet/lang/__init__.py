"""Parsing, validation and normalization of Retreet programs."""
from .ast import Program, Function, strip_spans
from .checks import (
    LintWarning,
    ProgramRejected,
    Violation,
    ViolationKind,
    check_program,
    lint,
    normalize,
    validate_restrictions,
)
from .errors import NormalizeError, ParseError, RetreetError
from .parser import parse_program
from .printer import pretty_print

__all__ = [
    "Function",
    "LintWarning",
    "NormalizeError",
    "ParseError",
    "Program",
    "ProgramRejected",
    "RetreetError",
    "Violation",
    "ViolationKind",
    "check_program",
    "lint",
    "normalize",
    "parse_program",
    "pretty_print",
    "strip_spans",
    "validate_restrictions",
]
