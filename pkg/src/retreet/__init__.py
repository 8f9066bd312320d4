"""Dependence analysis, race detection and fusion checking for recursive tree traversals."""

__version__ = "0.1.0"
