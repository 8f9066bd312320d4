from __future__ import annotations

from typing import Optional

from .ast import Span


class RetreetError(Exception):
    """Base class for every error raised by the toolkit."""


class ParseError(RetreetError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class NormalizeError(RetreetError):
    def __init__(self, message: str, span: Optional[Span] = None):
        where = f"{span}: " if span is not None else ""
        super().__init__(where + message)
        self.message = message
        self.span = span
