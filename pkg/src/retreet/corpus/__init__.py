"""Bundled example programs and the manifest of their expected verdicts."""
from __future__ import annotations

import json
from importlib import resources
from typing import Optional

from ..lang import Program, check_program, parse_program


def _root():
    return resources.files(__name__)


def names() -> list[str]:
    return sorted(p.name[: -len(".rtt")] for p in _root().iterdir() if p.name.endswith(".rtt"))


def source(name: str) -> str:
    return _root().joinpath(f"{name}.rtt").read_text()


def path(name: str) -> Optional[str]:
    """Filesystem path of a bundled program, if it exists on disk."""
    p = _root().joinpath(f"{name}.rtt")
    return str(p) if p.is_file() else None


def load(name: str, checked: bool = True) -> Program:
    p = parse_program(source(name))
    return check_program(p) if checked else p


def manifest() -> dict:
    return json.loads(_root().joinpath("manifest.json").read_text())


def golden(name: str) -> str:
    return _root().joinpath("golden", name).read_text()
