"""Example programs shipped with the compiler (the core examples plus small extras)."""
from __future__ import annotations

import json
from importlib import resources

PROGRAMS = ("rx", "teleport", "rus", "cx_ladder", "apply_graph")


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.gpy").read_text(encoding="utf-8")


def bindings(name: str) -> dict:
    path = resources.files(__name__).joinpath(f"{name}.bindings.json")
    if not path.is_file():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))
