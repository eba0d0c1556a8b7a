"""End-to-end helpers: source text to checked tree to validated graph."""
from __future__ import annotations

from pathlib import Path

from guppyc.frontend import parse
from guppyc.ir import Graph, check
from guppyc.lower import lower_module
from guppyc.typecheck import check_module, load_bindings


def compile_source(source: str, bindings=None, lowering: str = "structured") -> Graph:
    """Parse, check, lower and validate; raises ``CompileError`` on bad programs."""
    module = parse(source)
    if not isinstance(bindings, dict) or bindings and not _is_loaded(bindings):
        bindings = load_bindings(bindings)
    checked = check_module(module, bindings)
    return check(lower_module(checked, lowering))


def compile_file(path: str | Path, bindings=None, lowering: str = "structured") -> Graph:
    return compile_source(Path(path).read_text(encoding="utf-8"), bindings, lowering)


def _is_loaded(bindings: dict) -> bool:
    return all(isinstance(v, tuple) for v in bindings.values())
