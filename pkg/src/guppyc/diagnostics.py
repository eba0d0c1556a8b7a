"""Source spans, categorized diagnostics and the error type that carries them."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


@dataclass(frozen=True)
class Span:
    """Half-open byte range ``[start, end)`` plus 1-based line/column of ``start``."""

    start: int
    end: int
    line: int
    col: int

    def contains(self, other: Span) -> bool:
        return self.start <= other.start and other.end <= self.end

    def merge(self, other: Span) -> Span:
        first = self if self.start <= other.start else other
        return Span(first.start, max(self.end, other.end), first.line, first.col)


class Category(str, Enum):
    SYNTAX = "syntax"
    NOT_DEFINED = "not-defined"
    NOT_DEFINITELY_ASSIGNED = "not-definitely-assigned"
    TYPE_MISMATCH = "type-mismatch"
    BRANCH_TYPE_CONFLICT = "branch-type-conflict"
    LINEARITY_COPY = "linearity-copy"
    LINEARITY_DISCARD = "linearity-discard"
    LINEARITY_CONDITIONAL_USE = "linearity-conditional-use"
    SIGNATURE_MISSING = "signature-missing"
    PY_BINDING_MISSING = "py-binding-missing"
    PY_USES_GUPPY_VAR = "py-uses-guppy-var"
    UNSUPPORTED_FEATURE = "unsupported-feature"
    ARITY = "arity"
    OVERFLOW_LITERAL = "overflow-literal"

    @property
    def code(self) -> str:
        return CODES[self]


CODES = {
    Category.SYNTAX: "SYN001",
    Category.NOT_DEFINED: "DEF001",
    Category.NOT_DEFINITELY_ASSIGNED: "DEF002",
    Category.TYPE_MISMATCH: "TYP001",
    Category.BRANCH_TYPE_CONFLICT: "TYP002",
    Category.SIGNATURE_MISSING: "TYP003",
    Category.UNSUPPORTED_FEATURE: "TYP004",
    Category.LINEARITY_COPY: "LIN001",
    Category.LINEARITY_DISCARD: "LIN002",
    Category.LINEARITY_CONDITIONAL_USE: "LIN003",
    Category.PY_USES_GUPPY_VAR: "PY001",
    Category.PY_BINDING_MISSING: "PY002",
    Category.ARITY: "ARI001",
    Category.OVERFLOW_LITERAL: "OVF001",
}


@dataclass(frozen=True)
class Diagnostic:
    category: Category
    message: str
    span: Span | None
    notes: tuple[tuple[Span | None, str], ...] = field(default=())

    @property
    def code(self) -> str:
        return self.category.code

    def render(self, filename: str = "<input>") -> str:
        lines = [f"{_loc(filename, self.span)}: error[{self.code}]: {self.message}"]
        for span, text in self.notes:
            lines.append(f"{_loc(filename, span)}: note: {text}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "category": self.category.value,
            "code": self.code,
            "message": self.message,
            "span": _span_json(self.span),
            "notes": [{"span": _span_json(s), "message": m} for s, m in self.notes],
        }


def _loc(filename: str, span: Span | None) -> str:
    if span is None:
        return filename
    return f"{filename}:{span.line}:{span.col}"


def _span_json(span: Span | None) -> dict | None:
    if span is None:
        return None
    return {"start": span.start, "end": span.end, "line": span.line, "col": span.col}


class CompileError(Exception):
    """Raised by any compiler phase; carries one or more diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic] | Diagnostic):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(d.render() for d in self.diagnostics))


def syntax_error(message: str, span: Span | None) -> CompileError:
    return CompileError(Diagnostic(Category.SYNTAX, message, span))
