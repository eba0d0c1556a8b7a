"""Port types: value types plus sums over rows and the block control type."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from guppyc.typecheck.types import (
    BOOL,
    FunctionType,
    ListType,
    TagError,
    TupleType,
    Type,
    parse_tag,
    to_tag,
)


@dataclass(frozen=True)
class SumType(Type):
    """Tagged union over rows of values; never linear at a port."""

    rows: tuple[tuple[Type, ...], ...]

    @property
    def linear(self) -> bool:  # type: ignore[override]
        return False

    def __str__(self) -> str:
        return "Sum(" + " | ".join("(" + ", ".join(map(str, r)) + ")" for r in self.rows) + ")"


@dataclass(frozen=True)
class ControlType(Type):
    def __str__(self) -> str:
        return "control"


CONTROL = ControlType()
UNIT_BOOL = SumType(((), ()))


def sum_of(*rows) -> SumType:
    return SumType(tuple(tuple(r) for r in rows))


def canon(t: Type) -> Type:
    """Canonical form used for port equality: ``bool`` is the two-variant unit sum."""
    if t == BOOL:
        return UNIT_BOOL
    if isinstance(t, TupleType):
        return TupleType(tuple(canon(e) for e in t.elements))
    if isinstance(t, ListType):
        return ListType(canon(t.element))
    if isinstance(t, FunctionType):
        return FunctionType(tuple(canon(p) for p in t.params), canon(t.result))
    if isinstance(t, SumType):
        return SumType(tuple(tuple(canon(x) for x in r) for r in t.rows))
    return t


def same_port(a: Type, b: Type) -> bool:
    return canon(a) == canon(b)


def same_row(a, b) -> bool:
    return len(a) == len(b) and all(same_port(x, y) for x, y in zip(a, b))


def is_linear(t: Type) -> bool:
    return t.linear


def port_tag(t: Type) -> Any:
    if isinstance(t, SumType):
        return {"sum": [[port_tag(x) for x in r] for r in t.rows]}
    if isinstance(t, ControlType):
        return "control"
    return to_tag(t)


def parse_port_tag(tag: Any) -> Type:
    if isinstance(tag, dict):
        if set(tag) != {"sum"} or not isinstance(tag["sum"], list):
            raise TagError(f"malformed sum tag {tag!r}")
        rows = []
        for r in tag["sum"]:
            if not isinstance(r, list):
                raise TagError(f"malformed sum row {r!r}")
            rows.append(tuple(parse_port_tag(x) for x in r))
        return SumType(tuple(rows))
    if tag == "control":
        return CONTROL
    if not isinstance(tag, str):
        raise TagError(f"malformed type tag {tag!r}")
    return parse_tag(tag)
