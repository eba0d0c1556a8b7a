"""Compile-time constants for ``py(...)`` expressions.

Values come from a bindings file keyed by the whitespace-normalized expression
text, or from a small evaluator for pure literal arithmetic.
"""
from __future__ import annotations

import ast as pyast
import json
import operator
from pathlib import Path
from typing import Any

from guppyc.typecheck.types import (
    BOOL,
    FLOAT,
    INT,
    ListType,
    TagError,
    TupleType,
    Type,
    parse_tag,
)

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class BindingError(ValueError):
    pass


def normalize(text: str) -> str:
    return " ".join(text.split())


ConstBindings = dict[str, tuple[Type, Any]]


def load_bindings(source: str | Path | dict | None) -> ConstBindings:
    """Read a bindings mapping from a path, JSON text already decoded, or ``None``."""
    if source is None:
        return {}
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BindingError(f"bindings file is not valid JSON: {exc}") from exc
    else:
        data = source
    if not isinstance(data, dict):
        raise BindingError("bindings must be a JSON object")
    out: ConstBindings = {}
    for key, entry in data.items():
        if not isinstance(entry, dict) or "type" not in entry or "value" not in entry:
            raise BindingError(f"binding {key!r} must be an object with 'type' and 'value'")
        try:
            ty = parse_tag(entry["type"])
        except TagError as exc:
            raise BindingError(f"binding {key!r}: {exc}") from exc
        out[normalize(key)] = (ty, entry["value"])
    return out


def convert_literal(ty: Type, value: Any) -> Any:
    """Check ``value`` against ``ty`` and return its Python form (tuples as tuples).

    Raises ``BindingError`` when the value does not fit the type.
    """
    if ty == BOOL:
        if isinstance(value, bool):
            return value
    elif ty == INT:
        if isinstance(value, int) and not isinstance(value, bool):
            if not INT_MIN <= value <= INT_MAX:
                raise OverflowError(value)
            return value
    elif ty == FLOAT:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(ty, TupleType):
        if isinstance(value, (list, tuple)) and len(value) == len(ty.elements):
            return tuple(convert_literal(t, v) for t, v in zip(ty.elements, value))
    elif isinstance(ty, ListType):
        if isinstance(value, (list, tuple)):
            return [convert_literal(ty.element, v) for v in value]
    else:
        raise BindingError(f"values of type {ty} cannot be injected at compile time")
    raise BindingError(f"value {value!r} does not have type {ty}")


_BINOPS = {
    pyast.Add: operator.add,
    pyast.Sub: operator.sub,
    pyast.Mult: operator.mul,
    pyast.Div: operator.truediv,
}
_UNOPS = {pyast.USub: operator.neg, pyast.UAdd: operator.pos}


def eval_literal(text: str) -> Any | None:
    """Evaluate ``text`` if it is pure literal arithmetic, else return ``None``."""
    try:
        tree = pyast.parse(text, mode="eval")
    except SyntaxError:
        return None
    try:
        return _eval(tree.body)
    except (_NotLiteral, ZeroDivisionError):
        return None


class _NotLiteral(Exception):
    pass


def _eval(node: pyast.AST) -> Any:
    if isinstance(node, pyast.Constant) and type(node.value) in (int, float, bool):
        return node.value
    if isinstance(node, pyast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, pyast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand))
    raise _NotLiteral


def literal_type(value: Any) -> Type:
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    return FLOAT
