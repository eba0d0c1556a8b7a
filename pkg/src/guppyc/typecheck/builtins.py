"""Signatures of the builtin quantum operations and list helpers."""
from __future__ import annotations

from guppyc.typecheck.types import BOOL, FLOAT, NONE, QUBIT, FunctionType, TupleType

# name -> (parameter types, result type, quantum op emitted)
GATES: dict[str, tuple[tuple, object, str]] = {
    "Qubit": ((), QUBIT, "qalloc"),
    "h": ((QUBIT,), QUBIT, "h"),
    "x": ((QUBIT,), QUBIT, "x"),
    "z": ((QUBIT,), QUBIT, "z"),
    "t": ((QUBIT,), QUBIT, "t"),
    "tdg": ((QUBIT,), QUBIT, "tdg"),
    "rz": ((QUBIT, FLOAT), QUBIT, "rz"),
    "cx": ((QUBIT, QUBIT), TupleType((QUBIT, QUBIT)), "cx"),
    "zz": ((QUBIT, QUBIT), TupleType((QUBIT, QUBIT)), "zz"),
    "measure": ((QUBIT,), BOOL, "measure"),
    "discard": ((QUBIT,), NONE, "discard"),
}

# Builtins that may be used as first-class function values.
VALUE_BUILTINS = frozenset(n for n in GATES if n != "Qubit")

# Builtins with list-dependent typing, handled case by case.
LIST_BUILTINS = frozenset({"len", "get", "range"})

# Internal helper used by desugared loops over linear lists; not user-visible.
FREE_EMPTY = "%free"

BUILTIN_NAMES = frozenset(GATES) | LIST_BUILTINS
METHODS = frozenset({"apply", "get"})


def gate_function_type(name: str) -> FunctionType:
    params, result, _ = GATES[name]
    return FunctionType(tuple(params), result)
