"""Hierarchical dataflow graph IR."""
from guppyc.ir.graph import Builder, BuildError, Edge, Graph, Node
from guppyc.ir.ports import CONTROL, SumType, sum_of
from guppyc.ir.serialize import FormatError, deserialize, serialize
from guppyc.ir.validate import ValidationError, Violation, check, validate

__all__ = [
    "CONTROL",
    "BuildError",
    "Builder",
    "Edge",
    "FormatError",
    "Graph",
    "Node",
    "SumType",
    "ValidationError",
    "Violation",
    "check",
    "deserialize",
    "serialize",
    "sum_of",
    "validate",
]
