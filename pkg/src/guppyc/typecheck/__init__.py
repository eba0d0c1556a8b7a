"""Type checking and linearity analysis."""
from guppyc.typecheck.checker import CheckedModule, Signature, check_module
from guppyc.typecheck.pyexpr import BindingError, load_bindings
from guppyc.typecheck.types import parse_tag, to_tag

__all__ = [
    "BindingError",
    "CheckedModule",
    "Signature",
    "check_module",
    "load_bindings",
    "parse_tag",
    "to_tag",
]
