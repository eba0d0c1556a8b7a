"""Lowering of checked syntax trees to the graph IR."""
from guppyc.lower.core import LoweringError, lower_module

__all__ = ["LoweringError", "lower_module"]
