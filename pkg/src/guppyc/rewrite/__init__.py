"""Peephole optimisation by local subgraph replacement."""
from guppyc.rewrite.engine import (
    Match,
    Pattern,
    PatternError,
    PNode,
    StaleMatchError,
    Template,
    apply_rewrite,
    find_matches,
    run_pipeline,
)
from guppyc.rewrite.rules import DEFAULT_RULES, RULES, resolve_rules

__all__ = [
    "DEFAULT_RULES",
    "RULES",
    "Match",
    "PNode",
    "Pattern",
    "PatternError",
    "StaleMatchError",
    "Template",
    "apply_rewrite",
    "find_matches",
    "resolve_rules",
    "run_pipeline",
]
