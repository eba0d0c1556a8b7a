"""Tokenizer, parser and pretty-printer for the Guppy surface syntax."""
from guppyc.frontend.lexer import Kind, Token, detokenize, tokenize
from guppyc.frontend.parser import parse, parse_module
from guppyc.frontend.printer import unparse

__all__ = ["Kind", "Token", "detokenize", "parse", "parse_module", "tokenize", "unparse"]
