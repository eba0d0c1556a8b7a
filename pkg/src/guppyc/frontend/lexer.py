"""Indentation-sensitive tokenizer for Guppy source text."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from guppyc.diagnostics import Span, syntax_error


class Kind(str, Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    INT = "int-literal"
    FLOAT = "float-literal"
    BOOL = "bool-literal"
    NONE = "none-literal"
    OP = "operator"
    DELIM = "delimiter"
    NEWLINE = "newline"
    INDENT = "indent"
    DEDENT = "dedent"
    EOF = "eof"


KEYWORDS = frozenset(
    "def return if elif else while for in break continue pass and or not".split()
)

# Longest first so that e.g. `//=` wins over `//` and `/`.
OPERATORS = sorted(
    "+ - * / // % ** & | ^ ~ << >> < > <= >= == != = += -= *= /= //= %= &= |= ^= "
    "<<= >>= ->".split(),
    key=len,
    reverse=True,
)
DELIMITERS = "()[],:.@"

_NUMBER = re.compile(
    r"(?:\d[\d_]*\.(?:\d[\d_]*)?|\.\d[\d_]*)(?:[eE][+-]?\d+)?"
    r"|\d[\d_]*[eE][+-]?\d+"
    r"|0[xX][0-9a-fA-F_]+|0[bB][01_]+|0[oO][0-7_]+"
    r"|\d[\d_]*"
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Token:
    kind: Kind
    text: str
    span: Span

    def is_(self, kind: Kind, text: str | None = None) -> bool:
        return self.kind is kind and (text is None or self.text == text)


class _Cursor:
    """Tracks byte offsets alongside character positions."""

    def __init__(self, source: str):
        self.source = source
        ascii_only = source.isascii()
        self._bytes = None if ascii_only else _byte_offsets(source)

    def byte(self, i: int) -> int:
        return i if self._bytes is None else self._bytes[i]

    def span(self, start: int, end: int, line: int, line_start: int) -> Span:
        return Span(self.byte(start), self.byte(end), line, start - line_start + 1)


def _byte_offsets(source: str) -> list[int]:
    out = [0]
    for ch in source:
        out.append(out[-1] + len(ch.encode("utf-8")))
    return out


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens, emitting INDENT/DEDENT for block structure.

    Raises ``CompileError`` on tabs in indentation, indentation that matches no
    open block, unterminated or unsupported literals, and illegal characters.
    """
    cur = _Cursor(source)
    tokens: list[Token] = []
    indents = [0]
    depth = 0  # bracket nesting; newlines inside brackets are insignificant
    pos = 0
    line = 1
    line_start = 0
    at_line_start = True
    n = len(source)

    def emit(kind: Kind, start: int, end: int) -> None:
        tokens.append(Token(kind, source[start:end], cur.span(start, end, line, line_start)))

    while pos < n:
        if at_line_start and depth == 0:
            j = pos
            while j < n and source[j] == " ":
                j += 1
            if j < n and source[j] == "\t":
                raise syntax_error(
                    "tabs are not allowed in indentation", cur.span(j, j + 1, line, line_start)
                )
            if j >= n or source[j] in "\n#" or source[j:j + 2] == "\r\n":
                # blank or comment-only line
                while j < n and source[j] != "\n":
                    j += 1
                pos = j + 1
                line += 1
                line_start = pos
                continue
            width = j - pos
            where = cur.span(pos, j, line, line_start)
            if width > indents[-1]:
                last = _last_significant(tokens)
                if last is None or not last.is_(Kind.DELIM, ":"):
                    raise syntax_error("unexpected indent", where)
                indents.append(width)
                tokens.append(Token(Kind.INDENT, "", Span(where.end, where.end, line, width + 1)))
            elif width < indents[-1]:
                while width < indents[-1]:
                    indents.pop()
                    tokens.append(Token(Kind.DEDENT, "", Span(where.end, where.end, line, width + 1)))
                if width != indents[-1]:
                    raise syntax_error(
                        "unindent does not match any outer indentation level", where
                    )
            else:
                last = _last_significant(tokens)
                if last is not None and last.is_(Kind.DELIM, ":"):
                    raise syntax_error("expected an indented block", where)
            pos = j
            at_line_start = False

        ch = source[pos]
        if ch == "\n":
            if depth == 0:
                emit(Kind.NEWLINE, pos, pos + 1)
                at_line_start = True
            pos += 1
            line += 1
            line_start = pos
            continue
        if ch in " \t\r" or ch == "\f":
            pos += 1
            continue
        if ch == "\\" and source[pos + 1:pos + 2] == "\n":
            pos += 2
            line += 1
            line_start = pos
            continue
        if ch == "#":
            while pos < n and source[pos] != "\n":
                pos += 1
            continue
        if ch in "\"'":
            end = source.find(ch, pos + 1)
            nl = source.find("\n", pos + 1)
            if end == -1 or (nl != -1 and nl < end):
                raise syntax_error("unterminated literal", cur.span(pos, pos + 1, line, line_start))
            raise syntax_error(
                "string literals are not supported", cur.span(pos, end + 1, line, line_start)
            )
        m = _NUMBER.match(source, pos)
        if m and (ch.isdigit() or (ch == "." and m.end() > pos + 1)):
            text = m.group()
            after = m.end()
            if after < n and (source[after].isalnum() or source[after] == "_"):
                raise syntax_error(
                    "malformed numeric literal", cur.span(pos, after + 1, line, line_start)
                )
            is_float = text[:2].lower() not in ("0x", "0b", "0o") and any(c in text for c in ".eE")
            emit(Kind.FLOAT if is_float else Kind.INT, pos, after)
            pos = after
            continue
        m = _IDENT.match(source, pos)
        if m:
            word = m.group()
            if word in KEYWORDS:
                kind = Kind.KEYWORD
            elif word in ("True", "False"):
                kind = Kind.BOOL
            elif word == "None":
                kind = Kind.NONE
            else:
                kind = Kind.IDENT
            emit(kind, pos, m.end())
            pos = m.end()
            continue
        for op in OPERATORS:
            if source.startswith(op, pos):
                emit(Kind.OP, pos, pos + len(op))
                pos += len(op)
                break
        else:
            if ch in DELIMITERS:
                if ch in "([":
                    depth += 1
                elif ch in ")]":
                    depth = max(depth - 1, 0)
                emit(Kind.DELIM, pos, pos + 1)
                pos += 1
            else:
                raise syntax_error(
                    f"illegal character {ch!r}", cur.span(pos, pos + 1, line, line_start)
                )

    end = cur.byte(n)
    col = n - line_start + 1
    last = tokens[-1] if tokens else None
    if last is not None and last.kind not in (Kind.NEWLINE, Kind.DEDENT, Kind.INDENT):
        # source did not end with a newline; synthesize a zero-width one
        tokens.append(Token(Kind.NEWLINE, "", Span(end, end, line, col)))
    while len(indents) > 1:
        indents.pop()
        tokens.append(Token(Kind.DEDENT, "", Span(end, end, line, col)))
    tokens.append(Token(Kind.EOF, "", Span(end, end, line, col)))
    return tokens


def _last_significant(tokens: list[Token]) -> Token | None:
    for tok in reversed(tokens):
        if tok.kind is Kind.NEWLINE:
            continue
        return tok
    return None


def detokenize(tokens: list[Token], indent: str = "    ") -> str:
    """Re-serialize a token stream into source text with canonical layout."""
    out: list[str] = []
    level = 0
    line: list[str] = []
    prev: Token | None = None
    for tok in tokens:
        if tok.kind is Kind.INDENT:
            level += 1
        elif tok.kind is Kind.DEDENT:
            level -= 1
        elif tok.kind is Kind.NEWLINE:
            out.append(indent * level + "".join(line) + "\n")
            line = []
            prev = None
        elif tok.kind is Kind.EOF:
            break
        else:
            if prev is not None and _needs_space(prev, tok):
                line.append(" ")
            line.append(tok.text)
            prev = tok
    if line:
        out.append(indent * level + "".join(line) + "\n")
    return "".join(out)


def _needs_space(prev: Token, tok: Token) -> bool:
    if tok.is_(Kind.DELIM) and tok.text in ")],:.":
        return False
    if prev.is_(Kind.DELIM) and prev.text in "([.@":
        return False
    if tok.is_(Kind.DELIM) and tok.text in "([" and prev.kind is Kind.IDENT:
        return False
    return True
