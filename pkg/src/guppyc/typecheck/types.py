"""The semantic type lattice and its textual tag encoding."""
from __future__ import annotations

from dataclasses import dataclass


class Type:
    linear: bool = False


@dataclass(frozen=True)
class _Scalar(Type):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class QubitType(Type):
    linear = True

    def __str__(self) -> str:
        return "Qubit"


@dataclass(frozen=True)
class TupleType(Type):
    elements: tuple[Type, ...]

    @property
    def linear(self) -> bool:  # type: ignore[override]
        return any(t.linear for t in self.elements)

    def __str__(self) -> str:
        return f"tuple[{', '.join(map(str, self.elements))}]"


@dataclass(frozen=True)
class ListType(Type):
    element: Type

    @property
    def linear(self) -> bool:  # type: ignore[override]
        return self.element.linear

    def __str__(self) -> str:
        return f"list[{self.element}]"


@dataclass(frozen=True)
class FunctionType(Type):
    params: tuple[Type, ...]
    result: Type

    def __str__(self) -> str:
        return f"Callable[[{', '.join(map(str, self.params))}], {self.result}]"


BOOL = _Scalar("bool")
INT = _Scalar("int")
FLOAT = _Scalar("float")
NONE = _Scalar("None")
QUBIT = QubitType()

NUMERIC_RANK = {BOOL: 0, INT: 1, FLOAT: 2}


def is_numeric(t: Type) -> bool:
    return t in NUMERIC_RANK


def numeric_join(a: Type, b: Type) -> Type:
    """Upper bound of two numeric types in the tower bool < int < float."""
    return a if NUMERIC_RANK[a] >= NUMERIC_RANK[b] else b


def join_types(a: Type, b: Type) -> Type | None:
    """The unique type of a variable reaching a join on two paths, or ``None`` on conflict.

    No coercion happens at joins: ``int`` and ``float`` conflict.
    """
    return a if a == b else None


def coercible(src: Type, dst: Type) -> bool:
    """Whether a value of ``src`` may be implicitly converted to ``dst`` (upward only)."""
    if src == dst:
        return True
    return is_numeric(src) and is_numeric(dst) and NUMERIC_RANK[src] < NUMERIC_RANK[dst]


# --- tags ---------------------------------------------------------------------

_SCALAR_TAGS = {"bool": BOOL, "int": INT, "float": FLOAT, "none": NONE, "qubit": QUBIT}


def to_tag(t: Type) -> str:
    if isinstance(t, _Scalar):
        return "none" if t is NONE or t == NONE else t.name
    if isinstance(t, QubitType):
        return "qubit"
    if isinstance(t, TupleType):
        return "tuple[" + ",".join(to_tag(e) for e in t.elements) + "]"
    if isinstance(t, ListType):
        return f"list[{to_tag(t.element)}]"
    if isinstance(t, FunctionType):
        return "fn[[" + ",".join(to_tag(p) for p in t.params) + "]," + to_tag(t.result) + "]"
    raise TypeError(f"not a value type: {t!r}")


class TagError(ValueError):
    pass


def parse_tag(text: str) -> Type:
    parser = _TagParser(text.replace(" ", ""))
    t = parser.type()
    if parser.pos != len(parser.text):
        raise TagError(f"trailing characters in type tag {text!r}")
    return t


class _TagParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def eat(self, s: str) -> None:
        if not self.text.startswith(s, self.pos):
            raise TagError(f"expected {s!r} at offset {self.pos} in type tag {self.text!r}")
        self.pos += len(s)

    def word(self) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isalpha():
            self.pos += 1
        return self.text[start:self.pos]

    def types_until(self, close: str) -> list[Type]:
        out: list[Type] = []
        while not self.text.startswith(close, self.pos):
            out.append(self.type())
            if not self.text.startswith(close, self.pos):
                self.eat(",")
        self.eat(close)
        return out

    def type(self) -> Type:
        w = self.word()
        if w in _SCALAR_TAGS:
            return _SCALAR_TAGS[w]
        if w == "tuple":
            self.eat("[")
            return TupleType(tuple(self.types_until("]")))
        if w == "list":
            self.eat("[")
            elem = self.type()
            self.eat("]")
            return ListType(elem)
        if w == "fn":
            self.eat("[[")
            params = self.types_until("]")
            self.eat(",")
            result = self.type()
            self.eat("]")
            return FunctionType(tuple(params), result)
        raise TagError(f"unknown type tag {w!r} in {self.text!r}")
