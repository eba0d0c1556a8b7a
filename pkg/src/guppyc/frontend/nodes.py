"""Spanned syntax tree for Guppy modules.

Structural equality ignores spans and every attribute filled in by later
phases, so a re-parsed pretty-print compares equal to the original tree.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Iterator

from guppyc.diagnostics import Span


def _meta(default: Any = None) -> Any:
    return field(default=default, compare=False, repr=False, kw_only=True)


@dataclass(eq=True)
class Node:
    span: Span = _meta()

    def children(self) -> Iterator[Node]:
        for f in fields(self):
            if not f.compare:
                continue
            value = getattr(self, f.name)
            if isinstance(value, Node):
                yield value
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Node):
                        yield item
                    elif isinstance(item, tuple):
                        yield from (x for x in item if isinstance(x, Node))


# --- type annotations ---------------------------------------------------------


@dataclass(eq=True)
class TypeExpr(Node):
    """``name`` or ``name[args]``; a bare bracketed list is ``name == "[]"``."""

    name: str
    args: list[TypeExpr] = field(default_factory=list)
    subscripted: bool = False


# --- expressions --------------------------------------------------------------


@dataclass(eq=True)
class Expr(Node):
    # Filled in by the type checker.
    ty: Any = _meta()
    coerce: Any = _meta()


@dataclass(eq=True)
class IntLit(Expr):
    value: int


@dataclass(eq=True)
class FloatLit(Expr):
    value: float
    text: str = field(default="", compare=False)


@dataclass(eq=True)
class BoolLit(Expr):
    value: bool


@dataclass(eq=True)
class NoneLit(Expr):
    pass


@dataclass(eq=True)
class Name(Expr):
    id: str
    # 'local' | 'global' | 'builtin' | 'localfn'
    binding: str | None = _meta()
    fn_def: Any = _meta()


@dataclass(eq=True)
class UnaryOp(Expr):
    op: str  # '-', '+', '~', 'not'
    operand: Expr
    resolved: Any = _meta()


@dataclass(eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    resolved: Any = _meta()


@dataclass(eq=True)
class BoolOp(Expr):
    """Short-circuit ``and`` / ``or`` over two or more operands."""

    op: str
    values: list[Expr]


@dataclass(eq=True)
class Compare(Expr):
    op: str
    left: Expr
    right: Expr
    resolved: Any = _meta()


@dataclass(eq=True)
class Chain(Expr):
    """Chained comparison ``a < b < c``; each inner operand is evaluated once."""

    operands: list[Expr]
    ops: list[str]
    resolved: Any = _meta()


@dataclass(eq=True)
class Call(Expr):
    func: Expr
    args: list[Expr]
    # 'builtin' | 'global' | 'localfn' | 'indirect'
    target: str | None = _meta()
    builtin: Any = _meta()


@dataclass(eq=True)
class MethodCall(Expr):
    receiver: Expr
    method: str
    args: list[Expr]
    builtin: Any = _meta()


@dataclass(eq=True)
class TupleExpr(Expr):
    elts: list[Expr]
    parens: bool = field(default=True, compare=False)


@dataclass(eq=True)
class ListExpr(Expr):
    elts: list[Expr]


@dataclass(eq=True)
class ListComp(Expr):
    elt: Expr
    target: Pattern
    iter: Expr
    conds: list[Expr] = field(default_factory=list)
    protocol: Any = _meta()


@dataclass(eq=True)
class Subscript(Expr):
    value: Expr
    index: Expr
    builtin: Any = _meta()


@dataclass(eq=True)
class IfExp(Expr):
    test: Expr
    body: Expr
    orelse: Expr


@dataclass(eq=True)
class PyExpr(Expr):
    """``py(...)``: the argument is kept as whitespace-normalized text."""

    text: str
    idents: list[tuple[str, Span]] = field(default_factory=list, compare=False)
    value: Any = _meta()


# --- assignment targets -------------------------------------------------------


@dataclass(eq=True)
class Pattern(Node):
    pass


@dataclass(eq=True)
class NamePattern(Pattern):
    id: str
    ty: Any = _meta()


@dataclass(eq=True)
class TuplePattern(Pattern):
    elts: list[Pattern]
    parens: bool = field(default=False, compare=False)
    ty: Any = _meta()


# --- statements ---------------------------------------------------------------


@dataclass(eq=True)
class Stmt(Node):
    pass


@dataclass(eq=True)
class Assign(Stmt):
    target: Pattern
    value: Expr


@dataclass(eq=True)
class AugAssign(Stmt):
    target: NamePattern
    op: str
    value: Expr
    resolved: Any = _meta()


@dataclass(eq=True)
class ExprStmt(Stmt):
    value: Expr


@dataclass(eq=True)
class Pass(Stmt):
    pass


@dataclass(eq=True)
class If(Stmt):
    test: Expr
    body: list[Stmt]
    orelse: list[Stmt]
    elif_: bool = field(default=False, compare=False)
    join_vars: Any = _meta()


@dataclass(eq=True)
class While(Stmt):
    test: Expr
    body: list[Stmt]
    head_vars: Any = _meta()
    exit_vars: Any = _meta()


@dataclass(eq=True)
class For(Stmt):
    target: Pattern
    iter: Expr
    body: list[Stmt]
    head_vars: Any = _meta()
    exit_vars: Any = _meta()
    protocol: Any = _meta()


@dataclass(eq=True)
class Break(Stmt):
    pass


@dataclass(eq=True)
class Continue(Stmt):
    pass


@dataclass(eq=True)
class Return(Stmt):
    value: Expr | None


@dataclass(eq=True)
class Param(Node):
    name: str
    annotation: TypeExpr | None


@dataclass(eq=True)
class FunctionDef(Stmt):
    name: str
    params: list[Param]
    returns: TypeExpr | None
    body: list[Stmt]
    decorators: list[str] = field(default_factory=list)
    # Filled in by the type checker.
    sig: Any = _meta()
    captures: Any = _meta()
    lifted_name: str | None = _meta()


@dataclass(eq=True)
class Module(Node):
    functions: list[FunctionDef]


def walk(node: Node) -> Iterator[Node]:
    """Pre-order traversal over ``node`` and all syntactic descendants."""
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(list(cur.children())))
