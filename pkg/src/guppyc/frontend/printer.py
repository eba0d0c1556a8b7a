"""Pretty-printer for syntax trees; output re-parses to an equal tree."""
from __future__ import annotations

from guppyc.frontend import nodes as ast

_PREC = {
    "ifexp": 0,
    "or": 1,
    "and": 2,
    "not": 3,
    "cmp": 4,
    "|": 5,
    "^": 6,
    "&": 7,
    "<<": 8,
    ">>": 8,
    "+": 9,
    "-": 9,
    "*": 10,
    "/": 10,
    "//": 10,
    "%": 10,
    "unary": 11,
    "**": 12,
    "atom": 13,
}


def unparse(node: ast.Node, indent: str = "    ") -> str:
    if isinstance(node, ast.Module):
        return "\n".join(_funcdef(f, 0, indent) for f in node.functions)
    if isinstance(node, ast.Stmt):
        return "\n".join(_stmt(node, 0, indent)) + "\n"
    if isinstance(node, ast.Expr):
        return _expr(node)
    if isinstance(node, ast.Pattern):
        return _pattern(node)
    if isinstance(node, ast.TypeExpr):
        return _type(node)
    raise TypeError(f"cannot unparse {type(node).__name__}")


def _funcdef(f: ast.FunctionDef, level: int, indent: str) -> str:
    return "\n".join(_stmt(f, level, indent)) + "\n"


def _type(t: ast.TypeExpr) -> str:
    if t.name == "[]":
        return "[" + ", ".join(_type(a) for a in t.args) + "]"
    if t.subscripted:
        return f"{t.name}[{', '.join(_type(a) for a in t.args)}]"
    return t.name


def _block(stmts: list[ast.Stmt], level: int, indent: str) -> list[str]:
    out: list[str] = []
    for s in stmts:
        out.extend(_stmt(s, level, indent))
    return out


def _stmt(s: ast.Stmt, level: int, indent: str) -> list[str]:
    pad = indent * level
    if isinstance(s, ast.FunctionDef):
        params = ", ".join(
            p.name + (f": {_type(p.annotation)}" if p.annotation else "") for p in s.params
        )
        ret = f" -> {_type(s.returns)}" if s.returns else ""
        lines = [f"{pad}@{d}" for d in s.decorators]
        lines.append(f"{pad}def {s.name}({params}){ret}:")
        return lines + _block(s.body, level + 1, indent)
    if isinstance(s, ast.If):
        return _if(s, level, indent, "if")
    if isinstance(s, ast.While):
        return [f"{pad}while {_expr(s.test)}:"] + _block(s.body, level + 1, indent)
    if isinstance(s, ast.For):
        head = f"{pad}for {_pattern(s.target, top=True)} in {_expr(s.iter, top=True)}:"
        return [head] + _block(s.body, level + 1, indent)
    if isinstance(s, ast.Assign):
        return [f"{pad}{_pattern(s.target, top=True)} = {_expr(s.value, top=True)}"]
    if isinstance(s, ast.AugAssign):
        return [f"{pad}{s.target.id} {s.op}= {_expr(s.value, top=True)}"]
    if isinstance(s, ast.ExprStmt):
        return [f"{pad}{_expr(s.value, top=True)}"]
    if isinstance(s, ast.Return):
        if s.value is None:
            return [f"{pad}return"]
        return [f"{pad}return {_expr(s.value, top=True)}"]
    if isinstance(s, ast.Pass):
        return [f"{pad}pass"]
    if isinstance(s, ast.Break):
        return [f"{pad}break"]
    if isinstance(s, ast.Continue):
        return [f"{pad}continue"]
    raise TypeError(f"cannot unparse {type(s).__name__}")


def _if(s: ast.If, level: int, indent: str, kw: str) -> list[str]:
    pad = indent * level
    lines = [f"{pad}{kw} {_expr(s.test)}:"] + _block(s.body, level + 1, indent)
    if len(s.orelse) == 1 and isinstance(s.orelse[0], ast.If) and s.orelse[0].elif_:
        lines += _if(s.orelse[0], level, indent, "elif")
    elif s.orelse:
        lines += [f"{pad}else:"] + _block(s.orelse, level + 1, indent)
    return lines


def _pattern(p: ast.Pattern, top: bool = False) -> str:
    if isinstance(p, ast.NamePattern):
        return p.id
    inner = ", ".join(_pattern(e) for e in p.elts)
    if len(p.elts) == 1:
        inner += ","
    return inner if top else f"({inner})"


def _expr(e: ast.Expr, top: bool = False) -> str:
    if isinstance(e, ast.TupleExpr) and top and e.elts:
        return _tuple_items(e)
    return _wrap(e, 0)


def _tuple_items(e: ast.TupleExpr) -> str:
    inner = ", ".join(_wrap(x, 0) for x in e.elts)
    return inner + ("," if len(e.elts) == 1 else "")


def _prec(e: ast.Expr) -> int:
    if isinstance(e, ast.IfExp):
        return _PREC["ifexp"]
    if isinstance(e, ast.BoolOp):
        return _PREC[e.op]
    if isinstance(e, ast.UnaryOp):
        return _PREC["not"] if e.op == "not" else _PREC["unary"]
    if isinstance(e, (ast.Compare, ast.Chain)):
        return _PREC["cmp"]
    if isinstance(e, ast.BinOp):
        return _PREC[e.op]
    return _PREC["atom"]


def _wrap(e: ast.Expr, min_prec: int) -> str:
    text = _raw(e)
    return f"({text})" if _prec(e) < min_prec else text


def _raw(e: ast.Expr) -> str:
    if isinstance(e, ast.IntLit):
        return str(e.value)
    if isinstance(e, ast.FloatLit):
        return repr(e.value)
    if isinstance(e, ast.BoolLit):
        return "True" if e.value else "False"
    if isinstance(e, ast.NoneLit):
        return "None"
    if isinstance(e, ast.Name):
        return e.id
    if isinstance(e, ast.PyExpr):
        return f"py({e.text})"
    if isinstance(e, ast.UnaryOp):
        if e.op == "not":
            return f"not {_wrap(e.operand, _PREC['not'])}"
        return f"{e.op}{_wrap(e.operand, _PREC['unary'])}"
    if isinstance(e, ast.BinOp):
        p = _PREC[e.op]
        if e.op == "**":
            return f"{_wrap(e.left, p + 1)} ** {_wrap(e.right, _PREC['unary'])}"
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, ast.BoolOp):
        p = _PREC[e.op]
        return f" {e.op} ".join(_wrap(v, p + 1) for v in e.values)
    if isinstance(e, ast.Compare):
        p = _PREC["cmp"]
        return f"{_wrap(e.left, p + 1)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, ast.Chain):
        p = _PREC["cmp"]
        parts = [_wrap(e.operands[0], p + 1)]
        for op, rhs in zip(e.ops, e.operands[1:]):
            parts.append(f"{op} {_wrap(rhs, p + 1)}")
        return " ".join(parts)
    if isinstance(e, ast.IfExp):
        p = _PREC["ifexp"]
        return f"{_wrap(e.body, p + 1)} if {_wrap(e.test, p + 1)} else {_wrap(e.orelse, p)}"
    if isinstance(e, ast.Call):
        return f"{_wrap(e.func, _PREC['atom'])}({', '.join(_wrap(a, 0) for a in e.args)})"
    if isinstance(e, ast.MethodCall):
        args = ", ".join(_wrap(a, 0) for a in e.args)
        return f"{_wrap(e.receiver, _PREC['atom'])}.{e.method}({args})"
    if isinstance(e, ast.Subscript):
        return f"{_wrap(e.value, _PREC['atom'])}[{_expr(e.index, top=True)}]"
    if isinstance(e, ast.TupleExpr):
        return f"({_tuple_items(e)})"
    if isinstance(e, ast.ListExpr):
        return "[" + ", ".join(_wrap(x, 0) for x in e.elts) + "]"
    if isinstance(e, ast.ListComp):
        conds = "".join(f" if {_wrap(c, 1)}" for c in e.conds)
        return (
            f"[{_wrap(e.elt, 0)} for {_pattern(e.target, top=True)} in {_wrap(e.iter, 1)}{conds}]"
        )
    raise TypeError(f"cannot unparse {type(e).__name__}")
