"""Recursive-descent parser producing a spanned :class:`~guppyc.frontend.nodes.Module`."""
from __future__ import annotations

from guppyc.diagnostics import Span, syntax_error
from guppyc.frontend import nodes as ast
from guppyc.frontend.lexer import Kind, Token, tokenize

COMPARE_OPS = ("<", ">", "<=", ">=", "==", "!=")
AUG_OPS = ("+=", "-=", "*=", "/=", "//=", "%=", "&=", "|=", "^=", "<<=", ">>=")
BINARY_LEVELS = (
    ("|",),
    ("^",),
    ("&",),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "//", "%"),
)
DECORATOR_MARKER = "guppy"


def parse(source: str) -> ast.Module:
    """Tokenize and parse ``source`` in one step."""
    return parse_module(tokenize(source))


def parse_module(tokens: list[Token]) -> ast.Module:
    if not tokens or tokens[-1].kind is not Kind.EOF:
        raise syntax_error("token stream must end with eof", None)
    return _Parser(tokens).module()


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.loop_depth = 0
        self.fn_depth = 0

    # --- token helpers ---

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, kind: Kind, text: str | None = None) -> bool:
        return self.tok.is_(kind, text)

    def at_op(self, *texts: str) -> bool:
        return self.tok.kind is Kind.OP and self.tok.text in texts

    def at_delim(self, text: str) -> bool:
        return self.tok.is_(Kind.DELIM, text)

    def at_kw(self, text: str) -> bool:
        return self.tok.is_(Kind.KEYWORD, text)

    def advance(self) -> Token:
        tok = self.tok
        if tok.kind is not Kind.EOF:
            self.i += 1
        return tok

    def expect(self, kind: Kind, text: str | None = None, what: str | None = None) -> Token:
        if not self.at(kind, text):
            expected = what or (repr(text) if text else kind.value)
            raise syntax_error(f"expected {expected}, found {self._describe(self.tok)}", self.tok.span)
        return self.advance()

    def _describe(self, tok: Token) -> str:
        if tok.kind in (Kind.NEWLINE, Kind.INDENT, Kind.DEDENT, Kind.EOF):
            return tok.kind.value
        return repr(tok.text)

    def error(self, message: str, span: Span | None = None):
        return syntax_error(message, span or self.tok.span)

    @staticmethod
    def join(a: Span, b: Span) -> Span:
        return a.merge(b)

    # --- module and statements ---

    def module(self) -> ast.Module:
        funcs = []
        start = self.tok.span
        while not self.at(Kind.EOF):
            if self.at(Kind.NEWLINE):
                self.advance()
                continue
            if self.at_kw("break") or self.at_kw("continue"):
                raise self.error(f"'{self.tok.text}' outside loop")
            if self.at_kw("return"):
                raise self.error("'return' outside function")
            if not (self.at_delim("@") or self.at_kw("def")):
                raise self.error(f"expected function definition, found {self._describe(self.tok)}")
            funcs.append(self.funcdef())
        span = self.join(start, self.tok.span)
        return ast.Module(funcs, span=span)

    def funcdef(self) -> ast.FunctionDef:
        decorators = []
        start = self.tok.span
        while self.at_delim("@"):
            self.advance()
            name = self.expect(Kind.IDENT, what="decorator name")
            if name.text != DECORATOR_MARKER:
                raise self.error(f"unsupported decorator '@{name.text}'", name.span)
            decorators.append(name.text)
            self.expect(Kind.NEWLINE)
        self.expect(Kind.KEYWORD, "def")
        name = self.expect(Kind.IDENT, what="function name")
        self.expect(Kind.DELIM, "(")
        params = []
        while not self.at_delim(")"):
            pname = self.expect(Kind.IDENT, what="parameter name")
            ann = None
            pspan = pname.span
            if self.at_delim(":"):
                self.advance()
                ann = self.type_expr()
                pspan = self.join(pspan, ann.span)
            params.append(ast.Param(pname.text, ann, span=pspan))
            if not self.at_delim(")"):
                self.expect(Kind.DELIM, ",", what="',' or ')'")
        self.expect(Kind.DELIM, ")")
        returns = None
        if self.at_op("->"):
            self.advance()
            returns = self.type_expr()
        self.expect(Kind.DELIM, ":")
        saved = self.loop_depth
        self.loop_depth = 0
        self.fn_depth += 1
        body = self.block()
        self.fn_depth -= 1
        self.loop_depth = saved
        span = self.join(start, body[-1].span)
        return ast.FunctionDef(name.text, params, returns, body, decorators, span=span)

    def type_expr(self) -> ast.TypeExpr:
        tok = self.tok
        if self.at(Kind.NONE):
            self.advance()
            return ast.TypeExpr("None", span=tok.span)
        if self.at_delim("["):
            self.advance()
            args = []
            while not self.at_delim("]"):
                args.append(self.type_expr())
                if not self.at_delim("]"):
                    self.expect(Kind.DELIM, ",", what="',' or ']'")
            end = self.expect(Kind.DELIM, "]")
            return ast.TypeExpr("[]", args, True, span=self.join(tok.span, end.span))
        name = self.expect(Kind.IDENT, what="type")
        if self.at_delim("["):
            self.advance()
            args = []
            while not self.at_delim("]"):
                args.append(self.type_expr())
                if not self.at_delim("]"):
                    self.expect(Kind.DELIM, ",", what="',' or ']'")
            end = self.expect(Kind.DELIM, "]")
            return ast.TypeExpr(name.text, args, True, span=self.join(name.span, end.span))
        return ast.TypeExpr(name.text, span=name.span)

    def block(self) -> list[ast.Stmt]:
        if not self.at(Kind.NEWLINE):
            return self.simple_line()
        self.advance()
        self.expect(Kind.INDENT, what="an indented block")
        stmts: list[ast.Stmt] = []
        while not self.at(Kind.DEDENT) and not self.at(Kind.EOF):
            stmts.extend(self.statement())
        self.expect(Kind.DEDENT)
        return stmts

    def statement(self) -> list[ast.Stmt]:
        if self.at_kw("if"):
            return [self.if_stmt()]
        if self.at_kw("while"):
            return [self.while_stmt()]
        if self.at_kw("for"):
            return [self.for_stmt()]
        if self.at_kw("def") or self.at_delim("@"):
            return [self.funcdef()]
        return self.simple_line()

    def simple_line(self) -> list[ast.Stmt]:
        stmts = [self.simple_stmt()]
        self.expect(Kind.NEWLINE, what="end of line")
        return stmts

    def simple_stmt(self) -> ast.Stmt:
        tok = self.tok
        if self.at_kw("pass"):
            self.advance()
            return ast.Pass(span=tok.span)
        if self.at_kw("break") or self.at_kw("continue"):
            if self.loop_depth == 0:
                raise self.error(f"'{tok.text}' outside loop")
            self.advance()
            cls = ast.Break if tok.text == "break" else ast.Continue
            return cls(span=tok.span)
        if self.at_kw("return"):
            if self.fn_depth == 0:
                raise self.error("'return' outside function")
            self.advance()
            if self.at(Kind.NEWLINE):
                return ast.Return(None, span=tok.span)
            value = self.exprlist()
            return ast.Return(value, span=self.join(tok.span, value.span))
        first = self.exprlist()
        if self.at_op("="):
            self.advance()
            target = self.to_pattern(first)
            value = self.exprlist()
            if self.at_op("="):
                raise self.error("chained assignment is not supported")
            return ast.Assign(target, value, span=self.join(first.span, value.span))
        if self.at_op(*AUG_OPS):
            op = self.advance().text[:-1]
            if not isinstance(first, ast.Name):
                raise self.error("augmented assignment target must be a name", first.span)
            value = self.exprlist()
            target = ast.NamePattern(first.id, span=first.span)
            return ast.AugAssign(target, op, value, span=self.join(first.span, value.span))
        return ast.ExprStmt(first, span=first.span)

    def to_pattern(self, expr: ast.Expr) -> ast.Pattern:
        if isinstance(expr, ast.Name):
            return ast.NamePattern(expr.id, span=expr.span)
        if isinstance(expr, ast.TupleExpr):
            return ast.TuplePattern(
                [self.to_pattern(e) for e in expr.elts], expr.parens, span=expr.span
            )
        raise self.error("cannot assign to expression", expr.span)

    def if_stmt(self) -> ast.If:
        start = self.advance()  # 'if' or 'elif'
        test = self.expr()
        self.expect(Kind.DELIM, ":")
        body = self.block()
        orelse: list[ast.Stmt] = []
        end = body[-1].span
        if self.at_kw("elif"):
            nested = self.if_stmt()
            nested.elif_ = True
            orelse = [nested]
            end = nested.span
        elif self.at_kw("else"):
            self.advance()
            self.expect(Kind.DELIM, ":")
            orelse = self.block()
            end = orelse[-1].span
        return ast.If(test, body, orelse, span=self.join(start.span, end))

    def loop_body(self) -> list[ast.Stmt]:
        self.loop_depth += 1
        body = self.block()
        self.loop_depth -= 1
        if self.at_kw("else"):
            raise self.error("'else' clauses on loops are not supported")
        return body

    def while_stmt(self) -> ast.While:
        start = self.advance()
        test = self.expr()
        self.expect(Kind.DELIM, ":")
        body = self.loop_body()
        return ast.While(test, body, span=self.join(start.span, body[-1].span))

    def for_stmt(self) -> ast.For:
        start = self.advance()
        target = self.target_list()
        self.expect(Kind.KEYWORD, "in")
        iterable = self.exprlist()
        self.expect(Kind.DELIM, ":")
        body = self.loop_body()
        return ast.For(target, iterable, body, span=self.join(start.span, body[-1].span))

    def target_list(self) -> ast.Pattern:
        first = self.target_atom()
        if not self.at_delim(","):
            return first
        elts = [first]
        while self.at_delim(","):
            self.advance()
            if self.at_kw("in") or self.at_op("="):
                break
            elts.append(self.target_atom())
        return ast.TuplePattern(elts, span=self.join(first.span, elts[-1].span))

    def target_atom(self) -> ast.Pattern:
        if self.at_delim("("):
            start = self.advance()
            inner = self.target_list()
            end = self.expect(Kind.DELIM, ")")
            if isinstance(inner, ast.TuplePattern):
                inner.parens = True
                inner.span = self.join(start.span, end.span)
                return inner
            return inner
        name = self.expect(Kind.IDENT, what="loop variable")
        return ast.NamePattern(name.text, span=name.span)

    # --- expressions ---

    def exprlist(self) -> ast.Expr:
        """An expression, or an unparenthesized tuple of expressions."""
        first = self.expr()
        if not self.at_delim(","):
            return first
        elts = [first]
        while self.at_delim(","):
            self.advance()
            if self._at_expr_end():
                break
            elts.append(self.expr())
        return ast.TupleExpr(elts, False, span=self.join(first.span, elts[-1].span))

    def _at_expr_end(self) -> bool:
        return (
            self.at(Kind.NEWLINE)
            or self.at_op("=", *AUG_OPS)
            or self.at_delim(")")
            or self.at_delim("]")
            or self.at_delim(":")
            or self.at(Kind.EOF)
        )

    def expr(self) -> ast.Expr:
        body = self.or_test()
        if self.at_kw("if"):
            self.advance()
            test = self.or_test()
            self.expect(Kind.KEYWORD, "else")
            orelse = self.expr()
            return ast.IfExp(test, body, orelse, span=self.join(body.span, orelse.span))
        return body

    def or_test(self) -> ast.Expr:
        first = self.and_test()
        values = [first]
        while self.at_kw("or"):
            self.advance()
            values.append(self.and_test())
        if len(values) == 1:
            return first
        return ast.BoolOp("or", values, span=self.join(first.span, values[-1].span))

    def and_test(self) -> ast.Expr:
        first = self.not_test()
        values = [first]
        while self.at_kw("and"):
            self.advance()
            values.append(self.not_test())
        if len(values) == 1:
            return first
        return ast.BoolOp("and", values, span=self.join(first.span, values[-1].span))

    def not_test(self) -> ast.Expr:
        if self.at_kw("not"):
            start = self.advance()
            operand = self.not_test()
            return ast.UnaryOp("not", operand, span=self.join(start.span, operand.span))
        return self.comparison()

    def comparison(self) -> ast.Expr:
        first = self.binary(0)
        operands = [first]
        ops = []
        while self.at_op(*COMPARE_OPS):
            ops.append(self.advance().text)
            operands.append(self.binary(0))
        if not ops:
            return first
        span = self.join(first.span, operands[-1].span)
        if len(ops) == 1:
            return ast.Compare(ops[0], first, operands[1], span=span)
        return ast.Chain(operands, ops, span=span)

    def binary(self, level: int) -> ast.Expr:
        if level == len(BINARY_LEVELS):
            return self.factor()
        left = self.binary(level + 1)
        while self.at_op(*BINARY_LEVELS[level]):
            op = self.advance().text
            right = self.binary(level + 1)
            left = ast.BinOp(op, left, right, span=self.join(left.span, right.span))
        return left

    def factor(self) -> ast.Expr:
        if self.at_op("-", "+", "~"):
            start = self.advance()
            operand = self.factor()
            return ast.UnaryOp(start.text, operand, span=self.join(start.span, operand.span))
        return self.power()

    def power(self) -> ast.Expr:
        base = self.postfix()
        if self.at_op("**"):
            self.advance()
            exp = self.factor()
            return ast.BinOp("**", base, exp, span=self.join(base.span, exp.span))
        return base

    def postfix(self) -> ast.Expr:
        expr = self.atom()
        while True:
            if self.at_delim("("):
                args, end = self.call_args()
                expr = ast.Call(expr, args, span=self.join(expr.span, end))
            elif self.at_delim("["):
                self.advance()
                if self.at_delim(":"):
                    raise self.error("slicing is not supported")
                index = self.exprlist()
                if self.at_delim(":"):
                    raise self.error("slicing is not supported")
                end = self.expect(Kind.DELIM, "]")
                expr = ast.Subscript(expr, index, span=self.join(expr.span, end.span))
            elif self.at_delim("."):
                self.advance()
                name = self.expect(Kind.IDENT, what="method name")
                if not self.at_delim("("):
                    raise self.error("attribute access is only supported in method calls", name.span)
                args, end = self.call_args()
                expr = ast.MethodCall(expr, name.text, args, span=self.join(expr.span, end))
            else:
                return expr

    def call_args(self) -> tuple[list[ast.Expr], Span]:
        self.expect(Kind.DELIM, "(")
        args = []
        while not self.at_delim(")"):
            args.append(self.expr())
            if not self.at_delim(")"):
                self.expect(Kind.DELIM, ",", what="',' or ')'")
        end = self.expect(Kind.DELIM, ")")
        return args, end.span

    def atom(self) -> ast.Expr:
        tok = self.tok
        if tok.kind is Kind.INT:
            self.advance()
            return ast.IntLit(int(tok.text.replace("_", ""), 0), span=tok.span)
        if tok.kind is Kind.FLOAT:
            self.advance()
            return ast.FloatLit(float(tok.text.replace("_", "")), tok.text, span=tok.span)
        if tok.kind is Kind.BOOL:
            self.advance()
            return ast.BoolLit(tok.text == "True", span=tok.span)
        if tok.kind is Kind.NONE:
            self.advance()
            return ast.NoneLit(span=tok.span)
        if tok.kind is Kind.IDENT:
            if tok.text == "py" and self.peek().is_(Kind.DELIM, "("):
                return self.py_expr()
            self.advance()
            return ast.Name(tok.text, span=tok.span)
        if self.at_delim("("):
            return self.paren()
        if self.at_delim("["):
            return self.list_display()
        raise self.error(f"expected expression, found {self._describe(tok)}")

    def paren(self) -> ast.Expr:
        start = self.advance()
        if self.at_delim(")"):
            end = self.advance()
            return ast.TupleExpr([], True, span=self.join(start.span, end.span))
        first = self.expr()
        if self.at_delim(")"):
            self.advance()
            return first
        elts = [first]
        while self.at_delim(","):
            self.advance()
            if self.at_delim(")"):
                break
            elts.append(self.expr())
        end = self.expect(Kind.DELIM, ")", what="',' or ')'")
        return ast.TupleExpr(elts, True, span=self.join(start.span, end.span))

    def list_display(self) -> ast.Expr:
        start = self.advance()
        if self.at_delim("]"):
            end = self.advance()
            return ast.ListExpr([], span=self.join(start.span, end.span))
        first = self.expr()
        if self.at_kw("for"):
            self.advance()
            target = self.target_list()
            self.expect(Kind.KEYWORD, "in")
            iterable = self.or_test()
            conds = []
            while self.at_kw("if"):
                self.advance()
                conds.append(self.or_test())
            if self.at_kw("for"):
                raise self.error("only a single 'for' clause is supported in comprehensions")
            end = self.expect(Kind.DELIM, "]")
            return ast.ListComp(first, target, iterable, conds, span=self.join(start.span, end.span))
        elts = [first]
        while self.at_delim(","):
            self.advance()
            if self.at_delim("]"):
                break
            elts.append(self.expr())
        end = self.expect(Kind.DELIM, "]", what="',' or ']'")
        return ast.ListExpr(elts, span=self.join(start.span, end.span))

    def py_expr(self) -> ast.PyExpr:
        start = self.advance()
        self.advance()  # '('
        depth = 1
        inner: list[Token] = []
        while True:
            tok = self.tok
            if tok.kind is Kind.EOF:
                raise self.error("unterminated py(...) expression", start.span)
            if tok.kind is Kind.DELIM and tok.text in "([":
                depth += 1
            elif tok.kind is Kind.DELIM and tok.text in ")]":
                depth -= 1
                if depth == 0:
                    break
            inner.append(tok)
            self.advance()
        end = self.advance()
        if not inner:
            raise self.error("py(...) requires an argument", end.span)
        parts = []
        prev = None
        for tok in inner:
            if prev is not None and tok.span.start > prev.span.end:
                parts.append(" ")
            parts.append(tok.text)
            prev = tok
        idents = [
            (t.text, t.span)
            for k, t in enumerate(inner)
            if t.kind is Kind.IDENT and not (k > 0 and inner[k - 1].is_(Kind.DELIM, "."))
        ]
        return ast.PyExpr("".join(parts), idents, span=self.join(start.span, end.span))
