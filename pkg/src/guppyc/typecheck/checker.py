"""Static semantics: signatures, definite assignment, joins, operators and linearity.

The checker walks each function body with an abstract environment mapping every
local name to a :class:`Var` (its static type, whether it is assigned on all
paths reaching the current point, and for linear values whether it has been
consumed).  Control-flow merges go through :meth:`Checker.join`; loops iterate
their head environment to a fixpoint before a final, reporting pass.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from typing import Any, Iterator

from guppyc.diagnostics import Category, CompileError, Diagnostic, Span
from guppyc.frontend import nodes as ast
from guppyc.typecheck import builtins as bi
from guppyc.typecheck.pyexpr import (
    INT_MAX,
    BindingError,
    ConstBindings,
    convert_literal,
    eval_literal,
    literal_type,
    normalize,
)
from guppyc.typecheck.types import (
    BOOL,
    FLOAT,
    INT,
    NONE,
    QUBIT,
    FunctionType,
    ListType,
    TupleType,
    Type,
    coercible,
    is_numeric,
    numeric_join,
)


class _ErrorType(Type):
    """Type of names bound by a statement that failed to check; uses are silent."""

    def __str__(self) -> str:
        return "<error>"


ERROR = _ErrorType()


@dataclass(frozen=True)
class Conflict:
    """A name whose type differs between the control-flow paths reaching it."""

    types: tuple[Type, ...]

    def __str__(self) -> str:
        return " or ".join(f"`{t}`" for t in self.types)


@dataclass(frozen=True)
class Var:
    ty: Any  # Type | Conflict
    span: Span | None
    defined: bool = True
    consumed: Span | None = None
    fn_def: ast.FunctionDef | None = None

    @property
    def linear(self) -> bool:
        return isinstance(self.ty, Type) and self.ty.linear

    @property
    def live(self) -> bool:
        return self.defined and self.consumed is None


Env = dict[str, Var]


@dataclass(frozen=True)
class Signature:
    params: tuple[tuple[str, Type], ...]
    result: Type

    @property
    def ftype(self) -> FunctionType:
        return FunctionType(tuple(t for _, t in self.params), self.result)


@dataclass(frozen=True)
class Resolved:
    """An operator after overload resolution: ``family`` is int, float or cmp."""

    family: str
    op: str
    operand: Type


@dataclass
class IterProtocol:
    """Desugared iteration: statements run before, at the head, per item and on exit."""

    kind: str  # 'range' | 'list' | 'linear-list'
    state: list[str]
    init: list[ast.Stmt]
    cond: list[ast.Stmt]
    cond_var: str
    next: list[ast.Stmt]
    finish: list[ast.Stmt]


@dataclass
class CheckedModule:
    """Result of type checking: the annotated tree plus the function inventory."""

    module: ast.Module
    functions: dict[str, ast.FunctionDef]
    nested: list[ast.FunctionDef]


class _Diag(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


class _Poison(Exception):
    """A previously reported error makes this statement uncheckable."""


def _err(category: Category, message: str, span: Span | None, notes=()) -> _Diag:
    return _Diag(Diagnostic(category, message, span, tuple(notes)))


@dataclass
class _Loop:
    breaks: list[Env] = field(default_factory=list)
    continues: list[Env] = field(default_factory=list)
    linear_iter: bool = False


class _Fn:
    def __init__(self, node, sig, locals_, parent=None, parent_env=None):
        self.node: ast.FunctionDef = node
        self.sig: Signature = sig
        self.locals: set[str] = locals_
        self.parent: _Fn | None = parent
        self.parent_env: Env | None = parent_env
        self.captures: dict[str, Var] = {}
        self.loops: list[_Loop] = []


def check_module(module: ast.Module, bindings: ConstBindings | None = None) -> CheckedModule:
    """Type check ``module``; raise ``CompileError`` with all diagnostics on failure."""
    checker = Checker(module, bindings or {})
    result = checker.run()
    if checker.diags:
        raise CompileError(checker.diags)
    return result


class Checker:
    def __init__(self, module: ast.Module, bindings: ConstBindings):
        self.module = module
        self.bindings = bindings
        self.diags: list[Diagnostic] = []
        self.globals: dict[str, ast.FunctionDef] = {}
        self.nested: list[ast.FunctionDef] = []
        self._nested_ids: set[int] = set()
        self._lifted_names: set[str] = set()
        self._reported: list[bool] = [False]
        self._counter = 0
        self._recopied: dict[str, Span] = {}
        self.fn: _Fn | None = None

    # --- reporting ---

    def report(self, diag: Diagnostic) -> None:
        if self._reported[-1]:
            return
        self._reported[-1] = True
        self.diags.append(diag)

    @contextmanager
    def silenced(self) -> Iterator[None]:
        saved = self.diags
        self.diags = []
        self._reported.append(False)
        try:
            yield
        finally:
            self._reported.pop()
            self.diags = saved

    @contextmanager
    def statement(self) -> Iterator[None]:
        self._reported.append(False)
        try:
            yield
        finally:
            self._reported.pop()

    # --- module level ---

    def run(self) -> CheckedModule:
        for f in self.module.functions:
            with self.statement():
                if f.name in self.globals:
                    self.report(
                        Diagnostic(
                            Category.UNSUPPORTED_FEATURE,
                            f"Function `{f.name}` is defined more than once",
                            f.span,
                        )
                    )
                    continue
                self.globals[f.name] = f
                try:
                    f.sig = self.signature(f)
                except _Diag as d:
                    self.report(d.diag)
                    f.sig = None
        for f in self.module.functions:
            if f.sig is None or self.globals.get(f.name) is not f:
                continue
            f.lifted_name = f.name
            f.captures = []
            self._lifted_names.add(f.name)
            self.check_function(_Fn(f, f.sig, collect_locals(f)))
        return CheckedModule(self.module, dict(self.globals), self.nested)

    def signature(self, f: ast.FunctionDef) -> Signature:
        missing = [p for p in f.params if p.annotation is None]
        if missing:
            raise _err(
                Category.SIGNATURE_MISSING,
                f"Parameter `{missing[0].name}` of function `{f.name}` has no type annotation",
                missing[0].span,
            )
        if f.returns is None:
            raise _err(
                Category.SIGNATURE_MISSING,
                f"Function `{f.name}` has no return type annotation",
                f.span,
            )
        seen = set()
        params = []
        for p in f.params:
            if p.name in seen:
                raise _err(Category.SYNTAX, f"Duplicate parameter `{p.name}`", p.span)
            seen.add(p.name)
            params.append((p.name, self.resolve_type(p.annotation)))
        return Signature(tuple(params), self.resolve_type(f.returns))

    def resolve_type(self, t: ast.TypeExpr) -> Type:
        simple = {"int": INT, "float": FLOAT, "bool": BOOL, "None": NONE, "Qubit": QUBIT}
        if t.name in simple and not t.subscripted:
            return simple[t.name]
        if t.name == "list" and t.subscripted and len(t.args) == 1:
            return ListType(self.resolve_type(t.args[0]))
        if t.name == "tuple" and t.subscripted:
            return TupleType(tuple(self.resolve_type(a) for a in t.args))
        if t.name == "Callable" and t.subscripted and len(t.args) == 2 and t.args[0].name == "[]":
            params = tuple(self.resolve_type(a) for a in t.args[0].args)
            return FunctionType(params, self.resolve_type(t.args[1]))
        raise _err(Category.TYPE_MISMATCH, f"Unknown type annotation `{_type_text(t)}`", t.span)

    # --- function bodies ---

    def check_function(self, fn: _Fn) -> None:
        saved = self.fn
        self.fn = fn
        env: Env = {}
        for (name, ty), p in zip(fn.sig.params, fn.node.params):
            env[name] = Var(ty, p.span)
        end = self.stmts(fn.node.body, env)
        if end is not None:
            with self.statement():
                if fn.sig.result != NONE:
                    self.report(
                        Diagnostic(
                            Category.TYPE_MISMATCH,
                            f"Function `{fn.node.name}` may reach the end of its body without "
                            f"returning a value of type `{fn.sig.result}`",
                            fn.node.span,
                        )
                    )
                else:
                    try:
                        self.check_leaks(end, fn.node.span, "at the end of the function")
                    except _Diag as d:
                        self.report(d.diag)
        self.fn = saved

    def stmts(self, body: list[ast.Stmt], env: Env | None) -> Env | None:
        for s in body:
            if env is None:
                break
            env = self.stmt(s, env)
        return env

    def stmt(self, s: ast.Stmt, env: Env) -> Env | None:
        with self.statement():
            try:
                return self._stmt(s, env)
            except _Diag as d:
                self.report(d.diag)
            except _Poison:
                pass
            return self.recover(s, env)

    def recover(self, s: ast.Stmt, env: Env) -> Env | None:
        if isinstance(s, (ast.Return, ast.Break, ast.Continue)):
            return None
        for name in names_read(s):
            v = env.get(name)
            if v is not None and v.linear and v.consumed is None:
                env[name] = replace(v, consumed=s.span)
        for name in names_assigned(s):
            env[name] = Var(ERROR, s.span)
        return env

    def _stmt(self, s: ast.Stmt, env: Env) -> Env | None:
        if isinstance(s, ast.Assign):
            if isinstance(s.target, ast.NamePattern):
                ty = self.expr_or_conflict(s.value, env)
            else:
                ty = self.expr(s.value, env)
            self.bind(s.target, ty, env)
            return env
        if isinstance(s, ast.AugAssign):
            return self.aug_assign(s, env)
        if isinstance(s, ast.ExprStmt):
            ty = self.expr(s.value, env)
            if ty.linear:
                raise _err(
                    Category.LINEARITY_DISCARD,
                    f"Value with linear type `{ty}` is not used",
                    s.value.span,
                )
            return env
        if isinstance(s, ast.Pass):
            return env
        if isinstance(s, ast.Return):
            return self.return_stmt(s, env)
        if isinstance(s, ast.If):
            return self.if_stmt(s, env)
        if isinstance(s, ast.While):
            return self.while_stmt(s, env)
        if isinstance(s, ast.For):
            return self.for_stmt(s, env)
        if isinstance(s, (ast.Break, ast.Continue)):
            loop = self.fn.loops[-1]
            if isinstance(s, ast.Break):
                if loop.linear_iter:
                    raise _err(
                        Category.LINEARITY_DISCARD,
                        "`break` would discard the remaining elements of the iterated linear list",
                        s.span,
                    )
                loop.breaks.append(dict(env))
            else:
                loop.continues.append(dict(env))
            return None
        if isinstance(s, ast.FunctionDef):
            return self.nested_def(s, env)
        raise _err(Category.UNSUPPORTED_FEATURE, f"Unsupported statement {type(s).__name__}", s.span)

    def return_stmt(self, s: ast.Return, env: Env) -> None:
        expected = self.fn.sig.result
        if s.value is None:
            if expected != NONE:
                raise _err(
                    Category.TYPE_MISMATCH,
                    f"Expected a return value of type `{expected}`",
                    s.span,
                )
        else:
            ty = self.expr(s.value, env, expected)
            self.coerce_to(s.value, ty, expected, "return value")
            self.no_capturing_escape(s.value)
        self.check_leaks(env, s.span, "when returning")
        return None

    def no_capturing_escape(self, e: ast.Expr) -> None:
        for node in ast.walk(e):
            if (
                isinstance(node, ast.Name)
                and node.binding == "localfn"
                and node.fn_def.captures
                and not _is_call_head(e, node)
            ):
                raise _err(
                    Category.UNSUPPORTED_FEATURE,
                    f"Nested function `{node.id}` captures variables and cannot be returned",
                    node.span,
                )

    def check_leaks(self, env: Env, span: Span, when: str) -> None:
        for name, v in env.items():
            if v.linear and v.live:
                what = (
                    "the remaining elements of an iterated linear list are"
                    if name.startswith("%")
                    else f"Variable `{name}` with linear type `{v.ty}` is"
                )
                raise _err(
                    Category.LINEARITY_DISCARD,
                    f"{what} not consumed {when}",
                    v.span if not name.startswith("%") else span,
                    [(span, "control leaves the scope here")],
                )

    def aug_assign(self, s: ast.AugAssign, env: Env) -> Env:
        name = ast.Name(s.target.id, span=s.target.span)
        lt = self.expr(name, env)
        rt = self.expr(s.value, env)
        res, lc, rc, out = resolve_operator(s.op, lt, rt, s.span)
        name.coerce = lc
        s.value.coerce = rc
        s.resolved = (res, name)
        self.bind(s.target, out, env)
        return env

    # --- binding ---

    def bind(self, p: ast.Pattern, ty: Any, env: Env, span: Span | None = None) -> None:
        if isinstance(p, ast.NamePattern):
            old = env.get(p.id)
            if old is not None and old.linear and old.live:
                raise _err(
                    Category.LINEARITY_DISCARD,
                    f"Variable `{p.id}` with linear type `{old.ty}` is overwritten before being consumed",
                    p.span,
                    [(old.span, "previous value assigned here")],
                )
            if p.id.startswith("%"):
                self.fn.locals.add(p.id)
            p.ty = ty
            env[p.id] = Var(ty, p.span)
            return
        if isinstance(ty, Conflict):
            raise _err(
                Category.BRANCH_TYPE_CONFLICT,
                f"Expression could be {ty}",
                span or p.span,
            )
        if not isinstance(ty, TupleType):
            raise _err(Category.TYPE_MISMATCH, f"Cannot unpack value of type `{ty}`", p.span)
        if len(ty.elements) != len(p.elts):
            raise _err(
                Category.ARITY,
                f"Expected {len(p.elts)} values to unpack, found {len(ty.elements)} (type `{ty}`)",
                p.span,
            )
        p.ty = ty
        for sub, t in zip(p.elts, ty.elements):
            self.bind(sub, t, env)

    def bind_hidden(self, env: Env, name: str, ty: Type, span: Span | None) -> None:
        self.fn.locals.add(name)
        env[name] = Var(ty, span)

    # --- joins ---

    def join(self, envs: list[Env | None], where: Span) -> Env | None:
        live = [e for e in envs if e is not None]
        if not live:
            return None
        if len(live) == 1:
            return dict(live[0])
        out: Env = {}
        names: dict[str, None] = {}
        for e in live:
            names.update(dict.fromkeys(e))
        for n in names:
            vs = [e.get(n) for e in live]
            present = [v for v in vs if v is not None]
            if len(present) < len(vs) or not all(v.defined for v in present):
                leaked = [v for v in present if v.linear and v.live]
                if leaked:
                    self.report(
                        Diagnostic(
                            Category.LINEARITY_CONDITIONAL_USE,
                            f"Variable `{n}` with linear type `{leaked[0].ty}` is not consumed on "
                            "all control-flow paths",
                            leaked[0].span,
                            ((where, "control-flow paths merge here"),),
                        )
                    )
                out[n] = replace(present[0], defined=False)
                continue
            if any(v.linear for v in present):
                consumed = [v for v in present if v.consumed is not None]
                if consumed and len(consumed) < len(present):
                    self.report(
                        Diagnostic(
                            Category.LINEARITY_CONDITIONAL_USE,
                            f"Variable `{n}` with linear type `{consumed[0].ty}` is consumed on "
                            "some control-flow paths but not others",
                            consumed[0].consumed,
                            ((where, "control-flow paths merge here"),),
                        )
                    )
                    out[n] = consumed[0]
                    continue
                if consumed:
                    out[n] = consumed[0]
                    continue
            first = present[0]
            if all(_same(v, first) for v in present):
                out[n] = first
                continue
            if any(v.linear for v in present):
                self.report(
                    Diagnostic(
                        Category.BRANCH_TYPE_CONFLICT,
                        f"Linear variable `{n}` has different types on different control-flow paths",
                        where,
                    )
                )
                out[n] = replace(first, ty=ERROR)
                continue
            types: list[Any] = []
            for v in present:
                for t in v.ty.types if isinstance(v.ty, Conflict) else (v.ty,):
                    if t not in types:
                        types.append(t)
            if len(types) == 1:
                # same type, different local function definitions
                types.append(types[0])
            out[n] = Var(Conflict(tuple(types)), first.span)
        return out

    def loop_head(self, entry: Env, backs: list[Env], where: Span) -> Env:
        for b in backs:
            for n, v in b.items():
                if not v.linear:
                    continue
                e = entry.get(n)
                entry_live = e is not None and e.live
                if v.live and not entry_live:
                    self.report(
                        Diagnostic(
                            Category.LINEARITY_DISCARD,
                            f"Variable `{n}` with linear type `{v.ty}` is not consumed before the "
                            "next loop iteration",
                            v.span,
                            ((where, "in this loop"),),
                        )
                    )
                elif entry_live and not v.live:
                    self._recopied[n] = v.consumed or where
                    self.report(
                        Diagnostic(
                            Category.LINEARITY_COPY,
                            f"Variable `{n}` with linear type `{e.ty}` would be consumed again in a "
                            "later loop iteration",
                            v.consumed or where,
                            ((e.span, "assigned outside the loop here"),),
                        )
                    )
        nonlinear = [{n: v for n, v in b.items() if not v.linear} for b in backs]
        with self.silenced():
            head = self.join([{n: v for n, v in entry.items() if not v.linear}] + nonlinear, where)
        for n, v in entry.items():
            if v.linear:
                head[n] = v
        return head

    # --- compound statements ---

    def if_stmt(self, s: ast.If, env: Env) -> Env | None:
        self.expect_bool(s.test, env, "condition")
        then_env = self.stmts(s.body, dict(env))
        else_env = self.stmts(s.orelse, dict(env))
        out = self.join([then_env, else_env], s.span)
        s.join_vars = _row(out)
        return out

    def while_stmt(self, s: ast.While, env: Env) -> Env | None:
        infinite = isinstance(s.test, ast.BoolLit) and s.test.value

        def cond(head: Env) -> Env:
            self.expect_bool(s.test, head, "loop condition")
            return head

        return self.loop(s, env, cond, [], [], infinite)

    def for_stmt(self, s: ast.For, env: Env) -> Env | None:
        proto = s.protocol
        if proto is None:
            proto = s.protocol = self.protocol(s.target, s.iter, env, s.span)
        else:
            self.protocol_init(proto, s.iter, env)
        self.stmts_strict(proto.init[self._manual_init(proto):], env)

        def cond(head: Env) -> Env:
            self.stmts_strict(proto.cond, head)
            return head

        out = self.loop(s, env, cond, proto.next, proto.finish, False, proto.kind == "linear-list")
        if out is not None:
            for name in proto.state + [proto.cond_var]:
                out.pop(name, None)
            s.exit_vars = _row(out)
        return out

    def loop(self, s, entry: Env, cond, next_stmts, finish, infinite, linear_iter=False):
        head = dict(entry)

        def one_pass(head: Env):
            env = cond(dict(head))
            exit_env = None if infinite else dict(env)
            if exit_env is not None and finish:
                self.stmts_strict(finish, exit_env)
            body_env = dict(env)
            self.stmts_strict(next_stmts, body_env)
            loop = _Loop(linear_iter=linear_iter)
            self.fn.loops.append(loop)
            try:
                end = self.stmts(s.body, body_env)
            finally:
                self.fn.loops.pop()
            backs = loop.continues + ([end] if end is not None else [])
            return backs, loop.breaks, exit_env

        with self.silenced():
            for _ in range(8):
                backs, _, _ = one_pass(head)
                new_head = self.loop_head(entry, backs, s.span)
                if _env_key(new_head) == _env_key(head):
                    break
                head = new_head
        backs, breaks, exit_env = one_pass(head)
        self._recopied = {}
        self.loop_head(entry, backs, s.span)
        s.head_vars = _row(head)
        out = self.join([exit_env] + breaks, s.span)
        for n, where in self._recopied.items():
            if out is not None and n in out:
                out[n] = replace(out[n], consumed=where)
        s.exit_vars = _row(out)
        return out

    def stmts_strict(self, body: list[ast.Stmt], env: Env) -> None:
        """Check synthesized statements; errors surface on the enclosing statement."""
        for st in body:
            out = self._stmt(st, env)
            assert out is env

    # --- iteration protocol ---

    def fresh(self, role: str) -> str:
        return f"%{self._counter}.{role}"

    def protocol(self, target: ast.Pattern, iterable: ast.Expr, env: Env, span: Span) -> IterProtocol:
        self._counter += 1
        sp = iterable.span

        def name(n: str) -> ast.Name:
            return ast.Name(n, span=sp)

        def pat(n: str) -> ast.NamePattern:
            return ast.NamePattern(n, span=sp)

        def assign(p: ast.Pattern, v: ast.Expr) -> ast.Assign:
            return ast.Assign(p, v, span=sp)

        one = ast.IntLit(1, span=sp)
        if _is_range_call(iterable):
            args = iterable.args
            if not 1 <= len(args) <= 2:
                raise _err(Category.ARITY, f"`range` expects 1 or 2 arguments, got {len(args)}", sp)
            i, n, c = self.fresh("i"), self.fresh("n"), self.fresh("c")
            start = args[0] if len(args) == 2 else ast.IntLit(0, span=sp)
            stop = args[-1]
            proto = IterProtocol(
                "range",
                [i, n],
                [assign(pat(i), start), assign(pat(n), stop)],
                [assign(pat(c), ast.Compare("<", name(i), name(n), span=sp))],
                c,
                [assign(target, name(i)), ast.AugAssign(pat(i), "+", one, span=sp)],
                [],
            )
            iterable.ty = ListType(INT)
            self.protocol_init(proto, iterable, env)
            return proto
        ty = self.expr(iterable, env)
        if not isinstance(ty, ListType):
            raise _err(Category.TYPE_MISMATCH, f"Value of type `{ty}` is not iterable", sp)
        if ty.linear:
            lst, n, c = self.fresh("l"), self.fresh("n"), self.fresh("c")
            proto = IterProtocol(
                "linear-list",
                [lst],
                [assign(pat(lst), iterable)],
                [
                    assign(
                        ast.TuplePattern([pat(n), pat(lst)], span=sp),
                        ast.Call(name("%len"), [name(lst)], span=sp),
                    ),
                    assign(pat(c), ast.Compare(">", name(n), ast.IntLit(0, span=sp), span=sp)),
                ],
                c,
                [
                    assign(
                        ast.TuplePattern([target, pat(lst)], span=sp),
                        ast.Call(name("%get"), [name(lst), ast.IntLit(0, span=sp)], span=sp),
                    )
                ],
                [ast.ExprStmt(ast.Call(name(bi.FREE_EMPTY), [name(lst)], span=sp), span=sp)],
            )
        else:
            xs, i, n, c = self.fresh("xs"), self.fresh("i"), self.fresh("n"), self.fresh("c")
            proto = IterProtocol(
                "list",
                [xs, i, n],
                [
                    assign(pat(xs), iterable),
                    assign(pat(i), ast.IntLit(0, span=sp)),
                    assign(pat(n), ast.Call(name("%len"), [name(xs)], span=sp)),
                ],
                [assign(pat(c), ast.Compare("<", name(i), name(n), span=sp))],
                c,
                [
                    assign(target, ast.Subscript(name(xs), name(i), span=sp)),
                    ast.AugAssign(pat(i), "+", one, span=sp),
                ],
                [],
            )
        self.bind_hidden(env, proto.state[0], ty, sp)
        return proto

    def _manual_init(self, proto: IterProtocol) -> int:
        """Number of leading init statements whose values were checked in place."""
        return 2 if proto.kind == "range" else 1

    def protocol_init(self, proto: IterProtocol, iterable: ast.Expr, env: Env) -> None:
        """(Re-)check the iterable expression and bind the first state variable(s)."""
        if proto.kind == "range":
            for st in proto.init[:2]:
                ty = self.expr(st.value, env, INT)
                self.coerce_to(st.value, ty, INT, "`range` argument")
                self.bind_hidden(env, st.target.id, INT, st.span)
            return
        ty = self.expr(iterable, env)
        self.bind_hidden(env, proto.state[0], ty, iterable.span)

    # --- nested functions ---

    def nested_def(self, s: ast.FunctionDef, env: Env) -> Env:
        sig = self.signature(s)
        s.sig = sig
        if id(s) not in self._nested_ids:
            self._nested_ids.add(id(s))
            self.nested.append(s)
            base = f"{self.fn.node.lifted_name}.{s.name}"
            lifted, k = base, 1
            while lifted in self._lifted_names:
                k += 1
                lifted = f"{base}#{k}"
            self._lifted_names.add(lifted)
            s.lifted_name = lifted
        old = env.get(s.name)
        if old is not None and old.linear and old.live:
            raise _err(
                Category.LINEARITY_DISCARD,
                f"Variable `{s.name}` with linear type `{old.ty}` is overwritten before being consumed",
                s.span,
            )
        snapshot = dict(env)
        snapshot[s.name] = Var(sig.ftype, s.span, fn_def=s)
        inner = _Fn(s, sig, collect_locals(s), self.fn, snapshot)
        with self.statement():
            self.check_function(inner)
        s.captures = [
            (name, v.ty if v.fn_def is None else v.ty, v.fn_def) for name, v in inner.captures.items()
        ]
        env[s.name] = Var(sig.ftype, s.span, fn_def=s)
        return env

    # --- names ---

    def lookup(self, e: ast.Name, env: Env, consume: bool = True) -> Type:
        fn = self.fn
        if e.id in fn.locals:
            v = env.get(e.id)
            if v is None or not v.defined:
                cat = Category.NOT_DEFINITELY_ASSIGNED
                raise _err(cat, f"Variable `{e.id}` is not definitely assigned", e.span)
            return self.use_var(e, v, env, consume)
        v = self.lookup_outer(fn, e.id, e.span)
        if v is not None:
            if v.fn_def is not fn.node:
                fn.captures.setdefault(e.id, v)
            return self.use_var(e, v, None, consume)
        if e.id in self.globals:
            f = self.globals[e.id]
            if f.sig is None:
                raise _Poison()
            e.binding = "global"
            return f.sig.ftype
        if e.id in bi.VALUE_BUILTINS:
            e.binding = "builtin"
            return bi.gate_function_type(e.id)
        if e.id in bi.BUILTIN_NAMES:
            raise _err(
                Category.UNSUPPORTED_FEATURE,
                f"Builtin `{e.id}` cannot be used as a value",
                e.span,
            )
        raise _err(Category.NOT_DEFINED, f"Variable `{e.id}` is not defined", e.span)

    def use_var(self, e: ast.Name, v: Var, env: Env | None, consume: bool) -> Type:
        if v.ty is ERROR:
            raise _Poison()
        if isinstance(v.ty, Conflict):
            raise _err(
                Category.BRANCH_TYPE_CONFLICT,
                f"Variable `{e.id}` could be {v.ty}",
                e.span,
                [(v.span, "assigned here")] if v.span else [],
            )
        if v.linear and v.consumed is not None:
            raise _err(
                Category.LINEARITY_COPY,
                f"Variable `{e.id}` with linear type `{v.ty}` was already used",
                e.span,
                [(v.consumed, "already used here")],
            )
        if v.fn_def is not None:
            e.binding = "localfn"
            e.fn_def = v.fn_def
        else:
            e.binding = "local"
        if v.linear and consume and env is not None:
            env[e.id] = replace(v, consumed=e.span)
        return v.ty

    def lookup_outer(self, fn: _Fn, name: str, span: Span) -> Var | None:
        parent = fn.parent
        if parent is None:
            return None
        if name in parent.locals:
            v = fn.parent_env.get(name)
            if v is None or not v.defined:
                raise _err(
                    Category.NOT_DEFINITELY_ASSIGNED,
                    f"Variable `{name}` is not definitely assigned",
                    span,
                )
            if v.ty is ERROR:
                raise _Poison()
            if isinstance(v.ty, Conflict):
                raise _err(Category.BRANCH_TYPE_CONFLICT, f"Variable `{name}` could be {v.ty}", span)
            if v.linear:
                raise _err(
                    Category.LINEARITY_COPY,
                    f"Variable `{name}` with linear type `{v.ty}` cannot be captured by a "
                    "nested function",
                    span,
                    [(v.span, "assigned here")],
                )
            return v
        v = self.lookup_outer(parent, name, span)
        if v is not None and v.fn_def is not parent.node:
            parent.captures.setdefault(name, v)
        return v

    # --- expressions ---

    def expr_or_conflict(self, e: ast.Expr, env: Env, expected: Type | None = None) -> Any:
        if isinstance(e, ast.IfExp):
            return self.if_exp(e, env, expected, allow_conflict=True)
        return self.expr(e, env, expected)

    def expr(self, e: ast.Expr, env: Env, expected: Type | None = None) -> Type:
        ty = self._expr(e, env, expected)
        e.ty = ty
        return ty

    def expect_bool(self, e: ast.Expr, env: Env, what: str) -> None:
        ty = self.expr(e, env, BOOL)
        if ty != BOOL:
            raise _err(
                Category.TYPE_MISMATCH,
                f"Expected {what} of type `bool`, got `{ty}`",
                e.span,
            )

    def coerce_to(self, e: ast.Expr, ty: Type, target: Type, what: str) -> None:
        if ty == target:
            return
        if coercible(ty, target):
            e.coerce = target
            return
        raise _err(
            Category.TYPE_MISMATCH,
            f"Expected {what} of type `{target}`, got `{ty}`",
            e.span,
        )

    def _expr(self, e: ast.Expr, env: Env, expected: Type | None) -> Type:
        if isinstance(e, ast.IntLit):
            if e.value > INT_MAX:
                raise _err(
                    Category.OVERFLOW_LITERAL,
                    f"Integer literal {e.value} does not fit in 64 bits",
                    e.span,
                )
            return INT
        if isinstance(e, ast.FloatLit):
            return FLOAT
        if isinstance(e, ast.BoolLit):
            return BOOL
        if isinstance(e, ast.NoneLit):
            return NONE
        if isinstance(e, ast.Name):
            return self.lookup(e, env)
        if isinstance(e, ast.UnaryOp):
            return self.unary(e, env)
        if isinstance(e, ast.BinOp):
            lt = self.expr(e.left, env)
            rt = self.expr(e.right, env)
            res, lc, rc, out = resolve_operator(e.op, lt, rt, e.span)
            e.left.coerce, e.right.coerce, e.resolved = lc, rc, res
            return out
        if isinstance(e, ast.BoolOp):
            self.expect_bool(e.values[0], env, f"operand of `{e.op}`")
            for v in e.values[1:]:
                self.conditionally(env, e.span, lambda branch, v=v: self.expect_bool(v, branch, f"operand of `{e.op}`"))
            return BOOL
        if isinstance(e, ast.Compare):
            lt = self.expr(e.left, env)
            rt = self.expr(e.right, env)
            res, lc, rc = resolve_comparison(e.op, lt, rt, e.span)
            e.left.coerce, e.right.coerce, e.resolved = lc, rc, res
            return BOOL
        if isinstance(e, ast.Chain):
            return self.chain(e, env)
        if isinstance(e, ast.Call):
            return self.call(e, env, expected)
        if isinstance(e, ast.MethodCall):
            return self.method_call(e, env)
        if isinstance(e, ast.TupleExpr):
            exp = expected.elements if isinstance(expected, TupleType) and len(expected.elements) == len(e.elts) else None
            return TupleType(
                tuple(self.expr(x, env, exp[k] if exp else None) for k, x in enumerate(e.elts))
            )
        if isinstance(e, ast.ListExpr):
            return self.list_display(e, env, expected)
        if isinstance(e, ast.ListComp):
            return self.list_comp(e, env)
        if isinstance(e, ast.Subscript):
            return self.subscript(e, env)
        if isinstance(e, ast.IfExp):
            return self.if_exp(e, env, expected, allow_conflict=False)
        if isinstance(e, ast.PyExpr):
            return self.py_expr(e, env)
        raise _err(Category.UNSUPPORTED_FEATURE, f"Unsupported expression {type(e).__name__}", e.span)

    def conditionally(self, env: Env, span: Span, check) -> None:
        """Check an operand that is evaluated on only some paths (short-circuit)."""
        branch = dict(env)
        check(branch)
        for n, v in branch.items():
            old = env.get(n)
            if v.linear and old is not None and old.live and not v.live:
                raise _err(
                    Category.LINEARITY_CONDITIONAL_USE,
                    f"Variable `{n}` with linear type `{v.ty}` is consumed only if this operand "
                    "is evaluated",
                    v.consumed,
                )

    def unary(self, e: ast.UnaryOp, env: Env) -> Type:
        if e.op == "not":
            self.expect_bool(e.operand, env, "operand of `not`")
            e.resolved = Resolved("cmp", "not", BOOL)
            return BOOL
        t = self.expr(e.operand, env)
        if e.op == "~":
            if t not in (BOOL, INT):
                raise _err(Category.TYPE_MISMATCH, f"Unsupported operand type for `~`: `{t}`", e.span)
            if t == BOOL:
                e.operand.coerce = INT
            e.resolved = Resolved("int", "invert", INT)
            return INT
        if not is_numeric(t):
            raise _err(Category.TYPE_MISMATCH, f"Unsupported operand type for `{e.op}`: `{t}`", e.span)
        out = INT if t == BOOL else t
        if t == BOOL:
            e.operand.coerce = INT
        family = "float" if out == FLOAT else "int"
        e.resolved = Resolved(family, "neg" if e.op == "-" else "pos", out)
        return out

    def chain(self, e: ast.Chain, env: Env) -> Type:
        types = [self.expr(e.operands[0], env), self.expr(e.operands[1], env)]
        resolved = []
        res, lc, rc = resolve_comparison(e.ops[0], types[0], types[1], e.span)
        coercions = [(lc, rc)]
        resolved.append(res)
        for k in range(2, len(e.operands)):
            def check(branch, k=k):
                t = self.expr(e.operands[k], branch)
                types.append(t)
                r, a, b = resolve_comparison(e.ops[k - 1], types[k - 1], t, e.span)
                resolved.append(r)
                coercions.append((a, b))
            self.conditionally(env, e.span, check)
        e.resolved = list(zip(resolved, coercions))
        return BOOL

    def if_exp(self, e: ast.IfExp, env: Env, expected, allow_conflict: bool):
        self.expect_bool(e.test, env, "condition")
        then_env, else_env = dict(env), dict(env)
        a = self.expr(e.body, then_env, expected)
        b = self.expr(e.orelse, else_env, expected)
        merged = self.join_strict([then_env, else_env], e.span)
        env.clear()
        env.update(merged)
        if a == b:
            e.ty = a
            return a
        if (a.linear or b.linear) or not allow_conflict:
            raise _err(
                Category.BRANCH_TYPE_CONFLICT,
                f"Expression could be `{a}` or `{b}`",
                e.span,
            )
        e.ty = Conflict((a, b))
        return e.ty

    def join_strict(self, envs: list[Env], span: Span) -> Env:
        """Join for expression-level branches: any linearity disagreement is fatal."""
        for n in envs[0]:
            a, b = envs[0][n], envs[1].get(n)
            if a.linear and b is not None and a.live != b.live:
                c = a if not a.live else b
                raise _err(
                    Category.LINEARITY_CONDITIONAL_USE,
                    f"Variable `{n}` with linear type `{a.ty}` is consumed in only one branch",
                    c.consumed,
                    [(span, "in this conditional expression")],
                )
        return envs[0]

    def list_display(self, e: ast.ListExpr, env: Env, expected) -> Type:
        exp_elem = expected.element if isinstance(expected, ListType) else None
        if not e.elts:
            if exp_elem is None:
                raise _err(Category.TYPE_MISMATCH, "Cannot infer the type of an empty list", e.span)
            return ListType(exp_elem)
        types = [self.expr(x, env, exp_elem) for x in e.elts]
        elem = types[0]
        for t in types[1:]:
            if t == elem:
                continue
            if is_numeric(t) and is_numeric(elem):
                elem = numeric_join(t, elem)
                continue
            raise _err(
                Category.TYPE_MISMATCH,
                f"List elements have different types `{elem}` and `{t}`",
                e.span,
            )
        if exp_elem is not None and elem != exp_elem and coercible(elem, exp_elem):
            elem = exp_elem
        for x, t in zip(e.elts, types):
            if t != elem:
                x.coerce = elem
        return ListType(elem)

    def list_comp(self, e: ast.ListComp, env: Env) -> Type:
        if e.conds:
            raise _err(
                Category.UNSUPPORTED_FEATURE,
                "Conditional clauses in list comprehensions are not supported",
                e.conds[0].span,
            )
        targets = pattern_names(e.target)
        saved = {n: env.pop(n) for n in targets if n in env}
        for n in targets:
            self.fn.locals.add(n)
        inner = dict(env)
        try:
            proto = e.protocol
            if proto is None:
                proto = e.protocol = self.protocol(e.target, e.iter, inner, e.span)
            else:
                self.protocol_init(proto, e.iter, inner)
            self.stmts_strict(proto.init[self._manual_init(proto):], inner)
            self.stmts_strict(proto.cond, inner)
            before = dict(inner)
            # exit path: only annotates the synthesized calls
            self.stmts_strict(proto.finish, dict(before))
            self.stmts_strict(proto.next, inner)
            elt = self.expr(e.elt, inner)
            for n, v in inner.items():
                old = before.get(n)
                if v.linear and old is not None and old.live and not v.live and n not in proto.state:
                    raise _err(
                        Category.LINEARITY_COPY,
                        f"Variable `{n}` with linear type `{v.ty}` would be consumed in every "
                        "iteration of the comprehension",
                        v.consumed,
                    )
                if v.linear and v.live and n in targets:
                    raise _err(
                        Category.LINEARITY_DISCARD,
                        f"Variable `{n}` with linear type `{v.ty}` is not consumed by the "
                        "comprehension element",
                        v.span,
                    )
        finally:
            for n in targets:
                env.pop(n, None)
            env.update(saved)
        # the iterable (and anything it consumed) is consumed in the outer scope
        for n, v in inner.items():
            if n in env and env[n].linear and env[n].live and not v.live and n not in targets:
                env[n] = v
        e.ty = ListType(elt)
        return e.ty

    def subscript(self, e: ast.Subscript, env: Env) -> Type:
        vt = self.expr(e.value, env)
        if isinstance(vt, ListType):
            if vt.linear:
                raise _err(
                    Category.LINEARITY_COPY,
                    f"Cannot index into a list with linear elements (`{vt}`); use `get`",
                    e.span,
                )
            it = self.expr(e.index, env, INT)
            self.coerce_to(e.index, it, INT, "list index")
            e.builtin = "get"
            return vt.element
        if isinstance(vt, TupleType):
            idx = e.index
            neg = isinstance(idx, ast.UnaryOp) and idx.op == "-" and isinstance(idx.operand, ast.IntLit)
            if not (isinstance(idx, ast.IntLit) or neg):
                raise _err(
                    Category.TYPE_MISMATCH,
                    "Tuple index must be an integer literal",
                    idx.span,
                )
            k = -idx.operand.value if neg else idx.value
            n = len(vt.elements)
            if not -n <= k < n:
                raise _err(Category.TYPE_MISMATCH, f"Tuple index {k} out of range for `{vt}`", idx.span)
            if vt.linear:
                raise _err(
                    Category.LINEARITY_DISCARD,
                    f"Indexing a tuple with linear elements (`{vt}`) would discard the others",
                    e.span,
                )
            self.expr(idx, env)
            e.builtin = ("tuple-index", k % n)
            return vt.elements[k % n]
        raise _err(Category.TYPE_MISMATCH, f"Value of type `{vt}` is not subscriptable", e.span)

    # --- calls ---

    def call(self, e: ast.Call, env: Env, expected) -> Type:
        f = e.func
        if isinstance(f, ast.Name):
            name = f.id
            builtin_name = name[1:] if name in ("%len", "%get") else name
            is_local = name in self.fn.locals or (
                self.fn.parent is not None and _in_outer(self.fn, name)
            )
            if not is_local and name not in self.globals and (
                builtin_name in bi.BUILTIN_NAMES or name == bi.FREE_EMPTY
            ):
                e.target = "builtin"
                f.binding = "builtin"
                return self.builtin_call(builtin_name, e, env)
            ft = self.lookup(f, env)
            f.ty = ft
            if f.binding == "global":
                e.target = "global"
            elif f.binding == "localfn":
                e.target = "localfn"
            elif f.binding == "builtin":
                e.target = "builtin"
                return self.builtin_call(name, e, env)
            else:
                e.target = "indirect"
        else:
            ft = self.expr(f, env)
            e.target = "indirect"
        if not isinstance(ft, FunctionType):
            raise _err(Category.TYPE_MISMATCH, f"Value of type `{ft}` is not callable", f.span)
        self.check_args(e.args, ft.params, env, _callee_name(f), e.span)
        return ft.result

    def check_args(self, args, params, env, fname: str, span: Span) -> list[Type]:
        if len(args) != len(params):
            raise _err(
                Category.ARITY,
                f"`{fname}` expects {len(params)} argument{'s' if len(params) != 1 else ''}, "
                f"got {len(args)}",
                span,
            )
        out = []
        for a, p in zip(args, params):
            t = self.expr(a, env, p)
            self.coerce_to(a, t, p, f"argument of `{fname}`")
            out.append(t)
        return out

    def builtin_call(self, name: str, e: ast.Call, env: Env) -> Type:
        args = e.args
        if name in bi.GATES:
            params, result, _ = bi.GATES[name]
            self.check_args(args, params, env, name, e.span)
            e.builtin = name
            return result
        if name == "range":
            raise _err(
                Category.UNSUPPORTED_FEATURE,
                "`range` may only be used as the iterable of a `for` loop or comprehension",
                e.span,
            )
        if name == "len":
            if len(args) != 1:
                raise _err(Category.ARITY, f"`len` expects 1 argument, got {len(args)}", e.span)
            lt = self.expr(args[0], env)
            if not isinstance(lt, ListType):
                raise _err(Category.TYPE_MISMATCH, f"`len` expects a list, got `{lt}`", args[0].span)
            e.builtin = "len"
            return TupleType((INT, lt)) if lt.linear else INT
        if name == "get":
            if len(args) != 2:
                raise _err(Category.ARITY, f"`get` expects 2 arguments, got {len(args)}", e.span)
            lt = self.expr(args[0], env)
            return self.list_get(e, lt, args[1], env)
        if name == bi.FREE_EMPTY:
            self.expr(args[0], env)
            e.builtin = "free"
            return NONE
        raise _err(Category.NOT_DEFINED, f"Unknown builtin `{name}`", e.span)

    def list_get(self, e, lt: Type, index: ast.Expr, env: Env) -> Type:
        if not isinstance(lt, ListType):
            raise _err(Category.TYPE_MISMATCH, f"`get` expects a list, got `{lt}`", e.span)
        it = self.expr(index, env, INT)
        self.coerce_to(index, it, INT, "list index")
        e.builtin = "get"
        return TupleType((lt.element, lt)) if lt.linear else lt.element

    def method_call(self, e: ast.MethodCall, env: Env) -> Type:
        if e.method not in bi.METHODS:
            raise _err(Category.UNSUPPORTED_FEATURE, f"Unknown method `{e.method}`", e.span)
        rt = self.expr(e.receiver, env)
        if not isinstance(rt, ListType):
            raise _err(
                Category.TYPE_MISMATCH,
                f"Method `{e.method}` is not available on values of type `{rt}`",
                e.span,
            )
        if e.method == "get":
            if len(e.args) != 1:
                raise _err(Category.ARITY, f"`get` expects 1 argument, got {len(e.args)}", e.span)
            return self.list_get(e, rt, e.args[0], env)
        # apply
        if len(e.args) != 2:
            raise _err(Category.ARITY, f"`apply` expects 2 arguments, got {len(e.args)}", e.span)
        if not rt.linear:
            raise _err(
                Category.TYPE_MISMATCH,
                f"`apply` is only available on lists with linear elements, got `{rt}`",
                e.span,
            )
        ft = self.expr(e.args[0], env)
        elem = rt.element
        if not isinstance(ft, FunctionType):
            raise _err(Category.TYPE_MISMATCH, f"`apply` expects a function, got `{ft}`", e.args[0].span)
        k = len(ft.params)
        want_result = elem if k == 1 else TupleType((elem,) * k)
        if k == 0 or any(p != elem for p in ft.params) or ft.result != want_result:
            raise _err(
                Category.TYPE_MISMATCH,
                f"`apply` on `{rt}` expects a function of type "
                f"`{FunctionType((elem,) * max(k, 1), want_result if k else elem)}`, got `{ft}`",
                e.args[0].span,
            )
        idx = e.args[1]
        it = self.expr(idx, env, TupleType((INT,) * k) if k > 1 else INT)
        if k == 1 and it in (INT, BOOL):
            self.coerce_to(idx, it, INT, "index")
        elif not (
            isinstance(it, TupleType)
            and len(it.elements) == k
            and all(coercible(t, INT) for t in it.elements)
        ):
            raise _err(
                Category.ARITY if isinstance(it, TupleType) else Category.TYPE_MISMATCH,
                f"`apply` with a {k}-argument function expects {k} integer indices, got `{it}`",
                idx.span,
            )
        elif isinstance(idx, ast.TupleExpr):
            for x in idx.elts:
                if x.ty != INT:
                    x.coerce = INT
        e.builtin = ("apply", k)
        return rt

    # --- py(...) ---

    def py_expr(self, e: ast.PyExpr, env: Env) -> Type:
        for ident, span in e.idents:
            if self.is_guppy_var(ident, env):
                raise _err(
                    Category.PY_USES_GUPPY_VAR,
                    f"Guppy variable `{ident}` may not be used inside `py(...)`",
                    span,
                )
        key = normalize(e.text)
        if key in self.bindings:
            ty, raw = self.bindings[key]
            try:
                e.value = convert_literal(ty, raw)
            except OverflowError:
                raise _err(
                    Category.OVERFLOW_LITERAL,
                    f"Binding for `{key}` contains an integer outside the 64-bit range",
                    e.span,
                ) from None
            except BindingError as exc:
                raise _err(Category.TYPE_MISMATCH, f"Binding for `{key}`: {exc}", e.span) from None
            return ty
        value = eval_literal(key)
        if value is None:
            raise _err(
                Category.PY_BINDING_MISSING,
                f"No compile-time binding for py expression `{key}`",
                e.span,
            )
        ty = literal_type(value)
        if ty == INT and not -(2**63) <= value <= INT_MAX:
            raise _err(Category.OVERFLOW_LITERAL, f"Value {value} does not fit in 64 bits", e.span)
        e.value = value
        return ty

    def is_guppy_var(self, name: str, env: Env) -> bool:
        fn = self.fn
        while fn is not None:
            if name in fn.locals:
                return True
            fn = fn.parent
        return name in env


# --- operator resolution --------------------------------------------------------

_ARITH = {"+": "add", "-": "sub", "*": "mul"}
_INT_ONLY = {"//": "floordiv", "%": "mod", "&": "and", "|": "or", "^": "xor", "<<": "shl", ">>": "shr"}
_CMP = {"<": "lt", "<=": "le", ">": "gt", ">=": "ge", "==": "eq", "!=": "ne"}


def _mismatch(op: str, lt: Any, rt: Any, span: Span) -> _Diag:
    return _err(
        Category.TYPE_MISMATCH,
        f"Unsupported operand types for `{op}`: `{lt}` and `{rt}`",
        span,
    )


def resolve_operator(op: str, lt: Type, rt: Type, span: Span):
    """Resolve a binary arithmetic/bitwise operator.

    Returns ``(Resolved, lhs coercion, rhs coercion, result type)``; coercions
    are ``None`` when the operand already has the operation's type.
    """
    if op == "**":
        raise _err(Category.UNSUPPORTED_FEATURE, "The `**` operator is not supported", span)
    if not (is_numeric(lt) and is_numeric(rt)):
        raise _mismatch(op, lt, rt, span)
    if op in _ARITH:
        t = numeric_join(lt, rt)
        if t == BOOL:
            t = INT
        family = "float" if t == FLOAT else "int"
        res = Resolved(family, _ARITH[op], t)
    elif op == "/":
        t = FLOAT
        res = Resolved("float", "div", t)
    elif op in _INT_ONLY:
        if lt == FLOAT or rt == FLOAT:
            raise _mismatch(op, lt, rt, span)
        t = INT
        res = Resolved("int", _INT_ONLY[op], t)
    else:
        raise _mismatch(op, lt, rt, span)
    return res, (t if lt != t else None), (t if rt != t else None), t


def resolve_comparison(op: str, lt: Type, rt: Type, span: Span):
    """Resolve a comparison; returns ``(Resolved, lhs coercion, rhs coercion)``."""
    if is_numeric(lt) and is_numeric(rt):
        t = numeric_join(lt, rt)
        if op not in ("==", "!=") and t == BOOL:
            t = INT
        return Resolved("cmp", _CMP[op], t), (t if lt != t else None), (t if rt != t else None)
    if op in ("==", "!=") and lt == rt and not lt.linear and not isinstance(lt, FunctionType):
        return Resolved("cmp", _CMP[op], lt), None, None
    raise _mismatch(op, lt, rt, span)


# --- helpers --------------------------------------------------------------------


def _same(a: Var, b: Var) -> bool:
    return a.ty == b.ty and a.fn_def is b.fn_def


def _row(env: Env | None) -> dict[str, Type]:
    """Live, well-typed names at a program point mapped to the type of their wire."""
    if env is None:
        return {}
    return {
        n: wire_type(v)
        for n, v in sorted(env.items())
        if v.live and isinstance(v.ty, Type) and v.ty is not ERROR
    }


def wire_type(v: Var) -> Type:
    # a local function is represented by the tuple of values it captured
    return env_type(v.fn_def) if v.fn_def is not None else v.ty


def env_type(f: ast.FunctionDef) -> TupleType:
    return TupleType(
        tuple(ty if fd is None else env_type(fd) for _, ty, fd in f.captures or ())
    )


def _env_key(env: Env) -> dict:
    return {
        n: (v.ty, v.defined, v.consumed is None, id(v.fn_def)) for n, v in env.items()
    }


def _type_text(t: ast.TypeExpr) -> str:
    from guppyc.frontend.printer import unparse

    return unparse(t)


def _is_range_call(e: ast.Expr) -> bool:
    return isinstance(e, ast.Call) and isinstance(e.func, ast.Name) and e.func.id == "range"


def _callee_name(f: ast.Expr) -> str:
    return f.id if isinstance(f, ast.Name) else "function"


def _in_outer(fn: _Fn, name: str) -> bool:
    p = fn.parent
    while p is not None:
        if name in p.locals:
            return True
        p = p.parent
    return False


def _is_call_head(root: ast.Expr, name: ast.Name) -> bool:
    for node in ast.walk(root):
        if isinstance(node, ast.Call) and node.func is name:
            return True
    return False


def pattern_names(p: ast.Pattern) -> list[str]:
    if isinstance(p, ast.NamePattern):
        return [p.id]
    return [n for e in p.elts for n in pattern_names(e)]


def collect_locals(f: ast.FunctionDef) -> set[str]:
    """Names bound anywhere in ``f``'s own scope (parameters, targets, nested defs)."""
    out = {p.name for p in f.params}

    def visit(node: ast.Node) -> None:
        if isinstance(node, ast.FunctionDef) and node is not f:
            out.add(node.name)
            return
        if isinstance(node, (ast.Assign, ast.For)):
            out.update(pattern_names(node.target))
        elif isinstance(node, ast.AugAssign):
            out.add(node.target.id)
        elif isinstance(node, ast.ListComp):
            out.update(pattern_names(node.target))
        for child in node.children():
            visit(child)

    for s in f.body:
        visit(s)
    return out


def names_assigned(s: ast.Node) -> set[str]:
    """Names (re)bound by ``s``, not descending into nested function bodies."""
    out: set[str] = set()

    def visit(node: ast.Node) -> None:
        if isinstance(node, ast.FunctionDef):
            out.add(node.name)
            return
        if isinstance(node, (ast.Assign, ast.For)):
            out.update(pattern_names(node.target))
            if isinstance(node, ast.For) and node.protocol is not None:
                for st in node.protocol.init + node.protocol.cond + node.protocol.next + node.protocol.finish:
                    visit(st)
        elif isinstance(node, ast.AugAssign):
            out.add(node.target.id)
        elif isinstance(node, ast.ListComp):
            return
        for child in node.children():
            visit(child)

    visit(s)
    return out


def names_read(s: ast.Node) -> set[str]:
    """Names whose current value ``s`` may read, including nested-function captures."""
    out: set[str] = set()

    def visit(node: ast.Node, bound: frozenset) -> None:
        if isinstance(node, ast.FunctionDef):
            for name, _, _ in node.captures or ():
                if name not in bound:
                    out.add(name)
            return
        if isinstance(node, ast.Name):
            if node.id not in bound:
                out.add(node.id)
            return
        if isinstance(node, ast.AugAssign):
            if node.target.id not in bound:
                out.add(node.target.id)
        if isinstance(node, ast.ListComp):
            visit(node.iter, bound)
            inner = bound | set(pattern_names(node.target))
            visit(node.elt, inner)
            for c in node.conds:
                visit(c, inner)
            if node.protocol is not None:
                for st in node.protocol.init[1:] + node.protocol.cond + node.protocol.next:
                    visit(st, inner)
            return
        if isinstance(node, ast.For) and node.protocol is not None:
            for st in node.protocol.init + node.protocol.cond + node.protocol.next + node.protocol.finish:
                visit(st, bound)
            for st in node.body:
                visit(st, bound)
            return
        for child in node.children():
            visit(child, bound)

    visit(s, frozenset())
    return out
