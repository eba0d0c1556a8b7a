"""Translation of the typed syntax tree into the graph IR.

Function bodies are lowered structurally (Conditional / TailLoop) unless a
``return`` sits inside a loop, in which case the whole body becomes a CFG of
basic blocks.  Variables are threaded as wires through a name -> wire map; a
linear wire leaves the map the moment it is read.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator

from guppyc.frontend import nodes as ast
from guppyc.ir.graph import Builder, Graph
from guppyc.ir.ports import CONTROL, SumType, port_tag
from guppyc.typecheck import builtins as bi
from guppyc.typecheck.checker import (
    CheckedModule,
    Conflict,
    env_type,
    names_assigned,
    names_read,
)
from guppyc.typecheck.types import (
    BOOL,
    FLOAT,
    INT,
    NONE,
    QUBIT,
    FunctionType,
    ListType,
    QubitType,
    TupleType,
    Type,
    to_tag,
)

Wire = tuple[int, int]


class LoweringError(Exception):
    """Internal invariant failure; a well-typed program should never raise this."""


class VTuple(list):
    """A tuple whose elements are still separate wires."""


@dataclass
class Exit:
    """Where control goes when a region ends: the Output node and its row builder."""

    kind: str  # 'function' | 'loop'
    output: int
    result: Type | None = None
    carried: list[str] | None = None
    break_row: list[tuple[str, Type]] | None = None
    sum_type: SumType | None = None


def lower_module(checked: CheckedModule, mode: str = "structured") -> Graph:
    """Lower a checked module; ``mode`` is ``structured`` (with CFG fallback) or ``cfg``."""
    if mode not in ("structured", "cfg"):
        raise ValueError(f"unknown lowering mode {mode!r}")
    return ModuleLowerer(checked, mode).run()


def wants_cfg(f: ast.FunctionDef) -> bool:
    def visit(stmts, in_loop: bool) -> bool:
        for s in stmts:
            if isinstance(s, ast.Return) and in_loop:
                return True
            if isinstance(s, ast.If) and (visit(s.body, in_loop) or visit(s.orelse, in_loop)):
                return True
            if isinstance(s, (ast.While, ast.For)) and visit(s.body, True):
                return True
        return False

    return visit(f.body, False)


def escapes(s: ast.Stmt) -> bool:
    """Whether ``s`` can transfer control out of the enclosing region."""

    def visit(stmts, depth: int) -> bool:
        for x in stmts:
            if isinstance(x, ast.Return):
                return True
            if isinstance(x, (ast.Break, ast.Continue)) and depth == 0:
                return True
            if isinstance(x, ast.If) and (visit(x.body, depth) or visit(x.orelse, depth)):
                return True
            if isinstance(x, (ast.While, ast.For)) and visit(x.body, depth + 1):
                return True
        return False

    return visit([s], 0)


def breaks_out(loop: ast.Stmt) -> bool:
    def visit(stmts, depth: int) -> bool:
        for x in stmts:
            if isinstance(x, ast.Break) and depth == 0:
                return True
            if isinstance(x, ast.Return):
                return True
            if isinstance(x, ast.If) and (visit(x.body, depth) or visit(x.orelse, depth)):
                return True
            if isinstance(x, (ast.While, ast.For)) and visit(x.body, depth + 1):
                return True
        return False

    return visit(loop.body, 0)


def infinite(s: ast.Stmt) -> bool:
    return isinstance(s, ast.While) and isinstance(s.test, ast.BoolLit) and s.test.value


class ModuleLowerer:
    def __init__(self, checked: CheckedModule, mode: str):
        self.checked = checked
        self.mode = mode
        self.b = Builder()
        self.pending: list[Callable[[], None]] = []
        self.wrappers: dict[str, str] = {}
        self.stubs: dict[FunctionType, str] = {}
        self.queued: set[int] = set()

    def run(self) -> Graph:
        for f in self.checked.module.functions:
            if self.checked.functions.get(f.name) is f:
                self.function(f)
        while self.pending:
            self.pending.pop(0)()
        return self.b.build()

    def function(self, f: ast.FunctionDef) -> None:
        params = [t for _, t in f.sig.params]
        has_env = bool(f.captures)
        if has_env:
            params.append(env_type(f))
        result = f.sig.result
        fid = self.b.add_node(
            "FuncDefn",
            self.b.root,
            payload={
                "name": f.lifted_name,
                "params": [to_tag(t) for t in params],
                "result": to_tag(result),
                "env": has_env,
            },
        )
        FnLowerer(self, f, fid, params, result).run()

    def nested(self, f: ast.FunctionDef) -> None:
        if id(f) not in self.queued:
            self.queued.add(id(f))
            self.pending.append(lambda: self.function(f))

    def builtin_wrapper(self, name: str) -> str:
        if name in self.wrappers:
            return self.wrappers[name]
        lifted = f"__builtin_{name}"
        self.wrappers[name] = lifted
        params, result, op = bi.GATES[name]
        fid = self.b.add_node(
            "FuncDefn",
            self.b.root,
            payload={
                "name": lifted,
                "params": [to_tag(t) for t in params],
                "result": to_tag(result),
                "env": False,
            },
        )
        b = self.b
        inp = b.add_node("Input", fid, out_ports=params)
        out = b.add_node("Output", fid, in_ports=[result])
        outs = {"cx": [QUBIT, QUBIT], "zz": [QUBIT, QUBIT], "measure": [BOOL], "discard": []}.get(
            op, [QUBIT]
        )
        q = b.add_node("QuantumOp", fid, list(params), outs, {"op": op})
        for k in range(len(params)):
            b.connect((inp, k), (q, k))
        if len(outs) == 2:
            t = b.add_node("MakeTuple", fid, outs, [result])
            b.connect((q, 0), (t, 0))
            b.connect((q, 1), (t, 1))
            b.connect((t, 0), (out, 0))
        elif outs:
            b.connect((q, 0), (out, 0))
        else:
            c = b.add_node("Const", fid, [], [NONE], {"value": None})
            b.connect((c, 0), (out, 0))
        return lifted

    def stub(self, ft: FunctionType) -> str:
        """A never-called function of type ``ft`` used to fill unreachable outputs."""
        if ft in self.stubs:
            return self.stubs[ft]
        name = f"__unreachable_{len(self.stubs)}"
        self.stubs[ft] = name
        b = self.b
        fid = b.add_node(
            "FuncDefn",
            b.root,
            payload={
                "name": name,
                "params": [to_tag(t) for t in ft.params],
                "result": to_tag(ft.result),
                "env": False,
            },
        )
        inp = b.add_node("Input", fid, out_ports=list(ft.params))
        out = b.add_node("Output", fid, in_ports=[ft.result])
        call = b.add_node("Call", fid, list(ft.params), [ft.result], {"target": name})
        for k in range(len(ft.params)):
            b.connect((inp, k), (call, k))
        b.connect((call, 0), (out, 0))
        return name


class FnLowerer:
    def __init__(self, mod: ModuleLowerer, f: ast.FunctionDef, fid: int, params, result: Type):
        self.mod = mod
        self.b = mod.b
        self.f = f
        self.fid = fid
        self.params = params
        self.result = result
        self.parent = fid

    # --- plumbing ---

    @contextmanager
    def inside(self, container: int) -> Iterator[None]:
        saved = self.parent
        self.parent = container
        try:
            yield
        finally:
            self.parent = saved

    def ty(self, w: Wire) -> Type:
        return self.b.node(w[0]).out_ports[w[1]]

    def node(self, kind: str, inputs, outs, payload=None, in_types=None) -> int:
        inputs = [self.wire(v) for v in inputs]
        ins = in_types if in_types is not None else [self.ty(w) for w in inputs]
        nid = self.b.add_node(kind, self.parent, ins, outs, payload)
        for k, w in enumerate(inputs):
            self.b.connect(w, (nid, k))
        return nid

    def const(self, value, ty: Type) -> Wire:
        return (self.node("Const", [], [ty], {"value": _json_value(value)}), 0)

    def wire(self, v) -> Wire:
        """Materialize a value as a single wire."""
        if isinstance(v, VTuple):
            elems = [self.wire(x) for x in v]
            types = [self.ty(w) for w in elems]
            return (self.node("MakeTuple", elems, [TupleType(tuple(types))]), 0)
        return v

    def value_type(self, v) -> Type:
        if isinstance(v, VTuple):
            return TupleType(tuple(self.value_type(x) for x in v))
        return self.ty(v)

    def unpack(self, v, n: int) -> list:
        if isinstance(v, VTuple):
            return list(v)
        t = self.ty(v)
        nid = self.node("UnpackTuple", [v], list(t.elements))
        return [(nid, k) for k in range(n)]

    # --- entry ---

    def run(self) -> None:
        b = self.b
        f = self.f
        use_cfg = self.mod.mode == "cfg" or wants_cfg(f)
        inp = b.add_node("Input", self.fid, out_ports=self.params)
        out = b.add_node("Output", self.fid, in_ports=[self.result])
        if use_cfg:
            from guppyc.lower.cfg import lower_cfg

            cfg = self.node("CFG", [(inp, k) for k in range(len(self.params))], [self.result])
            lower_cfg(self, cfg)
            b.connect((cfg, 0), (out, 0))
            return
        env = self.entry_env([(inp, k) for k in range(len(self.params))])
        self.block(f.body, env, Exit("function", out, result=self.result))

    def entry_env(self, wires: list[Wire]) -> dict:
        f = self.f
        env: dict = {}
        if f.captures:
            own = wires[-1]
            env[f.name] = own
            parts = self.unpack(own, len(f.captures))
            for (name, _, _), w in zip(f.captures, parts):
                env[name] = w
        elif f.lifted_name != f.name:
            env[f.name] = (self.node("MakeTuple", [], [TupleType(())]), 0)
        for (name, _), w in zip(f.sig.params, wires):
            env[name] = w
        return env

    # --- regions ---

    def block(self, stmts: list[ast.Stmt], env: dict, ex: Exit) -> None:
        """Lower ``stmts`` and terminate the region described by ``ex``."""
        for k, s in enumerate(stmts):
            if isinstance(s, ast.Return):
                value = self.expr(s.value, env) if s.value is not None else self.const(None, NONE)
                self.finish(env, ex, [value])
                return
            if isinstance(s, ast.Break):
                row = [self.take(env, n) for n, _ in ex.break_row]
                self.finish(env, ex, self.tag(1, row, ex.sum_type))
                return
            if isinstance(s, ast.Continue):
                self.continue_(env, ex)
                return
            if isinstance(s, ast.If) and escapes(s):
                rest = stmts[k + 1:]
                self.escaping_if(s, rest, env, ex)
                return
            if isinstance(s, (ast.While, ast.For)) and infinite(s) and not breaks_out(s):
                self.stmt(s, env)
                self.unreachable(env, ex)
                return
            self.stmt(s, env)
        if ex.kind == "function":
            self.finish(env, ex, [self.const(None, NONE)])
        else:
            self.continue_(env, ex)

    def continue_(self, env: dict, ex: Exit) -> None:
        row = [self.take(env, n) for n in ex.carried]
        self.finish(env, ex, self.tag(0, row, ex.sum_type))

    def take(self, env: dict, name: str) -> Wire:
        w = env[name]
        if _ty_linear(self.ty(w)):
            del env[name]
        return w

    def tag(self, index: int, row: list, sum_type: SumType) -> list[Wire]:
        payload = {"tag": index, "rows": [[port_tag(t) for t in r] for r in sum_type.rows]}
        return [(self.node("Tag", row, [sum_type], payload, in_types=list(sum_type.rows[index])), 0)]

    def finish(self, env: dict, ex: Exit, values: list) -> None:
        self.sink_leftovers(env)
        for k, v in enumerate(values):
            self.b.connect(self.wire(v), (ex.output, k))

    def sink_leftovers(self, env: dict) -> None:
        for name in list(env):
            w = env[name]
            if _ty_linear(self.ty(w)):
                del env[name]
                self.sink(w)

    def sink(self, w: Wire) -> None:
        t = self.ty(w)
        if isinstance(t, QubitType):
            self.node("QuantumOp", [w], [], {"op": "discard"})
        elif isinstance(t, TupleType):
            for part in self.unpack(w, len(t.elements)):
                if _ty_linear(self.ty(part)):
                    self.sink(part)
        elif isinstance(t, ListType):
            self.node("ListOp", [w], [], {"op": "free", "elem": to_tag(t.element)})

    def dummy(self, t: Type) -> Wire:
        if isinstance(t, QubitType):
            return (self.node("QuantumOp", [], [QUBIT], {"op": "qalloc"}), 0)
        if isinstance(t, TupleType):
            return self.wire(VTuple(self.dummy(e) for e in t.elements))
        if isinstance(t, ListType):
            return (self.node("ListOp", [], [t], {"op": "nil", "elem": to_tag(t.element)}), 0)
        if isinstance(t, SumType):
            return self.tag(0, [self.dummy(e) for e in t.rows[0]], t)[0]
        if isinstance(t, FunctionType):
            name = self.mod.stub(t)
            return (self.node("LoadFunction", [], [t], {"target": name, "env": False}), 0)
        defaults = {BOOL: False, INT: 0, FLOAT: 0.0, NONE: None}
        return self.const(defaults[t], t)

    def unreachable(self, env: dict, ex: Exit) -> None:
        out_types = self.b.node(ex.output).in_ports
        self.finish(env, ex, [self.dummy(t) for t in out_types])

    def conditional(self, pred: Wire, names: list[str], env: dict, out_types: list[Type], rows, case) -> int:
        """Build a Conditional; ``case(k, case_env, output_id)`` fills Case ``k``."""
        inputs = [self.take(env, n) for n in names]
        in_types = [self.ty(w) for w in inputs]
        cond = self.node("Conditional", [pred] + inputs, out_types)
        for k, row in enumerate(rows):
            cid = self.b.add_node("Case", cond, payload={"index": k})
            inp = self.b.add_node("Input", cid, out_ports=list(row) + in_types)
            out = self.b.add_node("Output", cid, in_ports=out_types)
            case_env = {n: (inp, len(row) + j) for j, n in enumerate(names)}
            with self.inside(cid):
                case(k, case_env, out, [(inp, j) for j in range(len(row))])
        return cond

    def branch_values(self, pred: Wire, names: list[str], env: dict, out_types, fns) -> list[Wire]:
        """Two-way Conditional on a bool; each ``fns[k](case_env)`` returns output values."""

        def case(k, case_env, out, _):
            values = fns[k](case_env)
            if values is None:
                self.unreachable(case_env, Exit("function", out))
                return
            self.sink_leftovers(case_env)
            for j, v in enumerate(values):
                self.b.connect(self.wire(v), (out, j))

        cond = self.conditional(pred, names, env, out_types, [(), ()], case)
        return [(cond, j) for j in range(len(out_types))]

    # --- statements ---

    def seq(self, stmts: list[ast.Stmt], env: dict) -> dict | None:
        for s in stmts:
            if isinstance(s, (ast.While, ast.For)) and infinite(s) and not breaks_out(s):
                self.stmt(s, env)
                return None
            self.stmt(s, env)
        return env

    def stmt(self, s: ast.Stmt, env: dict) -> None:
        if isinstance(s, ast.Assign):
            self.bind(s.target, self.expr(s.value, env), env)
        elif isinstance(s, ast.AugAssign):
            res, name = s.resolved
            lhs = self.expr(name, env)
            rhs = self.expr(s.value, env)
            env[s.target.id] = self.arith(res, lhs, rhs)
        elif isinstance(s, ast.ExprStmt):
            self.expr(s.value, env)
        elif isinstance(s, ast.Pass):
            pass
        elif isinstance(s, ast.If):
            self.if_stmt(s, env)
        elif isinstance(s, ast.While):
            self.loop(s, env, None)
        elif isinstance(s, ast.For):
            self.seq(s.protocol.init, env)
            self.loop(s, env, s.protocol)
        elif isinstance(s, ast.FunctionDef):
            self.def_stmt(s, env)
        else:
            raise LoweringError(f"unexpected statement {type(s).__name__} in structured region")

    def def_stmt(self, s: ast.FunctionDef, env: dict) -> None:
        self.mod.nested(s)
        parts = [env[name] for name, _, _ in s.captures]
        env[s.name] = self.wire(VTuple(parts))

    def bind(self, p: ast.Pattern, v, env: dict) -> None:
        if isinstance(p, ast.NamePattern):
            if isinstance(p.ty, Conflict):
                return
            env[p.id] = self.wire(v)
            return
        for sub, part in zip(p.elts, self.unpack(v, len(p.elts))):
            self.bind(sub, part, env)

    def if_stmt(self, s: ast.If, env: dict) -> None:
        pred = self.expr(s.test, env)
        assigned = names_assigned(s)
        touched = names_read(s) | assigned
        names = sorted(n for n in env if n in touched)
        linear_in = {n for n in names if _ty_linear(self.ty(env[n]))}
        outs = [n for n in s.join_vars if n in assigned or n in linear_in]
        out_types = [s.join_vars[n] for n in outs]

        def branch(stmts):
            def fn(case_env):
                if self.seq(stmts, case_env) is None:
                    return None
                return [self.take(case_env, n) for n in outs]

            return fn

        cond_outs = self.branch_values(pred, names, env, out_types, [branch(s.orelse), branch(s.body)])
        for n in assigned:
            env.pop(n, None)
        for n, w in zip(outs, cond_outs):
            env[n] = w

    def escaping_if(self, s: ast.If, rest: list[ast.Stmt], env: dict, ex: Exit) -> None:
        pred = self.expr(s.test, env)
        names = sorted(env)
        out_types = list(self.b.node(ex.output).in_ports)

        def case(k, case_env, out, _):
            body = (s.orelse if k == 0 else s.body) + rest
            self.block(body, case_env, _retarget(ex, out))

        cond = self.conditional(pred, names, env, out_types, [(), ()], case)
        for j in range(len(out_types)):
            self.b.connect((cond, j), (ex.output, j))

    def loop(self, s, env: dict, proto) -> None:
        touched = names_read(s) | names_assigned(s)
        carried = [n for n in s.head_vars if n in touched and n in env]
        assigned = names_assigned(s)
        exits = not (infinite(s) and not breaks_out(s))
        brk = [n for n in s.exit_vars if n in carried or n in assigned] if exits else []
        carried_w = [self.take(env, n) for n in carried]
        carried_t = [self.ty(w) for w in carried_w]
        # break-row types: carried vars keep their type; others are discovered in the body
        known = dict(zip(carried, carried_t))
        brk_types = [known.get(n, s.exit_vars.get(n)) for n in brk]
        sum_t = SumType((tuple(carried_t), tuple(brk_types)))
        loop = self.node("TailLoop", carried_w, brk_types)
        inp = self.b.add_node("Input", loop, out_ports=carried_t)
        out = self.b.add_node("Output", loop, in_ports=[sum_t])
        ex = Exit(
            "loop",
            out,
            carried=carried,
            break_row=list(zip(brk, brk_types)),
            sum_type=sum_t,
        )
        body_env = {n: (inp, k) for k, n in enumerate(carried)}
        with self.inside(loop):
            if isinstance(s, ast.While):
                if infinite(s):
                    self.block(s.body, body_env, ex)
                else:
                    pred = self.expr(s.test, body_env)
                    self.loop_dispatch(pred, body_env, ex, [], s.body, [])
            else:
                self.seq(proto.cond, body_env)
                pred = body_env[proto.cond_var]
                del body_env[proto.cond_var]
                self.loop_dispatch(pred, body_env, ex, proto.finish, s.body, proto.next)
        for n in assigned:
            env.pop(n, None)
        for k, n in enumerate(brk):
            env[n] = (loop, k)

    def loop_dispatch(self, pred, env, ex: Exit, finish, body, nxt) -> None:
        names = sorted(env)

        def case(k, case_env, out, _):
            sub = _retarget(ex, out)
            if k == 0:
                self.seq(finish, case_env)
                row = [self.take(case_env, n) for n, _ in ex.break_row]
                self.finish(case_env, sub, self.tag(1, row, ex.sum_type))
            else:
                self.seq(nxt, case_env)
                self.block(body, case_env, sub)

        cond = self.conditional(pred, names, env, [ex.sum_type], [(), ()], case)
        self.b.connect((cond, 0), (ex.output, 0))

    # --- expressions ---

    def expr(self, e: ast.Expr, env: dict):
        v = self._expr(e, env)
        if e.coerce is not None and e.coerce != e.ty:
            v = self.convert(self.wire(v), e.ty, e.coerce)
        return v

    def convert(self, w: Wire, src: Type, dst: Type) -> Wire:
        if src == BOOL:
            w = (self.node("IntOp", [w], [INT], {"op": "from_bool"}), 0)
            src = INT
        if src == INT and dst == FLOAT:
            w = (self.node("FloatOp", [w], [FLOAT], {"op": "from_int"}), 0)
        return w

    def arith(self, res, lhs, rhs) -> Wire:
        kind = "FloatOp" if res.family == "float" else "IntOp"
        return (self.node(kind, [lhs, rhs], [res.operand], {"op": res.op}), 0)

    def compare(self, res, lhs, rhs) -> Wire:
        return (self.node("CmpOp", [lhs, rhs], [BOOL], {"op": res.op, "type": to_tag(res.operand)}), 0)

    def _expr(self, e: ast.Expr, env: dict):
        if isinstance(e, (ast.IntLit, ast.FloatLit, ast.BoolLit)):
            return self.const(e.value, e.ty)
        if isinstance(e, ast.NoneLit):
            return self.const(None, NONE)
        if isinstance(e, ast.PyExpr):
            return self.const(e.value, e.ty)
        if isinstance(e, ast.Name):
            return self.name(e, env)
        if isinstance(e, ast.UnaryOp):
            v = self.expr(e.operand, env)
            res = e.resolved
            if res.op == "pos":
                return v
            kind = {"cmp": "CmpOp", "int": "IntOp", "float": "FloatOp"}[res.family]
            payload = {"op": res.op}
            return (self.node(kind, [v], [res.operand], payload), 0)
        if isinstance(e, ast.BinOp):
            return self.arith(e.resolved, self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, ast.Compare):
            return self.compare(e.resolved, self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, ast.BoolOp):
            return self.bool_op(e.op, e.values, env)
        if isinstance(e, ast.Chain):
            return self.chain(e, env)
        if isinstance(e, ast.IfExp):
            return self.if_exp(e, env)
        if isinstance(e, ast.Call):
            return self.call(e, env)
        if isinstance(e, ast.MethodCall):
            return self.method_call(e, env)
        if isinstance(e, ast.TupleExpr):
            return VTuple(self.expr(x, env) for x in e.elts)
        if isinstance(e, ast.ListExpr):
            elem = e.ty.element
            acc = (self.node("ListOp", [], [e.ty], {"op": "nil", "elem": to_tag(elem)}), 0)
            for x in e.elts:
                v = self.expr(x, env)
                acc = (self.node("ListOp", [acc, v], [e.ty], {"op": "cons", "elem": to_tag(elem)}), 0)
            return acc
        if isinstance(e, ast.ListComp):
            return self.list_comp(e, env)
        if isinstance(e, ast.Subscript):
            v = self.expr(e.value, env)
            if e.builtin == "get":
                idx = self.expr(e.index, env)
                lt = e.value.ty
                return (self.node("ListOp", [v, idx], [lt.element], {"op": "get", "elem": to_tag(lt.element)}), 0)
            _, k = e.builtin
            return self.unpack(v, len(e.value.ty.elements))[k]
        raise LoweringError(f"unexpected expression {type(e).__name__}")

    def name(self, e: ast.Name, env: dict):
        if e.binding == "local":
            if e.id not in env:
                raise LoweringError(f"variable {e.id!r} has no wire")
            return self.take(env, e.id)
        if e.binding == "localfn":
            f = e.fn_def
            ft = f.sig.ftype
            if f.captures:
                return (self.node("LoadFunction", [env[e.id]], [ft], {"target": f.lifted_name, "env": True}), 0)
            return (self.node("LoadFunction", [], [ft], {"target": f.lifted_name, "env": False}), 0)
        if e.binding == "global":
            return (self.node("LoadFunction", [], [e.ty], {"target": e.id, "env": False}), 0)
        if e.binding == "builtin":
            target = self.mod.builtin_wrapper(e.id)
            return (self.node("LoadFunction", [], [e.ty], {"target": target, "env": False}), 0)
        raise LoweringError(f"unresolved name {e.id!r}")

    def call(self, e: ast.Call, env: dict):
        if e.target == "builtin":
            return self.builtin(e, env)
        if e.target == "global":
            args = [self.expr(a, env) for a in e.args]
            ft = e.func.ty
            return (self.node("Call", args, [ft.result], {"target": e.func.id}, in_types=list(ft.params)), 0)
        if e.target == "localfn":
            f = e.func.fn_def
            args = [self.expr(a, env) for a in e.args]
            in_types = list(f.sig.ftype.params)
            if f.captures:
                args.append(env[e.func.id])
                in_types.append(env_type(f))
            return (self.node("Call", args, [f.sig.result], {"target": f.lifted_name}, in_types=in_types), 0)
        fn = self.expr(e.func, env)
        args = [self.expr(a, env) for a in e.args]
        ft = self.ty(self.wire(fn))
        return (self.node("CallIndirect", [fn] + args, [ft.result], in_types=[ft, *ft.params]), 0)

    def builtin(self, e: ast.Call, env: dict):
        name = e.builtin
        if name in bi.GATES:
            params, result, op = bi.GATES[name]
            args = [self.expr(a, env) for a in e.args]
            outs = {"cx": [QUBIT, QUBIT], "zz": [QUBIT, QUBIT], "measure": [BOOL], "discard": []}.get(
                op, [QUBIT]
            )
            nid = self.node("QuantumOp", args, outs, {"op": op}, in_types=list(params))
            if len(outs) == 2:
                return VTuple([(nid, 0), (nid, 1)])
            if not outs:
                return self.const(None, NONE)
            return (nid, 0)
        lt = e.args[0].ty
        lst = self.expr(e.args[0], env)
        elem = to_tag(lt.element)
        if name == "len":
            outs = [INT, lt] if lt.linear else [INT]
            nid = self.node("ListOp", [lst], outs, {"op": "len", "elem": elem})
            return VTuple([(nid, 0), (nid, 1)]) if lt.linear else (nid, 0)
        if name == "get":
            return self.list_get(lst, lt, self.expr(e.args[1], env))
        if name == "free":
            self.node("ListOp", [lst], [], {"op": "free", "elem": elem})
            return self.const(None, NONE)
        raise LoweringError(f"unknown builtin {name!r}")

    def list_get(self, lst, lt: ListType, idx):
        outs = [lt.element, lt] if lt.linear else [lt.element]
        nid = self.node("ListOp", [lst, idx], outs, {"op": "get", "elem": to_tag(lt.element)})
        return VTuple([(nid, 0), (nid, 1)]) if lt.linear else (nid, 0)

    def method_call(self, e: ast.MethodCall, env: dict):
        lt = e.receiver.ty
        lst = self.expr(e.receiver, env)
        if e.method == "get":
            return self.list_get(lst, lt, self.expr(e.args[0], env))
        _, k = e.builtin
        fn = self.expr(e.args[0], env)
        idx = self.expr(e.args[1], env)
        idxs = [idx] if k == 1 else self.unpack(idx, k)
        return (
            self.node(
                "ListOp",
                [lst, fn, *idxs],
                [lt],
                {"op": "apply-idx", "elem": to_tag(lt.element), "arity": k},
            ),
            0,
        )

    def bool_op(self, op: str, values: list[ast.Expr], env: dict) -> Wire:
        first = self.expr(values[0], env)
        if len(values) == 1:
            return first
        rest = values[1:]
        names = sorted(n for n in env if any(n in names_read_expr(v) for v in rest))

        def short(case_env):
            self.sink_leftovers(case_env)
            return [self.const(op == "or", BOOL)]

        def long(case_env):
            return [self.bool_op(op, rest, case_env)]

        fns = [short, long] if op == "and" else [long, short]
        return self.branch_values(first, names, env, [BOOL], fns)[0]

    def chain(self, e: ast.Chain, env: dict) -> Wire:
        operands = e.operands
        pairs = e.resolved

        def coerce(w, c, src):
            return self.convert(w, src, c) if c is not None and c != src else w

        left = self.wire(self.expr(operands[0], env))
        right = self.wire(self.expr(operands[1], env))

        def step(k: int, lhs: Wire, rhs: Wire, scope: dict) -> Wire:
            res, (lc, rc) = pairs[k]
            r = self.compare(
                res,
                coerce(lhs, lc, operands[k].ty),
                coerce(rhs, rc, operands[k + 1].ty),
            )
            if k + 2 >= len(operands):
                return r
            later = operands[k + 2:]
            names = sorted(n for n in scope if any(n in names_read_expr(v) for v in later))
            scope["%chain"] = rhs

            def long(case_env):
                prev = case_env.pop("%chain")
                nxt = self.wire(self.expr(operands[k + 2], case_env))
                return [step(k + 1, prev, nxt, case_env)]

            def short(case_env):
                return [self.const(False, BOOL)]

            out = self.branch_values(r, names + ["%chain"], scope, [BOOL], [short, long])[0]
            scope.pop("%chain", None)
            return out

        return step(0, left, right, env)

    def if_exp(self, e: ast.IfExp, env: dict):
        pred = self.expr(e.test, env)
        names = sorted(
            n for n in env if n in names_read_expr(e.body) or n in names_read_expr(e.orelse)
        )
        conflict = isinstance(e.ty, Conflict)
        out_types = [] if conflict else [e.ty]

        def branch(x):
            def fn(case_env):
                v = self.expr(x, case_env)
                return [] if conflict else [v]

            return fn

        outs = self.branch_values(pred, names, env, out_types, [branch(e.orelse), branch(e.body)])
        for n in names:
            if n in env and _ty_linear(self.ty(env[n])):
                del env[n]
        return self.const(None, NONE) if conflict else outs[0]

    def list_comp(self, e: ast.ListComp, env: dict) -> Wire:
        proto = e.protocol
        targets = set(_pattern_names(e.target))
        scope = {n: w for n, w in env.items() if n not in targets}
        self.seq(proto.init, scope)
        for n in list(env):
            if n not in scope and n not in targets:
                del env[n]  # consumed by the iterable
        reads = names_read_expr(e.elt) - targets
        free = sorted(n for n in scope if n in reads and not n.startswith("%"))
        carried = list(proto.state) + free
        acc_t: ListType = e.ty
        acc = (self.node("ListOp", [], [acc_t], {"op": "nil", "elem": to_tag(acc_t.element)}), 0)
        carried_w = [scope[n] for n in carried] + [acc]
        carried_t = [self.ty(w) for w in carried_w]
        sum_t = SumType((tuple(carried_t), (acc_t,)))
        loop = self.node("TailLoop", carried_w, [acc_t])
        inp = self.b.add_node("Input", loop, out_ports=carried_t)
        out = self.b.add_node("Output", loop, in_ports=[sum_t])
        names = carried + ["%acc"]
        body_env = {n: (inp, k) for k, n in enumerate(names)}
        with self.inside(loop):
            self.seq(proto.cond, body_env)
            pred = body_env.pop(proto.cond_var)

            def case(k, case_env, cout, _):
                if k == 0:
                    self.seq(proto.finish, case_env)
                    row = [case_env.pop("%acc")]
                    self.sink_leftovers(case_env)
                    self.b.connect(self.tag(1, row, sum_t)[0], (cout, 0))
                else:
                    self.seq(proto.next, case_env)
                    v = self.expr(e.elt, case_env)
                    a = case_env.pop("%acc")
                    a = (self.node("ListOp", [a, v], [acc_t], {"op": "cons", "elem": to_tag(acc_t.element)}), 0)
                    row = [self.take(case_env, n) for n in carried] + [a]
                    self.sink_leftovers(case_env)
                    self.b.connect(self.tag(0, row, sum_t)[0], (cout, 0))

            cond = self.conditional(pred, sorted(body_env), body_env, [sum_t], [(), ()], case)
            self.b.connect((cond, 0), (out, 0))
        for n in proto.state:
            scope.pop(n, None)
        return (loop, 0)


# --- helpers ------------------------------------------------------------------------


def _retarget(ex: Exit, output: int) -> Exit:
    return Exit(ex.kind, output, ex.result, ex.carried, ex.break_row, ex.sum_type)


def _ty_linear(t: Type) -> bool:
    return t.linear


def _pattern_names(p: ast.Pattern) -> list[str]:
    if isinstance(p, ast.NamePattern):
        return [p.id]
    return [n for x in p.elts for n in _pattern_names(x)]


def names_read_expr(e: ast.Expr) -> set[str]:
    return names_read(ast.ExprStmt(e))


def _json_value(value):
    if isinstance(value, tuple):
        return [_json_value(v) for v in value]
    if isinstance(value, list):
        return [_json_value(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        raise LoweringError("non-finite float constant")
    return value
