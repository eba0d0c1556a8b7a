"""Lowering of a whole function body to a CFG of basic blocks."""
from __future__ import annotations

from dataclasses import dataclass, field

from guppyc.frontend import nodes as ast
from guppyc.ir.ports import CONTROL, SumType, port_tag
from guppyc.lower.core import FnLowerer, names_read_expr
from guppyc.typecheck.checker import names_assigned, names_read
from guppyc.typecheck.types import BOOL, NONE

EXIT = -1


@dataclass
class Block:
    idx: int
    items: list[ast.Stmt] = field(default_factory=list)
    term: tuple | None = None

    def successors(self) -> list[int]:
        t = self.term
        if t[0] == "jump":
            return [t[1]]
        if t[0] == "branch":
            return [t[2], t[3]]
        return [EXIT]


class _Builder:
    def __init__(self):
        self.blocks: list[Block] = []
        self.loops: list[tuple[int, int]] = []

    def new(self) -> Block:
        b = Block(len(self.blocks))
        self.blocks.append(b)
        return b

    def seq(self, stmts: list[ast.Stmt], cur: Block | None) -> Block | None:
        for s in stmts:
            if cur is None:
                return None
            cur = self.stmt(s, cur)
        return cur

    def stmt(self, s: ast.Stmt, cur: Block) -> Block | None:
        if isinstance(s, (ast.Assign, ast.AugAssign, ast.ExprStmt, ast.Pass, ast.FunctionDef)):
            cur.items.append(s)
            return cur
        if isinstance(s, ast.Return):
            cur.term = ("return", s.value)
            return None
        if isinstance(s, ast.Break):
            cur.term = ("jump", self.loops[-1][1])
            return None
        if isinstance(s, ast.Continue):
            cur.term = ("jump", self.loops[-1][0])
            return None
        if isinstance(s, ast.If):
            then_b, else_b = self.new(), self.new()
            cur.term = ("branch", s.test, else_b.idx, then_b.idx)
            ends = [e for e in (self.seq(s.body, then_b), self.seq(s.orelse, else_b)) if e is not None]
            if not ends:
                return None
            join = self.new()
            for e in ends:
                e.term = ("jump", join.idx)
            return join
        if isinstance(s, ast.While):
            head, body, after = self.new(), self.new(), self.new()
            cur.term = ("jump", head.idx)
            forever = isinstance(s.test, ast.BoolLit) and s.test.value
            head.term = ("branch", None if forever else s.test, after.idx, body.idx)
            return self.loop(s, head, body, after, forever)
        if isinstance(s, ast.For):
            proto = s.protocol
            cur.items.extend(proto.init)
            head, body, fin, after = self.new(), self.new(), self.new(), self.new()
            cur.term = ("jump", head.idx)
            head.items.extend(proto.cond)
            cond = ast.Name(proto.cond_var, span=s.span)
            cond.ty, cond.binding = BOOL, "local"
            head.term = ("branch", cond, fin.idx, body.idx)
            body.items.extend(proto.next)
            fin.items.extend(proto.finish)
            fin.term = ("jump", after.idx)
            return self.loop(s, head, body, after, False)
        raise TypeError(f"unexpected statement {type(s).__name__}")

    def loop(self, s, head: Block, body: Block, after: Block, forever: bool) -> Block | None:
        self.loops.append((head.idx, after.idx))
        end = self.seq(s.body, body)
        self.loops.pop()
        if end is not None:
            end.term = ("jump", head.idx)
        if forever and not _has_break(s.body):
            after.term = ("unreachable",)
            return None
        return after


def _has_break(stmts, depth: int = 0) -> bool:
    for x in stmts:
        if isinstance(x, ast.Break) and depth == 0:
            return True
        if isinstance(x, ast.If) and (_has_break(x.body, depth) or _has_break(x.orelse, depth)):
            return True
        if isinstance(x, (ast.While, ast.For)) and _has_break(x.body, depth + 1):
            return True
    return False


def build_blocks(body: list[ast.Stmt]) -> list[Block]:
    bb = _Builder()
    entry = bb.new()
    end = bb.seq(body, entry)
    if end is not None:
        end.term = ("return", None)
    return bb.blocks


def reverse_postorder(blocks: list[Block]) -> list[Block]:
    seen, order = set(), []

    def dfs(i: int) -> None:
        stack = [(i, iter(blocks[i].successors()))]
        seen.add(i)
        while stack:
            node, it = stack[-1]
            for s in it:
                if s != EXIT and s not in seen:
                    seen.add(s)
                    stack.append((s, iter(blocks[s].successors())))
                    break
            else:
                stack.pop()
                order.append(node)

    dfs(0)
    return [blocks[i] for i in reversed(order)]


def liveness(blocks: list[Block], params: set[str]) -> dict[int, set[str]]:
    local = set(params)
    for b in blocks:
        for s in b.items:
            local |= names_assigned(s)
    uses, defs = {}, {}
    for b in blocks:
        u, d = set(), set()
        for s in b.items:
            u |= names_read(s) - d
            d |= names_assigned(s)
        t = b.term
        if t is not None and t[0] == "branch" and t[1] is not None:
            u |= names_read_expr(t[1]) - d
        if t is not None and t[0] == "return" and t[1] is not None:
            u |= names_read_expr(t[1]) - d
        uses[b.idx], defs[b.idx] = u & local, d
    live = {b.idx: set() for b in blocks}
    changed = True
    while changed:
        changed = False
        for b in reversed(blocks):
            if b.term is None:
                continue
            out = set()
            for s in b.successors():
                if s != EXIT:
                    out |= live[s]
            new = uses[b.idx] | (out - defs[b.idx])
            if new != live[b.idx]:
                live[b.idx] = new
                changed = True
    return live


def lower_cfg(fl: FnLowerer, cfg: int) -> None:
    b = fl.b
    blocks = build_blocks(fl.f.body)
    order = reverse_postorder(blocks)
    f = fl.f
    params = {n for n, _ in f.sig.params} | {n for n, _, _ in f.captures or ()}
    if f.lifted_name != f.name:
        params.add(f.name)
    live = liveness(blocks, params)
    result = fl.result
    input_types: dict[int, list] = {0: list(fl.params)}
    ids: dict[int, int] = {}
    succs: dict[int, list[int]] = {}

    def row_names(s: int) -> list[str]:
        return [] if s == EXIT else sorted(live[s])

    for blk in order:
        kind = "entry" if blk.idx == 0 else "dataflow"
        types = input_types[blk.idx]
        bid = b.add_node(
            "BasicBlock", cfg, [CONTROL], [], {"block": kind, "inputs": [port_tag(t) for t in types]}
        )
        ids[blk.idx] = bid
        inp = b.add_node("Input", bid, out_ports=types)
        out = b.add_node("Output", bid, in_ports=[])
        with fl.inside(bid):
            wires = [(inp, k) for k in range(len(types))]
            if blk.idx == 0:
                env = fl.entry_env(wires)
            else:
                env = dict(zip(row_names(blk.idx), wires))
            for s in blk.items:
                fl.stmt(s, env)
            t = blk.term
            targets = blk.successors()
            if t[0] == "return":
                value = fl.expr(t[1], env) if t[1] is not None else fl.const(None, NONE)
                rows = [[value]]
            elif t[0] == "unreachable":
                rows = [[fl.dummy(result)]]
            else:
                rows = None
            if rows is not None:
                sum_t = SumType(((result,),))
                tag = fl.tag(0, [fl.wire(v) for v in rows[0]], sum_t)[0]
            elif t[0] == "jump":
                names = row_names(t[1])
                row = [fl.take(env, n) for n in names]
                _record(input_types, t[1], [fl.ty(w) for w in row])
                sum_t = SumType((tuple(fl.ty(w) for w in row),))
                tag = fl.tag(0, row, sum_t)[0]
            else:
                pred = fl.expr(t[1], env) if t[1] is not None else fl.const(True, BOOL)
                name_rows = [row_names(t[2]), row_names(t[3])]
                union = sorted(set(name_rows[0]) | set(name_rows[1]))
                type_of = {n: fl.ty(env[n]) for n in union}
                for tgt, names in zip((t[2], t[3]), name_rows):
                    _record(input_types, tgt, [type_of[n] for n in names])
                sum_t = SumType(tuple(tuple(type_of[n] for n in names) for names in name_rows))

                def case(k, case_env, cout, _, name_rows=name_rows, sum_t=sum_t):
                    row = [fl.take(case_env, n) for n in name_rows[k]]
                    w = fl.tag(k, row, sum_t)[0]
                    fl.sink_leftovers(case_env)
                    b.connect(w, (cout, 0))

                cond = fl.conditional(pred, union, env, [sum_t], [(), ()], case)
                tag = (cond, 0)
            fl.sink_leftovers(env)
            b.set_ports(out, in_ports=[sum_t])
            b.connect(tag, (out, 0))
        b.set_ports(bid, out_ports=[CONTROL] * len(targets))
        succs[bid] = targets

    exit_id = b.add_node(
        "BasicBlock", cfg, [CONTROL], [], {"block": "exit", "inputs": [port_tag(result)]}
    )
    for bid, targets in succs.items():
        for k, s in enumerate(targets):
            b.connect((bid, k), (exit_id if s == EXIT else ids[s], 0))


def _record(input_types: dict, target: int, types: list) -> None:
    input_types.setdefault(target, types)
