"""Structural validation of frozen graphs (rules 1-8)."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter

from guppyc.ir.graph import LIST_OPS, QUANTUM_OPS, Graph, Node
from guppyc.ir.ports import CONTROL, SumType, parse_port_tag, same_port, same_row
from guppyc.typecheck.types import (
    BOOL,
    FLOAT,
    INT,
    QUBIT,
    FunctionType,
    ListType,
    TagError,
    TupleType,
)


@dataclass(frozen=True)
class Violation:
    rule: int
    message: str
    node: int | None = None

    def __str__(self) -> str:
        where = f" (node {self.node})" if self.node is not None else ""
        return f"rule {self.rule}{where}: {self.message}"


class ValidationError(Exception):
    def __init__(self, violations: list[Violation]):
        super().__init__("; ".join(map(str, violations[:5])))
        self.violations = violations


def validate(g: Graph) -> list[Violation]:
    """All violations, grouped by rule in ascending order; empty means valid."""
    out: list[Violation] = []
    _rule1(g, out)
    if out:
        return out  # later rules assume a well-formed hierarchy
    _rule2(g, out)
    _rule3(g, out)
    _rule4(g, out)
    _rule5(g, out)
    _rule6(g, out)
    _rule7(g, out)
    _rule8(g, out)
    return out


def check(g: Graph) -> Graph:
    violations = validate(g)
    if violations:
        raise ValidationError(violations)
    return g


# --- rule 1: hierarchy ------------------------------------------------------------

_ALLOWED_CHILDREN = {
    "Module": {"FuncDefn"},
    "Conditional": {"Case"},
    "CFG": {"BasicBlock"},
}


def _rule1(g: Graph, out: list[Violation]) -> None:
    root = g.nodes.get(g.root)
    if root is None or root.kind != "Module" or root.parent is not None:
        out.append(Violation(1, "root must be a parentless Module node", g.root))
        return
    for n in g.nodes.values():
        if n.id != g.root and (n.parent is None or n.parent not in g.nodes):
            out.append(Violation(1, "node has no valid parent", n.id))
    if out:
        return
    # every node must reach the root without revisiting
    for n in g.nodes.values():
        seen = set()
        cur = n
        while cur.parent is not None:
            if cur.id in seen:
                out.append(Violation(1, "parent chain contains a cycle", n.id))
                break
            seen.add(cur.id)
            cur = g.nodes[cur.parent]
    if out:
        return
    names = set()
    for n in g.nodes.values():
        kids = [g.nodes[c] for c in g.children(n.id)]
        if kids and not n.container:
            out.append(Violation(1, f"leaf node of kind {n.kind} has children", n.id))
            continue
        allowed = _ALLOWED_CHILDREN.get(n.kind)
        if allowed is not None:
            for k in kids:
                if k.kind not in allowed:
                    out.append(Violation(1, f"{n.kind} may not contain a {k.kind}", k.id))
        elif n.dataflow:
            if len(kids) < 2 or kids[0].kind != "Input" or kids[1].kind != "Output":
                out.append(Violation(1, "dataflow container must start with Input and Output", n.id))
            for k in kids[2:]:
                if k.kind in ("Input", "Output", "FuncDefn", "Case", "BasicBlock", "Module"):
                    out.append(Violation(1, f"{k.kind} not allowed inside a dataflow container", k.id))
        if n.kind == "FuncDefn":
            name = n.payload.get("name")
            if name in names:
                out.append(Violation(1, f"duplicate function name {name!r}", n.id))
            names.add(name)
        if n.kind == "Conditional":
            idx = sorted(k.payload.get("index", -1) for k in kids)
            if idx != list(range(len(kids))):
                out.append(Violation(1, "Case indices must be 0..n-1 exactly once", n.id))
        if n.kind == "Case" and g.nodes[n.parent].kind != "Conditional":
            out.append(Violation(1, "Case outside a Conditional", n.id))
        if n.kind == "BasicBlock" and g.nodes[n.parent].kind != "CFG":
            out.append(Violation(1, "BasicBlock outside a CFG", n.id))


# --- rule 2: port types -----------------------------------------------------------


def _rule2(g: Graph, out: list[Violation]) -> None:
    for e in sorted(g.edges):
        s, d = g.nodes.get(e.src), g.nodes.get(e.dst)
        if s is None or d is None:
            out.append(Violation(2, f"edge {tuple(e)} references a missing node"))
            continue
        if e.src_port >= len(s.out_ports) or e.dst_port >= len(d.in_ports):
            out.append(Violation(2, f"edge {tuple(e)} references a missing port", e.dst))
            continue
        st, dt = s.out_ports[e.src_port], d.in_ports[e.dst_port]
        if not same_port(st, dt):
            out.append(Violation(2, f"edge {tuple(e)} connects {st} to {dt}", e.dst))
    funcs = g.functions()
    for n in g.nodes.values():
        try:
            msg = _signature_problem(g, n, funcs)
        except (TagError, KeyError, TypeError, ValueError) as exc:
            msg = f"malformed payload: {exc}"
        if msg:
            out.append(Violation(2, msg, n.id))


def _fn_sig(g: Graph, fid: int):
    p = g.nodes[fid].payload
    params = [parse_port_tag(t) for t in p["params"]]
    return params, parse_port_tag(p["result"]), bool(p.get("env"))


_Q1 = {"h", "x", "z", "t", "tdg"}
_INT_BIN = {"add", "sub", "mul", "floordiv", "mod", "and", "or", "xor", "shl", "shr"}
_INT_UN = {"neg", "pos", "invert"}
_FLOAT_BIN = {"add", "sub", "mul", "div"}
_CMP = {"lt", "le", "gt", "ge", "eq", "ne"}


def _expected(g: Graph, n: Node, funcs):
    k, p = n.kind, n.payload
    if k == "QuantumOp":
        op = p["op"]
        if op not in QUANTUM_OPS:
            raise ValueError(f"unknown quantum op {op!r}")
        return {
            "qalloc": ([], [QUBIT]),
            "rz": ([QUBIT, FLOAT], [QUBIT]),
            "cx": ([QUBIT, QUBIT], [QUBIT, QUBIT]),
            "zz": ([QUBIT, QUBIT], [QUBIT, QUBIT]),
            "measure": ([QUBIT], [BOOL]),
            "discard": ([QUBIT], []),
        }.get(op, ([QUBIT], [QUBIT]))
    if k == "IntOp":
        op = p["op"]
        if op in _INT_BIN:
            return [INT, INT], [INT]
        if op in _INT_UN:
            return [INT], [INT]
        if op == "from_bool":
            return [BOOL], [INT]
        raise ValueError(f"unknown int op {op!r}")
    if k == "FloatOp":
        op = p["op"]
        if op in _FLOAT_BIN:
            return [FLOAT, FLOAT], [FLOAT]
        if op in ("neg", "pos"):
            return [FLOAT], [FLOAT]
        if op == "from_int":
            return [INT], [FLOAT]
        raise ValueError(f"unknown float op {op!r}")
    if k == "CmpOp":
        op = p["op"]
        if op == "not":
            return [BOOL], [BOOL]
        if op not in _CMP:
            raise ValueError(f"unknown comparison {op!r}")
        t = parse_port_tag(p["type"])
        return [t, t], [BOOL]
    if k == "MakeTuple":
        return list(n.in_ports), [TupleType(tuple(n.in_ports))]
    if k == "UnpackTuple":
        return [TupleType(tuple(n.out_ports))], list(n.out_ports)
    if k == "Tag":
        rows = parse_port_tag({"sum": p["rows"]}).rows
        return list(rows[p["tag"]]), [SumType(rows)]
    if k == "ListOp":
        return _list_sig(p)
    if k == "Call":
        params, result, _ = _fn_sig(g, funcs[p["target"]])
        return params, [result]
    if k == "LoadFunction":
        params, result, env = _fn_sig(g, funcs[p["target"]])
        ft = FunctionType(tuple(params[:-1] if env else params), result)
        return (params[-1:] if env else []), [ft]
    if k == "CallIndirect":
        ft = n.in_ports[0] if n.in_ports else None
        if not isinstance(ft, FunctionType):
            raise ValueError("first in-port of CallIndirect must be a function")
        return [ft, *ft.params], [ft.result]
    if k == "Const":
        if len(n.out_ports) != 1 or n.in_ports:
            raise ValueError("Const has exactly one out-port and no in-ports")
        return None
    return None


def _list_sig(p):
    op = p["op"]
    if op not in LIST_OPS:
        raise ValueError(f"unknown list op {op!r}")
    elem = parse_port_tag(p["elem"])
    lt = ListType(elem)
    lin = elem.linear
    if op == "nil":
        return [], [lt]
    if op == "cons":
        return [lt, elem], [lt]
    if op == "get":
        return [lt, INT], ([elem, lt] if lin else [elem])
    if op == "len":
        return [lt], ([INT, lt] if lin else [INT])
    if op == "free":
        return [lt], []
    k = p["arity"]
    res = elem if k == 1 else TupleType((elem,) * k)
    return [lt, FunctionType((elem,) * k, res), *([INT] * k)], [lt]


def _signature_problem(g: Graph, n: Node, funcs) -> str | None:
    if n.kind in ("Call", "LoadFunction") and n.payload.get("target") not in funcs:
        return f"unknown function {n.payload.get('target')!r}"
    if n.kind == "FuncDefn":
        params, result, _ = _fn_sig(g, n.id)
        i, o = g.io(n.id)
        if not same_row(g.nodes[i].out_ports, params):
            return "function Input ports do not match its signature"
        if not same_row(g.nodes[o].in_ports, [result]):
            return "function Output ports do not match its signature"
        return None
    exp = _expected(g, n, funcs)
    if exp is None:
        return None
    ins, outs = exp
    if not same_row(n.in_ports, ins) or not same_row(n.out_ports, outs):
        return f"{n.kind} ports do not match its operation signature"
    return None


# --- rule 3: linear degree ----------------------------------------------------------


def _rule3(g: Graph, out: list[Violation]) -> None:
    outdeg: dict[tuple[int, int], int] = defaultdict(int)
    indeg: dict[tuple[int, int], int] = defaultdict(int)
    for e in g.edges:
        outdeg[(e.src, e.src_port)] += 1
        indeg[(e.dst, e.dst_port)] += 1
    for n in g.nodes.values():
        for k, t in enumerate(n.out_ports):
            if t.linear and outdeg[(n.id, k)] != 1:
                out.append(
                    Violation(
                        3,
                        f"linear out-port {k} ({t}) has {outdeg[(n.id, k)]} consumers, expected 1",
                        n.id,
                    )
                )
        for k, t in enumerate(n.in_ports):
            if t == CONTROL:
                continue
            if indeg[(n.id, k)] != 1:
                label = "linear in-port" if t.linear else "in-port"
                out.append(
                    Violation(3, f"{label} {k} ({t}) has {indeg[(n.id, k)]} sources, expected 1", n.id)
                )


# --- rule 4: locality ---------------------------------------------------------------


def _rule4(g: Graph, out: list[Violation]) -> None:
    for e in sorted(g.edges):
        s, d = g.nodes[e.src], g.nodes[e.dst]
        t = s.out_ports[e.src_port] if e.src_port < len(s.out_ports) else None
        if t == CONTROL:
            if s.kind != "BasicBlock" or d.kind != "BasicBlock" or s.parent != d.parent:
                out.append(Violation(4, f"control edge {tuple(e)} must join sibling blocks", e.dst))
            continue
        if s.parent != d.parent:
            out.append(Violation(4, f"value edge {tuple(e)} crosses containers", e.dst))
            continue
        if not g.nodes[s.parent].dataflow:
            out.append(Violation(4, f"value edge {tuple(e)} outside a dataflow container", e.dst))


# --- rule 5: acyclicity ---------------------------------------------------------------


def _rule5(g: Graph, out: list[Violation]) -> None:
    for n in g.nodes.values():
        if not n.dataflow:
            continue
        kids = set(g.children(n.id))
        ts = TopologicalSorter({k: set() for k in kids})
        for k in kids:
            for e in g.in_edges(k):
                if e.src in kids:
                    ts.add(k, e.src)
        try:
            ts.prepare()
        except CycleError:
            out.append(Violation(5, "value edges form a cycle", n.id))


# --- rules 6-8: structured control flow ---------------------------------------------------


def _rule6(g: Graph, out: list[Violation]) -> None:
    for n in g.nodes.values():
        if n.kind != "Conditional":
            continue
        cases = g.children(n.id)
        pred = n.in_ports[0] if n.in_ports else None
        if not isinstance(pred, SumType) and pred != BOOL:
            out.append(Violation(6, "Conditional predicate must be a sum", n.id))
            continue
        rows = pred.rows if isinstance(pred, SumType) else ((), ())
        if len(rows) != len(cases):
            out.append(
                Violation(6, f"predicate has {len(rows)} variants but there are {len(cases)} Cases", n.id)
            )
            continue
        others = list(n.in_ports[1:])
        for c in cases:
            idx = g.nodes[c].payload["index"]
            i, o = g.io(c)
            if not same_row(g.nodes[i].out_ports, list(rows[idx]) + others):
                out.append(Violation(6, f"Case {idx} inputs do not match the Conditional", c))
            if not same_row(g.nodes[o].in_ports, n.out_ports):
                out.append(Violation(6, f"Case {idx} outputs do not match the Conditional", c))


def _rule7(g: Graph, out: list[Violation]) -> None:
    for n in g.nodes.values():
        if n.kind != "TailLoop":
            continue
        i, o = g.io(n.id)
        if not same_row(g.nodes[i].out_ports, n.in_ports):
            out.append(Violation(7, "loop body inputs must equal the loop inputs", n.id))
        ports = g.nodes[o].in_ports
        if len(ports) != 1 or not isinstance(ports[0], SumType) or len(ports[0].rows) != 2:
            out.append(Violation(7, "loop body must output a single two-variant sum", n.id))
            continue
        cont, brk = ports[0].rows
        if not same_row(cont, n.in_ports):
            out.append(Violation(7, "continue variant must equal the loop-carried row", n.id))
        if not same_row(brk, n.out_ports):
            out.append(Violation(7, "break variant must equal the loop outputs", n.id))


def _rule8(g: Graph, out: list[Violation]) -> None:
    for n in g.nodes.values():
        if n.kind != "CFG":
            continue
        blocks = [g.nodes[b] for b in g.children(n.id)]
        entries = [b for b in blocks if b.payload.get("block") == "entry"]
        exits = [b for b in blocks if b.payload.get("block") == "exit"]
        if len(entries) != 1 or len(exits) != 1:
            out.append(Violation(8, "CFG needs exactly one entry and one exit block", n.id))
            continue
        entry, exit_ = entries[0], exits[0]
        if blocks[0].id != entry.id:
            out.append(Violation(8, "entry block must be the first child", n.id))
        inputs = {}
        for b in blocks:
            inputs[b.id] = [parse_port_tag(t) for t in b.payload.get("inputs", [])]
            if list(b.in_ports) != [CONTROL]:
                out.append(Violation(8, "block must have a single control in-port", b.id))
        if not same_row(inputs[entry.id], n.in_ports):
            out.append(Violation(8, "entry block inputs must equal the CFG inputs", entry.id))
        if not same_row(inputs[exit_.id], n.out_ports):
            out.append(Violation(8, "exit block inputs must equal the CFG outputs", exit_.id))
        if exit_.out_ports:
            out.append(Violation(8, "exit block has successors", exit_.id))
        succ: dict[int, list[int]] = {}
        for b in blocks:
            if b.id == exit_.id:
                continue
            edges = {e.src_port: e.dst for e in g.out_edges(b.id)}
            ports = list(b.out_ports)
            if any(p != CONTROL for p in ports) or sorted(edges) != list(range(len(ports))):
                out.append(Violation(8, "each control out-port needs exactly one successor", b.id))
                continue
            succ[b.id] = [edges[k] for k in range(len(ports))]
            i, o = g.io(b.id)
            if not same_row(g.nodes[i].out_ports, inputs[b.id]):
                out.append(Violation(8, "block Input does not match its declared inputs", b.id))
            oports = g.nodes[o].in_ports
            if len(oports) != 1 or not isinstance(oports[0], SumType):
                out.append(Violation(8, "block must output a single sum", b.id))
                continue
            rows = oports[0].rows
            if len(rows) != len(ports):
                out.append(
                    Violation(8, f"block output sum has {len(rows)} variants for {len(ports)} successors", b.id)
                )
                continue
            for row, s in zip(rows, succ[b.id]):
                if s in inputs and not same_row(row, inputs[s]):
                    out.append(Violation(8, f"branch row does not match inputs of block {s}", b.id))
        seen, stack = {entry.id}, [entry.id]
        while stack:
            for s in succ.get(stack.pop(), ()):
                if s not in seen:
                    seen.add(s)
                    stack.append(s)
        for b in blocks:
            if b.id not in seen:
                out.append(Violation(8, "block unreachable from entry", b.id))
