"""Reference interpreter for validated graphs."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from guppyc.ir.graph import Graph
from guppyc.ir.ports import UNIT_BOOL, SumType, canon, parse_port_tag
from guppyc.sim.state import GATES, QuantumState, QubitHandle, rz
from guppyc.typecheck.types import BOOL, FLOAT, INT, ListType, QubitType, TupleType, Type

INT_MIN, INT_MAX = -(2**63), 2**63 - 1
DEFAULT_MAX_STEPS = 10_000_000


class SimRuntimeError(Exception):
    """A trap during execution; ``kind`` is a stable machine-readable name."""

    def __init__(self, kind: str, node: int | None, message: str = ""):
        super().__init__(f"{kind} at node {node}" + (f": {message}" if message else ""))
        self.kind = kind
        self.node = node
        self.message = message


@dataclass(frozen=True)
class FunctionRef:
    name: str
    env: Any = None


@dataclass(frozen=True)
class SumValue:
    tag: int
    values: tuple


@dataclass(frozen=True)
class Prepared:
    """Harness request for a fresh qubit in state alpha|0> + beta|1>."""

    alpha: complex = 1.0
    beta: complex = 0.0


@dataclass
class RunReport:
    result: Any
    measurements: list[tuple[int, bool]]
    qubits_leaked: int
    steps: int
    max_norm_deviation: float = field(default=0.0, compare=False)
    state: QuantumState | None = field(default=None, repr=False, compare=False)


def run(
    g: Graph,
    entry: str,
    args: list,
    seed: int = 0,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> RunReport:
    """Execute function ``entry`` of ``g``; qubit arguments are ``Prepared`` or ``"qubit"``."""
    return Interpreter(g, seed, max_steps).call_entry(entry, args)


def final_statevector(g: Graph, entry: str, args: list, seed: int = 0, max_steps=DEFAULT_MAX_STEPS):
    """Classical leaves of the result and the amplitudes over the returned qubits."""
    report = run(g, entry, args, seed, max_steps)
    qubits: list[QubitHandle] = []
    classical: list = []
    _split(report.result, qubits, classical)
    return classical, report.state.vector(qubits)


def _split(v, qubits, classical) -> None:
    if isinstance(v, QubitHandle):
        qubits.append(v)
    elif isinstance(v, (tuple, list)):
        for x in v:
            _split(x, qubits, classical)
    else:
        classical.append(v)


def handles(v) -> list[QubitHandle]:
    out: list[QubitHandle] = []
    _split(v, out, [])
    return out


class Interpreter:
    def __init__(self, g: Graph, seed: int, max_steps: int = DEFAULT_MAX_STEPS):
        self.g = g
        self.state = QuantumState(seed)
        self.max_steps = max_steps
        self.steps = 0
        self.measurements: list[tuple[int, bool]] = []
        self.functions = g.functions()
        self._plans: dict[int, tuple] = {}

    # --- entry ---

    def call_entry(self, entry: str, args: list) -> RunReport:
        if entry not in self.functions:
            raise KeyError(entry)
        fid = self.functions[entry]
        params = [parse_port_tag(t) for t in self.g.nodes[fid].payload["params"]]
        if len(args) != len(params):
            raise ValueError(f"{entry} expects {len(params)} arguments, got {len(args)}")
        values = [self.coerce_arg(a, t) for a, t in zip(args, params)]
        try:
            (result,) = self.container(fid, values)
        except RecursionError:
            raise SimRuntimeError("stack-overflow", fid, "call depth exceeded") from None
        live = set(self.state.order)
        leaked = len(live - {h.id for h in handles(result)})
        return RunReport(
            result,
            list(self.measurements),
            leaked,
            self.steps,
            self.state.max_norm_deviation,
            self.state,
        )

    def coerce_arg(self, a, t: Type):
        if isinstance(t, QubitType):
            if a == "qubit" or a is None:
                return self.state.alloc()
            if isinstance(a, Prepared):
                return self.state.alloc(a.alpha, a.beta)
            raise ValueError(f"expected a qubit argument, got {a!r}")
        if isinstance(t, TupleType):
            if not isinstance(a, (list, tuple)) or len(a) != len(t.elements):
                raise ValueError(f"expected a {len(t.elements)}-tuple, got {a!r}")
            return tuple(self.coerce_arg(x, e) for x, e in zip(a, t.elements))
        if isinstance(t, ListType):
            if not isinstance(a, (list, tuple)):
                raise ValueError(f"expected a list, got {a!r}")
            return [self.coerce_arg(x, t.element) for x in a]
        if t == BOOL:
            if not isinstance(a, bool):
                raise ValueError(f"expected a bool, got {a!r}")
            return a
        if t == INT:
            if isinstance(a, bool) or not isinstance(a, int) or not INT_MIN <= a <= INT_MAX:
                raise ValueError(f"expected a 64-bit int, got {a!r}")
            return a
        if t == FLOAT:
            if isinstance(a, bool) or not isinstance(a, (int, float)):
                raise ValueError(f"expected a float, got {a!r}")
            return float(a)
        if a is not None:
            raise ValueError(f"expected None, got {a!r}")
        return None

    # --- containers ---

    def plan(self, cid: int):
        p = self._plans.get(cid)
        if p is None:
            g = self.g
            kids = g.children(cid)
            kid_set = set(kids)
            sources = {}
            deps = {}
            for k in kids:
                n = g.nodes[k]
                src = [None] * len(n.in_ports)
                for e in g.in_edges(k):
                    src[e.dst_port] = (e.src, e.src_port)
                sources[k] = src
                deps[k] = len({s for s, _ in filter(None, src) if s in kid_set})
            users: dict[int, set[int]] = {k: set() for k in kids}
            for k in kids:
                for s in sources[k]:
                    if s is not None:
                        users[s[0]].add(k)
            p = (kids, sources, deps, {k: sorted(v) for k, v in users.items()})
            self._plans[cid] = p
        return p

    def tick(self, nid: int) -> None:
        self.steps += 1
        if self.steps > self.max_steps:
            raise SimRuntimeError("step-limit-exceeded", nid, f"more than {self.max_steps} steps")

    def container(self, cid: int, inputs: list) -> list:
        kids, sources, deps, users = self.plan(cid)
        inp, out = kids[0], kids[1]
        values: dict[tuple[int, int], Any] = {}
        remaining = dict(deps)
        ready = [k for k in kids if remaining[k] == 0]
        heapq.heapify(ready)
        result = None
        while ready:
            k = heapq.heappop(ready)
            self.tick(k)
            if k == inp:
                outs = inputs
            else:
                args = [values[s] for s in sources[k]]
                if k == out:
                    result = args
                    outs = []
                else:
                    outs = self.execute(k, args)
            for j, v in enumerate(outs):
                values[(k, j)] = v
            for u in users[k]:
                remaining[u] -= 1
                if remaining[u] == 0:
                    heapq.heappush(ready, u)
        if result is None:
            raise AssertionError(f"container {cid} did not reach its Output")
        return result

    # --- nodes ---

    def execute(self, nid: int, args: list) -> list:
        n = self.g.nodes[nid]
        k = n.kind
        p = n.payload
        if k == "Const":
            return [_const(p["value"], n.out_ports[0])]
        if k == "QuantumOp":
            return self.quantum(nid, p["op"], args)
        if k == "IntOp":
            return [int_op(nid, p["op"], args)]
        if k == "FloatOp":
            return [float_op(nid, p["op"], args)]
        if k == "CmpOp":
            return [cmp_op(p["op"], args)]
        if k == "MakeTuple":
            return [tuple(args)]
        if k == "UnpackTuple":
            return list(args[0])
        if k == "ListOp":
            return self.list_op(nid, p, args)
        if k == "Tag":
            if canon(n.out_ports[0]) == UNIT_BOOL:
                return [bool(p["tag"])]
            return [SumValue(p["tag"], tuple(args))]
        if k == "Conditional":
            tag, row = _variant(args[0])
            for c in self.g.children(nid):
                if self.g.nodes[c].payload["index"] == tag:
                    self.tick(c)
                    return self.container(c, list(row) + args[1:])
            raise AssertionError(f"no Case {tag} in Conditional {nid}")
        if k == "TailLoop":
            vals = args
            while True:
                (s,) = self.container(nid, vals)
                tag, row = _variant(s)
                if tag == 1:
                    return list(row)
                vals = list(row)
        if k == "CFG":
            return self.cfg(nid, args)
        if k == "Call":
            return self.container(self.functions[p["target"]], args)
        if k == "LoadFunction":
            return [FunctionRef(p["target"], args[0] if p.get("env") else None)]
        if k == "CallIndirect":
            ref = args[0]
            call_args = args[1:] + ([ref.env] if ref.env is not None else [])
            return self.container(self.functions[ref.name], call_args)
        raise AssertionError(f"cannot execute node kind {k}")

    def cfg(self, nid: int, args: list) -> list:
        g = self.g
        blocks = g.children(nid)
        block = next(b for b in blocks if g.nodes[b].payload.get("block") == "entry")
        succ = {
            b: {e.src_port: e.dst for e in g.out_edges(b)}
            for b in blocks
        }
        vals = args
        while True:
            self.tick(block)
            if g.nodes[block].payload.get("block") == "exit":
                return list(vals)
            (s,) = self.container(block, vals)
            tag, row = _variant(s)
            block = succ[block][tag]
            vals = list(row)

    def quantum(self, nid: int, op: str, args: list) -> list:
        st = self.state
        if op == "qalloc":
            return [st.alloc()]
        if op == "measure":
            bit = st.measure(args[0])
            self.measurements.append((args[0].id, bit))
            return [bit]
        if op == "discard":
            st.measure(args[0])
            return []
        if op == "rz":
            st.apply(rz(args[1]), args[0])
            return [args[0]]
        st.apply(GATES[op], *args)
        return list(args)

    def list_op(self, nid: int, p, args: list) -> list:
        op = p["op"]
        elem = parse_port_tag(p["elem"])
        linear = elem.linear
        if op == "nil":
            return [[]]
        if op == "cons":
            return [args[0] + [args[1]]]
        if op == "len":
            return [len(args[0]), args[0]] if linear else [len(args[0])]
        if op == "get":
            lst, i = args
            if not 0 <= i < len(lst):
                raise SimRuntimeError("index-out-of-range", nid, f"index {i} for length {len(lst)}")
            if linear:
                return [lst[i], lst[:i] + lst[i + 1:]]
            return [lst[i]]
        if op == "free":
            for h in handles(args[0]):
                self.state.measure(h)
            return []
        # apply-idx
        lst, fn, *idx = args
        for i in idx:
            if not 0 <= i < len(lst):
                raise SimRuntimeError("index-out-of-range", nid, f"index {i} for length {len(lst)}")
        if len(set(idx)) != len(idx):
            raise SimRuntimeError("apply-duplicate-index", nid, f"indices {tuple(idx)}")
        call_args = [lst[i] for i in idx] + ([fn.env] if fn.env is not None else [])
        (res,) = self.container(self.functions[fn.name], call_args)
        parts = [res] if len(idx) == 1 else list(res)
        out = list(lst)
        for i, v in zip(idx, parts):
            out[i] = v
        return [out]


def _variant(v) -> tuple[int, tuple]:
    if isinstance(v, bool):
        return int(v), ()
    if isinstance(v, (bool, np.bool_)):
        return int(v), ()
    return v.tag, v.values


def _const(value, t: Type):
    if isinstance(t, TupleType):
        return tuple(_const(x, e) for x, e in zip(value, t.elements))
    if isinstance(t, ListType):
        return [_const(x, t.element) for x in value]
    if t == FLOAT:
        return float(value)
    if isinstance(t, SumType):
        return bool(value)
    return value


def _wrap(nid: int, v: int) -> int:
    if not INT_MIN <= v <= INT_MAX:
        raise SimRuntimeError("integer-overflow", nid, f"result {v} outside the 64-bit range")
    return v


def int_op(nid: int, op: str, args: list) -> int:
    if op == "from_bool":
        return int(args[0])
    if op == "neg":
        return _wrap(nid, -args[0])
    if op == "pos":
        return args[0]
    if op == "invert":
        return ~args[0]
    a, b = args
    if op == "add":
        return _wrap(nid, a + b)
    if op == "sub":
        return _wrap(nid, a - b)
    if op == "mul":
        return _wrap(nid, a * b)
    if op in ("floordiv", "mod"):
        if b == 0:
            raise SimRuntimeError("division-by-zero", nid)
        return _wrap(nid, a // b if op == "floordiv" else a % b)
    if op == "and":
        return a & b
    if op == "or":
        return a | b
    if op == "xor":
        return a ^ b
    if op in ("shl", "shr"):
        if b < 0:
            raise SimRuntimeError("negative-shift-count", nid)
        if op == "shr":
            return a >> min(b, 64)
        if a == 0:
            return 0
        if b >= 64:
            raise SimRuntimeError("integer-overflow", nid, "shift out of range")
        return _wrap(nid, a << b)
    raise AssertionError(op)


def float_op(nid: int, op: str, args: list) -> float:
    if op == "from_int":
        return float(args[0])
    if op == "neg":
        return -args[0]
    if op == "pos":
        return args[0]
    a, b = args
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if b == 0:
            raise SimRuntimeError("division-by-zero", nid)
        return a / b
    raise AssertionError(op)


def cmp_op(op: str, args: list) -> bool:
    if op == "not":
        return not args[0]
    a, b = args
    return {
        "lt": a < b,
        "le": a <= b,
        "gt": a > b,
        "ge": a >= b,
        "eq": a == b,
        "ne": a != b,
    }[op]
