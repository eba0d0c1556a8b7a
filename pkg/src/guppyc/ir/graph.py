"""Hierarchical graph store: frozen graphs and the incremental builder."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Any, Iterable, Mapping, NamedTuple

from guppyc.ir.ports import CONTROL, same_port
from guppyc.typecheck.types import Type

KINDS = (
    "Module",
    "FuncDefn",
    "Input",
    "Output",
    "Const",
    "Call",
    "CallIndirect",
    "LoadFunction",
    "QuantumOp",
    "IntOp",
    "FloatOp",
    "CmpOp",
    "MakeTuple",
    "UnpackTuple",
    "ListOp",
    "Tag",
    "Conditional",
    "Case",
    "TailLoop",
    "CFG",
    "BasicBlock",
)

QUANTUM_OPS = ("qalloc", "h", "x", "z", "t", "tdg", "rz", "cx", "zz", "measure", "discard")
LIST_OPS = ("nil", "cons", "get", "len", "apply-idx", "free")


def is_container(kind: str, payload: Mapping[str, Any]) -> bool:
    if kind == "BasicBlock":
        return payload.get("block") != "exit"
    return kind in ("Module", "FuncDefn", "Conditional", "Case", "TailLoop", "CFG")


def is_dataflow_container(kind: str, payload: Mapping[str, Any]) -> bool:
    if kind == "BasicBlock":
        return payload.get("block") != "exit"
    return kind in ("FuncDefn", "Case", "TailLoop")


@dataclass(frozen=True)
class Node:
    id: int
    parent: int | None
    kind: str
    in_ports: tuple[Type, ...]
    out_ports: tuple[Type, ...]
    payload: Mapping[str, Any] = field(default_factory=dict)

    @property
    def container(self) -> bool:
        return is_container(self.kind, self.payload)

    @property
    def dataflow(self) -> bool:
        return is_dataflow_container(self.kind, self.payload)


class Edge(NamedTuple):
    src: int
    src_port: int
    dst: int
    dst_port: int


class Graph:
    """An immutable hierarchy of nodes plus port-to-port edges."""

    def __init__(self, nodes: Mapping[int, Node], edges: Iterable[Edge], root: int = 0):
        self.nodes: Mapping[int, Node] = MappingProxyType(dict(sorted(nodes.items())))
        self.edges: frozenset[Edge] = frozenset(Edge(*e) for e in edges)
        self.root = root

    def __repr__(self) -> str:
        return f"Graph({len(self.nodes)} nodes, {len(self.edges)} edges)"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Graph)
            and self.root == other.root
            and dict(self.nodes) == dict(other.nodes)
            and self.edges == other.edges
        )

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def _children(self) -> Mapping[int, tuple[int, ...]]:
        out: dict[int, list[int]] = defaultdict(list)
        for n in self.nodes.values():
            if n.parent is not None:
                out[n.parent].append(n.id)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    @cached_property
    def _in_edges(self) -> Mapping[int, tuple[Edge, ...]]:
        out: dict[int, list[Edge]] = defaultdict(list)
        for e in self.edges:
            out[e.dst].append(e)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    @cached_property
    def _out_edges(self) -> Mapping[int, tuple[Edge, ...]]:
        out: dict[int, list[Edge]] = defaultdict(list)
        for e in self.edges:
            out[e.src].append(e)
        return {k: tuple(sorted(v, key=lambda e: (e.src_port, e.dst, e.dst_port))) for k, v in out.items()}

    def children(self, nid: int) -> tuple[int, ...]:
        return self._children.get(nid, ())

    def in_edges(self, nid: int) -> tuple[Edge, ...]:
        return self._in_edges.get(nid, ())

    def out_edges(self, nid: int) -> tuple[Edge, ...]:
        return self._out_edges.get(nid, ())

    def source(self, nid: int, port: int) -> tuple[int, int] | None:
        for e in self.in_edges(nid):
            if e.dst_port == port:
                return e.src, e.src_port
        return None

    def consumers(self, nid: int, port: int) -> list[tuple[int, int]]:
        return [(e.dst, e.dst_port) for e in self.out_edges(nid) if e.src_port == port]

    def io(self, container: int) -> tuple[int, int]:
        """Ids of the Input and Output children of a dataflow container."""
        kids = self.children(container)
        return kids[0], kids[1]

    def functions(self) -> dict[str, int]:
        return {
            self.nodes[c].payload["name"]: c
            for c in self.children(self.root)
            if self.nodes[c].kind == "FuncDefn"
        }

    def descendants(self, nid: int) -> list[int]:
        out, stack = [], [nid]
        while stack:
            cur = stack.pop()
            out.append(cur)
            stack.extend(self.children(cur))
        return out

    def count(self, kind: str, **payload) -> int:
        return sum(
            1
            for n in self.nodes.values()
            if n.kind == kind and all(n.payload.get(k) == v for k, v in payload.items())
        )


class BuildError(Exception):
    pass


@dataclass
class _Draft:
    id: int
    parent: int | None
    kind: str
    in_ports: list[Type]
    out_ports: list[Type]
    payload: dict[str, Any]


class Builder:
    """Incremental graph construction.

    With ``strict`` (the default) the builder rejects structurally wrong edits as
    they happen: mismatched port types, a second consumer of a linear out-port, a
    second edge into an in-port, children under leaves and duplicate Case indices.
    Tests that need to construct invalid graphs for the validator pass
    ``strict=False``.
    """

    def __init__(self, strict: bool = True):
        self.strict = strict
        self._nodes: dict[int, _Draft] = {}
        self._edges: list[Edge] = []
        self._used_out: set[tuple[int, int]] = set()
        self._used_in: set[tuple[int, int]] = set()
        self._case_index: dict[int, set[int]] = defaultdict(set)
        self._next = 0
        self.root = self.add_node("Module", None)

    def add_node(
        self,
        kind: str,
        parent: int | None,
        in_ports: Iterable[Type] = (),
        out_ports: Iterable[Type] = (),
        payload: Mapping[str, Any] | None = None,
    ) -> int:
        if kind not in KINDS:
            raise BuildError(f"unknown node kind {kind!r}")
        payload = dict(payload or {})
        if self.strict:
            if parent is None:
                if self._nodes:
                    raise BuildError("only the root may have no parent")
            else:
                p = self._nodes.get(parent)
                if p is None:
                    raise BuildError(f"parent node {parent} does not exist")
                if not is_container(p.kind, p.payload):
                    raise BuildError(f"cannot add a child to leaf node {parent} ({p.kind})")
                if kind == "Case":
                    idx = payload.get("index")
                    if idx in self._case_index[parent]:
                        raise BuildError(f"duplicate Case index {idx} under node {parent}")
                    self._case_index[parent].add(idx)
        nid = self._next
        self._next += 1
        self._nodes[nid] = _Draft(nid, parent, kind, list(in_ports), list(out_ports), payload)
        return nid

    def node(self, nid: int) -> _Draft:
        return self._nodes[nid]

    def set_ports(self, nid: int, in_ports=None, out_ports=None) -> None:
        n = self._nodes[nid]
        if in_ports is not None:
            n.in_ports = list(in_ports)
        if out_ports is not None:
            n.out_ports = list(out_ports)

    def set_payload(self, nid: int, **items) -> None:
        self._nodes[nid].payload.update(items)

    def connect(self, src: tuple[int, int], dst: tuple[int, int]) -> None:
        (s, sp), (d, dp) = src, dst
        if self.strict:
            sn, dn = self._nodes.get(s), self._nodes.get(d)
            if sn is None or dn is None:
                raise BuildError(f"edge {src}->{dst} references a missing node")
            if sp >= len(sn.out_ports) or dp >= len(dn.in_ports):
                raise BuildError(f"edge {src}->{dst} references a missing port")
            st, dt = sn.out_ports[sp], dn.in_ports[dp]
            if not same_port(st, dt):
                raise BuildError(f"type mismatch on edge {src}->{dst}: {st} vs {dt}")
            if st.linear and src in self._used_out:
                raise BuildError(f"linear out-port {src} already has a consumer")
            if dt != CONTROL and dst in self._used_in:
                raise BuildError(f"in-port {dst} is already connected")
        self._used_out.add(src)
        self._used_in.add(dst)
        self._edges.append(Edge(s, sp, d, dp))

    def build(self) -> Graph:
        nodes = {
            n.id: Node(
                n.id,
                n.parent,
                n.kind,
                tuple(n.in_ports),
                tuple(n.out_ports),
                MappingProxyType(dict(n.payload)),
            )
            for n in self._nodes.values()
        }
        return Graph(nodes, self._edges, self.root)
