"""Single-pattern subgraph matching and boundary-preserving replacement."""
from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping, Sequence

from guppyc.ir.graph import Edge, Graph, Node
from guppyc.ir.ports import same_row
from guppyc.typecheck.types import Type

Slot = tuple[int, int]


@dataclass(frozen=True)
class PNode:
    kind: str
    payload: Mapping[str, Any]
    in_ports: tuple[Type, ...]
    out_ports: tuple[Type, ...]


@dataclass(frozen=True)
class Template:
    """A small dataflow fragment with a typed boundary.

    ``inputs[i]`` lists the (node, in-port) slots fed by boundary input ``i``.
    ``outputs[j]`` is the (node, out-port) slot driving boundary output ``j``, or
    ``("in", i)`` when output ``j`` is boundary input ``i`` passed straight through.
    ``types`` gives the boundary input types.
    """

    types: tuple[Type, ...]
    nodes: tuple[PNode, ...]
    edges: tuple[tuple[int, int, int, int], ...]
    inputs: tuple[tuple[Slot, ...], ...]
    outputs: tuple[Any, ...]

    def input_types(self) -> list[Type]:
        if len(self.types) != len(self.inputs):
            raise PatternError("one type per boundary input is required")
        for t, slots in zip(self.types, self.inputs):
            for n, p in slots:
                if not same_row([self.nodes[n].in_ports[p]], [t]):
                    raise PatternError(f"slot {(n, p)} does not accept {t}")
        return list(self.types)

    def output_types(self, input_types: list[Type]) -> list[Type]:
        out = []
        for o in self.outputs:
            if o[0] == "in":
                out.append(input_types[o[1]])
            else:
                out.append(self.nodes[o[0]].out_ports[o[1]])
        return out


class PatternError(ValueError):
    pass


class StaleMatchError(Exception):
    """The graph no longer contains the matched subgraph."""


@dataclass(frozen=True)
class Pattern:
    name: str
    lhs: Template
    rhs: Template
    predicate: Callable[[Graph, tuple[int, ...]], bool] | None = field(default=None, compare=False)

    def __post_init__(self):
        li, ri = self.lhs.input_types(), self.rhs.input_types()
        if not same_row(li, ri):
            raise PatternError(f"{self.name}: boundary inputs differ")
        if not same_row(self.lhs.output_types(li), self.rhs.output_types(ri)):
            raise PatternError(f"{self.name}: boundary outputs differ")
        for slots in self.lhs.inputs:
            if len(slots) != 1:
                raise PatternError(f"{self.name}: each left-hand input must feed one slot")
        if any(o[0] == "in" for o in self.lhs.outputs):
            raise PatternError(f"{self.name}: left-hand outputs must come from nodes")


@dataclass(frozen=True)
class Match:
    pattern: str
    container: int
    nodes: tuple[int, ...]
    fingerprint: tuple = field(repr=False)


def _fingerprint(g: Graph, nodes: Sequence[int]) -> tuple:
    parts = []
    for nid in nodes:
        n = g.nodes.get(nid)
        if n is None:
            return ()
        parts.append((n.kind, tuple(sorted(n.payload.items(), key=lambda kv: kv[0])), n.parent))
        parts.append(g.in_edges(nid))
        parts.append(g.out_edges(nid))
    return tuple(map(repr, parts))


def _node_ok(n: Node, pn: PNode) -> bool:
    return (
        n.kind == pn.kind
        and all(n.payload.get(k) == v for k, v in pn.payload.items())
        and same_row(n.in_ports, pn.in_ports)
        and same_row(n.out_ports, pn.out_ports)
    )


def _dataflow_containers(g: Graph) -> list[int]:
    return [nid for nid, n in g.nodes.items() if n.dataflow]


def find_matches(g: Graph, p: Pattern) -> list[Match]:
    """All embeddings of ``p.lhs`` inside single dataflow containers, in canonical order."""
    found: dict[tuple[int, ...], Match] = {}
    lhs = p.lhs
    for cid in _dataflow_containers(g):
        for anchor in g.children(cid):
            if not _node_ok(g.nodes[anchor], lhs.nodes[0]):
                continue
            for mapping in _extend(g, lhs, {0: anchor}):
                nodes = tuple(mapping[i] for i in range(len(lhs.nodes)))
                if nodes in found or not _closed(g, lhs, nodes):
                    continue
                if p.predicate is not None and not p.predicate(g, nodes):
                    continue
                found[nodes] = Match(p.name, cid, nodes, _fingerprint(g, nodes))
    return sorted(found.values(), key=lambda m: (min(m.nodes), m.nodes))


def _extend(g: Graph, t: Template, mapping: dict[int, int]):
    """Backtracking over internal edges until every template node is placed."""
    if len(mapping) == len(t.nodes):
        yield dict(mapping)
        return
    for a, ap, b, bp in t.edges:
        if (a in mapping) == (b in mapping):
            continue
        if a in mapping:
            cands = [d for d, dp in g.consumers(mapping[a], ap) if dp == bp]
            new = b
        else:
            src = g.source(mapping[b], bp)
            cands = [src[0]] if src is not None and src[1] == ap else []
            new = a
        for c in cands:
            if c in mapping.values() or not _node_ok(g.nodes[c], t.nodes[new]):
                continue
            mapping[new] = c
            yield from _extend(g, t, mapping)
            del mapping[new]
        return
    # a disconnected template cannot be anchored; nothing to yield


def _closed(g: Graph, t: Template, nodes: tuple[int, ...]) -> bool:
    """Check the embedding uses every declared edge and nothing else crosses into the interior."""
    members = set(nodes)
    internal = {(nodes[a], ap, nodes[b], bp) for a, ap, b, bp in t.edges}
    for a, ap, b, bp in t.edges:
        if (nodes[b], bp) not in g.consumers(nodes[a], ap):
            return False
    boundary_in = {(nodes[n], p) for slots in t.inputs for n, p in slots}
    for i, nid in enumerate(nodes):
        for e in g.in_edges(nid):
            if (e.src, e.src_port, e.dst, e.dst_port) in internal:
                continue
            if e.src in members or (e.dst, e.dst_port) not in boundary_in:
                return False
    boundary_out = {(nodes[o[0]], o[1]) for o in t.outputs}
    for nid in nodes:
        for e in g.out_edges(nid):
            if (e.src, e.src_port, e.dst, e.dst_port) in internal:
                continue
            # an interior value must not escape unless it is a declared output
            if e.dst in members or (e.src, e.src_port) not in boundary_out:
                return False
    return True


def apply_rewrite(g: Graph, m: Match, p: Pattern) -> Graph:
    """Replace the matched nodes by ``p.rhs``; untouched node ids are preserved."""
    if m.pattern != p.name or len(m.nodes) != len(p.lhs.nodes):
        raise StaleMatchError(f"match is not for pattern {p.name}")
    if _fingerprint(g, m.nodes) != m.fingerprint or not _closed(g, p.lhs, m.nodes):
        raise StaleMatchError(f"graph changed since {p.name} was matched at {m.nodes}")
    lhs, rhs = p.lhs, p.rhs
    removed = set(m.nodes)

    in_src = []
    for slots in lhs.inputs:
        n, port = slots[0]
        in_src.append(g.source(m.nodes[n], port))
    out_users = [g.consumers(m.nodes[n], port) for n, port in lhs.outputs]

    free_ids = sorted(removed)
    next_id = max(g.nodes) + 1
    new_ids = []
    for _ in rhs.nodes:
        if free_ids:
            new_ids.append(free_ids.pop(0))
        else:
            new_ids.append(next_id)
            next_id += 1

    nodes = {nid: n for nid, n in g.nodes.items() if nid not in removed}
    for nid, pn in zip(new_ids, rhs.nodes):
        nodes[nid] = Node(
            nid, m.container, pn.kind, pn.in_ports, pn.out_ports, MappingProxyType(dict(pn.payload))
        )
    edges = [e for e in g.edges if e.src not in removed and e.dst not in removed]
    for a, ap, b, bp in rhs.edges:
        edges.append(Edge(new_ids[a], ap, new_ids[b], bp))
    for (s, sp), slots in zip(in_src, rhs.inputs):
        for n, port in slots:
            edges.append(Edge(s, sp, new_ids[n], port))
    for o, users in zip(rhs.outputs, out_users):
        s, sp = in_src[o[1]] if o[0] == "in" else (new_ids[o[0]], o[1])
        for d, dp in users:
            edges.append(Edge(s, sp, d, dp))
    return Graph(nodes, edges, g.root)


def run_pipeline(g: Graph, rules: Sequence[Pattern], max_passes: int = 10) -> Graph:
    """Apply each rule's lowest match repeatedly, in rule order, until a pass changes nothing."""
    for _ in range(max_passes):
        changed = False
        for p in rules:
            while True:
                ms = find_matches(g, p)
                if not ms:
                    break
                g = apply_rewrite(g, ms[0], p)
                changed = True
        if not changed:
            break
    return g
