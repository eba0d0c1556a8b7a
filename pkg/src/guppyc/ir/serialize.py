"""Canonical JSON encoding of graphs."""
from __future__ import annotations

import json
from types import MappingProxyType

from guppyc.ir.graph import KINDS, Edge, Graph, Node
from guppyc.ir.ports import parse_port_tag, port_tag
from guppyc.ir.validate import ValidationError, validate
from guppyc.typecheck.types import TagError

VERSION = 1


class FormatError(ValueError):
    pass


def to_document(g: Graph) -> dict:
    nodes = [
        {
            "id": n.id,
            "parent": n.parent,
            "kind": n.kind,
            "payload": _plain(n.payload),
            "in": [port_tag(t) for t in n.in_ports],
            "out": [port_tag(t) for t in n.out_ports],
        }
        for n in sorted(g.nodes.values(), key=lambda n: n.id)
    ]
    edges = [list(e) for e in sorted(g.edges)]
    return {"version": VERSION, "nodes": nodes, "edges": edges}


def serialize(g: Graph) -> bytes:
    doc = to_document(g)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _plain(value):
    if isinstance(value, (dict, MappingProxyType)):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def deserialize(data: bytes | str, check: bool = True) -> Graph:
    try:
        doc = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"not a JSON document: {exc}") from exc
    if not isinstance(doc, dict) or not {"version", "nodes", "edges"} <= set(doc):
        raise FormatError("document must have 'version', 'nodes' and 'edges'")
    if doc["version"] != VERSION:
        raise FormatError(f"unsupported IR version {doc['version']!r} (expected {VERSION})")
    nodes = {}
    try:
        for rec in doc["nodes"]:
            kind = rec["kind"]
            if kind not in KINDS:
                raise FormatError(f"unknown node kind {kind!r}")
            nid = rec["id"]
            if not isinstance(nid, int) or nid in nodes:
                raise FormatError(f"bad or duplicate node id {nid!r}")
            nodes[nid] = Node(
                nid,
                rec["parent"],
                kind,
                tuple(parse_port_tag(t) for t in rec["in"]),
                tuple(parse_port_tag(t) for t in rec["out"]),
                MappingProxyType(dict(rec.get("payload", {}))),
            )
        edges = []
        for e in doc["edges"]:
            if not (isinstance(e, list) and len(e) == 4 and all(isinstance(x, int) for x in e)):
                raise FormatError(f"malformed edge {e!r}")
            edges.append(Edge(*e))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed node record: {exc!r}") from exc
    except TagError as exc:
        raise FormatError(str(exc)) from exc
    roots = [n.id for n in nodes.values() if n.parent is None]
    if len(roots) != 1:
        raise FormatError("document must have exactly one root node")
    g = Graph(nodes, edges, roots[0])
    if check:
        violations = validate(g)
        if violations:
            raise ValidationError(violations)
    return g
