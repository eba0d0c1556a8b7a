import json
import random
from types import MappingProxyType

import pytest

from conftest import corpus_graph
from guppyc.corpus import PROGRAMS
from guppyc.ir import (
    Builder,
    BuildError,
    Edge,
    FormatError,
    Graph,
    Node,
    ValidationError,
    check,
    deserialize,
    serialize,
    validate,
)
from guppyc.ir.ports import CONTROL, UNIT_BOOL, canon, parse_port_tag, port_tag, sum_of
from guppyc.typecheck.types import BOOL, FLOAT, INT, NONE, QUBIT, TupleType


def fn(b, name="f", params=("qubit",), result="qubit"):
    return b.add_node("FuncDefn", b.root, payload={"name": name, "params": list(params), "result": result, "env": False})


def identity_graph():
    b = Builder()
    f = fn(b)
    i = b.add_node("Input", f, [], [QUBIT])
    o = b.add_node("Output", f, [QUBIT], [])
    b.connect((i, 0), (o, 0))
    return b.build()


def rules(g):
    return {v.rule for v in validate(g)}


def mutate(g, drop=(), nodes=None, add_edges=(), drop_edges=()):
    """Copy of ``g`` with some nodes (and their subtrees and edges) removed or replaced."""
    gone = set()
    for d in drop:
        gone.update(g.descendants(d))
    new_nodes = {k: v for k, v in g.nodes.items() if k not in gone}
    new_nodes.update(nodes or {})
    edges = [
        e for e in g.edges if e.src not in gone and e.dst not in gone and e not in set(drop_edges)
    ]
    return Graph(new_nodes, edges + list(add_edges), g.root)


# --- builder ---


def test_identity_graph_valid():
    g = identity_graph()
    assert validate(g) == []
    assert [g.nodes[c].kind for c in g.children(1)] == ["Input", "Output"]


def test_connect_type_mismatch():
    b = Builder()
    f = fn(b)
    c = b.add_node("Const", f, [], [FLOAT], {"value": 1.0})
    h = b.add_node("QuantumOp", f, [QUBIT], [QUBIT], {"op": "h"})
    with pytest.raises(BuildError, match="type mismatch"):
        b.connect((c, 0), (h, 0))


def test_child_of_leaf_rejected():
    b = Builder()
    f = fn(b)
    c = b.add_node("Const", f, [], [INT], {"value": 1})
    with pytest.raises(BuildError, match="leaf"):
        b.add_node("Const", c, [], [INT], {"value": 2})


def test_duplicate_case_index():
    b = Builder()
    f = fn(b)
    cond = b.add_node("Conditional", f, [UNIT_BOOL], [])
    b.add_node("Case", cond, payload={"index": 0})
    with pytest.raises(BuildError, match="duplicate Case"):
        b.add_node("Case", cond, payload={"index": 0})


def test_linear_double_consumer_rejected_at_connect():
    b = Builder()
    f = fn(b, result="tuple[qubit,qubit]")
    i = b.add_node("Input", f, [], [QUBIT])
    t = b.add_node("MakeTuple", f, [QUBIT, QUBIT], [TupleType((QUBIT, QUBIT))])
    b.connect((i, 0), (t, 0))
    with pytest.raises(BuildError, match="linear"):
        b.connect((i, 0), (t, 1))


def test_frozen_graph_is_immutable():
    g = identity_graph()
    with pytest.raises(TypeError):
        g.nodes[5] = None
    with pytest.raises(Exception):
        g.nodes[0].kind = "Const"


# --- validation rules ---


def test_copy_shape_violates_rule3():
    b = Builder(strict=False)
    f = fn(b, result="tuple[qubit,qubit]")
    i = b.add_node("Input", f, [], [QUBIT])
    o = b.add_node("Output", f, [TupleType((QUBIT, QUBIT))], [])
    t = b.add_node("MakeTuple", f, [QUBIT, QUBIT], [TupleType((QUBIT, QUBIT))])
    b.connect((i, 0), (t, 0))
    b.connect((i, 0), (t, 1))
    b.connect((t, 0), (o, 0))
    assert rules(b.build()) == {3}


def test_unused_qubit_violates_rule3():
    b = Builder(strict=False)
    f = fn(b, result="none")
    b.add_node("Input", f, [], [QUBIT])
    o = b.add_node("Output", f, [NONE], [])
    c = b.add_node("Const", f, [], [NONE], {"value": None})
    b.connect((c, 0), (o, 0))
    assert rules(b.build()) == {3}


def test_edge_type_mismatch_rule2():
    b = Builder(strict=False)
    f = fn(b)
    i = b.add_node("Input", f, [], [QUBIT])
    o = b.add_node("Output", f, [QUBIT], [])
    c = b.add_node("Const", f, [], [FLOAT], {"value": 0.5})
    h = b.add_node("QuantumOp", f, [QUBIT], [QUBIT], {"op": "h"})
    b.connect((i, 0), (o, 0))
    b.connect((c, 0), (h, 0))
    assert 2 in rules(b.build())


def test_cross_container_edge_rule4():
    g = corpus_graph("teleport")
    case = next(n for n in g.nodes.values() if n.kind == "Case")
    fdef = g.functions()["teleport"]
    inp, _ = g.io(fdef)
    # feed a Case-internal Output directly from the function's Input
    case_out = g.io(case.id)[1]
    extra = Edge(inp, 0, case_out, 0)
    bad = Graph(g.nodes, [e for e in g.edges if not (e.dst == case_out and e.dst_port == 0)] + [extra])
    assert 4 in rules(bad)


def test_cycle_rule5():
    b = Builder(strict=False)
    f = fn(b, params=(), result="int")
    b.add_node("Input", f, [], [])
    o = b.add_node("Output", f, [INT], [])
    a = b.add_node("IntOp", f, [INT], [INT], {"op": "neg"})
    c = b.add_node("IntOp", f, [INT], [INT], {"op": "neg"})
    b.connect((a, 0), (c, 0))
    b.connect((c, 0), (a, 0))
    b.connect((c, 0), (o, 0))
    assert rules(b.build()) == {5}


def test_missing_case_rule6():
    g = corpus_graph("teleport")
    cond = next(n for n in g.nodes.values() if n.kind == "Conditional")
    last_case = g.children(cond.id)[-1]
    assert 6 in rules(mutate(g, drop=[last_case]))


def test_tailloop_signature_rule7():
    g = corpus_graph("cx_ladder")
    loop = next(n for n in g.nodes.values() if n.kind == "TailLoop")
    body_out = g.io(loop.id)[1]
    out_node = g.nodes[body_out]
    # pretend the body emits an extra variant
    rows = out_node.in_ports[0].rows
    bad_sum = sum_of(*rows, [])
    nodes = {body_out: Node(body_out, out_node.parent, "Output", (bad_sum,), (), out_node.payload)}
    assert 7 in rules(mutate(g, nodes=nodes))


def test_second_exit_block_rule8():
    g = corpus_graph("teleport", "cfg")
    cfg = next(n for n in g.nodes.values() if n.kind == "CFG")
    exit_block = next(
        c for c in g.children(cfg.id) if g.nodes[c].payload.get("block") == "exit"
    )
    dup = g.nodes[exit_block]
    nid = max(g.nodes) + 1
    nodes = {nid: Node(nid, cfg.id, "BasicBlock", dup.in_ports, dup.out_ports, dup.payload)}
    assert 8 in rules(mutate(g, nodes=nodes))


def test_orphan_rule1():
    g = identity_graph()
    bad = Graph({**g.nodes, 9: Node(9, 42, "Const", (), (INT,), MappingProxyType({"value": 1}))}, g.edges)
    assert rules(bad) == {1}


def test_check_raises():
    b = Builder(strict=False)
    f = fn(b)
    b.add_node("Input", f, [], [QUBIT])
    b.add_node("Output", f, [QUBIT], [])
    with pytest.raises(ValidationError):
        check(b.build())


@pytest.mark.parametrize("name", PROGRAMS)
@pytest.mark.parametrize("mode", ["structured", "cfg"])
def test_corpus_valid(name, mode):
    assert validate(corpus_graph(name, mode)) == []


@pytest.mark.parametrize("name", PROGRAMS)
def test_validate_insensitive_to_insertion_order(name):
    g = corpus_graph(name)
    items = list(g.nodes.items())
    edges = list(g.edges)
    rng = random.Random(3)
    for _ in range(3):
        rng.shuffle(items)
        rng.shuffle(edges)
        assert validate(Graph(dict(items), edges, g.root)) == []


def _linear_balance(g, container):
    """Linear values produced minus consumed inside one dataflow container."""
    produced = consumed = 0
    for c in g.children(container):
        n = g.nodes[c]
        for k, t in enumerate(n.out_ports):
            if t.linear:
                produced += 1
        for k, t in enumerate(n.in_ports):
            if t.linear:
                consumed += 1
    return produced - consumed


@pytest.mark.parametrize("name", PROGRAMS)
@pytest.mark.parametrize("mode", ["structured", "cfg"])
def test_linear_conservation(name, mode):
    g = corpus_graph(name, mode)
    for n in g.nodes.values():
        if n.dataflow:
            assert _linear_balance(g, n.id) == 0, n


# --- ports ---


def test_bool_is_unit_sum():
    assert canon(BOOL) == canon(UNIT_BOOL)
    assert not UNIT_BOOL.linear and not CONTROL.linear


@pytest.mark.parametrize("t", [INT, QUBIT, sum_of([INT, QUBIT], []), CONTROL, TupleType((QUBIT, FLOAT))])
def test_port_tag_roundtrip(t):
    assert parse_port_tag(json.loads(json.dumps(port_tag(t)))) == t


# --- serialization ---


def test_identity_roundtrip():
    g = identity_graph()
    data = serialize(g)
    assert deserialize(data) == g
    doc = json.loads(data)
    assert doc["version"] == 1
    assert [n["id"] for n in doc["nodes"]] == [0, 1, 2, 3]


@pytest.mark.parametrize("name", PROGRAMS)
@pytest.mark.parametrize("mode", ["structured", "cfg"])
def test_corpus_roundtrip_bytes(name, mode):
    data = serialize(corpus_graph(name, mode))
    assert serialize(deserialize(data)) == data


def test_canonical_form_sorted():
    data = serialize(corpus_graph("teleport"))
    doc = json.loads(data)
    assert data == json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    edges = [tuple(e) for e in doc["edges"]]
    assert edges == sorted(edges)


def test_unknown_kind_rejected():
    doc = json.loads(serialize(identity_graph()))
    doc["nodes"][2]["kind"] = "Teleporter"
    with pytest.raises(FormatError, match="Teleporter"):
        deserialize(json.dumps(doc))


def test_version_mismatch():
    doc = json.loads(serialize(identity_graph()))
    doc["version"] = 99
    with pytest.raises(FormatError, match="version"):
        deserialize(json.dumps(doc))


@pytest.mark.parametrize("text", ["", "[]", "{", '{"version": 1}'])
def test_malformed_documents(text):
    with pytest.raises(FormatError):
        deserialize(text)


def test_invalid_graph_rejected_on_load():
    doc = json.loads(serialize(identity_graph()))
    doc["edges"] = []
    with pytest.raises(ValidationError):
        deserialize(json.dumps(doc))
    assert deserialize(json.dumps(doc), check=False) is not None
