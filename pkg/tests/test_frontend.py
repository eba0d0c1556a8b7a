import pytest

from guppyc.corpus import PROGRAMS, source
from guppyc.diagnostics import CompileError
from guppyc.frontend import Kind, detokenize, parse, tokenize, unparse
from guppyc.frontend import nodes as ast
from guppyc.frontend.nodes import walk


def kinds_and_texts(src):
    return [(t.kind, t.text) for t in tokenize(src) if t.kind is not Kind.EOF]


def test_simple_assignment_tokens():
    assert kinds_and_texts("q = Qubit()") == [
        (Kind.IDENT, "q"),
        (Kind.OP, "="),
        (Kind.IDENT, "Qubit"),
        (Kind.DELIM, "("),
        (Kind.DELIM, ")"),
        (Kind.NEWLINE, ""),
    ]


def test_number_classification():
    toks = kinds_and_texts("x = 1 + 2.5 + 1e3 + 0x1f")
    nums = [(k, t) for k, t in toks if k in (Kind.INT, Kind.FLOAT)]
    assert nums == [(Kind.INT, "1"), (Kind.FLOAT, "2.5"), (Kind.FLOAT, "1e3"), (Kind.INT, "0x1f")]


def test_comments_and_blank_lines_skipped():
    src = "def f() -> int:\n\n    # comment\n    return 1  # trailing\n"
    texts = [t.text for t in tokenize(src) if t.kind not in (Kind.NEWLINE, Kind.INDENT, Kind.DEDENT, Kind.EOF)]
    assert texts == ["def", "f", "(", ")", "->", "int", ":", "return", "1"]


def test_indent_dedent_balanced():
    toks = tokenize(source("rus"))
    assert sum(t.kind is Kind.INDENT for t in toks) == sum(t.kind is Kind.DEDENT for t in toks)


def test_inconsistent_indent_reported_on_line_3():
    with pytest.raises(CompileError) as exc:
        tokenize("if b:\n x = 1\n  y = 2\n")
    (d,) = exc.value.diagnostics
    assert d.code == "SYN001"
    assert d.span.line == 3


def test_tabs_rejected():
    with pytest.raises(CompileError):
        tokenize("def f() -> int:\n\treturn 1\n")


def test_illegal_character():
    with pytest.raises(CompileError) as exc:
        tokenize("x = 1 $ 2")
    assert exc.value.diagnostics[0].span.col == 7


def test_spans_are_byte_offsets():
    # "é" is two bytes in UTF-8
    toks = tokenize("# é\nx = 1\n")
    x = next(t for t in toks if t.text == "x")
    assert (x.span.start, x.span.line, x.span.col) == (5, 2, 1)


@pytest.mark.parametrize("name", PROGRAMS)
def test_token_spans_non_empty(name):
    for t in tokenize(source(name)):
        if t.kind in (Kind.INDENT, Kind.DEDENT, Kind.EOF, Kind.NEWLINE):
            continue
        assert t.span.end > t.span.start


@pytest.mark.parametrize("name", PROGRAMS)
def test_detokenize_reparses(name):
    tree = parse(source(name))
    assert parse(detokenize(tokenize(source(name)))) == tree


@pytest.mark.parametrize("name", PROGRAMS)
def test_unparse_roundtrip(name):
    tree = parse(source(name))
    assert parse(unparse(tree)) == tree


@pytest.mark.parametrize("name", PROGRAMS)
def test_span_containment(name):
    def check(node):
        for child in node.children():
            assert node.span.contains(child.span), (node, child)
            check(child)

    check(parse(source(name)))


def test_teleport_shape():
    mod = parse(source("teleport"))
    (fn,) = mod.functions
    assert fn.name == "teleport"
    ifs = [s for s in fn.body if isinstance(s, ast.If)]
    assert len(ifs) == 2
    for s in ifs:
        assert len(s.body) == 1 and isinstance(s.body[0], ast.Assign)
        assert not s.orelse


def test_chained_comparison():
    mod = parse("def f(a: int, b: int, c: int) -> bool:\n    a < b < c\n    return True\n")
    stmt = mod.functions[0].body[0]
    assert isinstance(stmt.value, ast.Chain)
    assert len(stmt.value.ops) == 2


def test_short_circuit_nodes():
    mod = parse("def f(a: bool, b: bool) -> bool:\n    return a and b or not a\n")
    e = mod.functions[0].body[0].value
    assert isinstance(e, ast.BoolOp) and e.op == "or"
    left, right = e.values
    assert isinstance(left, ast.BoolOp) and left.op == "and"
    assert isinstance(right, ast.UnaryOp)


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("def f() -> None:\n    break\n", "break"),
        ("def f() -> None:\n    continue\n", "continue"),
    ],
)
def test_loop_keywords_outside_loop(src, fragment):
    with pytest.raises(CompileError) as exc:
        parse(src)
    d = exc.value.diagnostics[0]
    assert d.code == "SYN001"
    assert f"'{fragment}' outside loop" in d.message


def test_return_outside_function():
    with pytest.raises(CompileError):
        parse("return 1\n")


def test_decorator_recorded():
    mod = parse(source("rx"))
    assert mod.functions[0].decorators == ["guppy"]


def test_for_tuple_target():
    mod = parse(source("apply_graph"))
    loop = mod.functions[0].body[0]
    assert isinstance(loop, ast.For)
    assert isinstance(loop.target, ast.TuplePattern)
    assert isinstance(loop.iter, ast.PyExpr)


def test_method_call_syntax():
    mod = parse(source("cx_ladder"))
    loop = mod.functions[0].body[1]
    call = loop.body[0].value
    assert isinstance(call, ast.MethodCall) and call.method == "apply"


def test_conditional_expression():
    mod = parse("def f(b: bool) -> int:\n    x = 1 if b else 2\n    return x\n")
    assert isinstance(mod.functions[0].body[0].value, ast.IfExp)


def test_elif_chain_parses():
    src = (
        "def f(x: int) -> int:\n"
        "    if x < 0:\n        return 0\n"
        "    elif x < 5:\n        return 1\n"
        "    else:\n        return 2\n"
    )
    tree = parse(src)
    assert parse(unparse(tree)) == tree


@pytest.mark.parametrize(
    "src",
    [
        "def f() -> int:\n    return lambda: 1\n",
        "class A:\n    pass\n",
        "import os\n",
        "def f(xs: list[int]) -> int:\n    return xs[1:2]\n",
    ],
)
def test_unsupported_syntax_is_a_syntax_error(src):
    with pytest.raises(CompileError) as exc:
        parse(src)
    assert exc.value.diagnostics[0].code == "SYN001"


def test_walk_visits_every_name():
    mod = parse(source("rx"))
    names = [n.id for n in walk(mod) if isinstance(n, ast.Name)]
    assert names.count("h") == 2 and "q" in names and "a" in names
