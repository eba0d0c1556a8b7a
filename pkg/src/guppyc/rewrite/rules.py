"""Built-in peephole rules."""
from __future__ import annotations

from guppyc.rewrite.engine import Pattern, PNode, Template
from guppyc.typecheck.types import FLOAT, QUBIT


def _gate(op: str) -> PNode:
    return PNode("QuantumOp", {"op": op}, (QUBIT,), (QUBIT,))


def _cancel(name: str, first: str, second: str) -> Pattern:
    lhs = Template(
        types=(QUBIT,),
        nodes=(_gate(first), _gate(second)),
        edges=((0, 0, 1, 0),),
        inputs=(((0, 0),),),
        outputs=((1, 0),),
    )
    rhs = Template((QUBIT,), nodes=(), edges=(), inputs=((),), outputs=(("in", 0),))
    return Pattern(name, lhs, rhs)


_CX = PNode("QuantumOp", {"op": "cx"}, (QUBIT, QUBIT), (QUBIT, QUBIT))
_RZ = PNode("QuantumOp", {"op": "rz"}, (QUBIT, FLOAT), (QUBIT,))
_FADD = PNode("FloatOp", {"op": "add"}, (FLOAT, FLOAT), (FLOAT,))

CXCX = Pattern(
    "cxcx",
    Template(
        types=(QUBIT, QUBIT),
        nodes=(_CX, _CX),
        edges=((0, 0, 1, 0), (0, 1, 1, 1)),
        inputs=(((0, 0),), ((0, 1),)),
        outputs=((1, 0), (1, 1)),
    ),
    Template((QUBIT, QUBIT), nodes=(), edges=(), inputs=((), ()), outputs=(("in", 0), ("in", 1))),
)

# rz(rz(q, a), b) == rz(q, a + b)
RZFUSE = Pattern(
    "rzfuse",
    Template(
        types=(QUBIT, FLOAT, FLOAT),
        nodes=(_RZ, _RZ),
        edges=((0, 0, 1, 0),),
        inputs=(((0, 0),), ((0, 1),), ((1, 1),)),
        outputs=((1, 0),),
    ),
    Template(
        types=(QUBIT, FLOAT, FLOAT),
        nodes=(_FADD, _RZ),
        edges=((0, 0, 1, 1),),
        inputs=(((1, 0),), ((0, 0),), ((0, 1),)),
        outputs=((1, 0),),
    ),
)

RULES: dict[str, tuple[Pattern, ...]] = {
    "hh": (_cancel("hh", "h", "h"),),
    "xx": (_cancel("xx", "x", "x"),),
    # single-qubit z followed by z; unrelated to the two-qubit zz gate
    "zz": (_cancel("zz", "z", "z"),),
    "tdgt": (_cancel("tdgt", "t", "tdg"), _cancel("tdgt", "tdg", "t")),
    "cxcx": (CXCX,),
    "rzfuse": (RZFUSE,),
}

DEFAULT_RULES = tuple(RULES)


def resolve_rules(names) -> list[Pattern]:
    """Expand rule names into patterns; raises KeyError naming the unknown rule."""
    out: list[Pattern] = []
    for name in names:
        if name not in RULES:
            raise KeyError(name)
        out.extend(RULES[name])
    return out
