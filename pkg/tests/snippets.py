"""Error snippets from the language description, with the expected code and marked token.

Each entry is (source, code, token text, 1-based line, 1-based column).
"""

USE = "@guppy\ndef use(x: int) -> None:\n    return\n\n"

SNIPPETS = {
    "not-definitely-assigned": (
        USE + "@guppy\ndef f(b: bool) -> None:\n    if b:\n        var = 42\n    use(var)\n",
        "DEF002", "var", 9, 9,
    ),
    "branch-type-conflict": (
        USE + "@guppy\ndef f(b: bool) -> None:\n    var = 42 if b else None\n    use(var)\n",
        "TYP002", "var", 8, 9,
    ),
    "multiple-uses": (
        "@guppy\ndef f() -> tuple[Qubit, Qubit]:\n    q = Qubit()\n    return cx(q, q)\n",
        "LIN001", "q", 4, 18,
    ),
    "unused-return": (
        "@guppy\ndef f() -> None:\n    q = Qubit()\n    h(q)\n",
        "LIN002", "h(q)", 4, 5,
    ),
    "py-uses-variable": (
        "@guppy\ndef f() -> int:\n    x = 0\n    var = 42\n    x += py(var + 1)\n    return x\n",
        "PY001", "var", 5, 13,
    ),
}
