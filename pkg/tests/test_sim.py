import numpy as np
import pytest

import oracles
from conftest import ENTRIES, corpus_args, corpus_graph
from guppyc.corpus import PROGRAMS
from guppyc.pipeline import compile_source
from guppyc.sim import (
    GATES,
    Prepared,
    QuantumState,
    SimRuntimeError,
    final_statevector,
    run,
    rz,
    step_quantum,
)

INT64_MAX = 2**63 - 1


def fn(body, sig="() -> int"):
    return compile_source(f"@guppy\ndef f{sig}:\n" + body)


def trap(g, args=(), **kw):
    with pytest.raises(SimRuntimeError) as exc:
        run(g, "f", list(args), **kw)
    return exc.value


# --- gates and state ---


@pytest.mark.parametrize("name", sorted(GATES))
def test_gates_unitary(name):
    u = GATES[name]
    assert np.allclose(u @ u.conj().T, np.eye(len(u)), atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.3, -2.1, np.pi])
def test_rz_matches_oracle(theta):
    assert np.allclose(rz(theta), oracles.rz(theta), atol=1e-12)
    u = rz(theta)
    assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-12)


@pytest.mark.parametrize(
    "name, ref",
    [("h", oracles.H), ("x", oracles.X), ("z", oracles.Z), ("t", oracles.T), ("tdg", oracles.TDG)],
)
def test_single_qubit_gates_match_oracle(name, ref):
    assert np.allclose(GATES[name], ref, atol=1e-12)


def test_cx_and_zz_matrices():
    assert np.allclose(GATES["cx"], oracles.cnot(2, 0, 1))
    assert np.allclose(GATES["zz"], np.diag([1, -1, -1, 1]))


def test_step_quantum_cx_on_register():
    s = QuantumState(0)
    a, b = s.alloc(), s.alloc()
    step_quantum(s, "x", a)
    step_quantum(s, "cx", a, b)
    assert np.allclose(s.vector([a, b]), [0, 0, 0, 1])
    # reversed order reads the other way round
    assert np.allclose(s.vector([b, a]), [0, 0, 0, 1])


def test_step_quantum_duplicate_operand():
    s = QuantumState(0)
    a = s.alloc()
    with pytest.raises(AssertionError):
        step_quantum(s, "cx", a, a)


def test_measure_removes_qubit():
    s = QuantumState(1)
    a, b = s.alloc(), s.alloc(0, 1)
    (bit,) = step_quantum(s, "measure", b)
    assert bit is True and s.n == 1
    assert np.allclose(s.vector([a]), [1, 0])


def test_measure_fresh_qubit_always_false():
    g = fn("    return measure(Qubit())\n", "() -> bool")
    assert all(run(g, "f", [], seed).result is False for seed in range(200))


def test_born_rule_hadamard():
    g = fn("    return measure(h(Qubit()))\n", "() -> bool")
    n = 10000
    ones = sum(run(g, "f", [], seed).result for seed in range(n))
    sigma = 0.005
    assert abs(ones / n - 0.5) <= 4 * sigma


def test_born_rule_biased_state():
    # P(1) taken from the oracle amplitudes
    g = fn("    return measure(h(t(h(Qubit()))))\n", "() -> bool")
    amp = oracles.H @ oracles.T @ oracles.H @ np.array([1, 0])
    p1 = abs(amp[1]) ** 2
    n = 10000
    ones = sum(run(g, "f", [], seed).result for seed in range(n))
    sigma = np.sqrt(p1 * (1 - p1) / n)
    assert abs(ones / n - p1) <= 4 * sigma


# --- corpus semantics ---


@pytest.mark.parametrize("theta", [0.0, 0.7, np.pi / 3, -1.9])
def test_rx_matches_h_rz_h(theta):
    psi = np.array([0.6, 0.8j])
    classical, vec = final_statevector(corpus_graph("rx"), "rx", [Prepared(*psi), theta])
    assert classical == []
    assert oracles.same_up_to_phase(vec, oracles.rx_target(theta) @ psi, 1e-9)


@pytest.mark.parametrize("alpha, beta", [(1, 0), (0, 1), (0.6, 0.8j), (np.sqrt(0.3), -np.sqrt(0.7))])
def test_teleport_every_branch(alpha, beta):
    g = corpus_graph("teleport")
    seen = set()
    for seed in range(40):
        r = run(g, "teleport", [Prepared(alpha, beta), "qubit"], seed)
        bits = dict(r.measurements)
        # src is qubit 0, tmp the ancilla allocated third
        m1, m2 = bits[0], bits[2]
        seen.add((m1, m2))
        vec = r.state.vector([r.result])
        assert oracles.same_up_to_phase(vec, [alpha, beta], 1e-9)
        want = oracles.teleport_output(alpha, beta, int(m1), int(m2))
        assert oracles.same_up_to_phase(vec, want / np.linalg.norm(want), 1e-9)
    if alpha and beta:
        assert len(seen) == 4


def test_teleport_one_state():
    _, vec = final_statevector(corpus_graph("teleport"), "teleport", [Prepared(0, 1), "qubit"], seed=3)
    assert oracles.same_up_to_phase(vec, [0, 1])


def test_identity_fresh_qubit():
    g = compile_source("@guppy\ndef f(q: Qubit) -> Qubit:\n    return q\n")
    classical, vec = final_statevector(g, "f", ["qubit"])
    assert classical == [] and np.allclose(vec, [1, 0])


def test_identity_int():
    g = fn("    return n\n", "(n: int) -> int")
    r = run(g, "f", [5])
    assert r.result == 5 and r.steps >= 2


def test_ladder_ghz():
    g = corpus_graph("cx_ladder")
    _, vec = final_statevector(g, "ladder", [[Prepared(1, 1), "qubit", "qubit", "qubit"]])
    want = np.zeros(16)
    want[0] = want[15] = 1 / np.sqrt(2)
    assert oracles.same_up_to_phase(vec, want)


def test_apply_graph_phases():
    g = corpus_graph("apply_graph")
    plus = Prepared(1, 1)
    _, vec = final_statevector(g, "apply_graph", [[plus] * 4])
    # zz is diagonal: each basis state picks up (-1) per edge with differing bits
    edges = [(0, 1), (1, 2), (2, 3), (0, 3)]
    want = np.empty(16)
    for i in range(16):
        bits = [(i >> (3 - k)) & 1 for k in range(4)]
        want[i] = (-1) ** sum(bits[a] ^ bits[b] for a, b in edges) / 4
    assert oracles.same_up_to_phase(vec, want)


@pytest.mark.parametrize("name", PROGRAMS)
def test_corpus_runs_clean(name):
    g = corpus_graph(name)
    for seed in range(10):
        r = run(g, ENTRIES[name], corpus_args(name), seed)
        assert r.qubits_leaked == 0
        assert r.max_norm_deviation < 1e-12


@pytest.mark.parametrize("name", PROGRAMS)
def test_determinism(name):
    g = corpus_graph(name)
    a = run(g, ENTRIES[name], corpus_args(name), 11)
    b = run(g, ENTRIES[name], corpus_args(name), 11)
    assert a == b


def test_seeds_differ():
    g = corpus_graph("rus")
    outs = {tuple(run(g, "rus", ["qubit", 100], s).measurements) for s in range(10)}
    assert len(outs) > 1


# --- classical semantics ---


@pytest.mark.parametrize(
    "expr, expected",
    [
        ("-7 // 2", -4),
        ("-7 % 2", 1),
        ("7 % -2", -1),
        ("1 << 62", 1 << 62),
        ("-1 >> 5", -1),
        ("(3 ^ 5) & 6 | 8", 14),
    ],
)
def test_int_semantics(expr, expected):
    assert run(fn(f"    return {expr}\n"), "f", []).result == expected


def test_true_division_is_float():
    r = run(fn("    return 7 / 2\n", "() -> float"), "f", [])
    assert r.result == 3.5


# --- runtime errors ---


def test_overflow_max_plus_one():
    e = trap(fn(f"    return {INT64_MAX} + 1\n"))
    assert e.kind == "integer-overflow"


def test_underflow_min_minus_one():
    e = trap(fn(f"    return -{INT64_MAX} - 1 - 1\n"))
    assert e.kind == "integer-overflow"


def test_multiply_overflow():
    assert trap(fn("    return n * n\n", "(n: int) -> int"), [2**32]).kind == "integer-overflow"


def test_shift_overflow_and_negative():
    assert trap(fn("    return 1 << n\n", "(n: int) -> int"), [64]).kind == "integer-overflow"
    assert trap(fn("    return 1 << n\n", "(n: int) -> int"), [-1]).kind == "negative-shift-count"


@pytest.mark.parametrize("expr", ["n // 0", "n % 0"])
def test_division_by_zero(expr):
    e = trap(fn(f"    return {expr}\n", "(n: int) -> int"), [3])
    assert e.kind == "division-by-zero" and e.node is not None


def test_float_division_by_zero():
    g = fn("    return x / 0.0\n", "(x: float) -> float")
    assert trap(g, [1.0]).kind == "division-by-zero"


@pytest.mark.parametrize("i", range(4))
def test_apply_duplicate_index(i):
    g = compile_source(
        "@guppy\ndef f(qs: list[Qubit], i: int) -> list[Qubit]:\n    return qs.apply(cx, (i, i))\n"
    )
    e = trap(g, [["qubit"] * 4, i])
    assert e.kind == "apply-duplicate-index"


def test_apply_index_out_of_range():
    g = compile_source(
        "@guppy\ndef f(qs: list[Qubit]) -> list[Qubit]:\n    return qs.apply(cx, (0, 5))\n"
    )
    assert trap(g, [["qubit"] * 2]).kind == "index-out-of-range"


def test_list_index_out_of_range():
    g = fn("    return xs[n]\n", "(xs: list[int], n: int) -> int")
    assert run(g, "f", [[4, 5], 1]).result == 5
    # no Python-style wraparound for negative indices
    for i in (2, -1):
        assert trap(g, [[4, 5], i]).kind == "index-out-of-range"


def test_step_limit():
    g = fn("    n = 0\n    while True:\n        n = n + 0\n    return n\n")
    e = trap(g, max_steps=500)
    assert e.kind == "step-limit-exceeded"


def test_step_limit_is_configurable():
    g = fn("    s = 0\n    for i in range(50):\n        s += i\n    return s\n")
    steps = run(g, "f", []).steps
    assert run(g, "f", [], max_steps=steps).result == 1225
    assert trap(g, max_steps=steps - 1).kind == "step-limit-exceeded"


def test_unbounded_recursion():
    g = fn("    return f(n + 1)\n", "(n: int) -> int")
    assert trap(g, [0]).kind == "stack-overflow"


def test_runtime_error_inside_loop_reports_node():
    g = fn("    s = 0\n    for i in range(5):\n        s += 10 // (3 - i)\n    return s\n")
    e = trap(g)
    assert e.kind == "division-by-zero"
    assert g.nodes[e.node].kind == "IntOp"


# --- argument checking ---


@pytest.mark.parametrize(
    "sig, args",
    [
        ("(n: int) -> int", [2**63]),
        ("(n: int) -> int", [1.5]),
        ("(n: int) -> int", []),
        ("(q: Qubit) -> Qubit", [3]),
        ("(b: bool) -> bool", [1]),
    ],
)
def test_bad_entry_args(sig, args):
    body = "    return " + sig[1] + "\n"
    g = compile_source(f"@guppy\ndef f{sig}:\n{body}")
    with pytest.raises(ValueError):
        run(g, "f", args)


def test_unknown_entry():
    with pytest.raises(KeyError):
        run(corpus_graph("rx"), "nope", [])
