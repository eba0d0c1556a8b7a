import re
from unittest.mock import patch

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from guppyc.diagnostics import CompileError
from guppyc.ir import deserialize, serialize, validate
from guppyc.pipeline import compile_source
from guppyc.sim import QuantumState, run
from progen import MAX_QUBITS, generate

SEEDS = st.integers(min_value=0, max_value=2**32)
SETTINGS = settings(max_examples=150, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def statements(src):
    return [line for line in src.splitlines()[2:] if line.strip() and not line.strip().endswith(":")]


@SETTINGS
@given(SEEDS)
def test_generator_respects_bounds(seed):
    src = generate(seed)
    # compound headers aside, every line is one statement
    assert len(statements(src)) <= 30
    peak = 0
    real_alloc = QuantumState.alloc

    def alloc(self, *a):
        nonlocal peak
        h = real_alloc(self, *a)
        peak = max(peak, self.n)
        return h

    with patch.object(QuantumState, "alloc", alloc):
        run(compile_source(src), "main", [], seed)
    assert peak <= MAX_QUBITS


@SETTINGS
@given(SEEDS, st.integers(min_value=0, max_value=2**16))
def test_no_leak_and_norm(prog_seed, run_seed):
    g = compile_source(generate(prog_seed))
    r = run(g, "main", [], run_seed)
    assert r.qubits_leaked == 0
    assert r.max_norm_deviation <= 1e-12


@SETTINGS
@given(SEEDS, st.integers(min_value=0, max_value=2**16))
def test_lowering_modes_agree(prog_seed, run_seed):
    src = generate(prog_seed)
    a = run(compile_source(src, lowering="structured"), "main", [], run_seed)
    b = run(compile_source(src, lowering="cfg"), "main", [], run_seed)
    assert (a.result, a.measurements, a.qubits_leaked) == (b.result, b.measurements, b.qubits_leaked)


@SETTINGS
@given(SEEDS, st.sampled_from(["structured", "cfg"]))
def test_generated_ir_roundtrips(seed, mode):
    g = compile_source(generate(seed), lowering=mode)
    assert validate(g) == []
    data = serialize(g)
    assert serialize(deserialize(data)) == data


@SETTINGS
@given(SEEDS, st.integers(min_value=0, max_value=100))
def test_run_is_deterministic(prog_seed, run_seed):
    g = compile_source(generate(prog_seed))
    assert run(g, "main", [], run_seed) == run(g, "main", [], run_seed)


DISCARD = re.compile(r"^(\s*)discard\((q\d+)\)$", re.M)


@SETTINGS
@given(SEEDS, st.data())
def test_dropping_a_discard_is_a_linearity_error(seed, data):
    src = generate(seed)
    sites = list(DISCARD.finditer(src))
    if not sites:
        return
    m = data.draw(st.sampled_from(sites))
    mutated = src[: m.start()] + m.group(1) + "pass" + src[m.end() :]
    with pytest.raises(CompileError) as exc:
        compile_source(mutated)
    assert any(d.code.startswith("LIN") for d in exc.value.diagnostics)


QUBIT_USE = re.compile(r"^(\s*)(q\d+) = (h|x|z|t|tdg)\((q\d+)\)$", re.M)


@SETTINGS
@given(SEEDS, st.data())
def test_duplicating_a_qubit_is_a_linearity_error(seed, data):
    src = generate(seed)
    sites = list(QUBIT_USE.finditer(src))
    if not sites:
        return
    m = data.draw(st.sampled_from(sites))
    indent, q = m.group(1), m.group(2)
    mutated = src[: m.start()] + f"{indent}{q}, {q}2 = cx({q}, {q})" + src[m.end() :]
    with pytest.raises(CompileError) as exc:
        compile_source(mutated)
    assert any(d.code == "LIN001" for d in exc.value.diagnostics)
