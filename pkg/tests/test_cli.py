import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import ENTRIES, corpus_graph
import guppyc.corpus
from guppyc.cli import main
from guppyc.corpus import PROGRAMS
from guppyc.ir import deserialize, serialize, validate
from guppyc.sim import run
from snippets import SNIPPETS

GOLDEN = Path(__file__).parent / "golden"
CORPUS = Path(guppyc.corpus.__file__).parent


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def corpus_file(name):
    return str(CORPUS / f"{name}.gpy")


HH = "@guppy\ndef f(q: Qubit) -> Qubit:\n    return h(h(q))\n"


# --- compile ---


@pytest.mark.parametrize("mode", ["structured", "cfg"])
def test_compile_teleport_reloads(capsys, tmp_path, mode):
    out = tmp_path / "t.json"
    code, _, _ = cli(capsys, "compile", corpus_file("teleport"), "--lowering", mode, "-o", str(out))
    assert code == 0
    assert validate(deserialize(out.read_bytes())) == []


def test_compile_to_stdout(capsys):
    code, out, _ = cli(capsys, "compile", corpus_file("rx"))
    assert code == 0
    assert out.strip().encode() == serialize(corpus_graph("rx"))


def test_compile_multiple_uses_human(capsys, tmp_path):
    src, *_ = SNIPPETS["multiple-uses"]
    path = write(tmp_path, "mu.gpy", src)
    code, out, err = cli(capsys, "compile", path)
    assert code == 1 and out == ""
    lines = err.splitlines()
    assert lines[0].startswith(f"{path}:4:18: error[LIN001]: ")
    assert any(line.startswith(f"{path}:4:15: note:") for line in lines[1:])
    assert sum("error[" in line for line in lines) == 1


def test_compile_diagnostics_json(capsys, tmp_path):
    src, *_ = SNIPPETS["multiple-uses"]
    code, out, _ = cli(capsys, "compile", write(tmp_path, "mu.gpy", src), "--format", "json")
    assert code == 1
    (d,) = json.loads(out)
    assert d["code"] == "LIN001"
    assert set(d) >= {"category", "code", "message", "span", "notes"}
    assert (d["span"]["line"], d["span"]["col"]) == (4, 18)


@pytest.mark.parametrize("key", sorted(SNIPPETS))
def test_compile_snippets(capsys, tmp_path, key):
    src, code_name, token, line, col = SNIPPETS[key]
    code, out, _ = cli(capsys, "compile", write(tmp_path, "s.gpy", src), "--format", "json")
    assert code == 1
    (d,) = json.loads(out)
    assert d["code"] == code_name
    assert (d["span"]["line"], d["span"]["col"]) == (line, col)
    assert src.encode()[d["span"]["start"] : d["span"]["end"]].decode() == token


def test_missing_binding_key(capsys, tmp_path):
    src = "@guppy\ndef f() -> int:\n    return py(n_rounds)\n"
    binds = write(tmp_path, "b.json", json.dumps({"other": {"type": "int", "value": 1}}))
    code, _, err = cli(capsys, "compile", write(tmp_path, "p.gpy", src), "--bindings", binds)
    assert code == 1
    assert "error[PY002]" in err and "n_rounds" in err


def test_bindings_used(capsys, tmp_path):
    src = "@guppy\ndef f() -> int:\n    return py(n_rounds) + 1\n"
    binds = write(tmp_path, "b.json", json.dumps({"n_rounds": {"type": "int", "value": 4}}))
    code, out, _ = cli(capsys, "run", write(tmp_path, "p.gpy", src), "--bindings", binds, "--entry", "f")
    assert code == 0 and json.loads(out)["result"] == 5


def test_malformed_bindings_is_usage_error(capsys, tmp_path):
    binds = write(tmp_path, "b.json", "{not json")
    code, _, _ = cli(capsys, "compile", corpus_file("rx"), "--bindings", binds)
    assert code == 2


def test_missing_input_is_io_error(capsys, tmp_path):
    code, _, err = cli(capsys, "compile", str(tmp_path / "absent.gpy"))
    assert code == 2 and "cannot read" in err


def test_unwritable_output(capsys, tmp_path):
    code, _, _ = cli(capsys, "compile", corpus_file("rx"), "-o", str(tmp_path / "no" / "dir" / "x.json"))
    assert code == 2


def test_usage_errors_exit_2(capsys):
    for argv in ([], ["frobnicate"], ["run", corpus_file("rx")], ["compile", "x", "--lowering", "weird"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


# --- validate ---


def test_validate_ok(capsys, tmp_path):
    p = tmp_path / "t.json"
    p.write_bytes(serialize(corpus_graph("teleport")))
    code, out, _ = cli(capsys, "validate", str(p))
    assert code == 0 and out.strip() == "ok"


def test_validate_reports_violations(capsys, tmp_path):
    doc = json.loads(serialize(corpus_graph("rx")))
    doc["edges"] = doc["edges"][1:]
    p = write(tmp_path, "bad.json", json.dumps(doc))
    code, out, _ = cli(capsys, "validate", p, "--format", "json")
    assert code == 1
    violations = json.loads(out)
    assert violations and all({"rule", "message", "node"} <= set(v) for v in violations)


def test_validate_garbage(capsys, tmp_path):
    code, _, _ = cli(capsys, "validate", write(tmp_path, "g.json", "nonsense"))
    assert code == 1


# --- opt ---


def _ir(capsys, tmp_path, src, name="in.json"):
    code, _, _ = cli(capsys, "compile", write(tmp_path, "p.gpy", src), "-o", str(tmp_path / name))
    assert code == 0
    return str(tmp_path / name)


def test_opt_hh_removes_two_nodes(capsys, tmp_path):
    ir = _ir(capsys, tmp_path, HH)
    out = str(tmp_path / "out.json")
    code, _, err = cli(capsys, "opt", ir, "--rule", "hh", "-o", out)
    assert code == 0
    before = len(deserialize(Path(ir).read_bytes()).nodes)
    after = len(deserialize(Path(out).read_bytes()).nodes)
    assert after == before - 2
    assert err.strip() == f"nodes: {before} -> {after}"


def test_opt_json_counts(capsys, tmp_path):
    ir = _ir(capsys, tmp_path, HH)
    code, _, err = cli(capsys, "opt", ir, "--format", "json", "-o", str(tmp_path / "o.json"))
    assert code == 0
    counts = json.loads(err)
    assert counts["nodes_before"] - counts["nodes_after"] == 2


def test_opt_unknown_rule(capsys, tmp_path):
    ir = _ir(capsys, tmp_path, HH)
    code, _, err = cli(capsys, "opt", ir, "--rule", "hh,bogus")
    assert code == 1
    assert "bogus" in err
    for name in ("hh", "xx", "zz", "tdgt", "cxcx", "rzfuse"):
        assert name in err


def test_opt_invalid_ir(capsys, tmp_path):
    code, _, _ = cli(capsys, "opt", write(tmp_path, "bad.json", '{"version": 1}'))
    assert code == 1


def test_opt_idempotent(capsys, tmp_path):
    src = "@guppy\ndef f(q: Qubit, a: float) -> Qubit:\n    return x(x(h(h(rz(rz(h(q), a), a)))))\n"
    ir = _ir(capsys, tmp_path, src)
    once, twice = tmp_path / "1.json", tmp_path / "2.json"
    assert cli(capsys, "opt", ir, "-o", str(once))[0] == 0
    assert cli(capsys, "opt", str(once), "-o", str(twice))[0] == 0
    assert once.read_bytes() == twice.read_bytes()


# --- run ---


def test_run_rus_golden(capsys):
    code, out, _ = cli(
        capsys, "run", corpus_file("rus"), "--entry", "rus", "--args", '["qubit", 10]', "--seed", "7", "--format", "json"
    )
    assert code == 0
    assert out == (GOLDEN / "rus_seed7.json").read_text()


@pytest.mark.parametrize("name", PROGRAMS)
def test_compile_then_run_equals_in_process(capsys, tmp_path, name):
    args = {
        "rx": '["qubit", 0.5]',
        "teleport": '["qubit", "qubit"]',
        "rus": '["qubit", 20]',
        "cx_ladder": '[["qubit", "qubit", "qubit"]]',
        "apply_graph": '[["qubit", "qubit", "qubit", "qubit"]]',
    }[name]
    ir = tmp_path / "c.json"
    argv = ["--bindings", str(CORPUS / f"{name}.bindings.json")] if name == "apply_graph" else []
    assert cli(capsys, "compile", corpus_file(name), *argv, "-o", str(ir))[0] == 0
    for seed in ("0", "5"):
        a = cli(capsys, "run", str(ir), "--entry", ENTRIES[name], "--args", args, "--seed", seed)
        b = cli(capsys, "run", corpus_file(name), *argv, "--entry", ENTRIES[name], "--args", args, "--seed", seed)
        assert a == b and a[0] == 0
        report = run(corpus_graph(name), ENTRIES[name], json.loads(args), int(seed))
        assert json.loads(a[1])["measurements"] == [[h, bit] for h, bit in report.measurements]


def test_run_overflow_exit_3(capsys, tmp_path):
    src = "@guppy\ndef f() -> int:\n    return 9223372036854775807 + 1\n"
    p = write(tmp_path, "o.gpy", src)
    code, _, err = cli(capsys, "run", p, "--entry", "f")
    assert code == 3 and "integer-overflow" in err
    code, out, _ = cli(capsys, "run", p, "--entry", "f", "--format", "json")
    assert code == 3
    e = json.loads(out)["error"]
    assert e["kind"] == "integer-overflow" and isinstance(e["node"], int)


def test_run_step_limit(capsys, tmp_path):
    src = "@guppy\ndef f() -> int:\n    n = 0\n    while True:\n        n = n + 0\n    return n\n"
    code, _, err = cli(capsys, "run", write(tmp_path, "l.gpy", src), "--entry", "f", "--max-steps", "1000")
    assert code == 3 and "step-limit-exceeded" in err


def test_run_entry_not_found(capsys):
    code, _, err = cli(capsys, "run", corpus_file("rx"), "--entry", "ry", "--args", '["qubit", 1.0]')
    assert code == 1 and "ry" in err


def test_run_compile_error(capsys, tmp_path):
    src, *_ = SNIPPETS["unused-return"]
    code, _, err = cli(capsys, "run", write(tmp_path, "u.gpy", src), "--entry", "f")
    assert code == 1 and "LIN002" in err


@pytest.mark.parametrize("args", ["not json", '{"a": 1}', '["qubit"]', '[1, 2, 3]', '[{"type": "int"}]'])
def test_run_bad_args(capsys, args):
    code, _, _ = cli(capsys, "run", corpus_file("rx"), "--entry", "rx", "--args", args)
    assert code == 2


def test_run_typed_args(capsys, tmp_path):
    src = "@guppy\ndef f(xs: list[int], t: tuple[int, bool]) -> int:\n    n, b = t\n    return xs[0] + n\n"
    args = json.dumps([{"type": "list[int]", "value": [4]}, {"type": "tuple[int,bool]", "value": [3, True]}])
    code, out, _ = cli(capsys, "run", write(tmp_path, "t.gpy", src), "--entry", "f", "--args", args)
    assert code == 0 and json.loads(out)["result"] == 7


def test_run_json_schema(capsys):
    code, out, _ = cli(capsys, "run", corpus_file("teleport"), "--entry", "teleport", "--args", '["qubit", "qubit"]')
    doc = json.loads(out)
    assert code == 0
    assert set(doc) == {"result", "measurements", "qubits_leaked", "steps"}
    assert doc["result"] == {"qubit": 1}
    assert all(isinstance(h, int) and isinstance(b, bool) for h, b in doc["measurements"])


@pytest.mark.skipif(shutil.which("guppyc") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(
        ["guppyc", "run", corpus_file("rus"), "--entry", "rus", "--args", '["qubit", 10]', "--seed", "7", "--format", "json"],
        capture_output=True,
        text=True,
    )
    assert p.returncode == 0
    assert p.stdout == (GOLDEN / "rus_seed7.json").read_text()


def test_module_invocation_exit_code(tmp_path):
    src = "@guppy\ndef f() -> int:\n    return 1 // 0\n"
    path = tmp_path / "z.gpy"
    path.write_text(src)
    p = subprocess.run(
        [sys.executable, "-m", "guppyc.cli", "run", str(path), "--entry", "f"], capture_output=True, text=True
    )
    assert p.returncode == 3
    assert "division-by-zero" in p.stderr
