"""Command-line driver: ``guppyc compile|validate|opt|run``.

Exit codes: 0 success, 1 diagnostics (compile errors, invalid IR, unknown
names), 2 I/O or usage problems, 3 runtime errors during ``run``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any

from guppyc.diagnostics import CompileError
from guppyc.ir import FormatError, Graph, ValidationError, deserialize, serialize, validate
from guppyc.pipeline import compile_source
from guppyc.rewrite import DEFAULT_RULES, RULES, resolve_rules, run_pipeline
from guppyc.sim import DEFAULT_MAX_STEPS, FunctionRef, QubitHandle, SimRuntimeError, run
from guppyc.typecheck import BindingError, parse_tag
from guppyc.typecheck.pyexpr import convert_literal

OK, DIAGNOSTICS, USAGE, RUNTIME = 0, 1, 2, 3


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _Exit(USAGE, f"cannot read {path}: {exc}") from exc


def _write(path: str | None, data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data + b"\n")
        sys.stdout.flush()
        return
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise _Exit(USAGE, f"cannot write {path}: {exc}") from exc


def _emit_json(obj: Any) -> None:
    print(json.dumps(obj, sort_keys=True, separators=(",", ":")))


def _report_compile_error(err: CompileError, filename: str, fmt: str) -> None:
    if fmt == "json":
        _emit_json([d.to_json() for d in err.diagnostics])
    else:
        for d in err.diagnostics:
            print(d.render(filename), file=sys.stderr)


def _compile(args, text: str | None = None) -> Graph:
    text = _read(args.input) if text is None else text
    bindings = None
    if args.bindings:
        _read(args.bindings)
        bindings = args.bindings
    try:
        return compile_source(text, bindings, args.lowering)
    except BindingError as exc:
        raise _Exit(USAGE, f"bad bindings file: {exc}") from exc
    except CompileError as exc:
        _report_compile_error(exc, args.input, args.format)
        raise _Exit(DIAGNOSTICS) from exc


def _load_graph(path: str) -> Graph:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise _Exit(USAGE, f"cannot read {path}: {exc}") from exc
    try:
        return deserialize(data)
    except (FormatError, ValidationError) as exc:
        raise _Exit(DIAGNOSTICS, f"{path}: invalid IR: {exc}") from exc


def _looks_like_ir(text: str) -> bool:
    return text.lstrip().startswith("{")


def cmd_compile(args) -> int:
    g = _compile(args)
    _write(args.output, serialize(g))
    return OK


def cmd_validate(args) -> int:
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        raise _Exit(USAGE, f"cannot read {args.input}: {exc}") from exc
    try:
        g = deserialize(data, check=False)
    except FormatError as exc:
        raise _Exit(DIAGNOSTICS, f"{args.input}: invalid IR: {exc}") from exc
    violations = validate(g)
    if args.format == "json":
        _emit_json([{"rule": v.rule, "message": v.message, "node": v.node} for v in violations])
    else:
        for v in violations:
            print(f"{args.input}: rule {v.rule}: node {v.node}: {v.message}", file=sys.stderr)
        if not violations:
            print("ok")
    return DIAGNOSTICS if violations else OK


def cmd_opt(args) -> int:
    names = [r for r in args.rule.split(",") if r] if args.rule else list(DEFAULT_RULES)
    try:
        rules = resolve_rules(names)
    except KeyError as exc:
        raise _Exit(DIAGNOSTICS, f"unknown rule {exc.args[0]!r}; known rules: {', '.join(RULES)}") from exc
    if args.max_passes < 0:
        raise _Exit(USAGE, "--max-passes must be non-negative")
    g = _load_graph(args.input)
    before = len(g.nodes)
    g = run_pipeline(g, rules, args.max_passes)
    _write(args.output, serialize(g))
    if args.format == "json":
        print(json.dumps({"nodes_before": before, "nodes_after": len(g.nodes)}, sort_keys=True), file=sys.stderr)
    else:
        print(f"nodes: {before} -> {len(g.nodes)}", file=sys.stderr)
    return OK


def _decode_args(raw: str | None) -> list:
    if raw is None:
        return []
    try:
        values = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise _Exit(USAGE, f"--args is not valid JSON: {exc}") from exc
    if not isinstance(values, list):
        raise _Exit(USAGE, "--args must be a JSON array")
    return [_decode_arg(v) for v in values]


def _decode_arg(v):
    # {"type": tag, "value": literal} uses the bindings-file encoding
    if isinstance(v, dict):
        if set(v) != {"type", "value"}:
            raise _Exit(USAGE, f"argument object must have 'type' and 'value': {v!r}")
        try:
            ty = parse_tag(v["type"])
            return convert_literal(ty, v["value"])
        except Exception as exc:
            raise _Exit(USAGE, f"bad argument {v!r}: {exc}") from exc
    if isinstance(v, list):
        return [_decode_arg(x) for x in v]
    return v


def to_json_value(v):
    if isinstance(v, QubitHandle):
        return {"qubit": v.id}
    if isinstance(v, FunctionRef):
        return {"function": v.name}
    if isinstance(v, (tuple, list)):
        return [to_json_value(x) for x in v]
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def cmd_run(args) -> int:
    text = _read(args.input)
    if _looks_like_ir(text):
        g = _load_graph(args.input)
    else:
        g = _compile(args, text)
    if args.entry not in g.functions():
        raise _Exit(DIAGNOSTICS, f"no function named {args.entry!r}")
    values = _decode_args(args.args)
    try:
        report = run(g, args.entry, values, args.seed, args.max_steps)
    except ValueError as exc:
        raise _Exit(USAGE, f"bad arguments for {args.entry}: {exc}") from exc
    except SimRuntimeError as exc:
        payload = {"error": {"kind": exc.kind, "node": exc.node, "message": exc.message}}
        if args.format == "json":
            _emit_json(payload)
        else:
            print(f"runtime error[{exc.kind}] at node {exc.node}: {exc.message}".rstrip(": "), file=sys.stderr)
        return RUNTIME
    _emit_json(
        {
            "result": to_json_value(report.result),
            "measurements": [[h, bit] for h, bit in report.measurements],
            "qubits_leaked": report.qubits_leaked,
            "steps": report.steps,
        }
    )
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guppyc", description="Guppy-dialect compiler and simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, source=True):
        p.add_argument("input", help="source (.gpy) or IR (.json) file")
        p.add_argument("--format", choices=("human", "json"), default="human")
        if source:
            p.add_argument("--bindings", help="JSON file with values for py(...) expressions")
            p.add_argument("--lowering", choices=("structured", "cfg"), default="structured")

    p = sub.add_parser("compile", help="compile source to IR")
    common(p)
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("validate", help="check an IR file against the structural rules")
    common(p, source=False)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("opt", help="apply peephole rewrites to an IR file")
    common(p, source=False)
    p.add_argument("--rule", help=f"comma-separated rules (default: {','.join(DEFAULT_RULES)})")
    p.add_argument("--max-passes", type=int, default=10)
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    p.set_defaults(func=cmd_opt)

    p = sub.add_parser("run", help="execute a function on the statevector simulator")
    common(p)
    p.add_argument("--entry", required=True)
    p.add_argument("--args", help='JSON array of arguments; "qubit" allocates a fresh |0>')
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Exit as exc:
        if exc.message:
            print(f"guppyc: {exc.message}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
