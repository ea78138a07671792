"""Command-line driver: parse, typecheck, validate, run and cross-check.

Exit codes: 0 on success, 1 when a verdict fails (parse or type error,
invalid definition, unguarded cycle, fuel exhausted or stuck run), 2 on
usage or I/O errors.  Reports go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import List, Optional, Sequence, TextIO, Tuple

from . import guard_oracle, runtime
from .core import Diagnostic, Program, validate_program
from .syntax import ParseError, SourceFile, parse_program, print_program
from .typecheck import check_program
from .validity import check_validity

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2

_COLORS = {"error": "\x1b[31m", "warning": "\x1b[33m"}


def use_color(stream: TextIO) -> bool:
    mode = os.environ.get("SSL_COLOR", "auto")
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def emit_diagnostics(diags: Sequence[Diagnostic], stream: TextIO) -> None:
    color = use_color(stream)
    for d in diags:
        line = str(d)
        if color and d.severity in _COLORS:
            line = f"{_COLORS[d.severity]}{line}\x1b[0m"
        print(line, file=stream)


def _locate(src: SourceFile, d: Diagnostic) -> Diagnostic:
    if d.line or not d.span:
        return replace(d, path=src.path)
    line, col = src.line_col(d.span[0])
    return replace(d, path=src.path, line=line, col=col)


class UsageError(Exception):
    pass


def load_program(path: str, typed: bool = True) -> Tuple[Optional[Program], List[Diagnostic]]:
    """Parse and check a file; diagnostics carry line and column."""
    try:
        src = SourceFile.read(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror or e}")
    try:
        p = parse_program(src)
    except ParseError as e:
        return None, list(e.diagnostics)
    diags = [_locate(src, d) for d in validate_program(p)]
    if diags:
        return None, diags
    if typed:
        diags = [_locate(src, d) for d in check_program(p)]
        if diags:
            return None, diags
    return p, []


def emit_report(result: dict, fmt: str, text: str, stream: TextIO) -> None:
    if fmt == "json":
        print(json.dumps({"schema_version": SCHEMA_VERSION, **result}, indent=2, ensure_ascii=False), file=stream)
    else:
        if text:
            print(text, file=stream)


# Subcommands


def cmd_check(args, out: TextIO, err: TextIO) -> int:
    p, diags = load_program(args.file)
    emit_diagnostics(diags, err)
    verdict = "ok" if p is not None else "error"
    emit_report({"command": "check", "file": args.file, "verdict": verdict,
                 "diagnostics": [str(d) for d in diags]},
                _fmt(args), f"{args.file}: {verdict}", out)
    return EXIT_OK if p is not None else EXIT_VERDICT


def cmd_validate(args, out: TextIO, err: TextIO) -> int:
    p, diags = load_program(args.file)
    if p is None:
        emit_diagnostics(diags, err)
        return EXIT_VERDICT
    rep = check_validity(p, trace=args.numeric_trace)
    lines = []
    for d in rep.defs:
        lines.append(f"{d.name}: {d.verdict} ({d.calls_checked} calls)")
        for c in d.failing_calls:
            where = _where(args.file, p, c.span)
            lines.append(f"  {where}call {c.callee} rejected by the {c.clause} clause: "
                         f"{c.callee_list} vs {c.root_list}")
        if args.numeric_trace:
            lines.extend(f"    {t}" for t in d.trace)
    lines.append(f"verdict: {'valid' if rep.valid else 'invalid'}")
    data = {"command": "validate", "file": args.file, **rep.to_json()}
    if args.numeric_trace:
        for j, d in zip(data["definitions"], rep.defs):
            j["numeric_trace"] = list(d.trace)
    emit_report(data, _fmt(args), "\n".join(lines), out)
    return EXIT_OK if rep.valid else EXIT_VERDICT


def _where(path: str, p: Program, span) -> str:
    if not span:
        return ""
    try:
        src = SourceFile.read(path)
    except OSError:
        return ""
    line, col = src.line_col(span[0])
    return f"{path}:{line}:{col}: "


def _outcome_json(o: runtime.RunOutcome) -> dict:
    if isinstance(o, runtime.ExternalPoised):
        return {"kind": "external-poised", "side": o.side, "action": o.action}
    if isinstance(o, runtime.FuelExhausted):
        return {"kind": "fuel-exhausted", "steps": o.steps}
    if isinstance(o, runtime.StuckError):
        return {"kind": "stuck", "description": o.description}
    return {"kind": "empty"}


def _outcome_text(o: runtime.RunOutcome) -> str:
    if isinstance(o, runtime.ExternalPoised):
        return f"ExternalPoised({o.side}, {o.action})"
    if isinstance(o, runtime.FuelExhausted):
        return f"FuelExhausted({o.steps})"
    if isinstance(o, runtime.StuckError):
        return f"StuckError: {o.description}"
    return "EmptyConfig"


def cmd_run(args, out: TextIO, err: TextIO) -> int:
    p, diags = load_program(args.file)
    if p is None:
        emit_diagnostics(diags, err)
        return EXIT_VERDICT
    if args.fuel < 0:
        raise UsageError("--fuel must be non-negative")
    if args.main is not None:
        if args.main not in p.def_map():
            raise UsageError(f"no process named {args.main}")
        c = runtime.spawn(p, args.main)
    else:
        c = runtime.load(p)
    res = runtime.run(c, fuel=args.fuel, keep_trace=args.trace)
    lines = [str(r) for r in res.trace] if args.trace else []
    lines.append(f"{_outcome_text(res.outcome)} after {res.steps} steps")
    data = {"command": "run", "file": args.file, "steps": res.steps,
            "outcome": _outcome_json(res.outcome), "rules": res.rule_counts()}
    if args.trace:
        data["trace"] = [r.to_json() for r in res.trace]
    emit_report(data, _fmt(args), "\n".join(lines), out)
    ok = isinstance(res.outcome, (runtime.EmptyConfig, runtime.ExternalPoised))
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_oracle(args, out: TextIO, err: TextIO) -> int:
    p, diags = load_program(args.file)
    if p is None:
        emit_diagnostics(diags, err)
        return EXIT_VERDICT
    if args.depth < 0:
        raise UsageError("--depth must be non-negative")
    try:
        rep = guard_oracle.check_guard(p, args.depth, max_nodes=args.max_nodes)
    except guard_oracle.UnfoldBudgetExceeded as e:
        print(f"{args.file}: oracle inconclusive: {e}", file=err)
        emit_report({"command": "oracle", "file": args.file, "verdict": "inconclusive", "depth": args.depth},
                    _fmt(args), "verdict: inconclusive", out)
        return EXIT_VERDICT
    lines = [f"{k}: {v['cycles']} cycles, {v['unguarded']} unguarded" for k, v in rep.by_root.items()]
    for c, kind in rep.counterexamples[:10]:
        lines.append(f"  counterexample {c} [{kind}]")
    lines.append(f"verdict: {rep.verdict} (depth {rep.depth}, {rep.cycles} cycles)")
    emit_report({"command": "oracle", "file": args.file, **rep.to_json()}, _fmt(args), "\n".join(lines), out)
    return EXIT_OK if rep.all_guarded else EXIT_VERDICT


def cmd_fmt(args, out: TextIO, err: TextIO) -> int:
    p, diags = load_program(args.file, typed=False)
    if p is None:
        emit_diagnostics(diags, err)
        return EXIT_VERDICT
    text = print_program(p)
    if _fmt(args) == "json":
        emit_report({"command": "fmt", "file": args.file, "text": text}, "json", "", out)
    else:
        out.write(text)
    return EXIT_OK


def _fmt(args) -> str:
    return "json" if args.json else "text"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sslc", description="Check, validate and run subsingleton session-typed programs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("file")
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        return sp

    common(sub.add_parser("check", help="parse and typecheck")).set_defaults(fn=cmd_check)
    v = common(sub.add_parser("validate", help="local validity of every definition"))
    v.add_argument("--numeric-trace", action="store_true", help="show the +1/-1 counter annotation")
    v.set_defaults(fn=cmd_validate)
    r = common(sub.add_parser("run", help="execute main under the synchronous semantics"))
    r.add_argument("--fuel", type=int, default=runtime.DEFAULT_FUEL)
    r.add_argument("--trace", action="store_true", help="print one line per step")
    r.add_argument("--main", default=None, help="start from this definition instead of main")
    r.set_defaults(fn=cmd_run)
    o = common(sub.add_parser("oracle", help="bounded guard-condition cross-check"))
    o.add_argument("--depth", type=int, default=guard_oracle.DEFAULT_DEPTH)
    o.add_argument("--max-nodes", type=int, default=None, help="give up past this many derivation nodes")
    o.set_defaults(fn=cmd_oracle)
    common(sub.add_parser("fmt", help="pretty-print in canonical form")).set_defaults(fn=cmd_fmt)
    return ap


def main(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None,
         err: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args, out, err)
    except UsageError as e:
        print(f"sslc: {e}", file=err)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
