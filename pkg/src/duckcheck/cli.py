"""Command-line interface: a thin client over the service layer.

`check` and `run` operate on .dref files with the exit-code contract
(0 ok, 1 type error, 2 usage/IO/solver error; run adds 3 stuck and
4 out-of-fuel); `corpus` checks a directory against expectation headers;
`serve` starts the HTTP service.
"""

from __future__ import annotations

import argparse
import shlex
import sys

from .service import (
    CheckRequest, CorpusReport, RunRequest, check_source, corpus_run,
    run_source,
)

EXIT_OK = 0
EXIT_TYPE_ERROR = 1
EXIT_USAGE = 2
EXIT_STUCK = 3
EXIT_FUEL = 4


def _read(path: str) -> str | None:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as e:
        print(f"error: cannot read {path}: {e}", file=sys.stderr)
        return None


def _print_diags(res) -> None:
    for d in res.diagnostics:
        loc = f"{d.line}:{d.col}: " if d.line else ""
        print(f"{loc}{d.severity} [{d.rule}] {d.message}", file=sys.stderr)
        if d.clause:
            print(f"  clause: {d.clause}", file=sys.stderr)
        for c in d.candidates:
            print(f"  candidate: {c}", file=sys.stderr)


def cmd_check(args) -> int:
    src = _read(args.file)
    if src is None:
        return EXIT_USAGE
    req = CheckRequest(
        source=src,
        strict_elim=args.strict_elim,
        timeout_ms=args.timeout_ms,
        solver_cmd=shlex.split(args.solver_cmd) if args.solver_cmd else None,
        smt_log=args.smt_log,
    )
    res = check_source(req, file=args.file)
    if args.json:
        print(res.model_dump_json(indent=2))
    else:
        if res.status == "ok":
            print(res.scheme)
        else:
            _print_diags(res)
    if res.status == "ok":
        return EXIT_OK
    if res.status == "typeerror":
        return EXIT_TYPE_ERROR
    return EXIT_USAGE


def cmd_run(args) -> int:
    src = _read(args.file)
    if src is None:
        return EXIT_USAGE
    req = RunRequest(source=src, fuel=args.fuel, check=not args.no_check,
                     trace=args.trace)
    res = run_source(req, file=args.file)
    if args.trace:
        for line in res.trace_lines:
            print(line, file=sys.stderr)
    if res.status == "value":
        print(res.value)
        return EXIT_OK
    if res.status == "typeerror":
        _print_diags(res)
        return EXIT_TYPE_ERROR
    if res.status == "stuck":
        print(f"stuck: {res.reason}", file=sys.stderr)
        return EXIT_STUCK
    if res.status == "out-of-fuel":
        print("out of fuel", file=sys.stderr)
        return EXIT_FUEL
    _print_diags(res)
    return EXIT_USAGE


def _corpus_text(report: CorpusReport) -> str:
    lines = []
    for e in report.entries:
        mark = "pass" if e.ok else "FAIL"
        lines.append(f"{mark} {e.file}: expected {e.expected}, got {e.status} "
                     f"({e.wall_ms:.0f} ms, {e.smt_queries} queries)")
    lines.append(f"{report.passed} passed, {report.failed} failed")
    return "\n".join(lines)


def cmd_corpus(args) -> int:
    try:
        report = corpus_run(args.dir, timeout_ms=args.timeout_ms)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.json:
        print(report.model_dump_json(indent=2))
    else:
        print(_corpus_text(report))
    return EXIT_OK if report.failed == 0 else EXIT_TYPE_ERROR


def cmd_serve(args) -> int:
    import uvicorn
    uvicorn.run("duckcheck.api:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="duckcheck",
                                description="Refinement type checker and "
                                            "interpreter for .dref programs")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("check", help="type-check a file")
    c.add_argument("file")
    c.add_argument("--solver-cmd", default=None,
                   help="external SMT solver command line")
    c.add_argument("--timeout-ms", type=int, default=20000)
    c.add_argument("--smt-log", default=None, metavar="DIR",
                   help="mirror solver input to a transcript in DIR")
    c.add_argument("--json", action="store_true")
    c.add_argument("--strict-elim", action="store_true",
                   help="restrict let-variable elimination to the core cases")
    c.set_defaults(fn=cmd_check)

    r = sub.add_parser("run", help="check then evaluate a file")
    r.add_argument("file")
    r.add_argument("--fuel", type=int, default=10 ** 6)
    r.add_argument("--trace", action="store_true",
                   help="print one line per evaluation step")
    r.add_argument("--no-check", action="store_true")
    r.set_defaults(fn=cmd_run)

    co = sub.add_parser("corpus", help="check a directory of .dref files "
                                       "against expectation headers")
    co.add_argument("dir")
    co.add_argument("--timeout-ms", type=int, default=20000)
    co.add_argument("--json", action="store_true")
    co.set_defaults(fn=cmd_corpus)

    s = sub.add_parser("serve", help="start the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(fn=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
