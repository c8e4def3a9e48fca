"""Service layer: the operations behind both the HTTP API and the CLI.

Each operation takes program source text and returns a pydantic response
model, so the FastAPI app can expose it directly and the CLI can render
text or JSON from the same result.
"""

from __future__ import annotations

import os
import sys
import time
from typing import Optional

from pydantic import BaseModel, Field

from .checker import check_program
from .errors import (
    CnfBlowup, DuplicateCtor, FuelExhausted, InstantiationBlowup, ParseError,
    SolverProtocolError, SolverStartError, TypeError_, UnknownCtor, WfError,
)

sys_recursion_floor = 40000
from .interp import eval_expr
from .parser import load_program
from .smt import SolverConfig
from .state import CheckerState
from .syntax import pp_scheme, pp_value


class DiagnosticModel(BaseModel):
    severity: str = "error"
    rule: str = "plumbing"
    message: str
    line: int = 0
    col: int = 0
    clause: Optional[str] = None
    candidates: list[str] = Field(default_factory=list)


class StatsModel(BaseModel):
    smt_queries: int = 0
    wall_ms: float = 0.0


class CheckRequest(BaseModel):
    source: str
    strict_elim: bool = False
    timeout_ms: int = 20000
    solver_cmd: Optional[list[str]] = None
    smt_log: Optional[str] = None


class CheckResponse(BaseModel):
    file: str = "<memory>"
    status: str  # ok | typeerror | parse-error | error
    scheme: Optional[str] = None
    diagnostics: list[DiagnosticModel] = Field(default_factory=list)
    stats: StatsModel = Field(default_factory=StatsModel)


class RunRequest(BaseModel):
    source: str
    fuel: int = 10 ** 6
    check: bool = True
    trace: bool = False


class RunResponse(BaseModel):
    file: str = "<memory>"
    status: str  # value | stuck | out-of-fuel | typeerror | parse-error | error
    value: Optional[str] = None
    reason: Optional[str] = None
    steps: int = 0
    diagnostics: list[DiagnosticModel] = Field(default_factory=list)
    trace_lines: list[str] = Field(default_factory=list)


class CorpusEntry(BaseModel):
    file: str
    expected: str
    status: str
    ok: bool
    scheme: Optional[str] = None
    wall_ms: float = 0.0
    smt_queries: int = 0


class CorpusReport(BaseModel):
    entries: list[CorpusEntry] = Field(default_factory=list)
    passed: int = 0
    failed: int = 0


def _diag_from(e: TypeError_) -> DiagnosticModel:
    line, col = e.pos or (0, 0)
    return DiagnosticModel(rule=e.rule, message=e.message, line=line, col=col,
                           clause=e.clause, candidates=list(e.candidates))


def check_source(req: CheckRequest, file: str = "<memory>") -> CheckResponse:
    if sys.getrecursionlimit() < sys_recursion_floor:
        sys.setrecursionlimit(sys_recursion_floor)
    t0 = time.monotonic()
    try:
        defs, body = load_program(req.source)
    except ParseError as e:
        return CheckResponse(file=file, status="parse-error", diagnostics=[
            DiagnosticModel(message=e.message, line=e.line, col=e.col)])
    except (DuplicateCtor, UnknownCtor, WfError) as e:
        return CheckResponse(file=file, status="typeerror", diagnostics=[
            DiagnosticModel(rule="WF", message=str(e))])

    cfg = SolverConfig(cmd=req.solver_cmd, timeout_ms=req.timeout_ms,
                       log_dir=req.smt_log)
    try:
        with CheckerState(defs, cfg, strict_elim=req.strict_elim) as state:
            try:
                scheme = check_program(defs, body, state)
                return CheckResponse(
                    file=file, status="ok", scheme=pp_scheme(scheme),
                    stats=StatsModel(smt_queries=state.session.stats.queries,
                                     wall_ms=(time.monotonic() - t0) * 1000))
            except TypeError_ as e:
                return CheckResponse(
                    file=file, status="typeerror", diagnostics=[_diag_from(e)],
                    stats=StatsModel(smt_queries=state.session.stats.queries,
                                     wall_ms=(time.monotonic() - t0) * 1000))
            except (WfError, UnknownCtor, DuplicateCtor) as e:
                return CheckResponse(file=file, status="typeerror", diagnostics=[
                    DiagnosticModel(rule="WF", message=str(e))])
            except (FuelExhausted, CnfBlowup, InstantiationBlowup) as e:
                return CheckResponse(file=file, status="error", diagnostics=[
                    DiagnosticModel(rule="plumbing", message=str(e))])
    except (SolverStartError, SolverProtocolError) as e:
        return CheckResponse(file=file, status="error", diagnostics=[
            DiagnosticModel(message=f"solver failure: {e}")])


def run_source(req: RunRequest, file: str = "<memory>") -> RunResponse:
    try:
        defs, body = load_program(req.source)
    except ParseError as e:
        return RunResponse(file=file, status="parse-error", diagnostics=[
            DiagnosticModel(message=e.message, line=e.line, col=e.col)])
    except (DuplicateCtor, UnknownCtor, WfError) as e:
        return RunResponse(file=file, status="typeerror", diagnostics=[
            DiagnosticModel(rule="WF", message=str(e))])

    if req.check:
        check = check_source(CheckRequest(source=req.source), file=file)
        if check.status != "ok":
            return RunResponse(file=file, status=check.status,
                               diagnostics=check.diagnostics)

    trace_lines: list[str] = []
    trace_cb = None
    if req.trace:
        from .syntax import pp_expr

        def trace_cb(e):  # noqa: F811
            trace_lines.append(pp_expr(e))

    outcome = eval_expr(body, fuel=req.fuel, defs=defs, trace=trace_cb)
    if outcome.status == "value":
        return RunResponse(file=file, status="value",
                           value=pp_value(outcome.value), steps=outcome.steps,
                           trace_lines=trace_lines)
    if outcome.status == "stuck":
        return RunResponse(file=file, status="stuck", reason=outcome.reason,
                           steps=outcome.steps, trace_lines=trace_lines)
    return RunResponse(file=file, status="out-of-fuel", steps=outcome.steps,
                       trace_lines=trace_lines)


def read_expectation(source: str) -> str:
    """The corpus expectation header: a leading `-- expect: ok|typeerror`."""
    for line in source.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("--"):
            body = stripped[2:].strip()
            if body.startswith("expect:"):
                return body.split(":", 1)[1].strip()
            continue
        break
    return "ok"


def corpus_run(directory: str, timeout_ms: int = 20000) -> CorpusReport:
    report = CorpusReport()
    files = sorted(f for f in os.listdir(directory) if f.endswith(".dref"))
    for name in files:
        path = os.path.join(directory, name)
        with open(path) as fh:
            src = fh.read()
        expected = read_expectation(src)
        res = check_source(CheckRequest(source=src, timeout_ms=timeout_ms),
                           file=name)
        ok = res.status == expected
        report.entries.append(CorpusEntry(
            file=name, expected=expected, status=res.status, ok=ok,
            scheme=res.scheme, wall_ms=res.stats.wall_ms,
            smt_queries=res.stats.smt_queries))
        if ok:
            report.passed += 1
        else:
            report.failed += 1
    return report
