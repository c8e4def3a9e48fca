"""Solver bridge: drives an external SMT-LIB2 solver process.

Validity is checked by refutation: assert the hypotheses and the negated
goal, then check-sat; unsat means valid. The assumption environment is
maintained incrementally with push/pop, declarations are tracked per stack
level, and a per-session query cache keeps verdicts deterministic and cheap.

Encoding: one uninterpreted sort Val. Uninterpreted functions tag, sel,
ext, has, eqmod, hastyp over Val; integers are lifted through toInt/ofInt
with coherence instances emitted per ground integer term; string, boolean,
null, empty-dictionary, primitive, lambda, and constructed-data constants
are opaque Val constants (lambdas and constructed values keyed by their
alpha-canonical structure). Type terms enter only as boxed constants.

The default solver command prefers a stock solver on PATH (z3, cvc5) and
falls back to the bundled `duckcheck.minismt` subprocess.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Optional

from .errors import SolverProtocolError, SolverStartError
from .logic import BoxTable
from .syntax import (
    And, BoolC, DictExt, EmptyDict, Fls, Formula, Fun, HasTy, Iff, Implies,
    IntC, LFun, New, Not, NullC, Or, PartialPrim, Pred, Prim, StrC, Tru,
    TyFun, VConst, Var, alpha_canonical,
)

VALID = "valid"
INVALID = "invalid"
UNKNOWN = "unknown"

_PRELUDE = [
    "(set-option :print-success false)",
    "(set-logic ALL)",
    "(declare-sort Val 0)",
    "(declare-fun tag (Val) Val)",
    "(declare-fun sel (Val Val) Val)",
    "(declare-fun ext (Val Val Val) Val)",
    "(declare-fun has (Val Val) Bool)",
    "(declare-fun eqmod (Val Val Val) Bool)",
    "(declare-fun hastyp (Val Val) Bool)",
    "(declare-fun toInt (Val) Int)",
    "(declare-fun ofInt (Int) Val)",
]
_PRELUDE_SYMBOLS = {"tag", "sel", "ext", "has", "eqmod", "hastyp", "toInt", "ofInt"}


def default_solver_cmd() -> list[str]:
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    cvc5 = shutil.which("cvc5")
    if cvc5:
        return [cvc5, "--incremental", "--force-logic", "ALL"]
    return [sys.executable, "-m", "duckcheck.minismt"]


@dataclass
class SolverConfig:
    cmd: Optional[list[str]] = None
    timeout_ms: int = 20000
    log_dir: Optional[str] = None


def _sym_escape(s: str) -> str:
    out = []
    for ch in s:
        if ch.isalnum() or ch in "_.-#%":
            out.append(ch)
        else:
            out.append(f"~{ord(ch):x}~")
    return "".join(out)


class _Level:
    def __init__(self) -> None:
        self.decls: list[str] = []      # declaration command texts
        self.names: list[str] = []      # symbols declared at this level
        self.asserts: list[str] = []    # assert command texts


@dataclass
class SolverStats:
    queries: int = 0
    wall_ms: float = 0.0
    cache_hits: int = 0


class SolverSession:
    """One external solver process plus the shadow assumption stack."""

    def __init__(self, cfg: SolverConfig, boxes: Optional[BoxTable] = None):
        self.cfg = cfg
        self.boxes = boxes if boxes is not None else BoxTable()
        self.stats = SolverStats()
        self._levels: list[_Level] = [_Level()]
        self._declared: set[str] = set(_PRELUDE_SYMBOLS)
        self._lam_ids: dict = {}
        self._cache: dict = {}
        self._log = None
        if cfg.log_dir:
            os.makedirs(cfg.log_dir, exist_ok=True)
            path = os.path.join(cfg.log_dir, f"smt-{os.getpid()}-{id(self):x}.smt2")
            self._log = open(path, "w")
        self._proc: Optional[subprocess.Popen] = None
        self._start()

    # -- process management -------------------------------------------------

    def _start(self) -> None:
        cmd = self.cfg.cmd or default_solver_cmd()
        try:
            self._proc = subprocess.Popen(
                cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1,
            )
        except OSError as e:
            raise SolverStartError(f"cannot start solver {cmd!r}: {e}") from e
        for line in _PRELUDE:
            self._send(line)
        self._send(f"(set-option :timeout {self.cfg.timeout_ms})")

    def _restart(self) -> None:
        self._kill()
        self._start()
        # replay the shadow stack
        for i, level in enumerate(self._levels):
            if i > 0:
                self._send("(push 1)")
            for d in level.decls:
                self._send(d)
            for a in level.asserts:
                self._send(a)

    def _kill(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=5)
            except Exception:
                pass
            self._proc = None

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._send("(exit)")
            except Exception:
                pass
            self._kill()
        if self._log:
            self._log.close()
            self._log = None

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- transport -----------------------------------------------------------

    def _send(self, line: str, flush: bool = False) -> None:
        if self._proc is None or self._proc.stdin is None:
            raise SolverProtocolError("solver process is gone")
        if self._log:
            self._log.write(line + "\n")
            self._log.flush()
        try:
            self._proc.stdin.write(line + "\n")
            if flush:
                self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SolverProtocolError(f"solver pipe broke: {e}") from e

    def _read_result(self) -> str:
        import select
        assert self._proc is not None and self._proc.stdout is not None
        budget = self.cfg.timeout_ms / 1000.0 * 3 + 10
        end = time.monotonic() + budget
        fd = self._proc.stdout
        while True:
            remaining = end - time.monotonic()
            if remaining <= 0:
                raise TimeoutError("solver did not answer in time")
            ready, _, _ = select.select([fd], [], [], min(remaining, 1.0))
            if not ready:
                if self._proc.poll() is not None:
                    raise SolverProtocolError("solver process exited unexpectedly")
                continue
            line = fd.readline()
            if line == "":
                raise SolverProtocolError("solver closed its output")
            line = line.strip()
            if not line:
                continue
            return line

    # -- declarations ---------------------------------------------------------

    def _declare(self, name: str) -> None:
        if name in self._declared:
            return
        cmd = f"(declare-const {name} Val)"
        self._send(cmd)
        self._declared.add(name)
        self._levels[-1].decls.append(cmd)
        self._levels[-1].names.append(name)

    @property
    def declared_symbols(self) -> frozenset[str]:
        return frozenset(self._declared)

    @property
    def depth(self) -> int:
        return len(self._levels) - 1

    # -- encoding --------------------------------------------------------------

    def _opaque(self, prefix: str, value) -> str:
        key = (prefix, alpha_canonical(value))
        idx = self._lam_ids.get(key)
        if idx is None:
            idx = len(self._lam_ids)
            self._lam_ids[key] = idx
        return f"|{prefix}!{idx}|"

    def enc_lval(self, lw, coh: list[str]) -> str:
        if isinstance(lw, Var):
            return f"|v!{_sym_escape(lw.name)}|"
        if isinstance(lw, VConst):
            c = lw.const
            if isinstance(c, IntC):
                t = str(c.value) if c.value >= 0 else f"(- {-c.value})"
                coh.append(t)
                return f"(ofInt {t})"
            if isinstance(c, BoolC):
                return "|b!true|" if c.value else "|b!false|"
            if isinstance(c, StrC):
                return f"|s!{_sym_escape(c.value)}|"
            if isinstance(c, NullC):
                return "|k!null|"
            if isinstance(c, EmptyDict):
                return "|k!empty|"
            if isinstance(c, Prim):
                return f"|p!{_sym_escape(c.name)}|"
            if isinstance(c, PartialPrim):
                return self._opaque("pp", lw)
        if isinstance(lw, DictExt):
            return (f"(ext {self.enc_lval(lw.base, coh)} {self.enc_lval(lw.key, coh)}"
                    f" {self.enc_lval(lw.val, coh)})")
        if isinstance(lw, (Fun, TyFun)):
            return self._opaque("lam", lw)
        if isinstance(lw, New):
            return self._opaque("data", lw)
        if isinstance(lw, LFun):
            if lw.sym in ("plus", "minus"):
                op = "+" if lw.sym == "plus" else "-"
                a = self.enc_lval(lw.args[0], coh)
                b = self.enc_lval(lw.args[1], coh)
                t = f"({op} (toInt {a}) (toInt {b}))"
                coh.append(t)
                return f"(ofInt {t})"
            args = " ".join(self.enc_lval(a, coh) for a in lw.args)
            return f"({lw.sym} {args})"
        raise SolverProtocolError(f"cannot encode logical value {lw!r}")

    def enc_formula(self, p: Formula, coh: list[str]) -> str:
        if isinstance(p, Tru):
            return "true"
        if isinstance(p, Fls):
            return "false"
        if isinstance(p, Pred):
            if p.sym == "eq":
                return f"(= {self.enc_lval(p.args[0], coh)} {self.enc_lval(p.args[1], coh)})"
            if p.sym in ("lt", "le"):
                op = "<" if p.sym == "lt" else "<="
                a = self.enc_lval(p.args[0], coh)
                b = self.enc_lval(p.args[1], coh)
                return f"({op} (toInt {a}) (toInt {b}))"
            args = " ".join(self.enc_lval(a, coh) for a in p.args)
            return f"({p.sym} {args})"
        if isinstance(p, HasTy):
            bid = self.boxes.box(p.term)
            return f"(hastyp {self.enc_lval(p.lw, coh)} |box!{bid}|)"
        if isinstance(p, And):
            if not p.ps:
                return "true"
            return "(and " + " ".join(self.enc_formula(q, coh) for q in p.ps) + ")"
        if isinstance(p, Or):
            if not p.ps:
                return "false"
            return "(or " + " ".join(self.enc_formula(q, coh) for q in p.ps) + ")"
        if isinstance(p, Not):
            return f"(not {self.enc_formula(p.p, coh)})"
        if isinstance(p, Implies):
            return f"(=> {self.enc_formula(p.p, coh)} {self.enc_formula(p.q, coh)})"
        if isinstance(p, Iff):
            a = self.enc_formula(p.p, coh)
            b = self.enc_formula(p.q, coh)
            return f"(and (=> {a} {b}) (=> {b} {a}))"
        raise SolverProtocolError(f"cannot encode formula {p!r}")

    @staticmethod
    def _collect_symbols(text: str) -> set[str]:
        out = set()
        i = 0
        while True:
            i = text.find("|", i)
            if i < 0:
                return out
            j = text.find("|", i + 1)
            if j < 0:
                return out
            out.add(text[i:j + 1])
            i = j + 1

    def _assert_texts(self, texts: list[str], coh: list[str]) -> None:
        for t in texts:
            for name in self._collect_symbols(t):
                self._declare(name)
            cmd = f"(assert {t})"
            self._send(cmd)
            self._levels[-1].asserts.append(cmd)
        seen = set(self._coherent_terms())
        for t in coh:
            if t in seen:
                continue
            cmd = f"(assert (= (toInt (ofInt {t})) {t}))"
            for name in self._collect_symbols(cmd):
                self._declare(name)
            self._send(cmd)
            self._levels[-1].asserts.append(cmd)
            self._levels[-1].names.append(f"@coh:{t}")

    def _coherent_terms(self) -> set[str]:
        out = set()
        for lv in self._levels:
            for n in lv.names:
                if n.startswith("@coh:"):
                    out.add(n[5:])
        return out

    # -- stack ------------------------------------------------------------------

    def push(self) -> None:
        try:
            self._send("(push 1)")
        except SolverProtocolError:
            self._proc = None  # next query recovers by replaying the shadow
        self._levels.append(_Level())

    def pop(self) -> None:
        if len(self._levels) == 1:
            raise SolverProtocolError("pop on empty assumption stack")
        try:
            if self._proc is not None:
                self._send("(pop 1)")
        except SolverProtocolError:
            self._proc = None
        lv = self._levels.pop()
        for n in lv.names:
            self._declared.discard(n)

    def assert_formulas(self, fs: list[Formula]) -> None:
        coh: list[str] = []
        texts = [self.enc_formula(f, coh) for f in fs]
        self._assert_texts(texts, coh)

    def with_assumptions(self, fs: list[Formula], body):
        """Run body() with fs asserted in a fresh frame; always pops."""
        self.push()
        try:
            self.assert_formulas(fs)
            return body()
        finally:
            self.pop()

    # -- queries -----------------------------------------------------------------

    def _cache_key(self, texts: tuple[str, ...]) -> tuple:
        ambient = tuple(tuple(lv.asserts) for lv in self._levels)
        return (ambient, texts)

    def check_valid(self, hypotheses: list[Formula], goal: Formula) -> str:
        """'valid' iff hypotheses together with the negated goal are
        unsatisfiable; 'unknown' on timeout or solver-unknown (never valid)."""
        coh: list[str] = []
        texts = tuple(self.enc_formula(h, coh) for h in hypotheses)
        goal_text = self.enc_formula(goal, coh)
        key = self._cache_key(texts + ("!goal", goal_text))
        hit = self._cache.get(key)
        if hit is not None:
            self.stats.cache_hits += 1
            return hit

        t0 = time.monotonic()
        self.stats.queries += 1
        try:
            if self._proc is None:
                self._restart()
            self.push()
            self._assert_texts(list(texts) + [f"(not {goal_text})"], coh)
            self._send("(check-sat)", flush=True)
            answer = self._read_result()
            self.pop()
        except (TimeoutError, SolverProtocolError):
            self._recover()
            self.stats.wall_ms += (time.monotonic() - t0) * 1000
            return UNKNOWN
        self.stats.wall_ms += (time.monotonic() - t0) * 1000

        if answer == "unsat":
            verdict = VALID
        elif answer == "sat":
            verdict = INVALID
        elif answer == "unknown":
            verdict = UNKNOWN
        elif answer.startswith("(error"):
            raise SolverProtocolError(f"solver error: {answer}")
        else:
            raise SolverProtocolError(f"unexpected solver reply: {answer!r}")
        self._cache[key] = verdict
        return verdict

    def _recover(self) -> None:
        """Restart the process and replay the shadow stack after a desync.

        The frame pushed for the failed query is discarded from the shadow
        first so the replay reconstructs the caller-visible state.
        """
        if len(self._levels) > 1:
            lv = self._levels.pop()
            for n in lv.names:
                self._declared.discard(n)
        self._kill()
        try:
            self._restart()
        except SolverStartError:
            self._proc = None


def open_session(cfg: SolverConfig, boxes: Optional[BoxTable] = None) -> SolverSession:
    """Start a solver process and emit the prelude."""
    return SolverSession(cfg, boxes)
