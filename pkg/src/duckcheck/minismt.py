"""A small SMT-LIB2 solver for the quantifier-free fragment the checker emits.

Speaks SMT-LIB2 over stdin/stdout (`python -m duckcheck.minismt`) so the
solver bridge can drive it exactly like a stock solver process: declare-fun,
assert, push/pop, check-sat. The logic covered is uninterpreted sorts and
functions with equality plus linear integer arithmetic.

Architecture: lazy SMT. Formulas are Tseitin-encoded over theory atoms, a
CDCL SAT core enumerates assignments, and a theory check (congruence closure
plus exact Fourier-Motzkin over the integers, with implied equalities
propagated between them through a care graph) validates each full assignment.
Theory conflicts are minimized by divide-and-conquer deletion and learned as
blocking clauses.

Soundness bias: `unsat` answers are always justified; timeouts and
out-of-fragment inputs answer `unknown`.
"""

from __future__ import annotations

import sys
import time
from fractions import Fraction
from typing import Optional, Union

Term = Union[str, int, tuple]

CONNECTIVES = {"and", "or", "not", "=>", "ite"}
ARITH_FUNS = {"+", "-", "*"}
ARITH_PREDS = {"<=", "<", ">=", ">"}

UNASSIGNED_LEVEL = 1 << 30


# ---------------------------------------------------------------------------
# S-expression reading
# ---------------------------------------------------------------------------

def tokenize(text: str):
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            yield c
            i += 1
        elif c == "|":
            j = text.index("|", i + 1)
            yield text[i:j + 1]
            i = j + 1
        elif c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();|\"":
                j += 1
            yield text[i:j]
            i = j


def parse_all(tokens) -> list:
    out = []
    stack: list[list] = []
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise ValueError("unbalanced parentheses")
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                out.append(done)
        else:
            atom: Term
            if tok.lstrip("-").isdigit() and tok != "-":
                atom = int(tok)
            else:
                atom = tok
            if stack:
                stack[-1].append(atom)
            else:
                out.append(atom)
    if stack:
        raise ValueError("unbalanced parentheses")
    return out


def unquote(sym: str) -> str:
    if sym.startswith("|") and sym.endswith("|"):
        return sym[1:-1]
    return sym


# ---------------------------------------------------------------------------
# Congruence closure
# ---------------------------------------------------------------------------

class CC:
    """Congruence closure over ground terms.

    Terms are hashable tuples: ("leaf", name), ("num", n),
    ("app", fn, args), ("arith", op, args). Predicate applications are
    merged with the distinguished TRUE/FALSE leaves per their assignment.

    A global signature table keyed by current class representatives detects
    congruences both when terms are added and when classes merge; merged
    classes rehash their parent applications. Stale table entries are
    unreachable because representatives are never reused once absorbed.
    """

    TRUE = ("leaf", "@true")
    FALSE = ("leaf", "@false")

    def __init__(self) -> None:
        self.parent: dict = {}
        self.use: dict = {}
        self.members: dict = {}
        self.sigtable: dict = {}
        self.pending: list = []
        self.add(self.TRUE)
        self.add(self.FALSE)

    def add(self, t) -> None:
        if t in self.parent:
            return
        self.parent[t] = t
        self.members[t] = [t]
        self.use[t] = []
        if t[0] in ("app", "arith"):
            for a in t[2]:
                self.add(a)
                self.use[self.find(a)].append(t)
            s = self._signature(t)
            other = self.sigtable.get(s)
            if other is None:
                self.sigtable[s] = t
            elif self.find(other) != self.find(t):
                self.pending.append((t, other))
                self._process()

    def find(self, t):
        root = t
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[t] != root:
            self.parent[t], t = root, self.parent[t]
        return root

    def _signature(self, t):
        return (t[0], t[1], tuple(self.find(a) for a in t[2]))

    def merge(self, a, b) -> bool:
        """Union the classes of a and b; False on a TRUE=FALSE clash."""
        self.add(a)
        self.add(b)
        self.pending.append((a, b))
        return self._process()

    def _process(self) -> bool:
        while self.pending:
            a, b = self.pending.pop()
            ra, rb = self.find(a), self.find(b)
            if ra == rb:
                continue
            if len(self.members[ra]) < len(self.members[rb]):
                ra, rb = rb, ra
            self.parent[rb] = ra
            self.members[ra].extend(self.members[rb])
            touched = self.use[rb]
            self.use[ra].extend(touched)
            self.use[rb] = []
            for u in touched:
                s = self._signature(u)
                v = self.sigtable.get(s)
                if v is None:
                    self.sigtable[s] = u
                elif self.find(u) != self.find(v):
                    self.pending.append((u, v))
        return self.find(self.TRUE) != self.find(self.FALSE)

    def equal(self, a, b) -> bool:
        return self.find(a) == self.find(b)

    def consistent(self) -> bool:
        return self.find(self.TRUE) != self.find(self.FALSE)


# ---------------------------------------------------------------------------
# Linear integer arithmetic: exact Fourier-Motzkin
# ---------------------------------------------------------------------------

class LinExpr:
    """Sum of coeff*var + const with Fraction coefficients."""

    __slots__ = ("coeffs", "const")

    def __init__(self, coeffs=None, const=Fraction(0)):
        self.coeffs: dict = dict(coeffs or {})
        self.const = Fraction(const)

    def __add__(self, other: "LinExpr") -> "LinExpr":
        out = LinExpr(self.coeffs, self.const + other.const)
        for v, c in other.coeffs.items():
            nc = out.coeffs.get(v, Fraction(0)) + c
            if nc == 0:
                out.coeffs.pop(v, None)
            else:
                out.coeffs[v] = nc
        return out

    def __neg__(self) -> "LinExpr":
        return LinExpr({v: -c for v, c in self.coeffs.items()}, -self.const)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return self + (-other)

    def scale(self, k: Fraction) -> "LinExpr":
        if k == 0:
            return LinExpr()
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.const * k)

    def is_const(self) -> bool:
        return not self.coeffs


def lia_feasible(constraints: list[LinExpr]) -> bool:
    """Each constraint means expr <= 0. Exact FM over the rationals; callers
    pre-tighten strict integer inequalities, so an infeasible answer is
    sound for the integers."""
    work = [LinExpr(c.coeffs, c.const) for c in constraints]
    steps = 0
    while True:
        remaining = []
        counts: dict = {}
        for c in work:
            if c.is_const():
                if c.const > 0:
                    return False
            else:
                remaining.append(c)
                for v, coef in c.coeffs.items():
                    pn = counts.setdefault(v, [0, 0])
                    pn[0 if coef > 0 else 1] += 1
        if not remaining:
            return True
        v = min(counts, key=lambda u: (counts[u][0] * counts[u][1], repr(u)))
        if counts[v][0] * counts[v][1] > 500 or steps > 40:
            raise TimeoutError("fourier-motzkin blowup")
        steps += 1
        pos = [c for c in remaining if c.coeffs.get(v, 0) > 0]
        neg_ = [c for c in remaining if c.coeffs.get(v, 0) < 0]
        rest = [c for c in remaining if v not in c.coeffs]
        out = rest
        for p in pos:
            pa = p.scale(Fraction(1, p.coeffs[v]))
            for q in neg_:
                comb = pa + q.scale(Fraction(1, -q.coeffs[v]))
                comb.coeffs.pop(v, None)
                out.append(comb)
        work = out


# ---------------------------------------------------------------------------
# Theory solver: EUF + LIA with implied-equality propagation
# ---------------------------------------------------------------------------

class Theory:
    def __init__(self, sorts: dict):
        self.sorts = sorts  # theory term -> sort name

    def _is_int(self, t) -> bool:
        if isinstance(t, tuple):
            if t[0] == "num" or t[0] == "arith":
                return True
            return self.sorts.get(t) == "Int"
        return False

    def check(self, assigned: list[tuple[Term, bool]]) -> bool:
        """True iff the conjunction of signed atoms is theory-consistent."""
        cc = CC()
        diseqs: list[tuple] = []
        arith_atoms: list[tuple[Term, bool]] = []
        int_terms: set = set()

        def walk(t) -> None:
            cc.add(t)
            if isinstance(t, tuple) and t[0] in ("app", "arith"):
                for a in t[2]:
                    walk(a)
            if self._is_int(t):
                int_terms.add(t)

        ok = True
        for atom, val in assigned:
            kind = atom[0]
            if kind == "eq":
                walk(atom[1])
                walk(atom[2])
                if val:
                    ok = cc.merge(atom[1], atom[2]) and ok
                else:
                    diseqs.append((atom[1], atom[2]))
            elif kind == "le":
                arith_atoms.append((atom, val))
                for t in atom[3]:
                    walk(t)
            elif kind == "pred":
                walk(atom[1])
                ok = cc.merge(atom[1], cc.TRUE if val else cc.FALSE) and ok
            else:
                raise ValueError(f"unknown atom kind {kind}")
        if not ok or not cc.consistent():
            return False
        for (a, b) in diseqs:
            if cc.equal(a, b):
                return False

        # pure equality queries need no arithmetic reasoning at all
        if not arith_atoms and not any(
                t[0] in ("num", "arith") for t in int_terms):
            return True

        by_sym = None

        def lin_struct(t) -> LinExpr:
            """Structural linear form of an Int term; uninterpreted Int
            applications become class variables."""
            if t[0] == "num":
                return LinExpr(const=Fraction(t[1]))
            if t[0] == "arith":
                op = t[1]
                parts = [lin_struct(a) for a in t[2]]
                if op == "+":
                    acc = LinExpr()
                    for p in parts:
                        acc = acc + p
                    return acc
                if op == "-":
                    if len(parts) == 1:
                        return -parts[0]
                    acc = parts[0]
                    for p in parts[1:]:
                        acc = acc - p
                    return acc
                # multiplication: at most one non-constant factor (linear)
                consts = [p for p in parts if p.is_const()]
                others = [p for p in parts if not p.is_const()]
                if len(others) > 1:
                    raise TimeoutError("nonlinear arithmetic")
                k = Fraction(1)
                for p in consts:
                    k *= p.const
                return others[0].scale(k) if others else LinExpr(const=k)
            return LinExpr({("cls", cc.find(t)): Fraction(1)})

        for _ in range(200):
            # base constraints: arithmetic atoms
            constraints: list[LinExpr] = []
            for atom, val in arith_atoms:
                _, _, strict, args = atom
                la, lb = lin_struct(args[0]), lin_struct(args[1])
                if val:
                    d = la - lb
                    if strict:
                        d.const += 1
                else:
                    d = lb - la
                    if not strict:
                        d.const += 1
                constraints.append(d)
            # link every Int class member to a common linear meaning
            classes: dict = {}
            for t in int_terms:
                classes.setdefault(cc.find(t), []).append(t)
            for rep, ms in classes.items():
                nums = {m[1] for m in ms if m[0] == "num"}
                if len(nums) > 1:
                    return False
                base = lin_struct(ms[0])
                for m in ms[1:]:
                    lm = lin_struct(m)
                    constraints.append(base - lm)
                    constraints.append(lm - base)

            if not lia_feasible(constraints):
                return False

            merged_any = False
            if by_sym is None:
                by_sym = {}
                for t in list(cc.parent):
                    if isinstance(t, tuple) and t[0] in ("app", "arith") \
                            and any(a in int_terms for a in t[2]):
                        by_sym.setdefault((t[0], t[1], len(t[2])), []).append(t)
            for (a, b) in self._care_pairs(cc, int_terms, by_sym):
                if cc.equal(a, b):
                    continue
                d = lin_struct(a) - lin_struct(b)
                if d.is_const():
                    if d.const == 0 and not cc.merge(a, b):
                        return False
                    merged_any = merged_any or d.const == 0
                    continue
                lt = LinExpr(d.coeffs, d.const + 1)
                gt = LinExpr((-d).coeffs, (-d).const + 1)
                if not lia_feasible(constraints + [lt]) and \
                   not lia_feasible(constraints + [gt]):
                    if not cc.merge(a, b):
                        return False
                    merged_any = True
            if not merged_any:
                break

        for (a, b) in diseqs:
            if cc.equal(a, b):
                return False
        return True

    @staticmethod
    def _care_pairs(cc: CC, int_terms: set, by_sym: dict) -> list[tuple]:
        """Pairs of Int terms whose unification could trigger a congruence:
        arguments at the single mismatching position of same-symbol
        applications."""
        pairs: set = set()
        for apps in by_sym.values():
            if len(apps) < 2:
                continue
            for i in range(len(apps)):
                for j in range(i + 1, len(apps)):
                    u, vv = apps[i], apps[j]
                    if cc.equal(u, vv):
                        continue
                    mism = [(a, b) for a, b in zip(u[2], vv[2]) if not cc.equal(a, b)]
                    if len(mism) == 1 and mism[0][0] in int_terms \
                            and mism[0][1] in int_terms:
                        a, b = mism[0]
                        pairs.add((a, b) if repr(a) < repr(b) else (b, a))
        return sorted(pairs, key=repr)


# ---------------------------------------------------------------------------
# CDCL SAT core
# ---------------------------------------------------------------------------

class SatSolver:
    def __init__(self) -> None:
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.assign: list[int] = []
        self.level: list[int] = []
        self.reason: list[Optional[int]] = []
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.activity: list[float] = []
        self.var_inc = 1.0
        self.qhead = 0
        self.root_conflict = False

    def new_var(self) -> int:
        self.nvars += 1
        self.assign.append(0)
        self.level.append(-1)
        self.reason.append(None)
        self.activity.append(0.0)
        v = self.nvars - 1
        self.watches[v << 1] = []
        self.watches[(v << 1) | 1] = []
        return v

    @staticmethod
    def lit(var: int, positive: bool) -> int:
        return (var << 1) | (0 if positive else 1)

    def value(self, lit: int) -> int:
        v = self.assign[lit >> 1]
        if v == 0:
            return 0
        return v if (lit & 1) == 0 else -v

    def lit_level(self, lit: int) -> int:
        return self.level[lit >> 1] if self.assign[lit >> 1] != 0 else UNASSIGNED_LEVEL

    def add_clause(self, lits: list[int]) -> bool:
        """Add a clause at decision level 0 (pre-search). False if the
        instance is trivially unsat."""
        out: list[int] = []
        seen = set()
        for l in lits:
            if (l ^ 1) in seen:
                return True
            if l in seen:
                continue
            if self.value(l) == 1 and self.level[l >> 1] == 0:
                return True
            if self.value(l) == -1 and self.level[l >> 1] == 0:
                continue
            seen.add(l)
            out.append(l)
        if not out:
            self.root_conflict = True
            return False
        if len(out) == 1:
            v = self.value(out[0])
            if v == -1:
                self.root_conflict = True
                return False
            if v == 0:
                self._enqueue(out[0], None)
            return True
        idx = len(self.clauses)
        self.clauses.append(out)
        self.watches[out[0]].append(idx)
        self.watches[out[1]].append(idx)
        return True

    def attach_learned(self, lits: list[int]) -> Optional[str]:
        """Attach a clause whose literals are all currently false; backjump
        so the clause is no longer conflicting. Returns 'unsat' when the
        clause is empty or false at level 0."""
        if not lits:
            return "unsat"
        lits = sorted(set(lits), key=lambda l: -self.lit_level(l))
        top = self.lit_level(lits[0])
        if top == 0:
            return "unsat"
        if len(lits) == 1:
            self.cancel_until(0)
            if self.value(lits[0]) == -1:
                return "unsat"
            if self.value(lits[0]) == 0:
                self._enqueue(lits[0], None)
            return None
        second = self.lit_level(lits[1])
        if second >= top:
            back = max(top - 1, 0)
        else:
            back = second
        self.cancel_until(back)
        idx = len(self.clauses)
        self.clauses.append(lits)
        self.watches[lits[0]].append(idx)
        self.watches[lits[1]].append(idx)
        if self.value(lits[0]) == 0 and all(self.value(l) == -1 for l in lits[1:]):
            self._enqueue(lits[0], idx)
        return None

    def _enqueue(self, lit: int, reason: Optional[int]) -> None:
        var = lit >> 1
        self.assign[var] = 1 if (lit & 1) == 0 else -1
        self.level[var] = len(self.trail_lim)
        self.reason[var] = reason
        self.trail.append(lit)

    def propagate(self) -> Optional[int]:
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            falsified = lit ^ 1
            watchlist = self.watches[falsified]
            i = 0
            while i < len(watchlist):
                ci = watchlist[i]
                clause = self.clauses[ci]
                if clause[0] == falsified:
                    clause[0], clause[1] = clause[1], clause[0]
                if self.value(clause[0]) == 1:
                    i += 1
                    continue
                moved = False
                for k in range(2, len(clause)):
                    if self.value(clause[k]) != -1:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches[clause[1]].append(ci)
                        watchlist[i] = watchlist[-1]
                        watchlist.pop()
                        moved = True
                        break
                if moved:
                    continue
                v0 = self.value(clause[0])
                if v0 == -1:
                    return ci
                if v0 == 0:
                    self._enqueue(clause[0], ci)
                i += 1
        return None

    def _bump(self, var: int) -> None:
        self.activity[var] += self.var_inc
        if self.activity[var] > 1e100:
            for i in range(self.nvars):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100

    def analyze(self, confl: int) -> list[int]:
        """First-UIP conflict analysis; returns the learned clause with the
        asserting literal first."""
        cur_level = len(self.trail_lim)
        seen = [False] * self.nvars
        learned: list[int] = []
        counter = 0
        idx = len(self.trail) - 1
        reason_lits = list(self.clauses[confl])
        p: Optional[int] = None
        while True:
            for q in reason_lits:
                if p is not None and q == p:
                    continue  # the literal this reason clause propagated
                var = q >> 1
                lv = self.level[var]
                if not seen[var] and lv > 0:
                    seen[var] = True
                    self._bump(var)
                    if lv >= cur_level:
                        counter += 1
                    else:
                        learned.append(q)
            while idx >= 0 and not seen[self.trail[idx] >> 1]:
                idx -= 1
            if idx < 0:
                # conflict depends only on level-0 facts
                return []
            p = self.trail[idx]
            var = p >> 1
            seen[var] = False
            counter -= 1
            idx -= 1
            if counter == 0:
                return [p ^ 1] + learned
            ci = self.reason[var]
            reason_lits = list(self.clauses[ci]) if ci is not None else []

    def cancel_until(self, lvl: int) -> None:
        while len(self.trail_lim) > lvl:
            lim = self.trail_lim.pop()
            for lit in self.trail[lim:]:
                var = lit >> 1
                self.assign[var] = 0
                self.reason[var] = None
                self.level[var] = -1
            del self.trail[lim:]
        self.qhead = min(self.qhead, len(self.trail))

    def decide(self) -> Optional[int]:
        best = -1
        score = -1.0
        for v in range(self.nvars):
            if self.assign[v] == 0 and self.activity[v] > score:
                best, score = v, self.activity[v]
        if best < 0:
            return None
        return SatSolver.lit(best, False)

    def solve(self, theory_cb, deadline: Optional[float]) -> str:
        if self.root_conflict:
            return "unsat"
        conflicts = 0
        while True:
            if deadline is not None and time.monotonic() > deadline:
                return "unknown"
            confl = self.propagate()
            if confl is not None:
                conflicts += 1
                if conflicts > 500000:
                    return "unknown"
                if not self.trail_lim:
                    return "unsat"
                learned = self.analyze(confl)
                if self.attach_learned(learned) == "unsat":
                    return "unsat"
                self.var_inc *= 1.05
                continue
            lit = self.decide()
            if lit is None:
                verdict = theory_cb()
                if verdict is True:
                    return "sat"
                if verdict == "unknown":
                    return "unknown"
                if self.attach_learned(verdict) == "unsat":
                    return "unsat"
                continue
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, None)


# ---------------------------------------------------------------------------
# Session: declarations, assertion stack, encoding, command loop
# ---------------------------------------------------------------------------

class Frame:
    def __init__(self) -> None:
        self.assertions: list = []
        self.declared: list[str] = []


class Session:
    def __init__(self, out) -> None:
        self.out = out
        self.frames = [Frame()]
        self.fun_sorts: dict[str, tuple[tuple[str, ...], str]] = {}
        self.options: dict[str, str] = {}
        self.timeout_ms: Optional[int] = None

    def declare_fun(self, name: str, argsorts, retsort) -> None:
        self.fun_sorts[name] = (tuple(argsorts), retsort)
        self.frames[-1].declared.append(name)

    def pop_frames(self, n: int) -> None:
        for _ in range(n):
            if len(self.frames) == 1:
                raise ValueError("pop on empty assertion stack")
            f = self.frames.pop()
            for name in f.declared:
                self.fun_sorts.pop(name, None)

    def term_sort(self, t: Term) -> str:
        if isinstance(t, int):
            return "Int"
        if isinstance(t, str):
            s = unquote(t)
            if s in ("true", "false"):
                return "Bool"
            info = self.fun_sorts.get(s)
            if info is None:
                raise ValueError(f"undeclared symbol {s}")
            return info[1]
        head = t[0] if t else None
        if head in ARITH_FUNS:
            return "Int"
        if head in ARITH_PREDS or head in ("=", "distinct", "and", "or", "not", "=>"):
            return "Bool"
        if head == "ite":
            return self.term_sort(t[2])
        s = unquote(head)
        info = self.fun_sorts.get(s)
        if info is None:
            raise ValueError(f"undeclared symbol {s}")
        return info[1]

    def to_theory_term(self, t: Term):
        if isinstance(t, int):
            return ("num", t)
        if isinstance(t, str):
            return ("leaf", unquote(t))
        head = t[0]
        if head in ARITH_FUNS:
            return ("arith", head, tuple(self.to_theory_term(a) for a in t[1:]))
        return ("app", unquote(head), tuple(self.to_theory_term(a) for a in t[1:]))

    def _encode(self, assertions: list):
        sat = SatSolver()
        atom_vars: dict = {}
        atom_list: list = []
        sorts: dict = {}

        def sort_fill(tt, sort: str) -> None:
            if tt in sorts:
                return
            sorts[tt] = sort
            if tt[0] == "app":
                info = self.fun_sorts.get(tt[1])
                argsorts = list(info[0]) if info else []
                for k, a in enumerate(tt[2]):
                    sort_fill(a, argsorts[k] if k < len(argsorts) else "?")
            elif tt[0] == "arith":
                for a in tt[2]:
                    sort_fill(a, "Int")

        def atom_lit(atom) -> int:
            v = atom_vars.get(atom)
            if v is None:
                v = sat.new_var()
                atom_vars[atom] = v
                atom_list.append(atom)
            return SatSolver.lit(v, True)

        def gate(clauses_for_gate) -> int:
            v = sat.new_var()
            g = SatSolver.lit(v, True)
            clauses_for_gate(g)
            return g

        def enc(t: Term) -> int:
            if t == "true" or t is True:
                return gate(lambda g: sat.add_clause([g]))
            if t == "false" or t is False:
                return gate(lambda g: sat.add_clause([g ^ 1]))
            if isinstance(t, str):
                s = unquote(t)
                info = self.fun_sorts.get(s)
                if info is None or info[1] != "Bool":
                    raise ValueError(f"not a boolean symbol: {s}")
                tt = ("app", s, ())
                sort_fill(tt, "Bool")
                return atom_lit(("pred", tt))
            if isinstance(t, int):
                raise ValueError("integer used as a formula")
            head = t[0]
            if head == "not":
                return enc(t[1]) ^ 1
            if head in ("and", "or"):
                lits = [enc(a) for a in t[1:]]
                if head == "and":
                    def mk(g, lits=lits):
                        for l in lits:
                            sat.add_clause([g ^ 1, l])
                        sat.add_clause([g] + [l ^ 1 for l in lits])
                else:
                    def mk(g, lits=lits):
                        for l in lits:
                            sat.add_clause([g, l ^ 1])
                        sat.add_clause([g ^ 1] + lits)
                return gate(mk)
            if head == "=>":
                lits = [enc(a) for a in t[1:]]
                acc = lits[-1]
                for l in reversed(lits[:-1]):
                    a = l

                    def mk(g, a=a, acc=acc):
                        sat.add_clause([g, a])
                        sat.add_clause([g, acc ^ 1])
                        sat.add_clause([g ^ 1, a ^ 1, acc])
                    acc = gate(mk)
                return acc
            if head == "ite":
                c, a, b = enc(t[1]), enc(t[2]), enc(t[3])

                def mk(g, c=c, a=a, b=b):
                    sat.add_clause([g ^ 1, c ^ 1, a])
                    sat.add_clause([g ^ 1, c, b])
                    sat.add_clause([g, c ^ 1, a ^ 1])
                    sat.add_clause([g, c, b ^ 1])
                return gate(mk)
            if head == "=":
                if len(t) != 3:
                    # chainable equality: pairwise
                    return enc(("and",) + tuple(("=", t[i], t[i + 1])
                                                for i in range(1, len(t) - 1)))
                s0 = self.term_sort(t[1])
                s1 = self.term_sort(t[2])
                if s0 == "Bool" or s1 == "Bool":
                    a, b = enc(t[1]), enc(t[2])

                    def mk(g, a=a, b=b):
                        sat.add_clause([g ^ 1, a ^ 1, b])
                        sat.add_clause([g ^ 1, b ^ 1, a])
                        sat.add_clause([g, a, b])
                        sat.add_clause([g, a ^ 1, b ^ 1])
                    return gate(mk)
                ta = self.to_theory_term(t[1])
                tb = self.to_theory_term(t[2])
                sort_fill(ta, s0)
                sort_fill(tb, s1)
                if s0 == "Int" or s1 == "Int" or ta[0] in ("num", "arith") \
                        or tb[0] in ("num", "arith"):
                    l1 = atom_lit(("le", "<=", False, (ta, tb)))
                    l2 = atom_lit(("le", "<=", False, (tb, ta)))

                    def mk(g, l1=l1, l2=l2):
                        sat.add_clause([g ^ 1, l1])
                        sat.add_clause([g ^ 1, l2])
                        sat.add_clause([g, l1 ^ 1, l2 ^ 1])
                    return gate(mk)
                a, b = sorted((ta, tb), key=repr)
                return atom_lit(("eq", a, b))
            if head == "distinct":
                args = t[1:]
                lits = [enc(("not", ("=", args[i], args[j])))
                        for i in range(len(args)) for j in range(i + 1, len(args))]

                def mk(g, lits=lits):
                    for l in lits:
                        sat.add_clause([g ^ 1, l])
                    sat.add_clause([g] + [l ^ 1 for l in lits])
                return gate(mk)
            if head in ARITH_PREDS:
                ta = self.to_theory_term(t[1])
                tb = self.to_theory_term(t[2])
                sort_fill(ta, "Int")
                sort_fill(tb, "Int")
                if head == "<=":
                    return atom_lit(("le", "<=", False, (ta, tb)))
                if head == "<":
                    return atom_lit(("le", "<", True, (ta, tb)))
                if head == ">=":
                    return atom_lit(("le", "<=", False, (tb, ta)))
                return atom_lit(("le", "<", True, (tb, ta)))
            s = unquote(head)
            info = self.fun_sorts.get(s)
            if info is None:
                raise ValueError(f"undeclared symbol {s}")
            if info[1] != "Bool":
                raise ValueError(f"term of sort {info[1]} used as a formula")
            tt = self.to_theory_term(t)
            sort_fill(tt, "Bool")
            return atom_lit(("pred", tt))

        for a in assertions:
            sat.add_clause([enc(a)])
        return sat, atom_vars, atom_list, sorts

    def check_sat(self) -> str:
        assertions = [a for f in self.frames for a in f.assertions]
        try:
            sat, atom_vars, atom_list, sorts = self._encode(assertions)
        except ValueError as e:
            self.out.write(f'(error "{e}")\n')
            self.out.flush()
            return "unknown"
        theory = Theory(sorts)
        deadline = None
        if self.timeout_ms is not None:
            deadline = time.monotonic() + self.timeout_ms / 1000.0

        def theory_cb():
            atoms = []
            for atom in atom_list:
                val = sat.assign[atom_vars[atom]]
                if val != 0:
                    atoms.append((atom, val == 1))
            try:
                if theory.check(atoms):
                    return True
            except TimeoutError:
                return "unknown"
            if deadline is not None and time.monotonic() > deadline:
                return "unknown"
            core = self._minimize(theory, atoms, deadline)
            return [SatSolver.lit(atom_vars[atom], not val) for (atom, val) in core]

        try:
            return sat.solve(theory_cb, deadline)
        except (RecursionError, MemoryError):
            return "unknown"

    @staticmethod
    def _minimize(theory: Theory, atoms: list, deadline) -> list:
        """Divide-and-conquer deletion toward a small inconsistent subset."""
        core = list(atoms)
        chunk = max(1, len(core) // 2)
        while chunk >= 1:
            i = 0
            while i < len(core):
                if deadline is not None and time.monotonic() > deadline:
                    return core
                trial = core[:i] + core[i + chunk:]
                try:
                    consistent = theory.check(trial)
                except TimeoutError:
                    consistent = True
                if not consistent:
                    core = trial
                else:
                    i += chunk
            chunk //= 2
        return core

    # -- command loop --------------------------------------------------------

    def run_command(self, cmd) -> bool:
        if not isinstance(cmd, (list, tuple)) or not cmd:
            self.out.write('(error "malformed command")\n')
            self.out.flush()
            return True
        head = cmd[0]
        if head == "exit":
            return False
        if head in ("set-logic", "set-info", "declare-sort", "define-sort"):
            pass
        elif head == "set-option":
            if len(cmd) >= 3:
                key = str(cmd[1])
                self.options[key] = str(cmd[2])
                if key == ":timeout":
                    try:
                        self.timeout_ms = int(cmd[2])
                    except (TypeError, ValueError):
                        pass
        elif head == "declare-fun":
            self.declare_fun(unquote(cmd[1]), [str(s) for s in cmd[2]], str(cmd[3]))
        elif head == "declare-const":
            self.declare_fun(unquote(cmd[1]), (), str(cmd[2]))
        elif head == "assert":
            self.frames[-1].assertions.append(_tupled(cmd[1]))
        elif head == "push":
            n = cmd[1] if len(cmd) > 1 and isinstance(cmd[1], int) else 1
            for _ in range(n):
                self.frames.append(Frame())
        elif head == "pop":
            n = cmd[1] if len(cmd) > 1 and isinstance(cmd[1], int) else 1
            try:
                self.pop_frames(n)
            except ValueError as e:
                self.out.write(f'(error "{e}")\n')
        elif head == "check-sat":
            self.out.write(self.check_sat() + "\n")
        elif head == "echo":
            self.out.write(str(cmd[1]).strip('"') + "\n")
        elif head == "reset":
            self.frames = [Frame()]
            self.fun_sorts = {}
        else:
            self.out.write(f'(error "unsupported command {head}")\n')
        self.out.flush()
        return True


def _tupled(t):
    if isinstance(t, list):
        return tuple(_tupled(x) for x in t)
    return t


def _paren_depth(text: str) -> int:
    depth = 0
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == "|":
            j = text.find("|", i + 1)
            i = n if j < 0 else j + 1
            continue
        if c == '"':
            j = text.find('"', i + 1)
            i = n if j < 0 else j + 1
            continue
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        i += 1
    return depth


def main() -> int:
    session = Session(sys.stdout)
    buf = ""
    for line in sys.stdin:
        buf += line
        if _paren_depth(buf) > 0:
            continue
        try:
            cmds = parse_all(tokenize(buf))
        except (ValueError, IndexError):
            session.out.write('(error "parse error")\n')
            session.out.flush()
            buf = ""
            continue
        buf = ""
        for cmd in cmds:
            if not session.run_command(cmd):
                return 0
    return 0


if __name__ == "__main__":
    sys.exit(main())
