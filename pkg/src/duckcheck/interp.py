"""Small-step call-by-value evaluation with the primitive interpretation.

step applies at most one rule; eval iterates with a fuel budget; the
soundness probe runs checked programs and asserts they never get stuck,
additionally evaluating the ground part of the checked type against the
result value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .errors import SoundnessViolation
from .syntax import (
    PRIM_ARITY, TAG_BOOL, TAG_INT, TAG_STR,
    And, App, BoolC, DictExt, EVal, EmptyDict, Expr, Fun, HasTy, If, IntC,
    Let, Mono, New, NullC, PartialPrim, Prim, Scheme, StrC, TApp,
    TyFun, VConst, Value, Var, free_vars, fresh_name, subst_nu, subst_value,
)
from .logic import GroundModel, STUCK, dict_entries, eval_ground, value_tag, values_equal


@dataclass(frozen=True)
class Stepped:
    expr: Expr


@dataclass(frozen=True)
class IsValue:
    value: Value


@dataclass(frozen=True)
class Stuck:
    reason: str


StepResult = Union[Stepped, IsValue, Stuck]


def _bool(b: bool) -> Value:
    return VConst(BoolC(b))


def _is_dictish(w: Value, defs) -> bool:
    return dict_entries(w, defs) is not None


def _keys_in_order(w: Value, defs) -> Optional[list[str]]:
    """Distinct keys, outermost extension first."""
    if isinstance(w, VConst) and isinstance(w.const, EmptyDict):
        return []
    if isinstance(w, DictExt):
        if not (isinstance(w.key, VConst) and isinstance(w.key.const, StrC)):
            return None
        rest = _keys_in_order(w.base, defs)
        if rest is None:
            return None
        k = w.key.const.value
        return [k] + [r for r in rest if r != k]
    if isinstance(w, New):
        d = defs.get(w.ctor)
        if d is None:
            return None
        return [f for (f, _) in d.fields]
    return None


class Interp:
    """Evaluator over a fixed datatype definition environment."""

    def __init__(self, defs=None):
        self.defs = defs or {}

    # -- delta ---------------------------------------------------------------

    def delta(self, c, w: Value) -> Optional[Expr]:
        """The meaning of one application step of a primitive; None when
        undefined (the caller reports a stuck state)."""
        if isinstance(c, Prim):
            name, pending = c.name, ()
        elif isinstance(c, PartialPrim):
            name, pending = c.name, c.pending
        else:
            return None
        arity = PRIM_ARITY.get(name)
        if arity is None:
            return None
        args = pending + (w,)
        if not self._arg_ok(name, len(args) - 1, w):
            return None
        if len(args) < arity:
            return EVal(VConst(PartialPrim(name, args)))
        return self._apply_full(name, args)

    def _arg_ok(self, name: str, idx: int, w: Value) -> bool:
        tag = value_tag(w)
        if name in ("+", "-"):
            return tag == TAG_INT
        if name == "not":
            return tag == TAG_BOOL
        if name in ("has", "mem", "get", "set"):
            if idx == 0:
                return _is_dictish(w, self.defs)
            if idx == 1:
                return tag == TAG_STR
            return True
        if name == "keys":
            return _is_dictish(w, self.defs)
        return True  # =, tag, fix accept anything

    def _apply_full(self, name: str, args: tuple[Value, ...]) -> Optional[Expr]:
        # the per-argument checks in delta() normally guarantee the domains,
        # but hand-built partial applications must still fail soft
        if name in ("+", "-"):
            a, b = args
            if not all(isinstance(w, VConst) and isinstance(w.const, IntC)
                       for w in (a, b)):
                return None
            x = a.const.value
            y = b.const.value
            return EVal(VConst(IntC(x + y if name == "+" else x - y)))
        if name == "=":
            return EVal(_bool(values_equal(args[0], args[1], self.defs)))
        if name == "not":
            if not (isinstance(args[0], VConst) and isinstance(args[0].const, BoolC)):
                return None
            return EVal(_bool(not args[0].const.value))
        if name == "tag":
            t = value_tag(args[0])
            return EVal(VConst(StrC(t))) if t is not None else None
        if name in ("has", "mem", "get"):
            entries = dict_entries(args[0], self.defs)
            if entries is None or not (isinstance(args[1], VConst)
                                       and isinstance(args[1].const, StrC)):
                return None
            key = args[1].const.value
            if name in ("has", "mem"):
                return EVal(_bool(key in entries))
            if key not in entries:
                return None
            return EVal(entries[key])
        if name == "set":
            d, k, x = args
            if dict_entries(d, self.defs) is None or not (
                    isinstance(k, VConst) and isinstance(k.const, StrC)):
                return None
            return EVal(DictExt(d, k, x))
        if name == "keys":
            ks = _keys_in_order(args[0], self.defs)
            if ks is None:
                return None
            lst: Value = VConst(NullC())
            for k in reversed(ks):
                lst = New("List", None, (VConst(StrC(k)), lst))
            return EVal(lst)
        if name == "fix":
            # delta(fix, f) = fun y -> (f (fix f)) y, eta-guarded
            f = args[0]
            fixv: Value = VConst(PartialPrim("fix", ()))
            y = fresh_name("y")
            a = fresh_name("a")
            b = fresh_name("b")
            body = Let(a, None, App(fixv, f),
                       Let(b, None, App(f, Var(a)),
                           App(Var(b), Var(y))))
            return EVal(Fun(y, None, body))
        return None

    # -- step ------------------------------------------------------------------

    def step(self, e: Expr) -> StepResult:
        if isinstance(e, EVal):
            return IsValue(e.value)
        if isinstance(e, Let):
            if isinstance(e.rhs, EVal):
                return Stepped(subst_value(e.body, e.binder, e.rhs.value))
            inner = self.step(e.rhs)
            if isinstance(inner, Stepped):
                return Stepped(Let(e.binder, e.ann, inner.expr, e.body, e.pos))
            if isinstance(inner, Stuck):
                return inner
            raise AssertionError("non-value let rhs stepped to a value result")
        if isinstance(e, If):
            g = e.guard
            if isinstance(g, VConst) and isinstance(g.const, BoolC):
                return Stepped(e.then if g.const.value else e.els)
            return Stuck("if-guard-not-a-boolean")
        if isinstance(e, App):
            fn = e.fn
            if isinstance(fn, Fun):
                return Stepped(subst_value(fn.body, fn.binder, e.arg))
            if isinstance(fn, VConst) and isinstance(fn.const, (Prim, PartialPrim)):
                out = self.delta(fn.const, e.arg)
                if out is None:
                    return Stuck("delta-undefined")
                return Stepped(out)
            return Stuck("apply-non-function")
        if isinstance(e, TApp):
            fn = e.fn
            if isinstance(fn, TyFun):
                return Stepped(fn.body)
            if isinstance(fn, VConst) and isinstance(fn.const, Prim) \
                    and fn.const.name == "fix":
                return Stepped(EVal(VConst(PartialPrim("fix", ()))))
            return Stuck("type-apply-non-type-function")
        raise TypeError(f"step: unexpected expression {e!r}")


@dataclass
class EvalOutcome:
    status: str                     # "value" | "stuck" | "out-of-fuel"
    value: Optional[Value] = None
    reason: Optional[str] = None
    trace_tail: tuple[Expr, ...] = ()
    steps: int = 0


def eval_expr(e: Expr, fuel: int = 10 ** 6, defs=None,
              trace=None) -> EvalOutcome:
    """Iterate the step relation up to fuel; deterministic."""
    interp = Interp(defs)
    tail: list[Expr] = []
    steps = 0
    cur = e
    while True:
        res = interp.step(cur)
        if isinstance(res, IsValue):
            return EvalOutcome("value", value=res.value, steps=steps)
        if isinstance(res, Stuck):
            return EvalOutcome("stuck", reason=res.reason,
                               trace_tail=tuple(tail[-5:] + [cur]), steps=steps)
        if steps >= fuel:
            return EvalOutcome("out-of-fuel", steps=steps)
        steps += 1
        if trace is not None:
            trace(cur)
        tail.append(cur)
        if len(tail) > 5:
            tail.pop(0)
        cur = res.expr


@dataclass
class SoundnessReport:
    outcome: EvalOutcome
    scheme: Scheme
    ground_checked: bool
    ground_ok: bool


def soundness_probe(defs, e: Expr, fuel: int = 10 ** 6,
                    scheme: Optional[Scheme] = None) -> SoundnessReport:
    """Run a checked program and assert progress: the outcome is never
    stuck. When the checked type has a decidable ground shape after
    substituting the result value, evaluate it too."""
    if scheme is None:
        from .checker import check_program
        scheme = check_program(defs, e)
    outcome = eval_expr(e, fuel=fuel, defs=defs)
    if outcome.status == "stuck":
        raise SoundnessViolation(
            f"checked program got stuck: {outcome.reason}")
    ground_checked = False
    ground_ok = True
    if outcome.status == "value" and isinstance(scheme, Mono):
        p = subst_nu(scheme.ty.p, outcome.value)
        conjuncts = p.ps if isinstance(p, And) else (p,)
        model = GroundModel({}, defs or {})
        for q in conjuncts:
            if _mentions_hasty(q) or free_vars(q):
                continue
            got = eval_ground(q, model)
            if got is STUCK:
                continue
            ground_checked = True
            if got is not True:
                ground_ok = False
                raise SoundnessViolation(
                    "result value falsifies the checked refinement")
    return SoundnessReport(outcome, scheme, ground_checked, ground_ok)


def _mentions_hasty(p) -> bool:
    from .syntax import Fls, Iff, Implies, Not, Or, Pred, Tru
    if isinstance(p, HasTy):
        return True
    if isinstance(p, (And, Or)):
        return any(_mentions_hasty(q) for q in p.ps)
    if isinstance(p, Not):
        return _mentions_hasty(p.p)
    if isinstance(p, (Implies, Iff)):
        return _mentions_hasty(p.p) or _mentions_hasty(p.q)
    return False
