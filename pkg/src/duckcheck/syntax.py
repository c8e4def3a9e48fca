"""Abstract syntax of the core language and its refinement logic.

Values, ANF expressions, logical values, refinement formulas, type terms,
refinement types and schemes, datatype definitions, and typing environments,
plus capture-avoiding substitution, alpha-canonicalization, annotation
erasure, and printing.

All nodes are immutable (frozen dataclasses) and safe to share across
threads. The distinguished value variable is `NU` ("v" at the surface);
the frontend renames program binders so that no program variable is ever
literally `NU` and binders are unique, but substitution here is still fully
capture-avoiding so the operations are safe on arbitrary terms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

NU = "v"

# Primitive constants and their arities.
PRIM_ARITY: dict[str, int] = {
    "+": 2, "-": 2, "=": 2, "not": 1, "tag": 1,
    "has": 2, "get": 2, "set": 3, "keys": 1, "fix": 1, "mem": 2,
}

# Logical function symbols (term-sorted) and predicate symbols (prop-sorted).
LOGIC_FUN_ARITY: dict[str, int] = {"tag": 1, "sel": 2, "plus": 2, "minus": 2}
LOGIC_PRED_ARITY: dict[str, int] = {"eq": 2, "has": 2, "eqmod": 3, "lt": 2, "le": 2}

TAG_INT = "Int"
TAG_BOOL = "Bool"
TAG_STR = "Str"
TAG_DICT = "Dict"
TAG_FUN = "Fun"
TAG_TFUN = "TFun"
TAG_NULL = "Null"  # the tag function is total, so null needs its own tag
ALL_TAGS = (TAG_INT, TAG_BOOL, TAG_STR, TAG_DICT, TAG_FUN, TAG_TFUN, TAG_NULL)


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntC:
    value: int


@dataclass(frozen=True)
class BoolC:
    value: bool


@dataclass(frozen=True)
class StrC:
    value: str


@dataclass(frozen=True)
class NullC:
    pass


@dataclass(frozen=True)
class EmptyDict:
    pass


@dataclass(frozen=True)
class Prim:
    name: str


@dataclass(frozen=True)
class PartialPrim:
    """A curried primitive with some arguments already supplied.

    Internal constant so that `has d`, `get d`, `set d k` remain values as
    the single-step semantics requires. pending is strictly shorter than
    the primitive's arity.
    """
    name: str
    pending: tuple["Value", ...]


Const = Union[IntC, BoolC, StrC, NullC, EmptyDict, Prim, PartialPrim]

NULL = NullC()
EMPTY = EmptyDict()
TRUE_C = BoolC(True)
FALSE_C = BoolC(False)


# ---------------------------------------------------------------------------
# Values and expressions (ANF)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class VConst:
    const: Const


@dataclass(frozen=True)
class DictExt:
    base: "Value"
    key: "Value"
    val: "Value"


@dataclass(frozen=True)
class Fun:
    binder: str
    ann: Optional["RefType"]
    body: "Expr"


@dataclass(frozen=True)
class TyFun:
    tyvar: str
    body: "Expr"


@dataclass(frozen=True)
class New:
    ctor: str
    targs: Optional[tuple["RefType", ...]]
    args: tuple["Value", ...]


Value = Union[Var, VConst, DictExt, Fun, TyFun, New]


@dataclass(frozen=True)
class EVal:
    value: Value
    pos: Optional[tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class App:
    fn: Value
    arg: Value
    pos: Optional[tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class TApp:
    fn: Value
    ty: "RefType"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class If:
    guard: Value
    then: "Expr"
    els: "Expr"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False)


@dataclass(frozen=True)
class Let:
    binder: str
    ann: Optional["Scheme"]
    rhs: "Expr"
    body: "Expr"
    pos: Optional[tuple[int, int]] = field(default=None, compare=False)


Expr = Union[EVal, App, TApp, If, Let]


# ---------------------------------------------------------------------------
# Logic: logical values, formulas, type terms, types, schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LFun:
    """Application of a primitive function symbol (sel, tag, plus, minus)."""
    sym: str
    args: tuple["LogicalValue", ...]


LogicalValue = Union[Value, LFun]


@dataclass(frozen=True)
class Pred:
    sym: str
    args: tuple[LogicalValue, ...]


@dataclass(frozen=True)
class HasTy:
    lw: LogicalValue
    term: "TypeTerm"


@dataclass(frozen=True)
class And:
    ps: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    ps: tuple["Formula", ...]


@dataclass(frozen=True)
class Not:
    p: "Formula"


@dataclass(frozen=True)
class Implies:
    p: "Formula"
    q: "Formula"


@dataclass(frozen=True)
class Iff:
    p: "Formula"
    q: "Formula"


@dataclass(frozen=True)
class Tru:
    pass


@dataclass(frozen=True)
class Fls:
    pass


Formula = Union[Pred, HasTy, And, Or, Not, Implies, Iff, Tru, Fls]

TRUE = Tru()
FALSE = Fls()


@dataclass(frozen=True)
class Arrow:
    binder: str
    dom: "RefType"
    cod: "RefType"


@dataclass(frozen=True)
class TyVarT:
    name: str


@dataclass(frozen=True)
class NullT:
    pass


@dataclass(frozen=True)
class CtorApp:
    ctor: str
    args: tuple["RefType", ...]


TypeTerm = Union[Arrow, TyVarT, NullT, CtorApp]


@dataclass(frozen=True)
class RefType:
    """A refinement type {v | p}; NU is implicitly bound in p."""
    p: Formula


@dataclass(frozen=True)
class Mono:
    ty: RefType


@dataclass(frozen=True)
class Forall:
    tyvar: str
    body: "Scheme"


Scheme = Union[Mono, Forall]

TOP = RefType(TRUE)
BOT = RefType(FALSE)


def eq(a: LogicalValue, b: LogicalValue) -> Pred:
    return Pred("eq", (a, b))


def tag_of(a: LogicalValue) -> LFun:
    return LFun("tag", (a,))


def sel(d: LogicalValue, k: LogicalValue) -> LFun:
    return LFun("sel", (d, k))


def has(d: LogicalValue, k: LogicalValue) -> Pred:
    return Pred("has", (d, k))


def eqmod(a: LogicalValue, b: LogicalValue, k: LogicalValue) -> Pred:
    return Pred("eqmod", (a, b, k))


def tag_eq(a: LogicalValue, t: str) -> Pred:
    return eq(tag_of(a), VConst(StrC(t)))


def conj(*ps: Formula) -> Formula:
    """Flattening conjunction; drops trivial truths."""
    flat: list[Formula] = []
    for p in ps:
        if isinstance(p, And):
            flat.extend(p.ps)
        elif isinstance(p, Tru):
            continue
        else:
            flat.append(p)
    if not flat:
        return TRUE
    if any(isinstance(p, Fls) for p in flat):
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*ps: Formula) -> Formula:
    flat: list[Formula] = []
    for p in ps:
        if isinstance(p, Or):
            flat.extend(p.ps)
        elif isinstance(p, Fls):
            continue
        else:
            flat.append(p)
    if not flat:
        return FALSE
    if any(isinstance(p, Tru) for p in flat):
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(p: Formula) -> Formula:
    if isinstance(p, Tru):
        return FALSE
    if isinstance(p, Fls):
        return TRUE
    if isinstance(p, Not):
        return p.p
    return Not(p)


def singleton(lw: LogicalValue) -> RefType:
    return RefType(eq(Var(NU), lw))


def has_type(u: TypeTerm) -> RefType:
    return RefType(HasTy(Var(NU), u))


# ---------------------------------------------------------------------------
# Datatype definitions and environments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DatatypeDef:
    ctor: str
    # (variance in {"+","-","="}, tyvar name, marked?)
    params: tuple[tuple[str, str, bool], ...]
    fields: tuple[tuple[str, RefType], ...]
    # tyvar -> (field index, path of ctor-argument indices to the marked
    # occurrence's enclosing type-term position); () means the field type is
    # exactly {v | v :: A}.
    marks: tuple[tuple[str, int, tuple[int, ...]], ...] = ()

    def param_names(self) -> tuple[str, ...]:
        return tuple(a for (_, a, _) in self.params)

    def field_names(self) -> tuple[str, ...]:
        return tuple(f for (f, _) in self.fields)

    def mark_for(self, tyvar: str) -> Optional[tuple[int, tuple[int, ...]]]:
        for (a, j, path) in self.marks:
            if a == tyvar:
                return (j, path)
        return None


DefEnv = dict[str, DatatypeDef]


@dataclass(frozen=True)
class VarBind:
    name: str
    scheme: Scheme


@dataclass(frozen=True)
class TyVarBind:
    name: str


@dataclass(frozen=True)
class Guard:
    formula: Formula


EnvEntry = Union[VarBind, TyVarBind, Guard]


@dataclass(frozen=True)
class TypeEnv:
    entries: tuple[EnvEntry, ...] = ()

    def bind(self, name: str, scheme: Scheme) -> "TypeEnv":
        return TypeEnv(self.entries + (VarBind(name, scheme),))

    def bind_tyvar(self, name: str) -> "TypeEnv":
        return TypeEnv(self.entries + (TyVarBind(name),))

    def guard(self, p: Formula) -> "TypeEnv":
        return TypeEnv(self.entries + (Guard(p),))

    def lookup(self, name: str) -> Optional[Scheme]:
        for entry in reversed(self.entries):
            if isinstance(entry, VarBind) and entry.name == name:
                return entry.scheme
        return None

    def has_var(self, name: str) -> bool:
        return self.lookup(name) is not None

    def has_tyvar(self, name: str) -> bool:
        return any(isinstance(e, TyVarBind) and e.name == name for e in self.entries)

    def var_names(self) -> list[str]:
        return [e.name for e in self.entries if isinstance(e, VarBind)]

    def __iter__(self) -> Iterator[EnvEntry]:
        return iter(self.entries)


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------

def free_vars(node) -> frozenset[str]:
    """Free term variables of any AST node (NU counts when free)."""
    acc: set[str] = set()
    _fv(node, acc, frozenset())
    return frozenset(acc)


def _fv(node, acc: set[str], bound: frozenset[str]) -> None:
    if isinstance(node, Var):
        if node.name not in bound:
            acc.add(node.name)
    elif isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            for w in node.const.pending:
                _fv(w, acc, bound)
    elif isinstance(node, DictExt):
        _fv(node.base, acc, bound)
        _fv(node.key, acc, bound)
        _fv(node.val, acc, bound)
    elif isinstance(node, Fun):
        if node.ann is not None:
            _fv(node.ann, acc, bound)
        _fv(node.body, acc, bound | {node.binder})
    elif isinstance(node, TyFun):
        _fv(node.body, acc, bound)
    elif isinstance(node, New):
        if node.targs:
            for t in node.targs:
                _fv(t, acc, bound)
        for w in node.args:
            _fv(w, acc, bound)
    elif isinstance(node, EVal):
        _fv(node.value, acc, bound)
    elif isinstance(node, App):
        _fv(node.fn, acc, bound)
        _fv(node.arg, acc, bound)
    elif isinstance(node, TApp):
        _fv(node.fn, acc, bound)
        _fv(node.ty, acc, bound)
    elif isinstance(node, If):
        _fv(node.guard, acc, bound)
        _fv(node.then, acc, bound)
        _fv(node.els, acc, bound)
    elif isinstance(node, Let):
        if node.ann is not None:
            _fv(node.ann, acc, bound)
        _fv(node.rhs, acc, bound)
        _fv(node.body, acc, bound | {node.binder})
    elif isinstance(node, LFun):
        for a in node.args:
            _fv(a, acc, bound)
    elif isinstance(node, Pred):
        for a in node.args:
            _fv(a, acc, bound)
    elif isinstance(node, HasTy):
        _fv(node.lw, acc, bound)
        _fv(node.term, acc, bound)
    elif isinstance(node, And) or isinstance(node, Or):
        for p in node.ps:
            _fv(p, acc, bound)
    elif isinstance(node, Not):
        _fv(node.p, acc, bound)
    elif isinstance(node, (Implies, Iff)):
        _fv(node.p, acc, bound)
        _fv(node.q, acc, bound)
    elif isinstance(node, (Tru, Fls, TyVarT, NullT)):
        pass
    elif isinstance(node, Arrow):
        _fv(node.dom, acc, bound)
        _fv(node.cod, acc, bound | {node.binder})
    elif isinstance(node, CtorApp):
        for t in node.args:
            _fv(t, acc, bound)
    elif isinstance(node, RefType):
        _fv(node.p, acc, bound | {NU})
    elif isinstance(node, Mono):
        _fv(node.ty, acc, bound)
    elif isinstance(node, Forall):
        _fv(node.body, acc, bound)
    else:
        raise TypeError(f"free_vars: unexpected node {node!r}")


def free_tyvars(node) -> frozenset[str]:
    acc: set[str] = set()
    _ftv(node, acc, frozenset())
    return frozenset(acc)


def _ftv(node, acc: set[str], bound: frozenset[str]) -> None:
    if isinstance(node, TyVarT):
        if node.name not in bound:
            acc.add(node.name)
    elif isinstance(node, TyFun):
        _ftv(node.body, acc, bound | {node.tyvar})
    elif isinstance(node, Forall):
        _ftv(node.body, acc, bound | {node.tyvar})
    elif isinstance(node, (Var, Tru, Fls, NullT)):
        pass
    elif isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            for w in node.const.pending:
                _ftv(w, acc, bound)
    elif isinstance(node, DictExt):
        for c in (node.base, node.key, node.val):
            _ftv(c, acc, bound)
    elif isinstance(node, Fun):
        if node.ann is not None:
            _ftv(node.ann, acc, bound)
        _ftv(node.body, acc, bound)
    elif isinstance(node, New):
        if node.targs:
            for t in node.targs:
                _ftv(t, acc, bound)
        for w in node.args:
            _ftv(w, acc, bound)
    elif isinstance(node, EVal):
        _ftv(node.value, acc, bound)
    elif isinstance(node, App):
        _ftv(node.fn, acc, bound)
        _ftv(node.arg, acc, bound)
    elif isinstance(node, TApp):
        _ftv(node.fn, acc, bound)
        _ftv(node.ty, acc, bound)
    elif isinstance(node, If):
        _ftv(node.guard, acc, bound)
        _ftv(node.then, acc, bound)
        _ftv(node.els, acc, bound)
    elif isinstance(node, Let):
        if node.ann is not None:
            _ftv(node.ann, acc, bound)
        _ftv(node.rhs, acc, bound)
        _ftv(node.body, acc, bound)
    elif isinstance(node, LFun):
        for a in node.args:
            _ftv(a, acc, bound)
    elif isinstance(node, Pred):
        for a in node.args:
            _ftv(a, acc, bound)
    elif isinstance(node, HasTy):
        _ftv(node.lw, acc, bound)
        _ftv(node.term, acc, bound)
    elif isinstance(node, (And, Or)):
        for p in node.ps:
            _ftv(p, acc, bound)
    elif isinstance(node, Not):
        _ftv(node.p, acc, bound)
    elif isinstance(node, (Implies, Iff)):
        _ftv(node.p, acc, bound)
        _ftv(node.q, acc, bound)
    elif isinstance(node, Arrow):
        _ftv(node.dom, acc, bound)
        _ftv(node.cod, acc, bound)
    elif isinstance(node, CtorApp):
        for t in node.args:
            _ftv(t, acc, bound)
    elif isinstance(node, RefType):
        _ftv(node.p, acc, bound)
    elif isinstance(node, Mono):
        _ftv(node.ty, acc, bound)
    else:
        raise TypeError(f"free_tyvars: unexpected node {node!r}")


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

_fresh_counter = itertools.count()


def fresh_name(base: str = "x") -> str:
    """A name no program can contain ('#' is not an identifier character)."""
    base = base.split("#", 1)[0] or "x"
    return f"{base}#{next(_fresh_counter)}"


def subst_value(node, x: str, w: Value):
    """Capture-avoiding substitution of value w for variable x.

    Works uniformly over expressions, values, logical values, formulas,
    type terms, refinement types, and schemes. NU must not occur free in w.
    """
    if NU in free_vars(w) and x != NU:
        raise ValueError("substituted value mentions the value variable")
    return _subst(node, x, w, free_vars(w))


def subst_nu(p: Formula, lw: LogicalValue) -> Formula:
    """p[lw/NU]: substitute a logical value for the value variable."""
    return _subst(p, NU, lw, free_vars(lw))


def embed_at(t: RefType, lw: LogicalValue) -> Formula:
    """The formula of t read at lw (the embedding of t applied to lw)."""
    return subst_nu(t.p, lw)


def _rename_binder(binder: str, body_nodes, x: str, fvw: frozenset[str]):
    """Pick a fresh name for binder when it would capture free vars of w."""
    new = fresh_name(binder)
    renamed = [_subst(b, binder, Var(new), frozenset([new])) for b in body_nodes]
    return new, renamed


def _subst(node, x: str, w, fvw: frozenset[str]):
    if isinstance(node, Var):
        return w if node.name == x else node
    if isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            pend = tuple(_subst(a, x, w, fvw) for a in node.const.pending)
            return VConst(PartialPrim(node.const.name, pend))
        return node
    if isinstance(node, DictExt):
        return DictExt(_subst(node.base, x, w, fvw), _subst(node.key, x, w, fvw),
                       _subst(node.val, x, w, fvw))
    if isinstance(node, Fun):
        ann = _subst(node.ann, x, w, fvw) if node.ann is not None else None
        if node.binder == x:
            return Fun(node.binder, ann, node.body)
        binder, body = node.binder, node.body
        if binder in fvw and x in free_vars(body):
            binder, (body,) = _rename_binder(binder, [body], x, fvw)
        return Fun(binder, ann, _subst(body, x, w, fvw))
    if isinstance(node, TyFun):
        return TyFun(node.tyvar, _subst(node.body, x, w, fvw))
    if isinstance(node, New):
        targs = tuple(_subst(t, x, w, fvw) for t in node.targs) if node.targs else node.targs
        return New(node.ctor, targs, tuple(_subst(a, x, w, fvw) for a in node.args))
    if isinstance(node, EVal):
        return EVal(_subst(node.value, x, w, fvw), node.pos)
    if isinstance(node, App):
        return App(_subst(node.fn, x, w, fvw), _subst(node.arg, x, w, fvw), node.pos)
    if isinstance(node, TApp):
        return TApp(_subst(node.fn, x, w, fvw), _subst(node.ty, x, w, fvw), node.pos)
    if isinstance(node, If):
        return If(_subst(node.guard, x, w, fvw), _subst(node.then, x, w, fvw),
                  _subst(node.els, x, w, fvw), node.pos)
    if isinstance(node, Let):
        ann = _subst(node.ann, x, w, fvw) if node.ann is not None else None
        rhs = _subst(node.rhs, x, w, fvw)
        if node.binder == x:
            return Let(node.binder, ann, rhs, node.body, node.pos)
        binder, body = node.binder, node.body
        if binder in fvw and x in free_vars(body):
            binder, (body,) = _rename_binder(binder, [body], x, fvw)
        return Let(binder, ann, rhs, _subst(body, x, w, fvw), node.pos)
    if isinstance(node, LFun):
        return LFun(node.sym, tuple(_subst(a, x, w, fvw) for a in node.args))
    if isinstance(node, Pred):
        return Pred(node.sym, tuple(_subst(a, x, w, fvw) for a in node.args))
    if isinstance(node, HasTy):
        return HasTy(_subst(node.lw, x, w, fvw), _subst(node.term, x, w, fvw))
    if isinstance(node, And):
        return And(tuple(_subst(p, x, w, fvw) for p in node.ps))
    if isinstance(node, Or):
        return Or(tuple(_subst(p, x, w, fvw) for p in node.ps))
    if isinstance(node, Not):
        return Not(_subst(node.p, x, w, fvw))
    if isinstance(node, Implies):
        return Implies(_subst(node.p, x, w, fvw), _subst(node.q, x, w, fvw))
    if isinstance(node, Iff):
        return Iff(_subst(node.p, x, w, fvw), _subst(node.q, x, w, fvw))
    if isinstance(node, (Tru, Fls, TyVarT, NullT)):
        return node
    if isinstance(node, Arrow):
        dom = _subst(node.dom, x, w, fvw)
        if node.binder == x:
            return Arrow(node.binder, dom, node.cod)
        binder, cod = node.binder, node.cod
        if binder in fvw and x in free_vars(cod):
            binder, (cod,) = _rename_binder(binder, [cod], x, fvw)
        return Arrow(binder, dom, _subst(cod, x, w, fvw))
    if isinstance(node, CtorApp):
        return CtorApp(node.ctor, tuple(_subst(t, x, w, fvw) for t in node.args))
    if isinstance(node, RefType):
        if x == NU:
            return node
        return RefType(_subst(node.p, x, w, fvw))
    if isinstance(node, Mono):
        return Mono(_subst(node.ty, x, w, fvw))
    if isinstance(node, Forall):
        return Forall(node.tyvar, _subst(node.body, x, w, fvw))
    raise TypeError(f"subst: unexpected node {node!r}")


# ---------------------------------------------------------------------------
# Alpha-canonicalization
# ---------------------------------------------------------------------------

def alpha_canonical(node):
    """Rename binders to a canonical scheme so alpha-equivalent terms become
    structurally identical. Idempotent; free names are preserved."""
    counter = itertools.count()
    tcounter = itertools.count()
    return _canon(node, {}, {}, counter, tcounter)


def _canon(node, env: dict, tenv: dict, ctr, tctr):
    if isinstance(node, Var):
        return Var(env.get(node.name, node.name))
    if isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            pend = tuple(_canon(a, env, tenv, ctr, tctr) for a in node.const.pending)
            return VConst(PartialPrim(node.const.name, pend))
        return node
    if isinstance(node, DictExt):
        return DictExt(_canon(node.base, env, tenv, ctr, tctr),
                       _canon(node.key, env, tenv, ctr, tctr),
                       _canon(node.val, env, tenv, ctr, tctr))
    if isinstance(node, Fun):
        ann = _canon(node.ann, env, tenv, ctr, tctr) if node.ann is not None else None
        c = f"%{next(ctr)}"
        env2 = dict(env)
        env2[node.binder] = c
        return Fun(c, ann, _canon(node.body, env2, tenv, ctr, tctr))
    if isinstance(node, TyFun):
        c = f"%T{next(tctr)}"
        tenv2 = dict(tenv)
        tenv2[node.tyvar] = c
        return TyFun(c, _canon(node.body, env, tenv2, ctr, tctr))
    if isinstance(node, New):
        targs = (tuple(_canon(t, env, tenv, ctr, tctr) for t in node.targs)
                 if node.targs else node.targs)
        return New(node.ctor, targs,
                   tuple(_canon(a, env, tenv, ctr, tctr) for a in node.args))
    if isinstance(node, EVal):
        return EVal(_canon(node.value, env, tenv, ctr, tctr))
    if isinstance(node, App):
        return App(_canon(node.fn, env, tenv, ctr, tctr),
                   _canon(node.arg, env, tenv, ctr, tctr))
    if isinstance(node, TApp):
        return TApp(_canon(node.fn, env, tenv, ctr, tctr),
                    _canon(node.ty, env, tenv, ctr, tctr))
    if isinstance(node, If):
        return If(_canon(node.guard, env, tenv, ctr, tctr),
                  _canon(node.then, env, tenv, ctr, tctr),
                  _canon(node.els, env, tenv, ctr, tctr))
    if isinstance(node, Let):
        ann = _canon(node.ann, env, tenv, ctr, tctr) if node.ann is not None else None
        rhs = _canon(node.rhs, env, tenv, ctr, tctr)
        c = f"%{next(ctr)}"
        env2 = dict(env)
        env2[node.binder] = c
        return Let(c, ann, rhs, _canon(node.body, env2, tenv, ctr, tctr))
    if isinstance(node, LFun):
        return LFun(node.sym, tuple(_canon(a, env, tenv, ctr, tctr) for a in node.args))
    if isinstance(node, Pred):
        return Pred(node.sym, tuple(_canon(a, env, tenv, ctr, tctr) for a in node.args))
    if isinstance(node, HasTy):
        return HasTy(_canon(node.lw, env, tenv, ctr, tctr),
                     _canon(node.term, env, tenv, ctr, tctr))
    if isinstance(node, And):
        return And(tuple(_canon(p, env, tenv, ctr, tctr) for p in node.ps))
    if isinstance(node, Or):
        return Or(tuple(_canon(p, env, tenv, ctr, tctr) for p in node.ps))
    if isinstance(node, Not):
        return Not(_canon(node.p, env, tenv, ctr, tctr))
    if isinstance(node, Implies):
        return Implies(_canon(node.p, env, tenv, ctr, tctr),
                       _canon(node.q, env, tenv, ctr, tctr))
    if isinstance(node, Iff):
        return Iff(_canon(node.p, env, tenv, ctr, tctr),
                   _canon(node.q, env, tenv, ctr, tctr))
    if isinstance(node, (Tru, Fls, NullT)):
        return node
    if isinstance(node, TyVarT):
        return TyVarT(tenv.get(node.name, node.name))
    if isinstance(node, Arrow):
        dom = _canon(node.dom, env, tenv, ctr, tctr)
        c = f"%{next(ctr)}"
        env2 = dict(env)
        env2[node.binder] = c
        return Arrow(c, dom, _canon(node.cod, env2, tenv, ctr, tctr))
    if isinstance(node, CtorApp):
        return CtorApp(node.ctor, tuple(_canon(t, env, tenv, ctr, tctr) for t in node.args))
    if isinstance(node, RefType):
        return RefType(_canon(node.p, env, tenv, ctr, tctr))
    if isinstance(node, Mono):
        return Mono(_canon(node.ty, env, tenv, ctr, tctr))
    if isinstance(node, Forall):
        c = f"%T{next(tctr)}"
        tenv2 = dict(tenv)
        tenv2[node.tyvar] = c
        return Forall(c, _canon(node.body, env, tenv2, ctr, tctr))
    raise TypeError(f"alpha_canonical: unexpected node {node!r}")


def alpha_equiv(a, b) -> bool:
    return alpha_canonical(a) == alpha_canonical(b)


# ---------------------------------------------------------------------------
# Annotation erasure
# ---------------------------------------------------------------------------

def erase(node):
    """Strip binder annotations and constructed-data type arguments."""
    if isinstance(node, Var):
        return node
    if isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            return VConst(PartialPrim(node.const.name,
                                      tuple(erase(a) for a in node.const.pending)))
        return node
    if isinstance(node, DictExt):
        return DictExt(erase(node.base), erase(node.key), erase(node.val))
    if isinstance(node, Fun):
        return Fun(node.binder, None, erase(node.body))
    if isinstance(node, TyFun):
        return TyFun(node.tyvar, erase(node.body))
    if isinstance(node, New):
        return New(node.ctor, None, tuple(erase(a) for a in node.args))
    if isinstance(node, EVal):
        return EVal(erase(node.value), node.pos)
    if isinstance(node, App):
        return App(erase(node.fn), erase(node.arg), node.pos)
    if isinstance(node, TApp):
        return TApp(erase(node.fn), node.ty, node.pos)
    if isinstance(node, If):
        return If(erase(node.guard), erase(node.then), erase(node.els), node.pos)
    if isinstance(node, Let):
        return Let(node.binder, None, erase(node.rhs), erase(node.body), node.pos)
    raise TypeError(f"erase: unexpected node {node!r}")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _all_names(node, acc: set) -> None:
    if isinstance(node, Var):
        acc.add(node.name)
    elif isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            for w in node.const.pending:
                _all_names(w, acc)
    elif isinstance(node, DictExt):
        for c in (node.base, node.key, node.val):
            _all_names(c, acc)
    elif isinstance(node, Fun):
        acc.add(node.binder)
        if node.ann is not None:
            _all_names(node.ann, acc)
        _all_names(node.body, acc)
    elif isinstance(node, TyFun):
        _all_names(node.body, acc)
    elif isinstance(node, New):
        if node.targs:
            for t in node.targs:
                _all_names(t, acc)
        for w in node.args:
            _all_names(w, acc)
    elif isinstance(node, EVal):
        _all_names(node.value, acc)
    elif isinstance(node, App):
        _all_names(node.fn, acc)
        _all_names(node.arg, acc)
    elif isinstance(node, TApp):
        _all_names(node.fn, acc)
        _all_names(node.ty, acc)
    elif isinstance(node, If):
        _all_names(node.guard, acc)
        _all_names(node.then, acc)
        _all_names(node.els, acc)
    elif isinstance(node, Let):
        acc.add(node.binder)
        if node.ann is not None:
            _all_names(node.ann, acc)
        _all_names(node.rhs, acc)
        _all_names(node.body, acc)
    elif isinstance(node, LFun):
        for a in node.args:
            _all_names(a, acc)
    elif isinstance(node, Pred):
        for a in node.args:
            _all_names(a, acc)
    elif isinstance(node, HasTy):
        _all_names(node.lw, acc)
        _all_names(node.term, acc)
    elif isinstance(node, (And, Or)):
        for p in node.ps:
            _all_names(p, acc)
    elif isinstance(node, Not):
        _all_names(node.p, acc)
    elif isinstance(node, (Implies, Iff)):
        _all_names(node.p, acc)
        _all_names(node.q, acc)
    elif isinstance(node, Arrow):
        acc.add(node.binder)
        _all_names(node.dom, acc)
        _all_names(node.cod, acc)
    elif isinstance(node, CtorApp):
        for t in node.args:
            _all_names(t, acc)
    elif isinstance(node, RefType):
        _all_names(node.p, acc)
    elif isinstance(node, Mono):
        _all_names(node.ty, acc)
    elif isinstance(node, Forall):
        _all_names(node.body, acc)


def _rename_map(node) -> dict[str, str]:
    """Lexable display names for generated '#' names; '#'-names are unique,
    so a global substitution is capture-free."""
    names: set[str] = set()
    _all_names(node, names)
    out: dict[str, str] = {}
    taken = set(names)
    for n in sorted(names):
        if "#" not in n:
            continue
        cand = n.replace("#", "_")
        while cand in taken:
            cand = cand + "x"
        taken.add(cand)
        out[n] = cand
    return out


def _apply_renames(node, ren: dict[str, str]):
    if not ren:
        return node
    if isinstance(node, Var):
        return Var(ren.get(node.name, node.name))
    if isinstance(node, VConst):
        if isinstance(node.const, PartialPrim):
            return VConst(PartialPrim(node.const.name, tuple(
                _apply_renames(w, ren) for w in node.const.pending)))
        return node
    if isinstance(node, DictExt):
        return DictExt(_apply_renames(node.base, ren),
                       _apply_renames(node.key, ren),
                       _apply_renames(node.val, ren))
    if isinstance(node, Fun):
        ann = _apply_renames(node.ann, ren) if node.ann is not None else None
        return Fun(ren.get(node.binder, node.binder), ann,
                   _apply_renames(node.body, ren))
    if isinstance(node, TyFun):
        return TyFun(node.tyvar, _apply_renames(node.body, ren))
    if isinstance(node, New):
        targs = tuple(_apply_renames(t, ren) for t in node.targs) \
            if node.targs else node.targs
        return New(node.ctor, targs,
                   tuple(_apply_renames(w, ren) for w in node.args))
    if isinstance(node, EVal):
        return EVal(_apply_renames(node.value, ren), node.pos)
    if isinstance(node, App):
        return App(_apply_renames(node.fn, ren), _apply_renames(node.arg, ren),
                   node.pos)
    if isinstance(node, TApp):
        return TApp(_apply_renames(node.fn, ren), _apply_renames(node.ty, ren),
                    node.pos)
    if isinstance(node, If):
        return If(_apply_renames(node.guard, ren),
                  _apply_renames(node.then, ren),
                  _apply_renames(node.els, ren), node.pos)
    if isinstance(node, Let):
        ann = _apply_renames(node.ann, ren) if node.ann is not None else None
        return Let(ren.get(node.binder, node.binder), ann,
                   _apply_renames(node.rhs, ren),
                   _apply_renames(node.body, ren), node.pos)
    if isinstance(node, LFun):
        return LFun(node.sym, tuple(_apply_renames(a, ren) for a in node.args))
    if isinstance(node, Pred):
        return Pred(node.sym, tuple(_apply_renames(a, ren) for a in node.args))
    if isinstance(node, HasTy):
        return HasTy(_apply_renames(node.lw, ren),
                     _apply_renames(node.term, ren))
    if isinstance(node, And):
        return And(tuple(_apply_renames(p, ren) for p in node.ps))
    if isinstance(node, Or):
        return Or(tuple(_apply_renames(p, ren) for p in node.ps))
    if isinstance(node, Not):
        return Not(_apply_renames(node.p, ren))
    if isinstance(node, Implies):
        return Implies(_apply_renames(node.p, ren), _apply_renames(node.q, ren))
    if isinstance(node, Iff):
        return Iff(_apply_renames(node.p, ren), _apply_renames(node.q, ren))
    if isinstance(node, (Tru, Fls, TyVarT, NullT)):
        return node
    if isinstance(node, Arrow):
        return Arrow(ren.get(node.binder, node.binder),
                     _apply_renames(node.dom, ren),
                     _apply_renames(node.cod, ren))
    if isinstance(node, CtorApp):
        return CtorApp(node.ctor, tuple(_apply_renames(t, ren) for t in node.args))
    if isinstance(node, RefType):
        return RefType(_apply_renames(node.p, ren))
    if isinstance(node, Mono):
        return Mono(_apply_renames(node.ty, ren))
    if isinstance(node, Forall):
        return Forall(node.tyvar, _apply_renames(node.body, ren))
    raise TypeError(node)


def for_display(node):
    """The same tree with generated names made lexable for printing."""
    return _apply_renames(node, _rename_map(node))


def _pp_name(n: str) -> str:
    return n


def _pp_const(c: Const) -> str:
    if isinstance(c, IntC):
        return str(c.value)
    if isinstance(c, BoolC):
        return "true" if c.value else "false"
    if isinstance(c, StrC):
        return '"' + c.value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(c, NullC):
        return "null"
    if isinstance(c, EmptyDict):
        return "{}"
    if isinstance(c, Prim):
        return c.name if c.name.isalnum() else f"({c.name})"
    if isinstance(c, PartialPrim):
        inner = " ".join(_pp_value(a) for a in c.pending)
        return f"({c.name} {inner})" if inner else c.name
    raise TypeError(c)


def _pp_value(w: Value) -> str:
    if isinstance(w, Var):
        return _pp_name(w.name)
    if isinstance(w, VConst):
        return _pp_const(w.const)
    if isinstance(w, DictExt):
        parts = []
        cur: Value = w
        while isinstance(cur, DictExt):
            parts.append((cur.key, cur.val))
            cur = cur.base
        if isinstance(cur, VConst) and isinstance(cur.const, EmptyDict):
            seen: set = set()
            shown = []
            for k, v in parts:  # outermost binding wins
                key = k if not isinstance(k, VConst) else k.const
                if key in seen:
                    continue
                seen.add(key)
                shown.append((k, v))
            inner = ", ".join(f"{_pp_value(k)}: {_pp_value(v)}"
                              for k, v in reversed(shown))
            return "{" + inner + "}"
        return f"(set {_pp_value(w.base)} {_pp_value(w.key)} {_pp_value(w.val)})"
    if isinstance(w, Fun):
        ann = f" :: {_pp_type(w.ann)}" if w.ann else ""
        return f"(fun ({_pp_name(w.binder)}{ann}) -> {_pp_expr(w.body)})"
    if isinstance(w, TyFun):
        return f"(tyfun {w.tyvar} -> {_pp_expr(w.body)})"
    if isinstance(w, New):
        targs = ("[" + ", ".join(_pp_type(t) for t in w.targs) + "] ") if w.targs else ""
        args = ", ".join(_pp_value(a) for a in w.args)
        return f"new {w.ctor} {targs}({args})"
    raise TypeError(w)


def _pp_expr(e: Expr) -> str:
    if isinstance(e, EVal):
        return _pp_value(e.value)
    if isinstance(e, App):
        return f"{_pp_value(e.fn)} {_pp_value(e.arg)}"
    if isinstance(e, TApp):
        return f"{_pp_value(e.fn)} [{_pp_type(e.ty)}]"
    if isinstance(e, If):
        return f"if {_pp_value(e.guard)} then {_pp_expr(e.then)} else {_pp_expr(e.els)}"
    if isinstance(e, Let):
        ann = f" :: {_pp_scheme(e.ann)}" if e.ann else ""
        return f"let {_pp_name(e.binder)}{ann} = {_pp_expr(e.rhs)} in {_pp_expr(e.body)}"
    raise TypeError(e)


def _pp_lval(lw: LogicalValue) -> str:
    if isinstance(lw, LFun):
        if lw.sym == "plus":
            return f"({_pp_lval(lw.args[0])} + {_pp_lval(lw.args[1])})"
        if lw.sym == "minus":
            return f"({_pp_lval(lw.args[0])} - {_pp_lval(lw.args[1])})"
        args = ", ".join(_pp_lval(a) for a in lw.args)
        return f"{lw.sym}({args})"
    return _pp_value(lw)


_PRED_INFIX = {"eq": "=", "lt": "<", "le": "<="}


def _pp_formula(p: Formula, prec: int = 0) -> str:
    # prec levels: 0 iff, 1 implies, 2 or, 3 and, 4 not/atom
    def wrap(s: str, level: int) -> str:
        return f"({s})" if level < prec else s

    if isinstance(p, Tru):
        return "true"
    if isinstance(p, Fls):
        return "false"
    if isinstance(p, Pred):
        if p.sym in _PRED_INFIX:
            return f"{_pp_lval(p.args[0])} {_PRED_INFIX[p.sym]} {_pp_lval(p.args[1])}"
        args = ", ".join(_pp_lval(a) for a in p.args)
        return f"{p.sym}({args})"
    if isinstance(p, HasTy):
        return f"{_pp_lval(p.lw)} :: {_pp_typeterm(p.term)}"
    if isinstance(p, And):
        return wrap(" /\\ ".join(_pp_formula(q, 4) for q in p.ps) or "true", 3)
    if isinstance(p, Or):
        return wrap(" \\/ ".join(_pp_formula(q, 4) for q in p.ps) or "false", 2)
    if isinstance(p, Not):
        return f"not {_pp_formula(p.p, 5)}" if isinstance(p.p, (Pred, HasTy, Tru, Fls)) \
            else f"not ({_pp_formula(p.p, 0)})"
    if isinstance(p, Implies):
        return wrap(f"{_pp_formula(p.p, 2)} => {_pp_formula(p.q, 1)}", 1)
    if isinstance(p, Iff):
        return wrap(f"{_pp_formula(p.p, 1)} <=> {_pp_formula(p.q, 1)}", 0)
    raise TypeError(p)


def _pp_typeterm(u: TypeTerm) -> str:
    if isinstance(u, Arrow):
        return f"{_pp_name(u.binder)}:{_pp_type(u.dom)} -> {_pp_type(u.cod)}"
    if isinstance(u, TyVarT):
        return u.name
    if isinstance(u, NullT):
        return "Null"
    if isinstance(u, CtorApp):
        return f"{u.ctor}[{', '.join(_pp_type(t) for t in u.args)}]"
    raise TypeError(u)


def _pp_type(t: RefType) -> str:
    p = t.p
    if isinstance(p, Tru):
        return "Top"
    if isinstance(p, HasTy) and p.lw == Var(NU):
        if isinstance(p.term, Arrow):
            return f"({_pp_typeterm(p.term)})"
        return _pp_typeterm(p.term)
    return "{" + NU + " | " + _pp_formula(p) + "}"


def _pp_scheme(s: Scheme) -> str:
    if isinstance(s, Mono):
        return _pp_type(s.ty)
    return f"forall {s.tyvar}. {_pp_scheme(s.body)}"


def pp_const(c: Const) -> str:
    return _pp_const(c)


def pp_value(w: Value) -> str:
    return _pp_value(for_display(w))


def pp_expr(e: Expr) -> str:
    return _pp_expr(for_display(e))


def pp_lval(lw: LogicalValue) -> str:
    return _pp_lval(for_display(lw))


def pp_formula(p: Formula) -> str:
    return _pp_formula(for_display(p))


def pp_typeterm(u: TypeTerm) -> str:
    return _pp_typeterm(for_display(u))


def pp_type(t: RefType) -> str:
    return _pp_type(for_display(t))


def pp_scheme(s: Scheme) -> str:
    return _pp_scheme(for_display(s))
