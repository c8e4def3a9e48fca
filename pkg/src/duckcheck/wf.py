"""Well-formedness of formulas, types, environments, and datatype definitions.

Sort checking is purely syntactic, driven by the fixed symbol signature
tables in `syntax`. Polarity bookkeeping (poles) validates datatype variance
annotations.
"""

from __future__ import annotations

from .errors import UnknownCtor, WfError
from .syntax import (
    NU, LOGIC_FUN_ARITY, LOGIC_PRED_ARITY,
    And, Arrow, CtorApp, DefEnv, DatatypeDef, DictExt, Fls, Formula,
    Fun, HasTy, Iff, Implies, LFun, LogicalValue, Mono, New, Not, NullT, Or,
    Pred, RefType, Scheme, Tru, TypeEnv, TypeTerm, TyFun, TyVarT, VConst,
    Var, fresh_name, subst_nu, Var as _Var,
)

POS = "+"
NEG = "-"
INV = "="


def flip(th: str) -> str:
    return NEG if th == POS else POS


def _flip_set(s: frozenset[str]) -> frozenset[str]:
    return frozenset(flip(t) for t in s)


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

def check_lval(defs: DefEnv, g: TypeEnv, lw: LogicalValue, extra: frozenset[str] = frozenset()) -> None:
    """lw is a well-formed logical term: variables in scope, arities right."""
    if isinstance(lw, _Var):
        if lw.name in extra:
            return
        if not g.has_var(lw.name):
            raise WfError("unbound-variable", f"variable '{lw.name}' is not in scope")
        return
    if isinstance(lw, LFun):
        arity = LOGIC_FUN_ARITY.get(lw.sym)
        if arity is None:
            raise WfError("sort", f"unknown function symbol '{lw.sym}'")
        if len(lw.args) != arity:
            raise WfError("arity", f"'{lw.sym}' expects {arity} arguments, got {len(lw.args)}")
        for a in lw.args:
            check_lval(defs, g, a, extra)
        return
    if isinstance(lw, VConst):
        return
    if isinstance(lw, DictExt):
        for part in (lw.base, lw.key, lw.val):
            check_lval(defs, g, part, extra)
        return
    if isinstance(lw, (Fun, TyFun, New)):
        # Lambdas and constructed values embed as opaque constants; only
        # their free variables must be in scope.
        from .syntax import free_vars
        for x in free_vars(lw):
            if x not in extra and not g.has_var(x):
                raise WfError("unbound-variable", f"variable '{x}' is not in scope")
        return
    raise WfError("sort", f"not a logical term: {lw!r}")


def check_formula(defs: DefEnv, g: TypeEnv, p: Formula,
                  extra: frozenset[str] = frozenset()) -> None:
    """p is a boolean proposition whose free variables are bound in g.

    `extra` carries names treated as bound (used for the fresh NU stand-in).
    A logical term in proposition position is a sort error.
    """
    if isinstance(p, (Tru, Fls)):
        return
    if isinstance(p, Pred):
        arity = LOGIC_PRED_ARITY.get(p.sym)
        if arity is None:
            raise WfError("sort", f"'{p.sym}' is not a proposition symbol")
        if len(p.args) != arity:
            raise WfError("arity", f"'{p.sym}' expects {arity} arguments, got {len(p.args)}")
        for a in p.args:
            check_lval(defs, g, a, extra)
        return
    if isinstance(p, HasTy):
        check_lval(defs, g, p.lw, extra)
        check_typeterm(defs, g, p.term, extra)
        return
    if isinstance(p, (And, Or)):
        for q in p.ps:
            check_formula(defs, g, q, extra)
        return
    if isinstance(p, Not):
        check_formula(defs, g, p.p, extra)
        return
    if isinstance(p, (Implies, Iff)):
        check_formula(defs, g, p.p, extra)
        check_formula(defs, g, p.q, extra)
        return
    raise WfError("sort", f"a term cannot be used as a proposition: {p!r}")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

def check_typeterm(defs: DefEnv, g: TypeEnv, u: TypeTerm,
                   extra: frozenset[str] = frozenset()) -> None:
    if isinstance(u, Arrow):
        check_reftype(defs, g, u.dom, extra)
        g2 = g.bind(u.binder, Mono(RefType(Tru())))
        check_reftype(defs, g2, u.cod, extra)
        return
    if isinstance(u, TyVarT):
        if not g.has_tyvar(u.name):
            raise WfError("unbound-variable", f"type variable '{u.name}' is not in scope")
        return
    if isinstance(u, NullT):
        return
    if isinstance(u, CtorApp):
        d = defs.get(u.ctor)
        if d is None:
            raise UnknownCtor(f"undefined type constructor '{u.ctor}'")
        if len(u.args) != len(d.params):
            raise WfError("arity",
                          f"'{u.ctor}' expects {len(d.params)} type arguments, got {len(u.args)}")
        for t in u.args:
            check_reftype(defs, g, t, extra)
        return
    raise WfError("sort", f"not a type term: {u!r}")


def check_reftype(defs: DefEnv, g: TypeEnv, t: RefType,
                  extra: frozenset[str] = frozenset()) -> None:
    x = fresh_name("wf")
    p = subst_nu(t.p, _Var(x))
    g2 = g.bind(x, Mono(RefType(Tru())))
    check_formula(defs, g2, p, extra)


def check_type(defs: DefEnv, g: TypeEnv, s: Scheme) -> None:
    if isinstance(s, Mono):
        check_reftype(defs, g, s.ty)
        return
    check_type(defs, g.bind_tyvar(s.tyvar), s.body)


def check_env(defs: DefEnv, g: TypeEnv) -> None:
    seen: set[str] = set()
    prefix = TypeEnv()
    for entry in g:
        from .syntax import Guard, TyVarBind, VarBind
        if isinstance(entry, VarBind):
            if entry.name in seen:
                raise WfError("unbound-variable", f"duplicate binding for '{entry.name}'")
            seen.add(entry.name)
            check_type(defs, prefix, entry.scheme)
        elif isinstance(entry, TyVarBind):
            if prefix.has_tyvar(entry.name):
                raise WfError("unbound-variable", f"duplicate type variable '{entry.name}'")
        else:
            check_formula(defs, prefix, entry.formula)
        prefix = TypeEnv(prefix.entries + (entry,))


# ---------------------------------------------------------------------------
# Polarity of type-variable occurrences
# ---------------------------------------------------------------------------

def poles(defs: DefEnv, a: str, th: str, target) -> frozenset[str]:
    """The set of polarities at which type variable a occurs in target,
    starting from polarity th. Negation flips, arrow domains flip, datatype
    arguments follow the parameter's declared variance (= contributes both)."""
    if isinstance(target, RefType):
        return poles(defs, a, th, target.p)
    if isinstance(target, Pred) or isinstance(target, (Tru, Fls)):
        return frozenset()
    if isinstance(target, HasTy):
        return poles(defs, a, th, target.term)
    if isinstance(target, And) or isinstance(target, Or):
        out: frozenset[str] = frozenset()
        for p in target.ps:
            out |= poles(defs, a, th, p)
        return out
    if isinstance(target, Not):
        return poles(defs, a, flip(th), target.p)
    if isinstance(target, Implies):
        return poles(defs, a, flip(th), target.p) | poles(defs, a, th, target.q)
    if isinstance(target, Iff):
        both = poles(defs, a, th, target.p) | poles(defs, a, th, target.q)
        return both | _flip_set(both)
    if isinstance(target, TyVarT):
        return frozenset((th,)) if target.name == a else frozenset()
    if isinstance(target, Arrow):
        return poles(defs, a, flip(th), target.dom) | poles(defs, a, th, target.cod)
    if isinstance(target, NullT):
        return frozenset()
    if isinstance(target, CtorApp):
        d = defs.get(target.ctor)
        out = frozenset()
        for i, t in enumerate(target.args):
            vi = d.params[i][0] if d and i < len(d.params) else INV
            if vi == POS:
                out |= poles(defs, a, th, t)
            elif vi == NEG:
                out |= poles(defs, a, flip(th), t)
            else:
                out |= poles(defs, a, POS, t) | poles(defs, a, NEG, t)
        return out
    raise TypeError(f"poles: unexpected node {target!r}")


def variance_ok(defs: DefEnv, a: str, th: str, field_types) -> bool:
    occ: frozenset[str] = frozenset()
    for t in field_types:
        occ |= poles(defs, a, POS, t)
    if th == POS:
        return occ <= {POS}
    if th == NEG:
        return occ <= {NEG}
    return True


def check_typedef(defs: DefEnv, d: DatatypeDef) -> None:
    """Field types well-formed under the params-only environment; variance
    annotations respected; marking discipline (at most one marked occurrence
    per variable, zero or all params marked) enforced."""
    names = [f for (f, _) in d.fields]
    if len(set(names)) != len(names):
        raise WfError("marking", f"duplicate field names in '{d.ctor}'")
    pnames = d.param_names()
    if len(set(pnames)) != len(pnames):
        raise WfError("marking", f"duplicate type parameters in '{d.ctor}'")

    g = TypeEnv()
    for a in pnames:
        g = g.bind_tyvar(a)
    # the definition may refer to itself (recursive datatypes)
    defs2 = dict(defs)
    defs2[d.ctor] = d
    for (_, t) in d.fields:
        check_reftype(defs2, g, t)

    for (th, a, _) in d.params:
        if not variance_ok(defs2, a, th, [t for (_, t) in d.fields]):
            raise WfError("variance",
                          f"type parameter '{a}' of '{d.ctor}' occurs at polarities "
                          f"inconsistent with its '{th}' annotation")

    marked = [a for (_, a, m) in d.params if m]
    if marked and len(marked) != len(d.params):
        raise WfError("marking",
                      f"'{d.ctor}': either zero or all type parameters must be marked")
    mark_vars = [a for (a, _, _) in d.marks]
    if len(set(mark_vars)) != len(mark_vars):
        raise WfError("marking", f"'{d.ctor}': a type variable has multiple marked occurrences")
    for a in marked:
        if a not in mark_vars:
            raise WfError("marking", f"'{d.ctor}': marked parameter '{a}' has no marked occurrence")


def builtin_list_def() -> DatatypeDef:
    """The built-in List definition: covariant element, inference mark on
    the tail occurrence."""
    a = RefType(HasTy(Var(NU), TyVarT("A")))
    tl = RefType(HasTy(Var(NU), CtorApp("List", (RefType(HasTy(Var(NU), TyVarT("A"))),))))
    return DatatypeDef(
        ctor="List",
        params=(("+", "A", True),),
        fields=(("hd", a), ("tl", tl)),
        marks=(("A", 1, (0,)),),
    )
