"""Types of constants, type-variable instantiation, and the constructed-data
packaging formulas (fold) and field-exposure formulas (unfold)."""

from __future__ import annotations

from .errors import ArityError, UnknownCtor
from .syntax import (
    NU, TAG_BOOL, TAG_DICT, TAG_INT, TAG_STR,
    And, Arrow, BoolC, Const, CtorApp, DefEnv, EmptyDict, Forall, Formula,
    HasTy, Iff, Implies, IntC, LFun, Mono, Not, NullC, NullT, Or,
    PartialPrim, Pred, Prim, RefType, Scheme, StrC, TOP, Tru,
    TyVarT, VConst, Value, Var, conj, eq, has, eqmod, neg, sel, subst_nu,
    tag_eq, Fls,
)

_NUV = Var(NU)

INT_T = RefType(tag_eq(_NUV, TAG_INT))
BOOL_T = RefType(tag_eq(_NUV, TAG_BOOL))
STR_T = RefType(tag_eq(_NUV, TAG_STR))
DICT_T = RefType(tag_eq(_NUV, TAG_DICT))


def _arrow_ty(binder: str, dom: RefType, cod: RefType) -> RefType:
    return RefType(HasTy(_NUV, Arrow(binder, dom, cod)))


def _bool_flag(p: Formula) -> RefType:
    """{v | Bool(v) /\\ (v = true <=> p)} - the shape of boolean tests."""
    return RefType(conj(tag_eq(_NUV, TAG_BOOL),
                        Iff(eq(_NUV, VConst(BoolC(True))), p)))


def const_type(c: Const) -> Scheme:
    """The declared type of a constant: singletons for base values, curried
    refinement arrows over the finite-map theory for the primitives."""
    if isinstance(c, (IntC, BoolC, StrC, NullC, EmptyDict)):
        return Mono(RefType(eq(_NUV, VConst(c))))
    if isinstance(c, PartialPrim):
        raise ArityError("partially applied primitives have no declared type")
    if not isinstance(c, Prim):
        raise ArityError(f"not a constant: {c!r}")
    name = c.name
    selfhood = eq(_NUV, VConst(c))

    def with_self(arrow: RefType) -> Scheme:
        return Mono(RefType(conj(selfhood, arrow.p)))

    if name in ("+", "-"):
        sym = "plus" if name == "+" else "minus"
        out = RefType(conj(tag_eq(_NUV, TAG_INT),
                           eq(_NUV, LFun(sym, (Var("x"), Var("y"))))))
        return with_self(_arrow_ty("x", INT_T, _arrow_ty("y", INT_T, out)))
    if name == "=":
        out = _bool_flag(eq(Var("x"), Var("y")))
        return with_self(_arrow_ty("x", TOP, _arrow_ty("y", TOP, out)))
    if name == "not":
        out = RefType(conj(tag_eq(_NUV, TAG_BOOL),
                           Iff(eq(Var("x"), VConst(BoolC(True))),
                               eq(_NUV, VConst(BoolC(False))))))
        return with_self(_arrow_ty("x", BOOL_T, out))
    if name == "tag":
        out = RefType(eq(_NUV, LFun("tag", (Var("x"),))))
        return with_self(_arrow_ty("x", TOP, out))
    if name in ("has", "mem"):
        out = _bool_flag(has(Var("d"), Var("k")))
        return with_self(_arrow_ty("d", DICT_T, _arrow_ty("k", STR_T, out)))
    if name == "get":
        key_t = RefType(conj(tag_eq(_NUV, TAG_STR), has(Var("d"), _NUV)))
        out = RefType(eq(_NUV, sel(Var("d"), Var("k"))))
        return with_self(_arrow_ty("d", DICT_T, _arrow_ty("k", key_t, out)))
    if name == "set":
        out = RefType(conj(
            tag_eq(_NUV, TAG_DICT),
            eqmod(_NUV, Var("d"), Var("k")),
            has(_NUV, Var("k")),
            eq(sel(_NUV, Var("k")), Var("x")),
        ))
        return with_self(_arrow_ty("d", DICT_T,
                                   _arrow_ty("k", STR_T,
                                             _arrow_ty("x", TOP, out))))
    if name == "keys":
        elem = RefType(conj(tag_eq(_NUV, TAG_STR), has(Var("d"), _NUV)))
        out = RefType(HasTy(_NUV, CtorApp("List", (elem,))))
        return with_self(_arrow_ty("d", DICT_T, out))
    if name == "fix":
        a = RefType(HasTy(_NUV, TyVarT("A")))
        aa = _arrow_ty("x", a, a)
        return Forall("A", Mono(_arrow_ty("f", aa, a)))
    raise ArityError(f"unknown primitive '{name}'")


# ---------------------------------------------------------------------------
# Type-variable instantiation
# ---------------------------------------------------------------------------

def inst(target, a: str, t: RefType):
    """Instantiate type variable a with t: type predicates over a become the
    embedding of t at the predicate's subject; everything else is structural."""
    if isinstance(target, HasTy):
        if isinstance(target.term, TyVarT):
            if target.term.name == a:
                return subst_nu(t.p, target.lw)
            return target
        return HasTy(target.lw, inst(target.term, a, t))
    if isinstance(target, (Tru, Fls, Pred)):
        return target
    if isinstance(target, And):
        return And(tuple(inst(p, a, t) for p in target.ps))
    if isinstance(target, Or):
        return Or(tuple(inst(p, a, t) for p in target.ps))
    if isinstance(target, Not):
        return Not(inst(target.p, a, t))
    if isinstance(target, Implies):
        return Implies(inst(target.p, a, t), inst(target.q, a, t))
    if isinstance(target, Iff):
        return Iff(inst(target.p, a, t), inst(target.q, a, t))
    if isinstance(target, Arrow):
        return Arrow(target.binder, inst(target.dom, a, t), inst(target.cod, a, t))
    if isinstance(target, TyVarT):
        # a bare type-term position (inside fold inference paths)
        return target
    if isinstance(target, CtorApp):
        return CtorApp(target.ctor, tuple(inst(x, a, t) for x in target.args))
    if isinstance(target, NullT):
        return target
    if isinstance(target, RefType):
        return RefType(inst(target.p, a, t))
    if isinstance(target, Mono):
        return Mono(inst(target.ty, a, t))
    if isinstance(target, Forall):
        if target.tyvar == a:
            return target
        return Forall(target.tyvar, inst(target.body, a, t))
    raise TypeError(f"inst: unexpected node {target!r}")


def inst_many(target, tyvars: list[str], types: list[RefType]):
    for a, t in zip(tyvars, types):
        target = inst(target, a, t)
    return target


# ---------------------------------------------------------------------------
# Fold / Unfold
# ---------------------------------------------------------------------------

def fold_formula(defs: DefEnv, ctor: str, targs: tuple[RefType, ...],
                 args: tuple[Value, ...]) -> Formula:
    """The formula packaging constructed data: non-null, dictionary-tagged,
    carrying the constructed type, with each field equal to its argument."""
    d = defs.get(ctor)
    if d is None:
        raise UnknownCtor(f"undefined type constructor '{ctor}'")
    if len(targs) != len(d.params):
        raise ArityError(f"'{ctor}' expects {len(d.params)} type arguments, "
                         f"got {len(targs)}")
    if len(args) != len(d.fields):
        raise ArityError(f"'{ctor}' expects {len(d.fields)} fields, "
                         f"got {len(args)}")
    parts: list[Formula] = [
        neg(eq(_NUV, VConst(NullC()))),
        tag_eq(_NUV, TAG_DICT),
        HasTy(_NUV, CtorApp(ctor, targs)),
    ]
    for ((fname, _), w) in zip(d.fields, args):
        parts.append(eq(sel(_NUV, VConst(StrC(fname))), w))
    return conj(*parts)


def unfold_formula(defs: DefEnv, ctor: str, targs: tuple[RefType, ...]) -> Formula:
    """The formula exposing the fields of non-null constructed data as a
    dictionary with typed fields."""
    d = defs.get(ctor)
    if d is None:
        raise UnknownCtor(f"undefined type constructor '{ctor}'")
    if len(targs) != len(d.params):
        raise ArityError(f"'{ctor}' expects {len(d.params)} type arguments, "
                         f"got {len(targs)}")
    tyvars = list(d.param_names())
    parts: list[Formula] = [tag_eq(_NUV, TAG_DICT)]
    for (fname, fty) in d.fields:
        member = inst_many(fty, tyvars, list(targs))
        parts.append(subst_nu(member.p, sel(_NUV, VConst(StrC(fname)))))
    return Implies(neg(eq(_NUV, VConst(NullC()))), conj(*parts))


def unfold_has_fields(defs: DefEnv, ctor: str) -> Formula:
    """Field-presence facts for constructed data under the non-null guard;
    conjoined by environment extension alongside unfold_formula (the
    dictionary representation of constructed data guarantees them)."""
    d = defs.get(ctor)
    if d is None:
        raise UnknownCtor(f"undefined type constructor '{ctor}'")
    parts = [has(_NUV, VConst(StrC(fname))) for (fname, _) in d.fields]
    return Implies(neg(eq(_NUV, VConst(NullC()))), conj(*parts))
