"""Well-formedness: formulas, types, datatype definitions, polarity."""

import itertools

import pytest

from duckcheck.errors import UnknownCtor, WfError
from duckcheck.parser import parse_type
from duckcheck.syntax import (
    NU, And, Arrow, CtorApp, DatatypeDef, HasTy, LFun, Mono, Not, Or,
    RefType, TOP, TypeEnv, TyVarT, Var, eq, sel, tag_eq,
)
from duckcheck.wf import (
    POS, NEG, builtin_list_def, check_formula, check_type, check_typedef,
    flip, poles,
)

INT_T = RefType(tag_eq(Var(NU), "Int"))
DEFS = {"List": builtin_list_def()}


class TestCheckFormula:
    def test_unbound_variable(self):
        with pytest.raises(WfError) as e:
            check_formula(DEFS, TypeEnv(), tag_eq(Var("x"), "Int"))
        assert e.value.kind == "unbound-variable"

    def test_bound_variable_ok(self):
        g = TypeEnv().bind("x", Mono(TOP))
        check_formula(DEFS, g, tag_eq(Var("x"), "Int"))

    def test_term_in_proposition_position(self):
        g = TypeEnv().bind("x", Mono(TOP))
        with pytest.raises(WfError) as e:
            check_formula(DEFS, g, sel(Var("x"), Var("x")))
        assert e.value.kind == "sort"

    def test_arity(self):
        g = TypeEnv().bind("x", Mono(TOP))
        from duckcheck.syntax import Pred
        with pytest.raises(WfError) as e:
            check_formula(DEFS, g, Pred("has", (Var("x"),)))
        assert e.value.kind == "arity"


class TestCheckType:
    def test_top_ok(self):
        check_type(DEFS, TypeEnv(), Mono(TOP))

    def test_unbound_tyvar(self):
        with pytest.raises(WfError):
            check_type(DEFS, TypeEnv(), Mono(RefType(HasTy(Var(NU), TyVarT("A")))))

    def test_bound_tyvar_ok(self):
        g = TypeEnv().bind_tyvar("A")
        check_type(DEFS, g, Mono(RefType(HasTy(Var(NU), TyVarT("A")))))

    def test_unknown_ctor(self):
        t = Mono(RefType(HasTy(Var(NU), CtorApp("Foo", (INT_T,)))))
        with pytest.raises(UnknownCtor):
            check_type(DEFS, TypeEnv(), t)

    def test_arrow_codomain_sees_binder(self):
        t = parse_type("x:Int -> {v | v = x}")
        check_type(DEFS, TypeEnv(), t)

    def test_embedding_mentions_only_scoped_variables(self):
        # accepted types embed without free variables beyond the env's
        from duckcheck.logic import embed_type
        from duckcheck.syntax import free_vars
        g = TypeEnv().bind("d", Mono(TOP))
        t = parse_type('{v | has(d, "k")}')
        check_type(DEFS, g, t)
        assert free_vars(embed_type(t)) - {NU} <= {"d"}


class TestPoles:
    def test_arrow_domain_flips(self):
        t = RefType(HasTy(Var(NU), Arrow(
            "x", RefType(HasTy(Var(NU), TyVarT("A"))), TOP)))
        assert poles(DEFS, "A", POS, t) == frozenset({NEG})

    def test_direct_occurrence(self):
        t = RefType(HasTy(Var(NU), TyVarT("A")))
        assert poles(DEFS, "A", POS, t) == frozenset({POS})

    def test_negation_flips(self):
        p = Not(HasTy(Var(NU), TyVarT("A")))
        assert poles(DEFS, "A", POS, p) == frozenset({NEG})

    def test_covariant_ctor_argument(self):
        t = RefType(HasTy(Var(NU), CtorApp(
            "List", (RefType(HasTy(Var(NU), TyVarT("A"))),))))
        assert poles(DEFS, "A", POS, t) == frozenset({POS})

    def test_flip_property_exhaustive(self):
        # poles(a, flipped, t) equals the pointwise flip, on all small terms
        def terms(depth):
            a = RefType(HasTy(Var(NU), TyVarT("A")))
            if depth == 0:
                yield a
                yield INT_T
                return
            for t in terms(depth - 1):
                yield RefType(HasTy(Var(NU), Arrow("x", t, a)))
                yield RefType(HasTy(Var(NU), Arrow("x", a, t)))
                yield RefType(Not(t.p))
                yield RefType(And((t.p, a.p)))
                yield RefType(Or((t.p, a.p)))
                yield RefType(HasTy(Var(NU), CtorApp("List", (t,))))

        count = 0
        for t in terms(2):
            plus = poles(DEFS, "A", POS, t)
            minus = poles(DEFS, "A", NEG, t)
            assert minus == frozenset(flip(x) for x in plus)
            count += 1
        assert count > 20


class TestCheckTypedef:
    def test_builtin_list_ok(self):
        check_typedef({}, builtin_list_def())

    def test_negative_occurrence_under_plus(self):
        bad = DatatypeDef(
            ctor="Bad",
            params=(("+", "A", False),),
            fields=(("f", RefType(HasTy(Var(NU), Arrow(
                "x", RefType(HasTy(Var(NU), TyVarT("A"))), TOP)))),),
        )
        with pytest.raises(WfError) as e:
            check_typedef({}, bad)
        assert e.value.kind == "variance"

    def test_bivariant_always_ok(self):
        any_ = DatatypeDef(
            ctor="Any",
            params=(("=", "A", False),),
            fields=(
                ("f", RefType(HasTy(Var(NU), TyVarT("A")))),
                ("g", RefType(HasTy(Var(NU), Arrow(
                    "x", RefType(HasTy(Var(NU), TyVarT("A"))), TOP)))),
            ),
        )
        check_typedef({}, any_)

    def test_partial_marking_rejected(self):
        half = DatatypeDef(
            ctor="Half",
            params=(("+", "A", True), ("+", "B", False)),
            fields=(("f", RefType(HasTy(Var(NU), TyVarT("A")))),
                    ("g", RefType(HasTy(Var(NU), TyVarT("B"))))),
            marks=(("A", 0, ()),),
        )
        with pytest.raises(WfError) as e:
            check_typedef({}, half)
        assert e.value.kind == "marking"
