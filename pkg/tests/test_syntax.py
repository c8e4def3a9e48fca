"""Substitution, alpha-canonicalization, erasure, and their properties."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from duckcheck.syntax import (
    NU, And, App, Arrow, BoolC, CtorApp, DictExt, EVal, EmptyDict, Fun,
    HasTy, If, IntC, LFun, Let, Mono, New, Not, NullC, Or, Pred, RefType,
    StrC, TOP, TyVarT, VConst, Var, alpha_canonical, alpha_equiv, eq, erase,
    free_vars, pp_expr, sel, subst_nu, subst_value, tag_eq, tag_of,
)


def num(n):
    return VConst(IntC(n))


class TestSubstValue:
    def test_singleton_replacement(self):
        t = RefType(eq(Var(NU), Var("x")))
        got = subst_value(t, "x", num(3))
        assert got == RefType(eq(Var(NU), num(3)))

    def test_shadowed_binder_untouched(self):
        f = Fun("x", None, EVal(Var("x")))
        assert subst_value(f, "x", num(3)) == f

    def test_app_output_substitution(self):
        # the application-rule output type substitutes the actual argument
        cod = RefType(eq(Var(NU), LFun("plus", (Var("x"), num(1)))))
        got = subst_value(cod, "x", num(2))
        assert got == RefType(eq(Var(NU), LFun("plus", (num(2), num(1)))))

    def test_untouched_when_absent(self):
        t = RefType(tag_eq(Var(NU), "Int"))
        assert subst_value(t, "zz", num(3)) is not None
        assert subst_value(t, "zz", num(3)) == t

    def test_capture_avoidance_renames_binder(self):
        # (fun y -> x) [y/x]  must not capture
        f = Fun("y", None, EVal(Var("x")))
        got = subst_value(f, "x", Var("y"))
        assert isinstance(got, Fun)
        assert got.binder != "y"
        assert got.body == EVal(Var("y"))


class TestSubstNu:
    def test_tag_formula(self):
        p = tag_eq(Var(NU), "Int")
        assert subst_nu(p, Var("x")) == tag_eq(Var("x"), "Int")

    def test_sel_target(self):
        p = eq(Var(NU), num(0))
        got = subst_nu(p, sel(Var("d"), VConst(StrC("c"))))
        assert got == eq(sel(Var("d"), VConst(StrC("c"))), num(0))

    def test_constant_type_at_constant(self):
        # the declared type of 1 read at 1 becomes the trivial equality
        p = eq(Var(NU), num(1))
        assert subst_nu(p, num(1)) == eq(num(1), num(1))


class TestAlphaCanonical:
    def test_alpha_equivalent_arrows_identical(self):
        int_t = RefType(tag_eq(Var(NU), "Int"))
        u1 = Arrow("x", int_t, RefType(eq(Var(NU), Var("x"))))
        u2 = Arrow("y", int_t, RefType(eq(Var(NU), Var("y"))))
        assert alpha_canonical(u1) == alpha_canonical(u2)

    def test_free_names_preserved(self):
        assert alpha_canonical(TyVarT("A")) == TyVarT("A")
        u = Arrow("x", TOP, RefType(eq(Var(NU), Var("free"))))
        assert "free" in repr(alpha_canonical(u))

    def test_distinct_terms_stay_distinct(self):
        int_t = RefType(tag_eq(Var(NU), "Int"))
        bool_t = RefType(tag_eq(Var(NU), "Bool"))
        a = Arrow("x", int_t, int_t)
        b = Arrow("x", int_t, bool_t)
        assert alpha_canonical(a) != alpha_canonical(b)


# random term generators ----------------------------------------------------

_names = ["a", "b", "c", "d"]


def _rand_lval(rng, depth, scope):
    choice = rng.randrange(4 if depth > 0 else 2)
    if choice == 0 and scope:
        return Var(rng.choice(scope))
    if choice <= 1:
        return VConst(IntC(rng.randrange(3)))
    if choice == 2:
        return LFun("tag", (_rand_lval(rng, depth - 1, scope),))
    return LFun("sel", (_rand_lval(rng, depth - 1, scope),
                        _rand_lval(rng, depth - 1, scope)))


def _rand_formula(rng, depth, scope):
    if depth == 0 or rng.random() < 0.35:
        return eq(_rand_lval(rng, 1, scope), _rand_lval(rng, 1, scope))
    c = rng.randrange(3)
    if c == 0:
        return And((_rand_formula(rng, depth - 1, scope),
                    _rand_formula(rng, depth - 1, scope)))
    if c == 1:
        return Or((_rand_formula(rng, depth - 1, scope),
                   _rand_formula(rng, depth - 1, scope)))
    return Not(_rand_formula(rng, depth - 1, scope))


def _rand_typeterm(rng, depth, scope):
    c = rng.randrange(3)
    if c == 0 or depth == 0:
        return TyVarT(rng.choice(["A", "B"]))
    if c == 1:
        x = rng.choice(_names)
        return Arrow(x, RefType(_rand_formula(rng, depth - 1, scope)),
                     RefType(_rand_formula(rng, depth - 1, scope + [x])))
    return CtorApp("List", (RefType(_rand_formula(rng, depth - 1, scope)),))


class TestAlphaProperties:
    def test_idempotence_on_random_terms(self):
        rng = random.Random(7)
        for _ in range(1000):
            u = _rand_typeterm(rng, rng.randrange(4), ["z"])
            c = alpha_canonical(u)
            assert alpha_canonical(c) == c

    def test_congruence_against_renaming_oracle(self):
        # small arrow terms: canonical equality iff some binder renaming
        # makes them structurally equal
        int_t = RefType(tag_eq(Var(NU), "Int"))
        rng = random.Random(11)
        pool = []
        for x in ("x", "y"):
            for mention in (True, False):
                cod = RefType(eq(Var(NU), Var(x))) if mention else int_t
                pool.append(Arrow(x, int_t, cod))
        for u1 in pool:
            for u2 in pool:
                canon_equal = alpha_canonical(u1) == alpha_canonical(u2)
                # oracle: rename u2's binder to u1's and compare structurally
                renamed = Arrow(u1.binder, u2.dom,
                                subst_value(u2.cod, u2.binder, Var(u1.binder)))
                oracle = renamed == u1
                assert canon_equal == oracle


class TestErase:
    def test_let_annotation(self):
        e = Let("x", Mono(RefType(tag_eq(Var(NU), "Int"))),
                EVal(num(1)), EVal(Var("x")))
        got = erase(e)
        assert got.ann is None
        assert got.rhs == EVal(num(1))

    def test_fun_annotation(self):
        f = Fun("x", RefType(tag_eq(Var(NU), "Int")), EVal(Var("x")))
        assert erase(EVal(f)).value == Fun("x", None, EVal(Var("x")))

    def test_constructed_type_arguments(self):
        w = New("List", (RefType(tag_eq(Var(NU), "Int")),),
                (num(1), VConst(NullC())))
        got = erase(EVal(w)).value
        assert got == New("List", None, (num(1), VConst(NullC())))


def _rand_expr(rng, depth, scope):
    c = rng.randrange(5)
    if depth == 0 or c == 0:
        if scope and rng.random() < 0.5:
            return EVal(Var(rng.choice(scope)))
        return EVal(num(rng.randrange(3)))
    if c == 1:
        x = rng.choice(_names)
        return Let(x, None, _rand_expr(rng, depth - 1, scope),
                   _rand_expr(rng, depth - 1, scope + [x]))
    if c == 2:
        x = rng.choice(_names)
        return EVal(Fun(x, None, _rand_expr(rng, depth - 1, scope + [x])))
    if c == 3:
        g = Var(rng.choice(scope)) if scope and rng.random() < 0.5 \
            else VConst(BoolC(True))
        return If(g, _rand_expr(rng, depth - 1, scope),
                  _rand_expr(rng, depth - 1, scope))
    return EVal(num(rng.randrange(3)))


@st.composite
def _hyp_expr(draw, depth=3, scope=("x", "q")):
    scope = list(scope)
    if depth == 0 or draw(st.booleans()):
        if scope and draw(st.booleans()):
            return EVal(Var(draw(st.sampled_from(scope))))
        return EVal(num(draw(st.integers(0, 3))))
    kind = draw(st.integers(0, 2))
    if kind == 0:
        x = draw(st.sampled_from(_names))
        return Let(x, None, draw(_hyp_expr(depth=depth - 1, scope=tuple(scope))),
                   draw(_hyp_expr(depth=depth - 1, scope=tuple(scope + [x]))))
    if kind == 1:
        x = draw(st.sampled_from(_names))
        return EVal(Fun(x, None,
                        draw(_hyp_expr(depth=depth - 1, scope=tuple(scope + [x])))))
    return If(VConst(BoolC(True)),
              draw(_hyp_expr(depth=depth - 1, scope=tuple(scope))),
              draw(_hyp_expr(depth=depth - 1, scope=tuple(scope))))


class TestSubstitutionProperty:
    @settings(max_examples=300, deadline=None)
    @given(_hyp_expr(), st.sampled_from([num(5), Var("q"), Var("fresh")]))
    def test_hypothesis_free_vars_equation(self, e, w):
        if "x" not in free_vars(e):
            assert subst_value(e, "x", w) == e
            return
        got = free_vars(subst_value(e, "x", w))
        assert got == (free_vars(e) - {"x"}) | free_vars(w)

    def test_free_vars_equation(self):
        rng = random.Random(3)
        checked = 0
        for _ in range(2000):
            e = _rand_expr(rng, 3, ["x", "q"])
            w = rng.choice([num(5), Var("q"), Var("fresh")])
            if "x" not in free_vars(e):
                assert subst_value(e, "x", w) == e
                continue
            got = free_vars(subst_value(e, "x", w))
            want = (free_vars(e) - {"x"}) | free_vars(w)
            assert got == want
            checked += 1
        assert checked > 200

    def test_anf_preserved_by_value_substitution(self):
        from tests.util import is_anf
        rng = random.Random(5)
        for _ in range(500):
            e = _rand_expr(rng, 3, ["x"])
            got = subst_value(e, "x", num(1))
            assert is_anf(got)
