"""Bidirectional checking: constant types, instantiation, fold/unfold,
filters, synthesis/conversion, local variable elimination, and the driver."""

import pytest

from duckcheck.checker import (
    check_program, convert, elim, filter_by_arg_typ, filter_by_arg_val,
    initial_env, synth, synth_value,
)
from duckcheck.defdata import const_type, fold_formula, inst, unfold_formula
from duckcheck.errors import (
    AmbiguousApplication, ArityError, ElimFailure, NoApplicableArrow,
    TypeError_, UnknownCtor,
)
from duckcheck.parser import load_program, parse_type
from duckcheck.state import CheckerState
from duckcheck.syntax import (
    NU, And, Arrow, BoolC, CtorApp, EVal, Fun, HasTy, Iff, Implies, IntC,
    LFun, Mono, New, NullC, Prim, RefType, StrC, TOP, TypeEnv, TyVarT,
    VConst, Var, alpha_equiv, conj, disj, eq, neg, pp_formula, pp_scheme,
    sel, subst_nu, tag_eq, has,
)
from duckcheck.wf import builtin_list_def

INT_T = RefType(tag_eq(Var(NU), "Int"))
DEFS = {"List": builtin_list_def()}


@pytest.fixture()
def state():
    st = CheckerState(dict(DEFS))
    yield st
    st.close()


def num(n):
    return VConst(IntC(n))


class TestConstType:
    def test_integer_singleton(self):
        assert const_type(IntC(1)) == Mono(RefType(eq(Var(NU), num(1))))

    def test_get_signature(self):
        s = const_type(Prim("get"))
        p = s.ty.p
        arrow = next(q.term for q in p.ps if isinstance(q, HasTy))
        assert arrow.binder == "d"
        assert arrow.dom == RefType(tag_eq(Var(NU), "Dict"))
        inner = arrow.cod.p.term
        # the key demands presence: Str(v) and has(d, v)
        assert has(Var("d"), Var(NU)) in inner.dom.p.ps
        assert inner.cod.p == eq(Var(NU), sel(Var("d"), Var("k")))

    def test_keys_returns_key_list(self):
        s = const_type(Prim("keys"))
        arrow = next(q.term for q in s.ty.p.ps if isinstance(q, HasTy))
        out = arrow.cod.p
        assert isinstance(out, HasTy) and isinstance(out.term, CtorApp)
        elem = out.term.args[0].p
        assert has(Var("d"), Var(NU)) in elem.ps

    def test_mem_equals_has_up_to_selfhood(self):
        h = const_type(Prim("has"))
        m = const_type(Prim("mem"))
        ha = next(q.term for q in h.ty.p.ps if isinstance(q, HasTy))
        ma = next(q.term for q in m.ty.p.ps if isinstance(q, HasTy))
        assert ha == ma


class TestInst:
    def test_own_variable_replaced(self):
        got = inst(HasTy(Var(NU), TyVarT("A")), "A", INT_T)
        assert got == tag_eq(Var(NU), "Int")

    def test_other_variable_untouched(self):
        atom = HasTy(Var(NU), TyVarT("B"))
        assert inst(atom, "A", INT_T) == atom

    def test_absent_variable_structural_identity(self):
        p = conj(tag_eq(Var(NU), "Str"), eq(Var(NU), num(1)))
        assert inst(p, "A", INT_T) == p


class TestFoldUnfold:
    def test_fold_list_int(self):
        got = fold_formula(DEFS, "List", (INT_T,), (num(1), VConst(NullC())))
        assert isinstance(got, And) and len(got.ps) == 5
        assert neg(eq(Var(NU), VConst(NullC()))) in got.ps
        assert tag_eq(Var(NU), "Dict") in got.ps
        assert HasTy(Var(NU), CtorApp("List", (INT_T,))) in got.ps
        assert eq(sel(Var(NU), VConst(StrC("hd"))), num(1)) in got.ps
        assert eq(sel(Var(NU), VConst(StrC("tl"))), VConst(NullC())) in got.ps

    def test_fold_arity_mismatch(self):
        with pytest.raises(ArityError):
            fold_formula(DEFS, "List", (INT_T,), (num(1),))

    def test_unfold_list_int_matches_printed_formula(self):
        got = unfold_formula(DEFS, "List", (INT_T,))
        want = Implies(
            neg(eq(Var(NU), VConst(NullC()))),
            conj(tag_eq(Var(NU), "Dict"),
                 tag_eq(sel(Var(NU), VConst(StrC("hd"))), "Int"),
                 HasTy(sel(Var(NU), VConst(StrC("tl"))),
                       CtorApp("List", (INT_T,)))))
        assert alpha_equiv(got, want)

    def test_unfold_list_top_head_is_trivial(self):
        got = unfold_formula(DEFS, "List", (TOP,))
        text = pp_formula(got)
        assert 'tag(sel(v, "hd"))' not in text

    def test_unknown_ctor(self):
        with pytest.raises(UnknownCtor):
            unfold_formula(DEFS, "Nope", ())


class TestFilters:
    def test_exactly_one(self, state):
        u = Arrow("x", INT_T, INT_T)
        got = filter_by_arg_typ(state, TypeEnv(), [u, TyVarT("A")],
                                RefType(eq(Var(NU), num(1))))
        assert got == u

    def test_zero_applicable(self, state):
        u = Arrow("x", RefType(tag_eq(Var(NU), "Str")), INT_T)
        with pytest.raises(NoApplicableArrow):
            filter_by_arg_typ(state, TypeEnv(), [u], RefType(eq(Var(NU), num(1))))

    def test_two_applicable_ambiguous(self, state):
        u1 = Arrow("x", INT_T, INT_T)
        u2 = Arrow("y", TOP, INT_T)
        with pytest.raises(AmbiguousApplication):
            filter_by_arg_typ(state, TypeEnv(), [u1, u2],
                              RefType(eq(Var(NU), num(1))))

    def test_filter_by_value_with_lambda(self, state):
        # the identity lambda converts to an Int -> Int domain
        lam = Fun("z", None, EVal(Var("z")))
        dom = RefType(HasTy(Var(NU), Arrow("w", INT_T, INT_T)))
        u1 = Arrow("g", dom, INT_T)
        u2 = Arrow("g2", RefType(tag_eq(Var(NU), "Str")), INT_T)
        got = filter_by_arg_val(state, TypeEnv(), [u1, u2], lam)
        assert got == u1


class TestSynth:
    def test_constant_singleton(self, state):
        got = synth(state, TypeEnv(), EVal(num(3)))
        assert got == Mono(RefType(eq(Var(NU), num(3))))

    def test_if_guards_in_output(self, state):
        defs, core = load_program("let pick (b :: Bool) = if b then 2 else 3")
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        text = pp_scheme(s)
        assert "b = true => v = 2" in text
        assert "b = false => v = 3" in text
        st.close()

    def test_inconsistent_env_synthesizes_false(self, state):
        g = (TypeEnv().bind("x", Mono(TOP))
             .guard(tag_eq(Var("x"), "Int"))
             .guard(neg(tag_eq(Var("x"), "Int"))))
        got = synth(state, g, EVal(Var("nonexistent")))
        from duckcheck.syntax import Fls
        assert got == Mono(RefType(Fls()))


class TestConvert:
    def test_zero_converts_to_int(self, state):
        convert(state, TypeEnv(), EVal(num(0)), Mono(INT_T))

    def test_function_against_non_arrow_fails(self, state):
        lam = Fun("x", None, EVal(Var("x")))
        with pytest.raises(TypeError_) as e:
            convert(state, TypeEnv(), EVal(lam), Mono(INT_T))
        assert e.value.rule == "TC-Fun"

    def test_negate_body_against_dependent_type(self):
        defs, core = load_program(open("corpus/negate.dref").read())
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        assert "tag(v) = tag(x)" in pp_scheme(s)
        st.close()


class TestElimScenarios:
    """The three let-body rewrites: singleton inlining, boolean flags,
    and alias substitution."""

    def test_singleton_inlining_field_read(self):
        src = """
let get_f (x :: {v | Dict(v) /\\ has(v, "f")}) = x["f"]
"""
        defs, core = load_program(src)
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()
        want = parse_type('x:{v | Dict(v) /\\ has(v, "f")} -> {v | v = sel(x, "f")}')
        assert alpha_equiv(s, want), pp_scheme(s)

    def test_boolean_flag_rewrite(self):
        src = """
let maybe_get_f (x :: Dict) =
  if mem x "f" then x["f"] else 0
"""
        defs, core = load_program(src)
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()
        want = parse_type(
            'x:Dict -> {v | (has(x, "f") => v = sel(x, "f"))'
            ' /\\ (not has(x, "f") => v = 0)}')
        assert alpha_equiv(s, want), pp_scheme(s)

    def test_alias_substitution(self):
        src = """
let another_maybe_get_f (x :: Dict) =
  let a = mem x "f" in
  let b = a in
  if b then x["f"] else 0
"""
        defs, core = load_program(src)
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()
        want = parse_type(
            'x:Dict -> {v | (has(x, "f") => v = sel(x, "f"))'
            ' /\\ (not has(x, "f") => v = 0)}')
        assert alpha_equiv(s, want), pp_scheme(s)

    def test_output_never_mentions_eliminated_variable(self, state):
        from duckcheck.syntax import free_vars
        s = Mono(RefType(eq(Var(NU), sel(Var("x"), VConst(StrC("f"))))))
        t = RefType(eq(Var(NU), Var("b")))
        got = elim(state, TypeEnv(), "b", s, t)
        assert "b" not in free_vars(got)
        assert got == s.ty  # wait: elim replaces v = b with s's formula

    def test_strict_mode_restricts_connectives(self):
        st = CheckerState(dict(DEFS), strict_elim=True)
        s = Mono(RefType(eq(Var(NU), Var("y"))))
        t = RefType(disj(eq(Var(NU), Var("b")), tag_eq(Var(NU), "Int")))
        with pytest.raises(ElimFailure):
            elim(st, TypeEnv(), "b", s, t)
        st.close()


class TestMarkedInference:
    def test_tail_mark_infers_element_type(self):
        src = """
let xs :: {v | v :: List[Int]} = new List [Int] (2, null)
let ys = new List(1, xs)
let check :: {v | v :: List[Int]} = ys
"""
        defs, core = load_program(src)
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()

    def test_head_mark_fails_on_singleton_inference(self):
        src = """
type Box[+*A] { item: {v | v :: *A}, rest: {v | v :: List[A]} }
let xs :: {v | v :: List[Int]} = new List [Int] (2, null)
let b = new Box(1, xs)
let use :: {v | v :: Box[Int]} = b
"""
        defs, core = load_program(src)
        st = CheckerState(defs)
        with pytest.raises(TypeError_):
            check_program(defs, core, st)
        st.close()


class TestIfGuardSoundness:
    def test_branch_refinement_holds_under_ground_model(self):
        # synthesize the conditional type, then evaluate the refinement at
        # the actual branch result under each guard valuation
        from duckcheck.logic import GroundModel, eval_ground
        from duckcheck.syntax import BoolC, subst_nu, subst_value
        defs, core = load_program("let pick (b :: Bool) = if b then 2 else 3")
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()
        arrow = s.ty.p.term
        cod = arrow.cod
        for flag, result in ((True, 2), (False, 3)):
            p = subst_nu(cod.p, num(result))
            p = subst_value(p, arrow.binder, VConst(BoolC(flag)))
            assert eval_ground(p, GroundModel({}, defs)) is True


class TestCheckProgram:
    def test_plain_integer_program(self):
        defs, core = load_program("let x = 3")
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()
        assert s == Mono(RefType(eq(Var(NU), num(3))))

    def test_get_count_signature(self):
        src = open("corpus/get_count.dref").read()
        defs, core = load_program(src)
        st = CheckerState(defs)
        s = check_program(defs, core, st)
        st.close()
        assert isinstance(s, Mono)

    def test_synth_convert_coherence_on_small_terms(self):
        sources = [
            "let a = 3",
            "let b = 1 + 2",
            'let c = {"k": 5}',
            'let d = has {"k": 5} "k"',
            "let e = if true then 1 else 2",
            "let f = fun (x :: Int) -> x + 1",
            'let g = set {} "a" 4',
            "let h = new List [Int] (3, null)",
        ]
        for src in sources:
            defs, core = load_program(src)
            st = CheckerState(defs)
            s = check_program(defs, core, st)
            convert(st, initial_env(), core, s)
            st.close()
