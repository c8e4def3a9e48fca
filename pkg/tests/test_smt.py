"""The solver bridge: sessions, validity by refutation, assumption frames."""

import os
import random

import pytest

from duckcheck.errors import SolverStartError
from duckcheck.logic import BoxTable, GroundModel, eval_ground, query_axioms
from duckcheck.smt import (
    INVALID, UNKNOWN, VALID, SolverConfig, SolverSession, default_solver_cmd,
    open_session,
)
from duckcheck.syntax import (
    NU, And, Arrow, BoolC, DictExt, EmptyDict, Fls, HasTy, IntC, LFun, Not,
    Or, Pred, RefType, StrC, Tru, VConst, Var, conj, disj, eq, neg, sel,
    tag_eq,
)


def num(n):
    return VConst(IntC(n))


def s(x):
    return VConst(StrC(x))


@pytest.fixture()
def session():
    sess = open_session(SolverConfig())
    yield sess
    sess.close()


class TestSession:
    def test_default_session_opens_with_empty_stack(self, session):
        assert session.depth == 0

    def test_bogus_command_raises(self):
        with pytest.raises(SolverStartError):
            open_session(SolverConfig(cmd=["/no/such/solver/binary"]))

    def test_transcript_mirroring(self, tmp_path):
        d1 = tmp_path / "log1"
        d2 = tmp_path / "log2"
        q_hyp = [tag_eq(Var("x"), "Int")]
        q_goal = tag_eq(Var("x"), "Int")
        texts = []
        for d in (d1, d2):
            sess = open_session(SolverConfig(log_dir=str(d)))
            assert sess.check_valid(q_hyp, q_goal) == VALID
            sess.close()
            files = os.listdir(d)
            assert len(files) == 1
            texts.append((d / files[0]).read_text())
        assert texts[0] == texts[1]


class TestCheckValid:
    def test_trivial_implication(self, session):
        p = eq(Var("p"), VConst(BoolC(True)))
        from duckcheck.syntax import Implies
        assert session.check_valid([], Implies(p, p)) == VALID

    def test_tag_case_analysis(self, session):
        # an int-or-bool that is not an int must be a bool
        hyp = [disj(tag_eq(Var("x"), "Int"), tag_eq(Var("x"), "Bool")),
               neg(tag_eq(Var("x"), "Int"))]
        goal = tag_eq(Var("x"), "Bool")
        axioms = query_axioms(hyp + [goal])
        assert session.check_valid(axioms + hyp, goal) == VALID

    def test_unrelated_type_predicate_invalid(self, session):
        int_t = RefType(tag_eq(Var(NU), "Int"))
        goal = HasTy(Var("f"), Arrow("x", int_t, int_t))
        assert session.check_valid([], goal) == INVALID

    def test_timeout_never_reports_valid(self):
        sess = open_session(SolverConfig(timeout_ms=1))
        # a pile of unrelated disjunctions; any answer but VALID is fine
        rng = random.Random(0)
        hyp = [disj(*(eq(Var(f"v{i}{j}"), num(rng.randrange(2)))
                      for j in range(6))) for i in range(40)]
        goal = eq(Var("zz"), num(7))
        got = sess.check_valid(hyp, goal)
        assert got in (INVALID, UNKNOWN)
        sess.close()


class TestAssumptionFrames:
    def test_nested_frames_restore_verdicts(self, session):
        goal = eq(Var("x"), num(1))
        assert session.check_valid([], goal) == INVALID

        def inner():
            return session.check_valid([], goal)

        assert session.with_assumptions([eq(Var("x"), num(1))], inner) == VALID
        assert session.check_valid([], goal) == INVALID

    def test_false_assumption_makes_everything_valid(self, session):
        def inner():
            return session.check_valid([], eq(Var("q"), num(9)))

        assert session.with_assumptions([Fls()], inner) == VALID
        assert session.check_valid([], eq(Var("q"), num(9))) == INVALID

    def test_depth_returns_to_zero_after_random_frames(self, session):
        rng = random.Random(1)

        def go(depth):
            if depth == 0:
                return 0
            return session.with_assumptions(
                [eq(Var(f"d{depth}"), num(rng.randrange(3)))],
                lambda: go(depth - 1))

        for _ in range(100):
            go(rng.randint(1, 4))
            assert session.depth == 0

    def test_frame_popped_on_error(self, session):
        with pytest.raises(RuntimeError):
            session.with_assumptions([Tru()], lambda: (_ for _ in ()).throw(
                RuntimeError("boom")))
        assert session.depth == 0


class TestSoundnessHook:
    def _random_ground_formula(self, rng):
        keys = ["a", "b"]
        d = VConst(EmptyDict())
        for _ in range(rng.randrange(3)):
            d = DictExt(d, s(rng.choice(keys)), num(rng.randrange(3)))
        k = s(rng.choice(keys))
        atoms = [
            Pred("has", (d, k)),
            eq(LFun("tag", (num(rng.randrange(3)),)), s("Int")),
            eq(num(rng.randrange(3)), num(rng.randrange(3))),
            Pred("le", (num(rng.randrange(3)), num(rng.randrange(3)))),
        ]
        p = rng.choice(atoms)
        q = rng.choice(atoms)
        c = rng.randrange(3)
        if c == 0:
            return conj(p, q)
        if c == 1:
            return disj(p, neg(q))
        return disj(neg(p), q)

    def test_valid_verdicts_hold_in_ground_models(self, session):
        rng = random.Random(77)
        model = GroundModel({}, {})
        confirmed = 0
        for _ in range(300):
            p = self._random_ground_formula(rng)
            axioms = query_axioms([p])
            if session.check_valid(axioms, p) == VALID:
                for _ in range(50):
                    assert eval_ground(p, model) is not False
                confirmed += 1
        assert confirmed > 10

    def test_determinism_within_session(self, session):
        hyp = [tag_eq(Var("x"), "Int")]
        goal = disj(tag_eq(Var("x"), "Int"), tag_eq(Var("x"), "Bool"))
        axioms = query_axioms(hyp + [goal])
        first = session.check_valid(axioms + hyp, goal)
        for _ in range(5):
            assert session.check_valid(axioms + hyp, goal) == first

    def test_queries_only_use_declared_symbols(self, session):
        hyp = [tag_eq(Var("somevar"), "Int")]
        session.check_valid(hyp, Fls())
        assert "|v!somevar|" in session.declared_symbols or \
            session.depth == 0  # popped declarations are removed again
