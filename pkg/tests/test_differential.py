"""Differential check of the solver pipeline against concrete semantics.

For closed formulas built from concrete dictionary values, integers, and
strings, the ground evaluator decides the truth value outright. A formula
that evaluates true has a model, so its negation must not be judged valid;
a formula that evaluates false likewise refutes its own validity. Any
violation would mean the solver plus axiom instantiation accepts refuted
facts, which would silently unsound the checker.
"""

import random

import pytest

from duckcheck.logic import GroundModel, STUCK, eval_ground, query_axioms
from duckcheck.smt import VALID, SolverConfig, open_session
from duckcheck.syntax import (
    And, BoolC, DictExt, EmptyDict, IntC, LFun, Not, Or, Pred, StrC, VConst,
    conj, disj, eq, neg,
)

KEYS = ["a", "b", "c"]


def s(x):
    return VConst(StrC(x))


def num(n):
    return VConst(IntC(n))


def rand_dict(rng):
    d = VConst(EmptyDict())
    for _ in range(rng.randrange(4)):
        d = DictExt(d, s(rng.choice(KEYS)), num(rng.randrange(4)))
    return d


def rand_term(rng, depth):
    c = rng.randrange(6)
    if depth == 0 or c <= 1:
        return rng.choice([num(rng.randrange(4)), s(rng.choice(KEYS)),
                           VConst(BoolC(rng.random() < 0.5)), rand_dict(rng)])
    if c == 2:
        return LFun("tag", (rand_term(rng, depth - 1),))
    if c == 3:
        return LFun("sel", (rand_dict(rng), s(rng.choice(KEYS))))
    if c == 4:
        return LFun("plus", (num(rng.randrange(4)), num(rng.randrange(4))))
    return LFun("minus", (num(rng.randrange(4)), num(rng.randrange(4))))


def rand_atom(rng):
    c = rng.randrange(4)
    if c == 0:
        return eq(rand_term(rng, 2), rand_term(rng, 2))
    if c == 1:
        return Pred("has", (rand_dict(rng), s(rng.choice(KEYS))))
    if c == 2:
        return Pred("le", (num(rng.randrange(5)), num(rng.randrange(5))))
    return Pred("eqmod", (rand_dict(rng), rand_dict(rng), s(rng.choice(KEYS))))


def rand_formula(rng, depth):
    if depth == 0 or rng.random() < 0.4:
        return rand_atom(rng)
    c = rng.randrange(3)
    if c == 0:
        return conj(rand_formula(rng, depth - 1), rand_formula(rng, depth - 1))
    if c == 1:
        return disj(rand_formula(rng, depth - 1), rand_formula(rng, depth - 1))
    return neg(rand_formula(rng, depth - 1))


def test_solver_agrees_with_concrete_semantics():
    rng = random.Random(4242)
    model = GroundModel({}, {})
    sess = open_session(SolverConfig())
    checked = 0
    try:
        for _ in range(400):
            p = rand_formula(rng, 2)
            truth = eval_ground(p, model)
            if truth is STUCK:
                continue
            axioms = query_axioms([p])
            if truth is True:
                # p has a model, so "not p" must not be valid
                assert sess.check_valid(axioms, neg(p)) != VALID, p
            else:
                assert sess.check_valid(axioms, p) != VALID, p
            checked += 1
    finally:
        sess.close()
    assert checked >= 250


def test_true_ground_facts_are_provable():
    """Completeness spot check over the covered atom classes: presence,
    selection, tags, equality, and order on concrete values. General eqmod
    goals between distinct dictionary literals are deliberately outside the
    instantiation and stay unproved."""
    rng = random.Random(77)
    model = GroundModel({}, {})
    sess = open_session(SolverConfig())
    proved = 0
    tried = 0
    try:
        for _ in range(300):
            p = rand_atom(rng)
            if isinstance(p, Pred) and p.sym == "eqmod" and p.args[0] != p.args[1]:
                continue
            if eval_ground(p, model) is not True:
                continue
            tried += 1
            axioms = query_axioms([p])
            if sess.check_valid(axioms, p) == VALID:
                proved += 1
        assert tried >= 60
        assert proved == tried, (proved, tried)
    finally:
        sess.close()
