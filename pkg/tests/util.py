"""Shared helpers for the test suite: ANF checking, random generators,
and truth-table evaluation of formulas over opaque atoms."""

from __future__ import annotations

import itertools
import random

from duckcheck.logic import Clause
from duckcheck.syntax import (
    NU, And, App, Arrow, BoolC, CtorApp, EVal, Fls, Formula, HasTy, If, Iff,
    Implies, IntC, LFun, Let, Mono, Not, Or, Pred, RefType, TApp, Tru,
    TyVarT, VConst, Var, eq, tag_eq,
)


def is_anf(e) -> bool:
    """Application, guard, and instantiation operands are syntactic values."""
    if isinstance(e, EVal):
        return True
    if isinstance(e, (App, TApp, If)):
        ok = True
        if isinstance(e, If):
            ok = is_anf(e.then) and is_anf(e.els)
        return ok
    if isinstance(e, Let):
        return is_anf(e.rhs) and is_anf(e.body)
    return False


# --- opaque-atom formulas and truth tables ---------------------------------

def atom(i: int) -> Formula:
    """An opaque non-type-predicate atom."""
    return eq(Var(f"a{i}"), VConst(BoolC(True)))


def hatom(i: int) -> Formula:
    """An opaque type-predicate atom."""
    return HasTy(Var(f"h{i}"), TyVarT(f"H{i}"))


def random_formula(rng: random.Random, depth: int, n_atoms: int,
                   with_hastype: bool = True) -> Formula:
    if depth == 0:
        r = rng.random()
        if with_hastype and r < 0.3:
            return hatom(rng.randrange(n_atoms))
        if r < 0.4:
            return Tru()
        if r < 0.5:
            return Fls()
        return atom(rng.randrange(n_atoms))
    c = rng.randrange(5)
    sub = lambda: random_formula(rng, depth - 1, n_atoms, with_hastype)
    if c == 0:
        return And(tuple(sub() for _ in range(rng.randint(1, 3))))
    if c == 1:
        return Or(tuple(sub() for _ in range(rng.randint(1, 3))))
    if c == 2:
        return Not(sub())
    if c == 3:
        return Implies(sub(), sub())
    return Iff(sub(), sub())


def formula_atoms(p: Formula) -> set:
    out = set()

    def walk(q):
        if isinstance(q, (Pred, HasTy)):
            out.add(q)
        elif isinstance(q, (And, Or)):
            for r in q.ps:
                walk(r)
        elif isinstance(q, Not):
            walk(q.p)
        elif isinstance(q, (Implies, Iff)):
            walk(q.p)
            walk(q.q)
    walk(p)
    return out


def eval_opaque(p: Formula, model: dict) -> bool:
    """Truth-table evaluation treating every atom as an opaque boolean."""
    if isinstance(p, Tru):
        return True
    if isinstance(p, Fls):
        return False
    if isinstance(p, (Pred, HasTy)):
        return model[p]
    if isinstance(p, And):
        return all(eval_opaque(q, model) for q in p.ps)
    if isinstance(p, Or):
        return any(eval_opaque(q, model) for q in p.ps)
    if isinstance(p, Not):
        return not eval_opaque(p.p, model)
    if isinstance(p, Implies):
        return (not eval_opaque(p.p, model)) or eval_opaque(p.q, model)
    if isinstance(p, Iff):
        return eval_opaque(p.p, model) == eval_opaque(p.q, model)
    raise TypeError(p)


def eval_clauses(clauses: list[Clause], model: dict) -> bool:
    for c in clauses:
        ante = eval_opaque(c.antecedent, model)
        cons = any(model[HasTy(lw, u)] for (lw, u) in c.consequent)
        if ante and not cons:
            return False
    return True


def clauses_equivalent(p: Formula, clauses: list[Clause]) -> bool:
    """Exhaustive truth-table equivalence of p and its clause set."""
    atoms = sorted(formula_atoms(p), key=repr)
    for c in clauses:
        atoms.extend(a for a in formula_atoms(c.antecedent) if a not in atoms)
        for (lw, u) in c.consequent:
            if HasTy(lw, u) not in atoms:
                atoms.append(HasTy(lw, u))
    atoms = list(dict.fromkeys(atoms))
    assert len(atoms) <= 16, "too many atoms for exhaustive check"
    for bits in itertools.product([False, True], repeat=len(atoms)):
        model = dict(zip(atoms, bits))
        if eval_opaque(p, model) != eval_clauses(clauses, model):
            return False
    return True


# --- random well-formed schemes for reflexivity ----------------------------

INT_T = RefType(tag_eq(Var(NU), "Int"))
BOOL_T = RefType(tag_eq(Var(NU), "Bool"))


def random_scheme(rng: random.Random, depth: int, scope: list[str],
                  tyvars: list[str]):
    from duckcheck.syntax import Forall
    if rng.random() < 0.2 and depth > 0:
        a = f"T{rng.randrange(2)}"
        return Forall(a, random_scheme(rng, depth - 1, scope, tyvars + [a]))
    return Mono(random_reftype(rng, depth, scope, tyvars))


def random_reftype(rng: random.Random, depth: int, scope: list[str],
                   tyvars: list[str]) -> RefType:
    c = rng.randrange(6)
    if depth == 0 or c == 0:
        return INT_T
    if c == 1:
        return RefType(eq(Var(NU), VConst(IntC(rng.randrange(3)))))
    if c == 2 and tyvars:
        return RefType(HasTy(Var(NU), TyVarT(rng.choice(tyvars))))
    if c == 3:
        x = f"rx{rng.randrange(100)}"
        return RefType(HasTy(Var(NU), Arrow(
            x, random_reftype(rng, depth - 1, scope, tyvars),
            random_reftype(rng, depth - 1, scope + [x], tyvars))))
    if c == 4:
        return RefType(HasTy(Var(NU), CtorApp(
            "List", (random_reftype(rng, depth - 1, scope, tyvars),))))
    parts = [tag_eq(Var(NU), rng.choice(["Int", "Bool", "Str"]))]
    if scope and rng.random() < 0.5:
        parts.append(eq(Var(NU), Var(rng.choice(scope))))
    return RefType(And(tuple(parts)) if len(parts) > 1 else parts[0])
