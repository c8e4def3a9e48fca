"""Algorithmic subtyping: clause implication backed by solver validity,
type-term extraction, syntactic subtyping over extracted terms, and the
used-set guard that makes the mutual recursion terminate.

A refinement subtyping goal splits into normalized clauses; each clause is
first tried wholesale as a validity query and otherwise discharged by
finding an environment type term that provably flows to one consequent
disjunct and is a syntactic subtype of it. Extraction consumes each
environment term at most once along a derivation branch.
"""

from __future__ import annotations

from .errors import TypeError_
from .logic import Clause, embed_env, normalize
from .state import CheckerState
from .syntax import (
    NU, Arrow, CtorApp, Forall, Formula, Guard, HasTy, Mono,
    NullT, RefType, Scheme, TOP, TypeEnv, TypeTerm, TyVarT, VarBind, Var,
    alpha_canonical, conj, disj, eq, fresh_name, pp_formula, pp_typeterm,
    subst_nu, subst_value,
)

UsedSet = frozenset


def _formula_terms(p: Formula, acc: list) -> None:
    from .syntax import And, Fls, Iff, Implies, Not, Or, Pred, Tru
    if isinstance(p, HasTy):
        acc.append(p.term)
        return
    if isinstance(p, (Tru, Fls, Pred)):
        return
    if isinstance(p, (And, Or)):
        for q in p.ps:
            _formula_terms(q, acc)
        return
    if isinstance(p, Not):
        _formula_terms(p.p, acc)
        return
    if isinstance(p, (Implies, Iff)):
        _formula_terms(p.p, acc)
        _formula_terms(p.q, acc)
        return
    raise TypeError(f"unexpected formula {p!r}")


def type_terms(g: TypeEnv) -> list[TypeTerm]:
    """The top-level type terms occurring in the environment's monotype
    bindings and guard formulas; terms nested inside a collected term are
    not collected. Order of first occurrence, deduplicated up to alpha."""
    out: list[TypeTerm] = []
    seen: set = set()
    found: list[TypeTerm] = []
    for entry in g:
        if isinstance(entry, VarBind) and isinstance(entry.scheme, Mono):
            _formula_terms(entry.scheme.ty.p, found)
        elif isinstance(entry, Guard):
            _formula_terms(entry.formula, found)
    for u in found:
        key = alpha_canonical(u)
        if key not in seen:
            seen.add(key)
            out.append(u)
    return out


def must_flow(state: CheckerState, g: TypeEnv, t: RefType,
              used: UsedSet, only_ctors: bool = False) -> list[TypeTerm]:
    """The environment type terms (outside the used set) that the solver
    proves every value of t must have; one batched solver frame per call.
    only_ctors restricts the candidates to constructor applications (the
    eager-unfold caller discards everything else anyway)."""
    if state.use_guard:
        cands = [u for u in type_terms(g) if alpha_canonical(u) not in used]
    else:
        cands = list(type_terms(g))
    if only_ctors:
        cands = [u for u in cands if isinstance(u, CtorApp)]
    if not cands:
        return []
    key = (g, t, frozenset(used) if state.use_guard else None, only_ctors)
    hit = state.flow_memo.get(key)
    if hit is not None:
        return list(hit)
    # candidate order follows box allocation order
    cands.sort(key=lambda u: state.boxes.box(u))
    x = fresh_name("mf")
    hyp = conj(embed_env(g), subst_nu(t.p, Var(x)))
    from .checker import const_type
    from .logic import query_axioms
    goals = [HasTy(Var(x), u) for u in cands]
    axioms = query_axioms([hyp] + goals, const_type=const_type)

    def body() -> list[TypeTerm]:
        flowed = []
        for u, goal in zip(cands, goals):
            if state.session.check_valid([], goal) == "valid":
                flowed.append(u)
        return flowed

    got = state.session.with_assumptions(axioms + [hyp], body)
    state.flow_memo[key] = tuple(got)
    return got


def clause_goal(c: Clause) -> Formula:
    return disj(*(HasTy(lw, u) for (lw, u) in c.consequent))


def imp(state: CheckerState, g: TypeEnv, c: Clause, used: UsedSet) -> None:
    """Discharge one normalized clause: wholesale validity first, then
    extraction plus syntactic subtyping on some consequent disjunct."""
    state.tick()
    goal = clause_goal(c)
    if state.valid([embed_env(g), c.antecedent], goal):
        return
    tried: list[str] = []
    last_err: TypeError_ | None = None
    for (lw_j, u_j) in c.consequent:
        flows = must_flow(state, g, RefType(eq(Var(NU), lw_j)), used)
        new_used = used | {alpha_canonical(u) for u in flows}
        for u in flows:
            tried.append(pp_typeterm(u))
            try:
                syn_sub(state, g.guard(c.antecedent), u, u_j, new_used)
                return
            except TypeError_ as e:
                last_err = e
    raise TypeError_(
        "CA-ImpSyn",
        "no environment type term both flows to the goal and is a syntactic "
        "subtype of it" + (f" (last failure: {last_err.message})" if last_err else ""),
        clause=pp_formula(disj(Formula_neg(c.antecedent), goal))
        if c.consequent else pp_formula(c.antecedent),
        candidates=tried,
    )


def Formula_neg(p: Formula) -> Formula:
    from .syntax import neg
    return neg(p)


def sub(state: CheckerState, g: TypeEnv, s1: Scheme, s2: Scheme,
        used: UsedSet) -> None:
    """Subtyping on schemes: monotypes reduce to clause implications under
    the left refinement as a guard; quantifiers align structurally."""
    state.tick()
    if isinstance(s1, Forall) and isinstance(s2, Forall):
        if s1.tyvar == s2.tyvar:
            body2 = s2.body
        else:
            body2 = _rename_tyvar(s2.body, s2.tyvar, s1.tyvar)
        sub(state, g.bind_tyvar(s1.tyvar), s1.body, body2, used)
        return
    if isinstance(s1, Mono) and isinstance(s2, Mono):
        x = fresh_name("s")
        p1x = subst_nu(s1.ty.p, Var(x))
        p2x = subst_nu(s2.ty.p, Var(x))
        g2 = g.bind(x, Mono(TOP)).guard(p1x)
        for c in normalize(p2x):
            imp(state, g2, c, used)
        return
    raise TypeError_("SA-Poly", "quantifier structure mismatch between "
                     f"schemes: {type(s1).__name__} vs {type(s2).__name__}")


def _rename_tyvar(node, old: str, new: str):
    from .defdata import inst
    from .syntax import RefType as RT
    return inst(node, old, RT(HasTy(Var(NU), TyVarT(new))))


def syn_sub(state: CheckerState, g: TypeEnv, u1: TypeTerm, u2: TypeTerm,
            used: UsedSet) -> None:
    """Syntactic subtyping over type terms: arrows contra/co-variantly with
    the codomain under the extended environment, identical type variables,
    null below every constructed type, and constructed types per declared
    parameter variance."""
    state.tick()
    if isinstance(u1, Arrow) and isinstance(u2, Arrow):
        sub(state, g, Mono(u2.dom), Mono(u1.dom), used)
        x = fresh_name(u2.binder)
        cod1 = subst_value(Mono(u1.cod), u1.binder, Var(x)) \
            if u1.binder != x else Mono(u1.cod)
        cod2 = subst_value(Mono(u2.cod), u2.binder, Var(x)) \
            if u2.binder != x else Mono(u2.cod)
        g2 = extend(state, g, x, Mono(u2.dom))
        sub(state, g2, cod1, cod2, used)
        return
    if isinstance(u1, TyVarT) and isinstance(u2, TyVarT):
        if u1.name == u2.name:
            return
        raise TypeError_("UA-Var", f"type variables differ: "
                         f"{u1.name} vs {u2.name}")
    if isinstance(u1, NullT) and isinstance(u2, CtorApp):
        return
    if isinstance(u1, CtorApp) and isinstance(u2, CtorApp):
        if u1.ctor != u2.ctor:
            raise TypeError_("UA-Datatype",
                             f"constructors differ: {u1.ctor} vs {u2.ctor}")
        d = state.defs.get(u1.ctor)
        if d is None or len(u1.args) != len(d.params) \
                or len(u2.args) != len(d.params):
            raise TypeError_("UA-Datatype", f"arity mismatch on '{u1.ctor}'")
        for i, (variance, _, _) in enumerate(d.params):
            if variance in ("+", "="):
                sub(state, g, Mono(u1.args[i]), Mono(u2.args[i]), used)
            if variance in ("-", "="):
                sub(state, g, Mono(u2.args[i]), Mono(u1.args[i]), used)
        return
    raise TypeError_(
        "UA-Shape",
        f"type terms have incompatible shapes: {pp_typeterm(u1)} vs "
        f"{pp_typeterm(u2)}")


def extend(state: CheckerState, g: TypeEnv, x: str, s: Scheme) -> TypeEnv:
    """Environment extension that eagerly unfolds the definitions of any
    constructed types provably held by the new monotype binding (plain
    extension for polytypes). Field-presence facts ride along under the
    same non-null guard."""
    from .defdata import unfold_formula, unfold_has_fields
    g2 = g.bind(x, s)
    if isinstance(s, Forall):
        return g2
    flows = must_flow(state, g2, RefType(eq(Var(NU), Var(x))), frozenset(),
                      only_ctors=True)
    guards: list[Formula] = []
    for u in flows:
        if isinstance(u, CtorApp) and u.ctor in state.defs \
                and len(u.args) == len(state.defs[u.ctor].params):
            unfolded = conj(unfold_formula(state.defs, u.ctor, u.args),
                            unfold_has_fields(state.defs, u.ctor))
            guards.append(subst_nu(unfolded, Var(x)))
    if guards:
        return g2.guard(conj(*guards))
    return g2
