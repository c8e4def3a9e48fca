"""Formula normalization, logical embedding, type-term boxing, ground
axiom instantiation, and a concrete-model formula evaluator.

Normalization turns a refinement formula into implication clauses whose
consequents are disjunctions of type predicates; embedding maps types and
environments into plain formulas; boxing names each alpha-canonical type
term with an opaque constant so the solver can treat the typing relation
as an uninterpreted predicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import CnfBlowup, InstantiationBlowup
from .syntax import (
    TAG_BOOL, TAG_DICT, TAG_FUN, TAG_INT, TAG_NULL, TAG_STR, TAG_TFUN,
    And, BoolC, DefEnv, DictExt, EmptyDict, Fls, Formula,
    Fun, HasTy, Iff, IntC, Implies, LFun, LogicalValue, Mono,
    New, Not, NullC, Or, PartialPrim, Pred, Prim, Scheme, StrC, Tru,
    TypeEnv, TypeTerm, TyFun, TyVarBind, VConst, Var, VarBind,
    alpha_canonical, conj, disj, eq, neg, subst_nu, tag_eq, Value,
    FALSE, TRUE,
)


# ---------------------------------------------------------------------------
# Clauses and normalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Clause:
    """A normalized implication q ==> (lw1::U1 \\/ ... \\/ lwn::Un).

    The antecedent contains no positive type-predicate atoms; an empty
    consequent means false.
    """
    antecedent: Formula
    consequent: tuple[tuple[LogicalValue, TypeTerm], ...]


def lower_connectives(p: Formula) -> Formula:
    """Eliminate => and <=> so only /\\, \\/, not and atoms remain."""
    if isinstance(p, Implies):
        return disj(neg(lower_connectives(p.p)), lower_connectives(p.q))
    if isinstance(p, Iff):
        a = lower_connectives(p.p)
        b = lower_connectives(p.q)
        return conj(disj(neg(a), b), disj(neg(b), a))
    if isinstance(p, And):
        return conj(*(lower_connectives(q) for q in p.ps))
    if isinstance(p, Or):
        return disj(*(lower_connectives(q) for q in p.ps))
    if isinstance(p, Not):
        return neg(lower_connectives(p.p))
    return p


def _nnf(p: Formula, positive: bool) -> Formula:
    if isinstance(p, And):
        parts = tuple(_nnf(q, positive) for q in p.ps)
        return conj(*parts) if positive else disj(*parts)
    if isinstance(p, Or):
        parts = tuple(_nnf(q, positive) for q in p.ps)
        return disj(*parts) if positive else conj(*parts)
    if isinstance(p, Not):
        return _nnf(p.p, not positive)
    if isinstance(p, Tru):
        return TRUE if positive else FALSE
    if isinstance(p, Fls):
        return FALSE if positive else TRUE
    return p if positive else Not(p)


_CNF_CAP = 4096


def _cnf(p: Formula, cap: int) -> list[tuple[Formula, ...]]:
    """CNF by naive distribution over NNF input; each clause is a tuple of
    literals (atoms or negated atoms)."""
    if isinstance(p, Tru):
        return []
    if isinstance(p, Fls):
        return [()]
    if isinstance(p, And):
        out: list[tuple[Formula, ...]] = []
        for q in p.ps:
            out.extend(_cnf(q, cap))
            if len(out) > cap:
                raise CnfBlowup(f"CNF exceeded {cap} clauses")
        return out
    if isinstance(p, Or):
        parts = [_cnf(q, cap) for q in p.ps]
        out = [()]
        for cs in parts:
            nxt: list[tuple[Formula, ...]] = []
            for acc in out:
                for c in cs:
                    nxt.append(acc + c)
            out = nxt
            if len(out) > cap:
                raise CnfBlowup(f"CNF exceeded {cap} clauses")
        return out
    return [(p,)]


def _literal_key(lit: Formula):
    if isinstance(lit, Not):
        return (1, lit.p)
    return (0, lit)


def normalize(p: Formula, cap: int = _CNF_CAP) -> list[Clause]:
    """Normalize p into clauses; their conjunction is equivalent to p.

    CNF by distribution, then per CNF clause the non-type-predicate
    literals are negated into the antecedent and the positive type
    predicates become the consequent disjunction.
    """
    lowered = _nnf(lower_connectives(p), True)
    clauses: list[Clause] = []
    for lits in _cnf(lowered, cap):
        # drop tautological clauses (contain both l and not l, or true)
        seen = set()
        skip = False
        dedup: list[Formula] = []
        for lit in lits:
            if isinstance(lit, Tru):
                skip = True
                break
            if isinstance(lit, Fls):
                continue
            k = _literal_key(lit)
            nk = (1 - k[0], k[1])
            if nk in seen:
                skip = True
                break
            if k in seen:
                continue
            seen.add(k)
            dedup.append(lit)
        if skip:
            continue
        ante: list[Formula] = []
        cons: list[tuple[LogicalValue, TypeTerm]] = []
        for lit in dedup:
            if isinstance(lit, HasTy):
                cons.append((lit.lw, lit.term))
            else:
                ante.append(neg(lit))
        clauses.append(Clause(conj(*ante), tuple(cons)))
    return clauses


def clause_formula(c: Clause) -> Formula:
    """The clause read back as a formula (antecedent implies disjunction)."""
    cons = disj(*(HasTy(lw, u) for (lw, u) in c.consequent))
    return disj(neg(c.antecedent), cons)


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------

def embed_type(s: Scheme) -> Formula:
    """The embedding of a type scheme: {v|p} embeds to p, and polymorphic
    schemes only participate through environment embedding (true)."""
    if isinstance(s, Mono):
        return s.ty.p
    return TRUE


def embed_env(g: TypeEnv) -> Formula:
    parts: list[Formula] = []
    for entry in g:
        if isinstance(entry, VarBind):
            if isinstance(entry.scheme, Mono):
                parts.append(subst_nu(entry.scheme.ty.p, Var(entry.name)))
        elif isinstance(entry, TyVarBind):
            pass
        else:
            parts.append(entry.formula)
    return conj(*parts)


# ---------------------------------------------------------------------------
# Boxing
# ---------------------------------------------------------------------------

class BoxTable:
    """Bidirectional map between alpha-canonical type terms and opaque
    box ids, stable within one checking session."""

    def __init__(self) -> None:
        self._ids: dict[TypeTerm, int] = {}
        self._terms: list[TypeTerm] = []

    def box(self, u: TypeTerm) -> int:
        c = alpha_canonical(u)
        bid = self._ids.get(c)
        if bid is None:
            bid = len(self._terms)
            self._ids[c] = bid
            self._terms.append(c)
        return bid

    def term(self, bid: int) -> TypeTerm:
        return self._terms[bid]

    def known(self) -> list[TypeTerm]:
        return list(self._terms)

    def __len__(self) -> int:
        return len(self._terms)


def box(u: TypeTerm, table: BoxTable) -> int:
    return table.box(u)


# ---------------------------------------------------------------------------
# Term collection and ground axiom instantiation
# ---------------------------------------------------------------------------

def collect_lvals(node, acc: set) -> None:
    """All logical values occurring in a formula (subterms included)."""
    if isinstance(node, (Tru, Fls)):
        return
    if isinstance(node, Pred):
        for a in node.args:
            _collect_term(a, acc)
        return
    if isinstance(node, HasTy):
        _collect_term(node.lw, acc)
        return
    if isinstance(node, (And, Or)):
        for p in node.ps:
            collect_lvals(p, acc)
        return
    if isinstance(node, Not):
        collect_lvals(node.p, acc)
        return
    if isinstance(node, (Implies, Iff)):
        collect_lvals(node.p, acc)
        collect_lvals(node.q, acc)
        return
    raise TypeError(f"collect_lvals: unexpected {node!r}")


def _collect_term(lw, acc: set) -> None:
    acc.add(lw)
    if isinstance(lw, LFun):
        for a in lw.args:
            _collect_term(a, acc)
    elif isinstance(lw, DictExt):
        _collect_term(lw.base, acc)
        _collect_term(lw.key, acc)
        _collect_term(lw.val, acc)
    elif isinstance(lw, VConst) and isinstance(lw.const, PartialPrim):
        for a in lw.const.pending:
            _collect_term(a, acc)


_TAG_OF_CONST = {
    IntC: TAG_INT, BoolC: TAG_BOOL, StrC: TAG_STR,
    NullC: TAG_NULL, EmptyDict: TAG_DICT,
}

_INSTANCE_CAP = 10 ** 5


def instantiate_axioms(terms: set, strings: set[str],
                       eqmod_occurrences: tuple = (),
                       const_type=None, cap: int = _INSTANCE_CAP) -> list[Formula]:
    """Quantifier-free ground instances justified by the dictionary theory,
    the tag table, string distinctness, boolean exhaustiveness, and the
    primitive constants' declared types, over the terms of one query.

    The eqmod congruence pair is instantiated for the argument triples of
    eqmod atoms occurring in the query (plus the triples introduced here for
    dictionary-extension terms) against every key term in view; instantiating
    over all term triples would be cubic for no benefit.
    """
    out: list[Formula] = []

    strs = set(strings)
    ext_terms = [t for t in terms if isinstance(t, DictExt)]
    key_terms: set = {VConst(StrC(s)) for s in strs}
    for t in terms:
        if isinstance(t, LFun) and t.sym == "sel":
            key_terms.add(t.args[1])
        elif isinstance(t, VConst) and isinstance(t.const, StrC):
            key_terms.add(t)
    eqmod_triples: list[tuple] = list(eqmod_occurrences)

    empty = VConst(EmptyDict())
    # not has(empty, k)
    for k in sorted(key_terms, key=repr):
        out.append(Not(Pred("has", (empty, k))))
    # update/select/eqmod facts per dictionary-extension term, plus
    # reflexivity of agreement-off-a-key for the dictionary terms in view
    # (general eqmod goals between distinct concrete dictionaries stay
    # unprovable; the checker only consumes eqmod hypotheses)
    dictish = [t for t in terms if isinstance(t, DictExt)] + [empty]
    for d in sorted(dictish, key=repr):
        for k in sorted(key_terms, key=repr):
            out.append(Pred("eqmod", (d, d, k)))
    for t in ext_terms:
        out.append(Pred("has", (t, t.key)))
        out.append(eq(LFun("sel", (t, t.key)), t.val))
        out.append(Pred("eqmod", (t, t.base, t.key)))
        eqmod_triples.append((t, t.base, t.key))

    # congruence of eqmod at differing keys
    for (d1, d2, k) in eqmod_triples:
        for y in sorted(key_terms, key=repr):
            if y == k:
                continue
            ante = conj(Pred("eqmod", (d1, d2, k)), Not(eq(k, y)))
            out.append(Implies(ante, Iff(Pred("has", (d1, y)), Pred("has", (d2, y)))))
            out.append(Implies(ante, eq(LFun("sel", (d1, y)), LFun("sel", (d2, y)))))
            if len(out) > cap:
                raise InstantiationBlowup(f"axiom instantiation exceeded {cap} instances")

    # tag table for literal constants and opaque function/record values;
    # the tag names themselves join the string-constant set
    for t in sorted(terms, key=repr):
        if isinstance(t, VConst):
            c = t.const
            tagname = _TAG_OF_CONST.get(type(c))
            if tagname is None and isinstance(c, (Prim, PartialPrim)):
                tagname = TAG_FUN
            if tagname is not None:
                out.append(tag_eq(t, tagname))
                strs.add(tagname)
            if isinstance(c, StrC):
                strs.add(c.value)
        elif isinstance(t, DictExt) or isinstance(t, New):
            out.append(tag_eq(t, TAG_DICT))
            strs.add(TAG_DICT)
        elif isinstance(t, Fun):
            out.append(tag_eq(t, TAG_FUN))
            strs.add(TAG_FUN)
        elif isinstance(t, TyFun):
            out.append(tag_eq(t, TAG_TFUN))
            strs.add(TAG_TFUN)

    # every string constant in view is string-tagged (covers strings the
    # facts above introduce, e.g. reasoning about tags of tag results)
    for sv in sorted(strs):
        out.append(tag_eq(VConst(StrC(sv)), TAG_STR))

    # pairwise distinctness of string constants (tag names included, since
    # tag facts mention them)
    allstrs = sorted(strs)
    for i in range(len(allstrs)):
        for j in range(i + 1, len(allstrs)):
            out.append(Not(eq(VConst(StrC(allstrs[i])), VConst(StrC(allstrs[j])))))
            if len(out) > cap:
                raise InstantiationBlowup(f"axiom instantiation exceeded {cap} instances")

    # boolean values are exhaustive: tag(t)="Bool" forces t in {true,false}
    tv = VConst(BoolC(True))
    fv = VConst(BoolC(False))
    out.append(Not(eq(tv, fv)))
    for t in sorted(terms, key=repr):
        if isinstance(t, (Var, LFun)):
            out.append(Implies(tag_eq(t, TAG_BOOL), disj(eq(t, tv), eq(t, fv))))

    # declared types of primitive constants occurring in the query
    if const_type is not None:
        for t in sorted(terms, key=repr):
            if isinstance(t, VConst) and isinstance(t.const, Prim):
                s = const_type(t.const)
                if isinstance(s, Mono):
                    out.append(subst_nu(s.ty.p, t))

    if len(out) > cap:
        raise InstantiationBlowup(f"axiom instantiation exceeded {cap} instances")
    return out


def collect_type_terms(node, acc: list) -> None:
    """Top-level type terms of the type predicates in a formula."""
    if isinstance(node, HasTy):
        acc.append(node.term)
        return
    if isinstance(node, (And, Or)):
        for p in node.ps:
            collect_type_terms(p, acc)
    elif isinstance(node, Not):
        collect_type_terms(node.p, acc)
    elif isinstance(node, (Implies, Iff)):
        collect_type_terms(node.p, acc)
        collect_type_terms(node.q, acc)


def collect_eqmod_triples(node, acc: list) -> None:
    if isinstance(node, Pred):
        if node.sym == "eqmod":
            acc.append(node.args)
        return
    if isinstance(node, (And, Or)):
        for p in node.ps:
            collect_eqmod_triples(p, acc)
    elif isinstance(node, Not):
        collect_eqmod_triples(node.p, acc)
    elif isinstance(node, (Implies, Iff)):
        collect_eqmod_triples(node.p, acc)
        collect_eqmod_triples(node.q, acc)


def query_axioms(formulas: list[Formula], const_type=None) -> list[Formula]:
    """Axiom instances for the ground terms of the given formulas, plus the
    null-membership facts for the constructed types it mentions (the type
    predicate holds of null at every constructed type and at Null itself)."""
    from .syntax import CtorApp, NullT
    terms: set = set()
    strings: set[str] = set()
    triples: list = []
    ttms: list = []
    for f in formulas:
        collect_lvals(f, terms)
        collect_eqmod_triples(f, triples)
        collect_type_terms(f, ttms)
    for t in terms:
        if isinstance(t, VConst) and isinstance(t.const, StrC):
            strings.add(t.const.value)
    seen = set()
    uniq = []
    for tr in triples:
        if tr not in seen:
            seen.add(tr)
            uniq.append(tr)
    out = instantiate_axioms(terms, strings, eqmod_occurrences=tuple(uniq),
                             const_type=const_type)
    null_v = VConst(NullC())
    seen_u = set()
    for u in ttms:
        if isinstance(u, (CtorApp, NullT)):
            key = alpha_canonical(u)
            if key not in seen_u:
                seen_u.add(key)
                out.append(HasTy(null_v, u))
    return out


# ---------------------------------------------------------------------------
# Ground-model evaluation (test oracle)
# ---------------------------------------------------------------------------

STUCK = "stuck"


@dataclass
class GroundModel:
    """A total assignment of concrete values to the free variables of a
    formula, with datatype definitions for constructed values."""
    assignment: dict[str, Value]
    defs: DefEnv = field(default_factory=dict)


def _ground(lw, m: GroundModel):
    """Evaluate a logical value to a concrete Value, or STUCK."""
    if isinstance(lw, Var):
        if lw.name not in m.assignment:
            return STUCK
        return m.assignment[lw.name]
    if isinstance(lw, VConst):
        return lw
    if isinstance(lw, (DictExt,)):
        b = _ground(lw.base, m)
        k = _ground(lw.key, m)
        v = _ground(lw.val, m)
        if STUCK in (b, k, v):
            return STUCK
        return DictExt(b, k, v)
    if isinstance(lw, (Fun, TyFun, New)):
        return lw
    if isinstance(lw, LFun):
        args = [_ground(a, m) for a in lw.args]
        if any(a is STUCK for a in args):
            return STUCK
        return _apply_logic_fun(lw.sym, args, m)
    return STUCK


def value_tag(w: Value) -> str | None:
    if isinstance(w, VConst):
        c = w.const
        t = _TAG_OF_CONST.get(type(c))
        if t is not None:
            return t
        if isinstance(c, (Prim, PartialPrim)):
            return TAG_FUN
        return None
    if isinstance(w, (DictExt, New)):
        return TAG_DICT
    if isinstance(w, Fun):
        return TAG_FUN
    if isinstance(w, TyFun):
        return TAG_TFUN
    return None


def dict_entries(w: Value, defs: DefEnv) -> dict[str, Value] | None:
    """The key->value view of a dictionary-like value, outermost binding
    winning; None when w is not dictionary-like."""
    if isinstance(w, VConst) and isinstance(w.const, EmptyDict):
        return {}
    if isinstance(w, DictExt):
        base = dict_entries(w.base, defs)
        if base is None:
            return None
        if not (isinstance(w.key, VConst) and isinstance(w.key.const, StrC)):
            return None
        base = dict(base)
        base[w.key.const.value] = w.val
        return base
    if isinstance(w, New):
        d = defs.get(w.ctor)
        if d is None:
            return None
        return {f: a for ((f, _), a) in zip(d.fields, w.args)}
    return None


def values_equal(a: Value, b: Value, defs: DefEnv) -> bool:
    """Structural equality; dictionaries compare extensionally, lambdas
    by alpha-equivalent structure."""
    ta, tb = value_tag(a), value_tag(b)
    if ta == TAG_DICT and tb == TAG_DICT:
        ea = dict_entries(a, defs)
        eb = dict_entries(b, defs)
        if ea is None or eb is None:
            return alpha_canonical(a) == alpha_canonical(b)
        if set(ea) != set(eb):
            return False
        return all(values_equal(ea[k], eb[k], defs) for k in ea)
    if isinstance(a, (Fun, TyFun)) or isinstance(b, (Fun, TyFun)):
        return alpha_canonical(a) == alpha_canonical(b)
    return a == b


def _apply_logic_fun(sym: str, args: list, m: GroundModel):
    if sym == "tag":
        t = value_tag(args[0])
        return VConst(StrC(t)) if t is not None else STUCK
    if sym == "sel":
        entries = dict_entries(args[0], m.defs)
        if entries is None:
            return STUCK
        k = args[1]
        if not (isinstance(k, VConst) and isinstance(k.const, StrC)):
            return STUCK
        return entries.get(k.const.value, STUCK)
    if sym in ("plus", "minus"):
        a, b = args
        if not (isinstance(a, VConst) and isinstance(a.const, IntC)
                and isinstance(b, VConst) and isinstance(b.const, IntC)):
            return STUCK
        n = a.const.value + b.const.value if sym == "plus" else a.const.value - b.const.value
        return VConst(IntC(n))
    return STUCK


def eval_ground(p: Formula, m: GroundModel):
    """Truth value of a ground, type-predicate-free formula under m:
    True, False, or STUCK when an operator is applied off-domain."""
    if isinstance(p, Tru):
        return True
    if isinstance(p, Fls):
        return False
    if isinstance(p, Pred):
        args = [_ground(a, m) for a in p.args]
        if any(a is STUCK for a in args):
            return STUCK
        if p.sym == "eq":
            return values_equal(args[0], args[1], m.defs)
        if p.sym == "has":
            entries = dict_entries(args[0], m.defs)
            if entries is None:
                return STUCK
            k = args[1]
            if not (isinstance(k, VConst) and isinstance(k.const, StrC)):
                return False
            return k.const.value in entries
        if p.sym == "eqmod":
            e1 = dict_entries(args[0], m.defs)
            e2 = dict_entries(args[1], m.defs)
            k = args[2]
            if e1 is None or e2 is None:
                return STUCK
            if not (isinstance(k, VConst) and isinstance(k.const, StrC)):
                return STUCK
            kk = k.const.value
            keys = (set(e1) | set(e2)) - {kk}
            for y in keys:
                if (y in e1) != (y in e2):
                    return False
                if y in e1 and not values_equal(e1[y], e2[y], m.defs):
                    return False
            return True
        if p.sym in ("lt", "le"):
            a, b = args
            if not (isinstance(a, VConst) and isinstance(a.const, IntC)
                    and isinstance(b, VConst) and isinstance(b.const, IntC)):
                return STUCK
            return a.const.value < b.const.value if p.sym == "lt" \
                else a.const.value <= b.const.value
        return STUCK
    if isinstance(p, HasTy):
        return STUCK
    if isinstance(p, And):
        got = [eval_ground(q, m) for q in p.ps]
        if False in got:
            return False
        if STUCK in got:
            return STUCK
        return True
    if isinstance(p, Or):
        got = [eval_ground(q, m) for q in p.ps]
        if True in got:
            return True
        if STUCK in got:
            return STUCK
        return False
    if isinstance(p, Not):
        v = eval_ground(p.p, m)
        return STUCK if v is STUCK else (not v)
    if isinstance(p, Implies):
        return eval_ground(disj(neg(p.p), p.q), m)
    if isinstance(p, Iff):
        a = eval_ground(p.p, m)
        b = eval_ground(p.q, m)
        if STUCK in (a, b):
            return STUCK
        return a == b
    raise TypeError(f"eval_ground: unexpected {p!r}")
