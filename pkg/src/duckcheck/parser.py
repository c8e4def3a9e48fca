"""Surface language: lexing, parsing, desugaring, renaming, ANF conversion.

Surface programs (`.dref` files) consist of datatype definitions followed by
let-bindings and an optional final expression. Types use the notation
abbreviations Top/Int/Bool/Str/Dict/IorB/Null, arrows outside refinements,
bare type variables, and constructor applications; formulas support the
unary tag abbreviations plus Sel(x,y,z) and Fld(x,y,T).

The pipeline is parse -> desugar -> rename (program binders made unique and
distinct from the value variable; unbound primitive names resolve to
primitive constants) -> ANF-normalize into the core syntax. `let rec f`
expands to the fixpoint primitive applied at the ascribed scheme.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .errors import DuplicateCtor, ParseError, UnknownAbbreviation
from .syntax import (
    NU, PRIM_ARITY, TAG_BOOL, TAG_DICT, TAG_INT, TAG_STR,
    And, App, Arrow, BoolC, CtorApp, DatatypeDef, DefEnv, DictExt, EVal,
    EmptyDict, Expr, Fls, Formula, Forall, Fun, HasTy, If, Iff, Implies,
    IntC, LFun, Let, LogicalValue, Mono, New, Not, NullC, NullT, Or, Pred,
    Prim, RefType, Scheme, StrC, TApp, TRUE, Tru, TyFun, TyVarT,
    VConst, Value, Var, conj, disj, eq, neg, tag_eq, sel, has,
)
from .wf import builtin_list_def

# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_SYMBOLS = [
    "<=>", "=>", "::", "->", "/\\", "\\/", "!=", "<=", ">=",
    "(", ")", "{", "}", "[", "]", ",", ".", ":", "|", "=", "<", ">",
    "+", "-", "*",
]

_KEYWORDS = {
    "let", "rec", "in", "if", "then", "else", "fun", "tyfun", "new",
    "type", "forall", "true", "false", "null", "not",
}


@dataclass
class Token:
    kind: str          # ident | uident | int | string | sym | kw | eof
    text: str
    line: int
    col: int


def lex(src: str) -> list[Token]:
    toks: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("--", i):
            j = src.find("\n", i)
            i = n if j < 0 else j
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and src[j] != '"':
                if src[j] == "\\" and j + 1 < n:
                    esc = src[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    buf.append(src[j])
                    j += 1
            if j >= n:
                raise ParseError("unterminated string literal", line, col)
            toks.append(Token("string", "".join(buf), line, col))
            col += j - i + 1
            i = j + 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            word = src[i:j]
            if word in _KEYWORDS:
                toks.append(Token("kw", word, line, col))
            elif word[0].isupper():
                toks.append(Token("uident", word, line, col))
            else:
                toks.append(Token("ident", word, line, col))
            col += j - i
            i = j
            continue
        for s in _SYMBOLS:
            if src.startswith(s, i):
                toks.append(Token("sym", s, line, col))
                i += len(s)
                col += len(s)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Surface AST
# ---------------------------------------------------------------------------

@dataclass
class SVar:
    name: str
    pos: tuple[int, int]


@dataclass
class SConst:
    const: object
    pos: tuple[int, int]


@dataclass
class SFun:
    binder: str
    ann: Optional[RefType]
    body: "SExpr"
    pos: tuple[int, int]


@dataclass
class STyFun:
    tyvar: str
    body: "SExpr"
    pos: tuple[int, int]


@dataclass
class SApp:
    fn: "SExpr"
    arg: "SExpr"
    pos: tuple[int, int]


@dataclass
class STApp:
    fn: "SExpr"
    ty: RefType
    pos: tuple[int, int]


@dataclass
class SIf:
    guard: "SExpr"
    then: "SExpr"
    els: "SExpr"
    pos: tuple[int, int]


@dataclass
class SLet:
    binder: str
    ann: Optional[Scheme]
    rec: bool
    rhs: "SExpr"
    body: Optional["SExpr"]
    pos: tuple[int, int]


@dataclass
class SNew:
    ctor: str
    targs: Optional[tuple[RefType, ...]]
    args: tuple["SExpr", ...]
    pos: tuple[int, int]


@dataclass
class SDict:
    items: tuple[tuple[str, "SExpr"], ...]
    pos: tuple[int, int]


SExpr = (SVar, SConst, SFun, STyFun, SApp, STApp, SIf, SLet, SNew, SDict)


@dataclass
class SourceProgram:
    typedefs: list[DatatypeDef]
    body: object  # SExpr
    source: str = ""


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_UNARY_TAG_ABBREVS = {
    "Int": TAG_INT, "Bool": TAG_BOOL, "Str": TAG_STR, "Dict": TAG_DICT,
}


class Parser:
    def __init__(self, toks: list[Token]):
        self.toks = toks
        self.i = 0
        # occurrence marks gathered while parsing a typedef body:
        # tyvar -> list of (field_idx, path)
        self._marks: Optional[dict] = None
        self._mark_field: int = -1
        self._mark_path: tuple[int, ...] = ()

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def at(self, kind: str, text: Optional[str] = None, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == kind and (text is None or t.text == text)

    def take(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text!r}", t.line, t.col,
                             expected=(want,))
        return self.take()

    def pos(self) -> tuple[int, int]:
        t = self.peek()
        return (t.line, t.col)

    # -- programs -------------------------------------------------------------

    def parse_program(self) -> SourceProgram:
        typedefs = []
        while self.at("kw", "type"):
            typedefs.append(self.parse_typedef())
        items: list[SLet] = []
        final: Optional[object] = None
        while not self.at("eof"):
            if self.at("kw", "let"):
                save = self.i
                let = self.parse_top_let()
                if let is None:
                    self.i = save
                    final = self.parse_expr()
                    break
                items.append(let)
            else:
                final = self.parse_expr()
                break
        if not self.at("eof"):
            t = self.peek()
            raise ParseError(f"unexpected {t.text!r} after program end", t.line, t.col)
        if final is None:
            if not items:
                raise ParseError("empty program", 1, 1)
            last = items[-1]
            final = SVar(last.binder, last.pos)
        body = final
        for let in reversed(items):
            body = SLet(let.binder, let.ann, let.rec, let.rhs, body, let.pos)
        return SourceProgram(typedefs, body)

    def parse_top_let(self) -> Optional[SLet]:
        """A top-level let without `in`; returns None when the let turns out
        to be expression-style (followed by `in`)."""
        let = self.parse_let(need_in=False)
        if self.at("kw", "in"):
            return None
        return let

    # -- typedefs ---------------------------------------------------------------

    def parse_typedef(self) -> DatatypeDef:
        self.expect("kw", "type")
        name = self.expect("uident").text
        self.expect("sym", "[")
        params: list[tuple[str, str, bool]] = []
        param_starred: list[bool] = []
        while True:
            v = self.expect("sym").text
            if v not in ("+", "-", "="):
                t = self.peek()
                raise ParseError("variance annotation must be +, - or =", t.line, t.col)
            starred = False
            if self.at("sym", "*"):
                self.take()
                starred = True
            a = self.expect("uident").text
            params.append((v, a, starred))
            param_starred.append(starred)
            if self.at("sym", ","):
                self.take()
                continue
            break
        self.expect("sym", "]")
        self.expect("sym", "{")
        fields: list[tuple[str, RefType]] = []
        self._marks = {}
        idx = 0
        while True:
            f = self.expect("ident").text
            self.expect("sym", ":")
            self._mark_field = idx
            self._mark_path = ()
            t = self.parse_reftype()
            fields.append((f, t))
            idx += 1
            if self.at("sym", ","):
                self.take()
                continue
            break
        self.expect("sym", "}")
        marks = dict(self._marks)
        self._marks = None

        # a param-level star with a unique occurrence marks that occurrence
        occurrences = _tyvar_occurrences(fields)
        for (v, a, starred) in params:
            if starred and a not in marks:
                occ = occurrences.get(a, [])
                if len(occ) == 1:
                    marks[a] = occ[0]
        final_params = tuple((v, a, starred or a in marks)
                             for (v, a, starred) in params)
        return DatatypeDef(
            ctor=name,
            params=final_params,
            fields=tuple(fields),
            marks=tuple((a, j, path) for a, (j, path) in sorted(marks.items())),
        )

    # -- types --------------------------------------------------------------------

    def parse_scheme(self) -> Scheme:
        if self.at("kw", "forall"):
            self.take()
            a = self.expect("uident").text
            self.expect("sym", ".")
            return Forall(a, self.parse_scheme())
        return Mono(self.parse_reftype())

    def parse_reftype(self) -> RefType:
        """An arrow chain of base types, possibly dependent (x:T -> T)."""
        binder = None
        if self.at("ident") and self.at("sym", ":", 1):
            binder = self.take().text
            self.take()
            dom = self.parse_base_type()
            self.expect("sym", "->")
            cod = self.parse_reftype()
            return RefType(HasTy(Var(NU), Arrow(binder, dom, cod)))
        t = self.parse_base_type()
        if self.at("sym", "->"):
            self.take()
            cod = self.parse_reftype()
            return RefType(HasTy(Var(NU), Arrow("_", t, cod)))
        return t

    def parse_base_type(self) -> RefType:
        t = self.peek()
        if t.kind == "sym" and t.text == "(":
            self.take()
            inner = self.parse_reftype()
            self.expect("sym", ")")
            return inner
        if t.kind == "sym" and t.text == "{":
            self.take()
            # {v | p} in full, or the bare-formula shorthand {p}
            if self.at("ident", "v") and self.at("sym", "|", 1):
                self.take()
                self.take()
            p = self.parse_formula()
            self.expect("sym", "}")
            return RefType(p)
        if t.kind == "sym" and t.text == "*":
            return RefType(HasTy(Var(NU), self.parse_typeterm_core()))
        if t.kind == "uident":
            if self.at("sym", "[", 1):
                return RefType(HasTy(Var(NU), self.parse_typeterm_core()))
            self.take()
            abbrev = _abbrev_formula(t.text)
            if abbrev is not None:
                return RefType(abbrev)
            return RefType(HasTy(Var(NU), TyVarT(t.text)))
        raise ParseError(f"expected a type, found {t.text!r}", t.line, t.col,
                         expected=("{", "(", "type name"))

    def parse_typeterm_core(self):
        """A type term headed by an (possibly starred) upper-case name:
        a constructor application, Null, or a type variable."""
        starred = False
        if self.at("sym", "*"):
            star_tok = self.take()
            starred = True
            if self._marks is None:
                raise ParseError("occurrence marks are only allowed in type "
                                 "definitions", star_tok.line, star_tok.col)
        t = self.expect("uident")
        name = t.text
        if self.at("sym", "["):
            if starred:
                raise ParseError("only type variables can be marked", t.line, t.col)
            self.take()
            args = []
            pos_index = 0
            while True:
                saved = self._mark_path
                self._mark_path = saved + (pos_index,)
                args.append(self.parse_reftype())
                self._mark_path = saved
                pos_index += 1
                if self.at("sym", ","):
                    self.take()
                    continue
                break
            self.expect("sym", "]")
            return CtorApp(name, tuple(args))
        if name == "Null":
            return NullT()
        if _abbrev_formula(name) is not None and name != "Null":
            raise ParseError(
                f"'{name}' abbreviates a refinement type, not a type term",
                t.line, t.col)
        if starred:
            if name in self._marks:
                raise ParseError(f"'{name}' already has a marked occurrence",
                                 t.line, t.col)
            self._marks[name] = (self._mark_field, self._mark_path)
        return TyVarT(name)

    def parse_type_for_term_position(self):
        """A surface type coerced to a type term (for `lw :: U`): bare type
        variables, Null, constructor applications, and arrows qualify."""
        t = self.peek()
        if t.kind == "sym" and t.text == "*":
            return self.parse_typeterm_core()
        if t.kind == "uident" and not self.at("sym", "[", 1):
            # could still be the domain of an arrow (e.g. Int -> Int)
            save = self.i
            name = self.take().text
            if self.at("sym", "->"):
                self.take()
                dom = RefType(_abbrev_formula(name)) \
                    if _abbrev_formula(name) is not None \
                    else RefType(HasTy(Var(NU), TyVarT(name)))
                cod = self.parse_reftype()
                return Arrow("_", dom, cod)
            self.i = save
            if name == "Null":
                self.take()
                return NullT()
            if _abbrev_formula(name) is not None:
                raise ParseError(
                    f"'{name}' abbreviates a refinement type, not a type term",
                    t.line, t.col)
            self.take()
            return TyVarT(name)
        rt = self.parse_reftype()
        term = _reftype_to_term(rt)
        if term is None:
            raise ParseError("this type is not a type term", t.line, t.col)
        return term

    # -- formulas --------------------------------------------------------------------

    def parse_formula(self) -> Formula:
        p = self.parse_implies()
        while self.at("sym", "<=>"):
            self.take()
            q = self.parse_implies()
            p = Iff(p, q)
        return p

    def parse_implies(self) -> Formula:
        p = self.parse_or()
        if self.at("sym", "=>"):
            self.take()
            q = self.parse_implies()
            return Implies(p, q)
        return p

    def parse_or(self) -> Formula:
        p = self.parse_and()
        while self.at("sym", "\\/"):
            self.take()
            p = disj(p, self.parse_and())
        return p

    def parse_and(self) -> Formula:
        p = self.parse_not()
        while self.at("sym", "/\\"):
            self.take()
            p = conj(p, self.parse_not())
        return p

    def parse_not(self) -> Formula:
        if self.at("kw", "not"):
            self.take()
            return neg(self.parse_not())
        return self.parse_atom_formula()

    def parse_atom_formula(self) -> Formula:
        t = self.peek()
        if t.kind == "kw" and t.text == "true":
            self.take()
            return TRUE
        if t.kind == "kw" and t.text == "false":
            self.take()
            return Fls()
        if t.kind == "sym" and t.text == "(":
            save = self.i
            self.take()
            try:
                p = self.parse_formula()
                self.expect("sym", ")")
                return p
            except ParseError:
                self.i = save
                return self.parse_comparison()
        if t.kind == "uident":
            return self.parse_abbrev_formula()
        if t.kind == "ident" and t.text in ("has", "eqmod") \
                and self.at("sym", "(", 1):
            return self.parse_atom_formula_pred()
        return self.parse_comparison()

    def parse_abbrev_formula(self) -> Formula:
        t = self.expect("uident")
        name = t.text
        self.expect("sym", "(")
        if name in _UNARY_TAG_ABBREVS or name in ("Top", "IorB"):
            lw = self.parse_lval()
            self.expect("sym", ")")
            return _abbrev_applied(name, lw)
        if name == "Sel":
            x = self.parse_lval()
            self.expect("sym", ",")
            y = self.parse_lval()
            self.expect("sym", ",")
            z = self.parse_lval()
            self.expect("sym", ")")
            return conj(has(x, y), eq(sel(x, y), z))
        if name == "Fld":
            x = self.parse_lval()
            self.expect("sym", ",")
            y = self.parse_lval()
            self.expect("sym", ",")
            ty = self.parse_reftype()
            self.expect("sym", ")")
            from .syntax import subst_nu
            member = subst_nu(ty.p, sel(x, y))
            return conj(tag_eq(x, TAG_DICT), tag_eq(y, TAG_STR), has(x, y), member)
        raise UnknownAbbreviation(f"unknown abbreviation '{name}' at "
                                  f"{t.line}:{t.col}")

    def parse_comparison(self) -> Formula:
        lw = self.parse_lval()
        t = self.peek()
        if t.kind == "sym" and t.text in ("=", "!=", "<", "<=", ">", ">="):
            self.take()
            rhs = self.parse_lval()
            if t.text == "=":
                return eq(lw, rhs)
            if t.text == "!=":
                return neg(eq(lw, rhs))
            if t.text == "<":
                return Pred("lt", (lw, rhs))
            if t.text == "<=":
                return Pred("le", (lw, rhs))
            if t.text == ">":
                return Pred("lt", (rhs, lw))
            return Pred("le", (rhs, lw))
        if t.kind == "sym" and t.text == "::":
            self.take()
            term = self.parse_type_for_term_position()
            return HasTy(lw, term)
        raise ParseError(f"expected a comparison or '::', found {t.text!r}",
                         t.line, t.col)

    def parse_lval(self) -> LogicalValue:
        lw = self.parse_lterm()
        while self.at("sym", "+") or self.at("sym", "-"):
            op = self.take().text
            rhs = self.parse_lterm()
            lw = LFun("plus" if op == "+" else "minus", (lw, rhs))
        return lw

    def parse_lterm(self) -> LogicalValue:
        t = self.peek()
        if t.kind == "int":
            self.take()
            return VConst(IntC(int(t.text)))
        if t.kind == "string":
            self.take()
            return VConst(StrC(t.text))
        if t.kind == "kw" and t.text in ("true", "false"):
            self.take()
            return VConst(BoolC(t.text == "true"))
        if t.kind == "kw" and t.text == "null":
            self.take()
            return VConst(NullC())
        if t.kind == "sym" and t.text == "(":
            self.take()
            lw = self.parse_lval()
            self.expect("sym", ")")
            return lw
        if t.kind == "sym" and t.text == "{":
            self.take()
            self.expect("sym", "}")
            return VConst(EmptyDict())
        if t.kind == "ident":
            name = self.take().text
            if name in ("tag", "sel") and self.at("sym", "("):
                self.take()
                args = [self.parse_lval()]
                while self.at("sym", ","):
                    self.take()
                    args.append(self.parse_lval())
                self.expect("sym", ")")
                from .syntax import LOGIC_FUN_ARITY
                if len(args) != LOGIC_FUN_ARITY[name]:
                    raise ParseError(f"'{name}' expects "
                                     f"{LOGIC_FUN_ARITY[name]} arguments",
                                     t.line, t.col)
                return LFun(name, tuple(args))
            if name in ("has", "eqmod") and self.at("sym", "("):
                # peeked a predicate in term position: rewind for the caller
                raise ParseError(f"predicate '{name}' used as a term",
                                 t.line, t.col)
            return Var(name)
        raise ParseError(f"expected a logical value, found {t.text!r}",
                         t.line, t.col)

    def parse_atom_formula_pred(self) -> Formula:
        t = self.expect("ident")
        name = t.text
        self.expect("sym", "(")
        args = [self.parse_lval()]
        while self.at("sym", ","):
            self.take()
            args.append(self.parse_lval())
        self.expect("sym", ")")
        return Pred(name, tuple(args))

    # -- expressions -----------------------------------------------------------------

    def parse_expr(self):
        t = self.peek()
        if t.kind == "kw" and t.text == "let":
            return self.parse_let(need_in=True)
        if t.kind == "kw" and t.text == "if":
            self.take()
            g = self.parse_expr()
            self.expect("kw", "then")
            th = self.parse_expr()
            self.expect("kw", "else")
            el = self.parse_expr()
            return SIf(g, th, el, (t.line, t.col))
        if t.kind == "kw" and t.text == "fun":
            return self.parse_fun()
        if t.kind == "kw" and t.text == "tyfun":
            self.take()
            a = self.expect("uident").text
            self.expect("sym", "->")
            body = self.parse_expr()
            return STyFun(a, body, (t.line, t.col))
        return self.parse_comparison_expr()

    def parse_fun(self):
        t = self.expect("kw", "fun")
        params = self.parse_params()
        if not params:
            raise ParseError("fun needs at least one parameter", t.line, t.col)
        self.expect("sym", "->")
        body = self.parse_expr()
        for (name, ann, ppos) in reversed(params):
            body = SFun(name, ann, body, ppos)
        return body

    def parse_params(self) -> list[tuple[str, Optional[RefType], tuple[int, int]]]:
        params = []
        while True:
            if self.at("ident"):
                t = self.take()
                params.append((t.text, None, (t.line, t.col)))
            elif self.at("sym", "("):
                t = self.take()
                name = self.expect("ident").text
                ann = None
                if self.at("sym", "::"):
                    self.take()
                    ann = self.parse_reftype()
                self.expect("sym", ")")
                params.append((name, ann, (t.line, t.col)))
            else:
                break
        return params

    def parse_let(self, need_in: bool) -> SLet:
        t = self.expect("kw", "let")
        rec = False
        if self.at("kw", "rec"):
            self.take()
            rec = True
        name_tok = self.expect("ident")
        name = name_tok.text
        params = self.parse_params()
        ann: Optional[Scheme] = None
        ret_ty: Optional[RefType] = None
        if self.at("sym", "::"):
            self.take()
            if params:
                ret_ty = self.parse_reftype()
            else:
                ann = self.parse_scheme()
        self.expect("sym", "=")
        rhs = self.parse_expr()
        # function sugar: wrap params as lambdas; an ascription needs every
        # parameter annotated
        if params:
            for (pname, pann, ppos) in reversed(params):
                rhs = SFun(pname, pann, rhs, ppos)
            if ret_ty is not None:
                cur = ret_ty
                for (pname, pann, ppos) in reversed(params):
                    if pann is None:
                        raise ParseError(
                            f"parameter '{pname}' needs a type annotation when "
                            f"the return type is ascribed", ppos[0], ppos[1])
                    cur = RefType(HasTy(Var(NU), Arrow(pname, pann, cur)))
                ann = Mono(cur)
        if rec:
            if ann is None:
                raise ParseError("let rec requires an ascribed scheme",
                                 name_tok.line, name_tok.col)
            rhs = _desugar_rec(name, ann, rhs, (name_tok.line, name_tok.col))
        body = None
        if need_in:
            self.expect("kw", "in")
            body = self.parse_expr()
        return SLet(name, ann, rec, rhs, body, (t.line, t.col))

    def parse_comparison_expr(self):
        e = self.parse_arith_expr()
        t = self.peek()
        if t.kind == "sym" and t.text in ("=", "!=", "<", "<=", ">", ">="):
            self.take()
            rhs = self.parse_arith_expr()
            pos = (t.line, t.col)
            eq_app = SApp(SApp(SConst(Prim("="), pos), e, pos), rhs, pos)
            if t.text == "=":
                return eq_app
            if t.text == "!=":
                return SApp(SConst(Prim("not"), pos), eq_app, pos)
            raise ParseError("integer comparisons are not value operators",
                             t.line, t.col)
        return e

    def parse_arith_expr(self):
        e = self.parse_app_expr()
        while self.at("sym", "+") or self.at("sym", "-"):
            t = self.take()
            rhs = self.parse_app_expr()
            pos = (t.line, t.col)
            e = SApp(SApp(SConst(Prim(t.text), pos), e, pos), rhs, pos)
        return e

    def parse_app_expr(self):
        e = self.parse_postfix_expr()
        while self._starts_atom():
            arg = self.parse_postfix_expr()
            e = SApp(e, arg, _pos_of(arg))
        return e

    def _starts_atom(self) -> bool:
        t = self.peek()
        if t.kind in ("int", "string", "ident"):
            return True
        if t.kind == "kw" and t.text in ("true", "false", "null", "not"):
            return True
        if t.kind == "kw" and t.text == "new":
            return True
        if t.kind == "sym" and t.text in ("(", "{"):
            return True
        return False

    def parse_postfix_expr(self):
        e = self.parse_atom_expr()
        while self.at("sym", "["):
            # type application when the bracket holds a type; get-sugar
            # otherwise; a leading '(' needs a backtracking attempt
            if self._bracket_is_type():
                t = self.take()
                ty = self.parse_reftype()
                self.expect("sym", "]")
                e = STApp(e, ty, (t.line, t.col))
                continue
            if self.at("sym", "(", 1):
                save = self.i
                try:
                    t = self.take()
                    ty = self.parse_reftype()
                    self.expect("sym", "]")
                    e = STApp(e, ty, (t.line, t.col))
                    continue
                except ParseError:
                    self.i = save
            t = self.take()
            key = self.parse_expr()
            self.expect("sym", "]")
            pos = (t.line, t.col)
            e = SApp(SApp(SConst(Prim("get"), pos), e, pos), key, pos)
        return e

    def _bracket_is_type(self) -> bool:
        nxt = self.peek(1)
        if nxt.kind == "uident":
            return True
        if nxt.kind == "kw" and nxt.text == "forall":
            return True
        if nxt.kind == "sym" and nxt.text == "{":
            # `{v |` starts a refinement; `{}` or `{"k"...` start dict exprs
            t2 = self.peek(2)
            t3 = self.peek(3)
            return t2.kind == "ident" and t2.text == "v" and \
                t3.kind == "sym" and t3.text == "|"
        if nxt.kind == "ident" and self.peek(2).kind == "sym" \
                and self.peek(2).text == ":":
            return True  # dependent arrow x:T -> T
        return False

    def parse_atom_expr(self):
        t = self.peek()
        pos = (t.line, t.col)
        if t.kind == "int":
            self.take()
            return SConst(IntC(int(t.text)), pos)
        if t.kind == "string":
            self.take()
            return SConst(StrC(t.text), pos)
        if t.kind == "kw" and t.text == "true":
            self.take()
            return SConst(BoolC(True), pos)
        if t.kind == "kw" and t.text == "false":
            self.take()
            return SConst(BoolC(False), pos)
        if t.kind == "kw" and t.text == "null":
            self.take()
            return SConst(NullC(), pos)
        if t.kind == "kw" and t.text == "not":
            self.take()
            return SConst(Prim("not"), pos)
        if t.kind == "ident":
            self.take()
            return SVar(t.text, pos)
        if t.kind == "kw" and t.text == "new":
            self.take()
            ctor = self.expect("uident").text
            targs = None
            if self.at("sym", "["):
                self.take()
                ts = [self.parse_reftype()]
                while self.at("sym", ","):
                    self.take()
                    ts.append(self.parse_reftype())
                self.expect("sym", "]")
                targs = tuple(ts)
            self.expect("sym", "(")
            args = []
            if not self.at("sym", ")"):
                args.append(self.parse_expr())
                while self.at("sym", ","):
                    self.take()
                    args.append(self.parse_expr())
            self.expect("sym", ")")
            return SNew(ctor, targs, tuple(args), pos)
        if t.kind == "sym" and t.text == "(":
            self.take()
            if self.at("sym", "-") and self.peek(1).kind == "int":
                # negative integer literal
                self.take()
                n = self.take()
                self.expect("sym", ")")
                return SConst(IntC(-int(n.text)), pos)
            if self.peek().kind == "sym" and self.peek().text in ("+", "-", "=") \
                    and self.at("sym", ")", 1):
                op = self.take().text
                self.take()
                return SConst(Prim(op), pos)
            e = self.parse_expr()
            self.expect("sym", ")")
            return e
        if t.kind == "sym" and t.text == "{":
            self.take()
            if self.at("sym", "}"):
                self.take()
                return SConst(EmptyDict(), pos)
            items = []
            while True:
                k = self.expect("string").text
                self.expect("sym", ":")
                v = self.parse_expr()
                items.append((k, v))
                if self.at("sym", ","):
                    self.take()
                    continue
                break
            self.expect("sym", "}")
            return SDict(tuple(items), pos)
        raise ParseError(f"expected an expression, found {t.text!r}",
                         t.line, t.col)


def _pos_of(e) -> tuple[int, int]:
    return getattr(e, "pos", (0, 0))


def _abbrev_formula(name: str) -> Optional[Formula]:
    """The refinement formula a 0-ary abbreviation stands for (at NU)."""
    if name == "Top":
        return TRUE
    if name in _UNARY_TAG_ABBREVS:
        return tag_eq(Var(NU), _UNARY_TAG_ABBREVS[name])
    if name == "IorB":
        return disj(tag_eq(Var(NU), TAG_INT), tag_eq(Var(NU), TAG_BOOL))
    if name == "Null":
        return eq(Var(NU), VConst(NullC()))
    return None


def _abbrev_applied(name: str, lw: LogicalValue) -> Formula:
    if name == "Top":
        return TRUE
    if name in _UNARY_TAG_ABBREVS:
        return tag_eq(lw, _UNARY_TAG_ABBREVS[name])
    if name == "IorB":
        return disj(tag_eq(lw, TAG_INT), tag_eq(lw, TAG_BOOL))
    raise UnknownAbbreviation(f"unknown abbreviation '{name}'")


def _reftype_to_term(rt: RefType):
    p = rt.p
    if isinstance(p, HasTy) and p.lw == Var(NU):
        return p.term
    return None


def _tyvar_occurrences(fields) -> dict[str, list[tuple[int, tuple[int, ...]]]]:
    """All occurrence positions of each type variable in the field types,
    as (field index, ctor-argument path); occurrences inside arrows get an
    unusable marker path."""
    out: dict[str, list] = {}

    def walk_term(u, j: int, path, in_arrow: bool) -> None:
        if isinstance(u, TyVarT):
            out.setdefault(u.name, []).append((j, None if in_arrow else path))
        elif isinstance(u, CtorApp):
            for i, t in enumerate(u.args):
                walk_type(t, j, path + (i,), in_arrow)
        elif isinstance(u, Arrow):
            walk_type(u.dom, j, path, True)
            walk_type(u.cod, j, path, True)

    def walk_type(t: RefType, j: int, path, in_arrow: bool) -> None:
        walk_formula(t.p, j, path, in_arrow)

    def walk_formula(p, j, path, in_arrow) -> None:
        if isinstance(p, HasTy):
            walk_term(p.term, j, path, in_arrow)
        elif isinstance(p, (And, Or)):
            for q in p.ps:
                walk_formula(q, j, path, in_arrow)
        elif isinstance(p, Not):
            walk_formula(p.p, j, path, in_arrow)
        elif isinstance(p, (Implies, Iff)):
            walk_formula(p.p, j, path, in_arrow)
            walk_formula(p.q, j, path, in_arrow)

    for j, (_, t) in enumerate(fields):
        walk_type(t, j, (), False)
    return {a: [o for o in occ if o[1] is not None]
            for a, occ in out.items()
            if len(occ) == 1 and occ[0][1] is not None}


def _desugar_rec(name: str, ann: Scheme, rhs, pos):
    """let rec f :: S = e  ==>  tyfuns wrapping fix [T] (fun f -> e)."""
    tyvars: list[str] = []
    s = ann
    while isinstance(s, Forall):
        tyvars.append(s.tyvar)
        s = s.body
    mono_ty = s.ty
    inner = SApp(
        STApp(SConst(Prim("fix"), pos), mono_ty, pos),
        SFun(name, None, rhs, pos),
        pos,
    )
    out = inner
    for a in reversed(tyvars):
        out = STyFun(a, out, pos)
    return out


# ---------------------------------------------------------------------------
# Renaming
# ---------------------------------------------------------------------------

class _Renamer:
    """Uniquify program binders; they must also avoid the value variable.
    Surface formulas always read `v` as the value variable."""

    def __init__(self) -> None:
        self.used: set[str] = {NU}

    def fresh(self, base: str) -> str:
        if base not in self.used:
            self.used.add(base)
            return base
        k = 1
        while f"{base}#{k}" in self.used:
            k += 1
        name = f"{base}#{k}"
        self.used.add(name)
        return name

    def rename(self, e, env: dict[str, str]):
        if isinstance(e, SVar):
            if e.name in env:
                return SVar(env[e.name], e.pos)
            if e.name in PRIM_ARITY:
                return SConst(Prim(e.name), e.pos)
            return e  # left free; well-formedness reports it with position
        if isinstance(e, SConst):
            return e
        if isinstance(e, SFun):
            ann = self.rename_type(e.ann, env) if e.ann is not None else None
            new = self.fresh(e.binder)
            env2 = dict(env)
            env2[e.binder] = new
            return SFun(new, ann, self.rename(e.body, env2), e.pos)
        if isinstance(e, STyFun):
            return STyFun(e.tyvar, self.rename(e.body, env), e.pos)
        if isinstance(e, SApp):
            return SApp(self.rename(e.fn, env), self.rename(e.arg, env), e.pos)
        if isinstance(e, STApp):
            return STApp(self.rename(e.fn, env), self.rename_type(e.ty, env), e.pos)
        if isinstance(e, SIf):
            return SIf(self.rename(e.guard, env), self.rename(e.then, env),
                       self.rename(e.els, env), e.pos)
        if isinstance(e, SLet):
            ann = self.rename_scheme(e.ann, env) if e.ann is not None else None
            rhs = self.rename(e.rhs, env)
            new = self.fresh(e.binder)
            env2 = dict(env)
            env2[e.binder] = new
            body = self.rename(e.body, env2) if e.body is not None else None
            return SLet(new, ann, e.rec, rhs, body, e.pos)
        if isinstance(e, SNew):
            targs = tuple(self.rename_type(t, env) for t in e.targs) \
                if e.targs is not None else None
            return SNew(e.ctor, targs, tuple(self.rename(a, env) for a in e.args),
                        e.pos)
        if isinstance(e, SDict):
            return SDict(tuple((k, self.rename(v, env)) for (k, v) in e.items),
                        e.pos)
        raise TypeError(e)

    def rename_scheme(self, s: Scheme, env) -> Scheme:
        if isinstance(s, Forall):
            return Forall(s.tyvar, self.rename_scheme(s.body, env))
        return Mono(self.rename_type(s.ty, env))

    def rename_type(self, t: RefType, env) -> RefType:
        return RefType(self.rename_formula(t.p, env))

    def rename_formula(self, p, env):
        from .syntax import Fls as _Fls
        if isinstance(p, (Tru, _Fls)):
            return p
        if isinstance(p, Pred):
            return Pred(p.sym, tuple(self.rename_lval(a, env) for a in p.args))
        if isinstance(p, HasTy):
            return HasTy(self.rename_lval(p.lw, env), self.rename_term(p.term, env))
        if isinstance(p, And):
            return And(tuple(self.rename_formula(q, env) for q in p.ps))
        if isinstance(p, Or):
            return Or(tuple(self.rename_formula(q, env) for q in p.ps))
        if isinstance(p, Not):
            return Not(self.rename_formula(p.p, env))
        if isinstance(p, Implies):
            return Implies(self.rename_formula(p.p, env), self.rename_formula(p.q, env))
        if isinstance(p, Iff):
            return Iff(self.rename_formula(p.p, env), self.rename_formula(p.q, env))
        raise TypeError(p)

    def rename_lval(self, lw, env):
        if isinstance(lw, Var):
            if lw.name == NU:
                return lw
            return Var(env.get(lw.name, lw.name))
        if isinstance(lw, LFun):
            return LFun(lw.sym, tuple(self.rename_lval(a, env) for a in lw.args))
        if isinstance(lw, VConst):
            return lw
        return lw

    def rename_term(self, u, env):
        if isinstance(u, Arrow):
            dom = self.rename_type(u.dom, env)
            new = self.fresh(u.binder) if u.binder != "_" else self.fresh("x")
            env2 = dict(env)
            env2[u.binder] = new
            return Arrow(new, dom, self.rename_type(u.cod, env2))
        if isinstance(u, CtorApp):
            return CtorApp(u.ctor, tuple(self.rename_type(t, env) for t in u.args))
        return u


# ---------------------------------------------------------------------------
# ANF conversion
# ---------------------------------------------------------------------------

_anf_counter = itertools.count()


def _anf_fresh() -> str:
    return f"t#{next(_anf_counter)}"


def anf_normalize(e) -> Expr:
    """Convert a renamed surface expression to a core ANF expression;
    compound operands are bound by inserted lets, left to right."""
    return _anf_expr(e)


def _wrap(binds: list[tuple[str, Optional[Scheme], Expr]], core: Expr) -> Expr:
    for (name, ann, rhs) in reversed(binds):
        core = Let(name, ann, rhs, core, getattr(rhs, "pos", None))
    return core


def _to_value(e, binds: list) -> Value:
    if isinstance(e, SVar):
        return Var(e.name)
    if isinstance(e, SConst):
        return VConst(e.const)
    if isinstance(e, SFun):
        return Fun(e.binder, e.ann, _anf_expr(e.body))
    if isinstance(e, STyFun):
        return TyFun(e.tyvar, _anf_expr(e.body))
    if isinstance(e, SDict):
        cur: Value = VConst(EmptyDict())
        for (k, v) in e.items:
            cur = DictExt(cur, VConst(StrC(k)), _to_value(v, binds))
        return cur
    if isinstance(e, SNew):
        return New(e.ctor, e.targs, tuple(_to_value(a, binds) for a in e.args))
    core = _anf_expr(e)
    # hoist let-chains outward; binders are unique so scope is preserved
    while isinstance(core, Let):
        binds.append((core.binder, core.ann, core.rhs))
        core = core.body
    if isinstance(core, EVal):
        return core.value
    t = _anf_fresh()
    binds.append((t, None, core))
    return Var(t)


def _anf_expr(e) -> Expr:
    pos = _pos_of(e)
    if isinstance(e, (SVar, SConst, SFun, STyFun, SDict, SNew)):
        binds: list = []
        v = _to_value(e, binds)
        return _wrap(binds, EVal(v, pos))
    if isinstance(e, SApp):
        binds = []
        fv = _to_value(e.fn, binds)
        av = _to_value(e.arg, binds)
        return _wrap(binds, App(fv, av, pos))
    if isinstance(e, STApp):
        binds = []
        fv = _to_value(e.fn, binds)
        return _wrap(binds, TApp(fv, e.ty, pos))
    if isinstance(e, SIf):
        binds = []
        gv = _to_value(e.guard, binds)
        return _wrap(binds, If(gv, _anf_expr(e.then), _anf_expr(e.els), pos))
    if isinstance(e, SLet):
        body = e.body if e.body is not None else SVar(e.binder, e.pos)
        rhs = _anf_expr(e.rhs)
        binds = []
        while isinstance(rhs, Let):
            binds.append((rhs.binder, rhs.ann, rhs.rhs))
            rhs = rhs.body
        return _wrap(binds, Let(e.binder, e.ann, rhs, _anf_expr(body), pos))
    raise TypeError(e)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def parse(text: str) -> SourceProgram:
    return Parser(lex(text)).parse_program()


def desugar_type(p: Parser) -> Scheme:
    return p.parse_scheme()


def parse_type(text: str) -> Scheme:
    """Parse a standalone surface type into a scheme."""
    p = Parser(lex(text))
    s = p.parse_scheme()
    p.expect("eof")
    return s


def parse_formula(text: str) -> Formula:
    p = Parser(lex(text))
    f = p.parse_formula()
    p.expect("eof")
    return f


def rename_program(prog: SourceProgram):
    r = _Renamer()
    return r.rename(prog.body, {})


def load_program(text: str) -> tuple[DefEnv, Expr]:
    """Parse, validate datatype definitions (built-in List included), and
    return the definition environment plus the ANF core body."""
    from .wf import check_typedef
    prog = parse(text)
    defs: DefEnv = {}
    builtin = builtin_list_def()
    defs[builtin.ctor] = builtin
    for td in prog.typedefs:
        if td.ctor in defs:
            raise DuplicateCtor(f"duplicate definition of constructor '{td.ctor}'")
        defs[td.ctor] = td
    for td in prog.typedefs:
        check_typedef(defs, td)
    renamed = rename_program(prog)
    return defs, anf_normalize(renamed)
