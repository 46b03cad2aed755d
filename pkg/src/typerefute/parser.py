"""Lexer and recursive-descent parser for the OCaml-like surface syntax.

Operator precedence follows OCaml, lowest first: ``or``/``xor``, ``and``,
comparisons and ``~``, ``::``, ``+``/``-``, ``*``, prefix ``not``/``-``,
application, projection.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    App, Assert, Assume, BinOp, Bool, Cons, DeclInfo, ErrorExpr, Expr, Fun, If, Int,
    LetTyped, ListLit, Match, Not, PAny, PBool, PCons, PFun, PInt, PNil, PRecord,
    PVariant, PatTest, Proj, Record, TArrow, TBool, TDep, TExpr, TForall, TInt,
    TIntersect, TList, TMu, TPoly, TRecord, TRefine, TVariant, TypeExpr, TypeLit, Var,
    Variant, type_free_vars,
)


class ParseError(Exception):
    def __init__(self, message: str, pos: int = -1, source: str = ""):
        self.pos = pos
        if pos >= 0 and source:
            line = source.count("\n", 0, pos) + 1
            col = pos - (source.rfind("\n", 0, pos) + 1) + 1
            message = f"{message} at line {line}, column {col}"
        super().__init__(message)


class RejectedConstruct(ParseError):
    """Source used a form reserved for instrumentation."""


KEYWORDS = {
    "let", "rec", "in", "fun", "if", "then", "else", "match", "with", "true", "false",
    "and", "or", "xor", "not", "assert", "assume", "ERROR", "int", "bool", "list",
    "Mu", "forall", "type", "of", "any",
}
RESERVED = {"pick_i", "pick_b", "mzero", "retag", "untouchable"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\(\*)
  | (?P<int>\d+)
  | (?P<poly>'[a-z_][A-Za-z0-9_']*)
  | (?P<ident>[a-z_][A-Za-z0-9_']*)
  | (?P<ctor>[A-Z][A-Za-z0-9_']*)
  | (?P<sym>->|::|==|!=|<=|>=|=~|\|\||&&|[-+*<>=(){}\[\];:|.~,])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # int, ident, ctor, poly, kw, sym, eof
    text: str
    pos: int
    end: int


def tokenize(src: str) -> list:
    toks = []
    i = 0
    n = len(src)
    while i < n:
        m = _TOKEN_RE.match(src, i)
        if not m:
            raise ParseError(f"unexpected character {src[i]!r}", i, src)
        kind = m.lastgroup
        if kind == "comment":
            depth, j = 1, m.end()
            while depth and j < n:
                if src.startswith("(*", j):
                    depth, j = depth + 1, j + 2
                elif src.startswith("*)", j):
                    depth, j = depth - 1, j + 2
                else:
                    j += 1
            if depth:
                raise ParseError("unterminated comment", i, src)
            i = j
            continue
        if kind != "ws":
            text = m.group()
            if kind == "ident" and text in RESERVED:
                raise RejectedConstruct(f"{text} is reserved for instrumentation", i, src)
            if kind == "sym" and text == "=~":
                raise RejectedConstruct("=~ is reserved for instrumentation", i, src)
            if kind in ("ident", "ctor") and text in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, text, i, m.end()))
        i = m.end()
    toks.append(Token("eof", "", n, n))
    return toks


def parse(source: str) -> Expr:
    """Parse a surface program.  Untyped ``let`` becomes an application."""
    return Parser(source).parse_program()


def parse_type(source: str) -> TypeExpr:
    p = Parser(source)
    t = p.type_()
    p.expect_eof()
    return t


# The call-by-value fixpoint combinator, used for ``let rec``.
def z_combinator() -> Expr:
    inner = Fun("zx", App(Var("zf"), Fun("zv", App(App(Var("zx"), Var("zx")), Var("zv")))))
    return Fun("zf", App(inner, inner))


_ATOM_START_KINDS = {"int", "ident", "poly"}
_ATOM_START_KW = {"true", "false", "ERROR", "int", "bool"}
_ATOM_START_SYM = {"(", "{", "["}


class Parser:
    def __init__(self, source: str):
        self.src = source
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers --
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("kw", "sym") and t.text == text

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.next()

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident":
            self.fail("expected identifier")
        self.i += 1
        return t.text

    def fail(self, msg: str):
        t = self.peek()
        found = t.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", t.pos, self.src)

    def expect_eof(self):
        if self.peek().kind != "eof":
            self.fail("expected end of input")

    def parse_program(self) -> Expr:
        e = self.expr()
        self.expect_eof()
        return e

    # -- expressions --
    def expr(self) -> Expr:
        if self.at("let"):
            return self.let_()
        if self.at("fun"):
            self.next()
            params = []
            while not self.at("->"):
                params.append(self.ident())
            if not params:
                self.fail("expected parameter")
            self.expect("->")
            body = self.expr()
            for p in reversed(params):
                body = Fun(p, body)
            return body
        if self.at("if"):
            self.next()
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return If(c, a, b)
        if self.at("match"):
            return self.match_()
        if self.type_starts():
            return TypeLit(self.type_())
        e = self.or_()
        if isinstance(e, TypeLit) and (self.at("->") or self.at("&&")):
            return TypeLit(self.type_rest(e.type))
        return e

    def type_starts(self) -> bool:
        t = self.peek()
        if t.kind == "poly":
            return True
        if t.kind == "kw" and t.text in ("int", "bool", "list", "Mu", "forall"):
            return True
        if t.kind == "ctor" and self.at("of", 1):
            return True
        if self.at("{"):
            return self.brace_kind() != "record"
        return False

    def brace_kind(self) -> str:
        nxt, after = self.peek(1), self.peek(2)
        if nxt.kind == "sym" and nxt.text == "}":
            return "record"
        if nxt.kind == "ident" and after.kind == "sym" and after.text == "=":
            return "record"
        if nxt.kind == "ident" and after.kind == "sym" and after.text == ":":
            return "rtype"
        return "refine"

    def let_(self) -> Expr:
        start = self.expect("let")
        rec = False
        if self.at("rec"):
            self.next()
            rec = True
        if self.at("("):
            # let [rec] (x : t) = e in body
            self.next()
            name = self.ident()
            self.expect(":")
            ty = self.type_()
            self.expect(")")
            header_end = self.expect("=").pos
            rhs_start = self.peek().pos
            rhs = self.expr()
            rhs_end = self.peek().pos
            self.expect("in")
            body_start = self.peek().pos
            body = self.expr()
            info = self._info(start.pos, header_end, rhs_start, rhs_end, body_start)
            return LetTyped(name, ty, rhs, body, rec, info)
        name = self.ident()
        params = []  # (name, type-or-None, is_type_param)
        while not (self.at("=") or self.at(":")):
            if self.at("(") and self.at("type", 1):
                self.next()
                self.next()
                names = []
                while not self.at(")"):
                    names.append(self.ident())
                if not names:
                    self.fail("expected type parameter")
                self.expect(")")
                params.extend((n, None, True) for n in names)
            elif self.at("(") and self.peek(1).kind == "ident" and self.at(":", 2):
                self.next()
                pname = self.ident()
                self.expect(":")
                pty = self.type_()
                self.expect(")")
                params.append((pname, pty, False))
            else:
                params.append((self.ident(), None, False))
        ret = None
        if self.at(":"):
            self.next()
            ret = self.type_()
        header_end = self.expect("=").pos
        rhs_start = self.peek().pos
        rhs = self.expr()
        rhs_end = self.peek().pos
        self.expect("in")
        body_start = self.peek().pos
        body = self.expr()
        for pname, _, _ in reversed(params):
            rhs = Fun(pname, rhs)
        typed = ret is not None or any(t is not None or tp for _, t, tp in params)
        if not typed:
            if rec:
                rhs = App(z_combinator(), Fun(name, rhs))
            return App(Fun(name, body), rhs)
        if ret is None or any(t is None and not tp for _, t, tp in params):
            self.fail("an annotated declaration needs every parameter and the result typed")
        ty = _decl_type(params, ret)
        info = self._info(start.pos, header_end, rhs_start, rhs_end, body_start)
        return LetTyped(name, ty, rhs, body, rec, info)

    def _info(self, start, header_end, rhs_start, rhs_end, body_start) -> DeclInfo:
        body_end = self.peek().pos if self.peek().kind != "eof" else len(self.src)
        squash = lambda s: " ".join(s.split())  # noqa: E731
        return DeclInfo(
            header=squash(self.src[start:header_end]),
            rhs=squash(self.src[rhs_start:rhs_end]),
            body=squash(self.src[body_start:body_end]),
        )

    def match_(self) -> Expr:
        self.expect("match")
        scrut = self.expr()
        self.expect("with")
        if self.at("|"):
            self.next()
        arms = [self.arm()]
        while self.at("|"):
            self.next()
            arms.append(self.arm())
        return Match(scrut, tuple(arms))

    def arm(self):
        p = self.pattern()
        self.expect("->")
        return (p, self.expr())

    def pattern(self):
        t = self.peek()
        if self.at("("):
            self.next()
            p = self.pattern()
            self.expect(")")
            return p
        if t.kind == "kw" and t.text in ("int", "bool", "fun", "any"):
            self.next()
            return {"int": PInt(), "bool": PBool(), "fun": PFun(), "any": PAny()}[t.text]
        if t.kind == "ident":
            if t.text == "_" and not self.at("::", 1):
                self.next()
                return PAny()
            hd = self.ident()
            self.expect("::")
            return PCons(hd, self.ident())
        if self.at("["):
            self.next()
            self.expect("]")
            return PNil()
        if t.kind == "ctor":
            self.next()
            return PVariant(t.text, self.ident())
        if self.at("{"):
            self.next()
            labels = []
            while not self.at("}"):
                labels.append(self.ident())
                if not self.at("}"):
                    self.expect(";")
            self.expect("}")
            if len(set(labels)) != len(labels):
                raise ParseError("duplicate label in record pattern", t.pos, self.src)
            return PRecord(tuple(labels))
        self.fail("expected pattern")

    def or_(self) -> Expr:
        e = self.and_()
        while self.at("or") or self.at("xor"):
            op = self.next().text
            e = BinOp(op, e, self.and_())
        return e

    def and_(self) -> Expr:
        e = self.cmp()
        while self.at("and"):
            self.next()
            e = BinOp("and", e, self.cmp())
        return e

    def cmp(self) -> Expr:
        e = self.cons()
        while True:
            t = self.peek()
            if t.kind == "sym" and t.text in ("<", "<=", ">", ">=", "==", "!="):
                self.next()
                e = BinOp(t.text, e, self.cons())
            elif t.kind == "sym" and t.text == "~":
                self.next()
                e = PatTest(e, self.pattern())
            else:
                return e

    def cons(self) -> Expr:
        e = self.add()
        if self.at("::"):
            self.next()
            return Cons(e, self.cons())
        return e

    def add(self) -> Expr:
        e = self.mul()
        while self.at("+") or self.at("-"):
            op = self.next().text
            e = BinOp(op, e, self.mul())
        return e

    def mul(self) -> Expr:
        e = self.unary()
        while self.at("*"):
            self.next()
            e = BinOp("*", e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("not"):
            self.next()
            return Not(self.unary())
        if self.at("-"):
            self.next()
            operand = self.unary()
            if isinstance(operand, Int):
                return Int(-operand.value)
            return BinOp("-", Int(0), operand)
        return self.app()

    def app(self) -> Expr:
        t = self.peek()
        if t.kind == "ctor":
            self.next()
            return Variant(t.text, self.postfix())
        if self.at("assert") or self.at("assume"):
            kw = self.next().text
            arg = self.postfix()
            return Assert(arg) if kw == "assert" else Assume(arg)
        e = self.postfix()
        while self.atom_starts():
            e = App(e, self.postfix())
        return e

    def atom_starts(self) -> bool:
        t = self.peek()
        if t.kind in _ATOM_START_KINDS:
            return True
        if t.kind == "kw" and t.text in _ATOM_START_KW:
            return True
        return t.kind == "sym" and t.text in _ATOM_START_SYM

    def postfix(self) -> Expr:
        e = self.atom()
        while self.at(".") and self.peek(1).kind == "ident":
            self.next()
            e = Proj(e, self.ident())
        return e

    def atom(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Int(int(t.text))
        if t.kind == "ident":
            self.next()
            return Var(t.text)
        if t.kind == "poly":
            self.next()
            return TypeLit(TPoly(t.text[1:]))
        if t.kind == "kw":
            if t.text in ("true", "false"):
                self.next()
                return Bool(t.text == "true")
            if t.text == "ERROR":
                self.next()
                return ErrorExpr()
            if t.text in ("int", "bool"):
                self.next()
                return TypeLit(TInt() if t.text == "int" else TBool())
        if self.at("("):
            self.next()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("["):
            self.next()
            items = []
            while not self.at("]"):
                items.append(self.expr())
                if not self.at("]"):
                    self.expect(";")
            self.expect("]")
            return ListLit(tuple(items))
        if self.at("{"):
            kind = self.brace_kind()
            if kind != "record":
                return TypeLit(self.type_atom())
            self.next()
            fields = []
            while not self.at("}"):
                lt = self.peek()
                lab = self.ident()
                self.expect("=")
                fields.append((lab, self.expr()))
                if any(l == lab for l, _ in fields[:-1]):
                    raise ParseError(f"duplicate label {lab}", lt.pos, self.src)
                if not self.at("}"):
                    self.expect(";")
            self.expect("}")
            return Record(tuple(fields))
        self.fail("expected expression")

    # -- types --
    def type_(self) -> TypeExpr:
        t = self.type_arrow()
        return self.type_rest_inter(t)

    def type_rest(self, left: TypeExpr) -> TypeExpr:
        if self.at("->"):
            self.next()
            left = TArrow(left, self.type_arrow())
        return self.type_rest_inter(left)

    def type_rest_inter(self, t: TypeExpr) -> TypeExpr:
        if not self.at("&&"):
            return t
        clauses = [t]
        while self.at("&&"):
            self.next()
            clauses.append(self.type_arrow())
        return TIntersect(tuple(clauses))

    def type_arrow(self) -> TypeExpr:
        t = self.peek()
        if self.at("forall"):
            self.next()
            binders = []
            while not self.at("."):
                tok = self.next()
                if tok.kind == "ident":
                    binders.append(tok.text)
                else:
                    raise ParseError("expected type variable", tok.pos, self.src)
            if not binders:
                self.fail("expected type variable")
            self.expect(".")
            return TForall(tuple(binders), self.type_arrow())
        if self.at("Mu"):
            self.next()
            var = self.ident()
            self.expect(".")
            return TMu(var, self.type_arrow())
        if t.kind == "ctor":
            return self.variant_type()
        if self.at("(") and self.peek(1).kind == "ident" and self.at(":", 2):
            self.next()
            var = self.ident()
            self.expect(":")
            dom = self.type_()
            self.expect(")")
            self.expect("->")
            return TDep(var, dom, self.type_arrow())
        left = self.type_app()
        if self.at("->"):
            self.next()
            return TArrow(left, self.type_arrow())
        return left

    def variant_type(self) -> TypeExpr:
        clauses = []
        while True:
            tok = self.peek()
            if tok.kind != "ctor":
                self.fail("expected constructor")
            self.next()
            if self.at("of"):
                self.next()
            clauses.append((tok.text, self.type_app()))
            if any(c == tok.text for c, _ in clauses[:-1]):
                raise ParseError(f"duplicate constructor {tok.text}", tok.pos, self.src)
            if not self.at("||"):
                return TVariant(tuple(clauses))
            self.next()

    def type_app(self) -> TypeExpr:
        if self.at("list"):
            self.next()
            return TList(self.type_atom())
        if self.peek().kind == "ident" and self.type_arg_starts(1):
            head: Expr = Var(self.ident())
            while self.type_arg_starts(0):
                head = App(head, self.type_arg())
            return TExpr(head)
        return self.type_atom()

    def type_arg_starts(self, k: int) -> bool:
        t = self.peek(k)
        if t.kind in ("ident", "int", "poly"):
            return True
        if t.kind == "kw" and t.text in ("int", "bool", "true", "false"):
            return True
        return t.kind == "sym" and t.text in ("(", "{")

    def type_arg(self) -> Expr:
        t = self.peek()
        if t.kind == "int":
            self.next()
            return Int(int(t.text))
        if t.kind == "kw" and t.text in ("true", "false"):
            self.next()
            return Bool(t.text == "true")
        ty = self.type_atom()
        return ty.expr if isinstance(ty, TExpr) else TypeLit(ty)

    def type_atom(self) -> TypeExpr:
        t = self.peek()
        if t.kind == "kw" and t.text in ("int", "bool"):
            self.next()
            return TInt() if t.text == "int" else TBool()
        if t.kind == "poly":
            self.next()
            return TPoly(t.text[1:])
        if t.kind == "ident":
            self.next()
            return TExpr(Var(t.text))
        if self.at("("):
            self.next()
            ty = self.type_()
            self.expect(")")
            return ty
        if self.at("{"):
            kind = self.brace_kind()
            self.next()
            if kind == "rtype":
                fields = []
                while not self.at("}"):
                    lt = self.peek()
                    lab = self.ident()
                    self.expect(":")
                    fields.append((lab, self.type_()))
                    if any(l == lab for l, _ in fields[:-1]):
                        raise ParseError(f"duplicate label {lab}", lt.pos, self.src)
                    if not self.at("}"):
                        self.expect(";")
                self.expect("}")
                return TRecord(tuple(fields))
            if kind == "record":
                self.expect("}")
                return TRecord(())
            base = self.type_()
            self.expect("|")
            pred = self.expr()
            self.expect("}")
            return TRefine(base, pred)
        self.fail("expected type")


def _decl_type(params, ret: TypeExpr) -> TypeExpr:
    ty = ret
    i = len(params) - 1
    while i >= 0:
        name, pty, is_tparam = params[i]
        if is_tparam:
            binders = [name]
            while i - 1 >= 0 and params[i - 1][2]:
                i -= 1
                binders.insert(0, params[i][0])
            ty = TForall(tuple(binders), ty)
        elif name in type_free_vars(ty):
            ty = TDep(name, pty, ty)
        else:
            ty = TArrow(pty, ty)
        i -= 1
    return ty
