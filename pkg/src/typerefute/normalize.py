"""Preparation and A-normalization of core programs.

``prepare`` gives every node a unique clause label and every binder a unique
name (existing labels are kept so feeds stay valid across both forms).
``normalize`` additionally binds every compound subexpression to a named
clause and compiles ``match`` into nested conditionals over pattern tests.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import replace

from .syntax import (
    App, Assert, Assume, BinOp, Bool, Cons, Destruct, ErrorExpr, Expr, Fun, If, Int, Let,
    LetTyped, ListLit, Match, MZero, Not, PCons, PVariant, PatTest, PickB, PickI, PolyEq,
    Proj, Record, Retag, TypeLit, Untouch, Var, Variant, children, walk,
)

_HINT_RE = re.compile(r"[^A-Za-z0-9_]")

_HINTS = {
    Int: "int", Bool: "bool", Var: "var", Fun: "fun", App: "app", BinOp: "op", Not: "not",
    If: "if", Match: "match", PatTest: "test", Let: "let", Record: "rec", Proj: "proj",
    ListLit: "list", Cons: "cons", Variant: "ctor", PickI: "pick_i", PickB: "pick_b",
    ErrorExpr: "error", MZero: "mzero", Retag: "retag", PolyEq: "polyeq",
    Untouch: "untouch", Destruct: "destruct", Assert: "assert", Assume: "assume",
}


class _Fresh:
    def __init__(self, used: set):
        self.used = used
        self.counter = itertools.count(1)

    def label(self, hint: str) -> str:
        hint = _HINT_RE.sub("", hint) or "c"
        while True:
            lab = f"{hint}${next(self.counter)}"
            if lab not in self.used:
                self.used.add(lab)
                return lab


def _existing_labels(e: Expr) -> set:
    return {n.label for n in walk(e) if n.label is not None}


def prepare(e: Expr) -> Expr:
    """Label every node and rename binders apart.  Idempotent on labels."""
    fresh = _Fresh(_existing_labels(e))
    return _Renamer(fresh).go(e, {})


class _Renamer:
    def __init__(self, fresh: _Fresh):
        self.fresh = fresh
        self.names = itertools.count(1)

    def bind(self, name: str, env: dict) -> tuple:
        if name == "_":
            return name, env
        base = name.split("$", 1)[0] or "v"
        new = f"{base}${next(self.names)}"
        env = dict(env)
        env[name] = new
        return new, env

    def lab(self, e: Expr) -> str:
        return e.label if e.label is not None else self.fresh.label(_HINTS.get(type(e), "c"))

    def go(self, e: Expr, env: dict) -> Expr:
        # Iterative over Let chains, which can be very long after instrumentation.
        chain = []
        while type(e) is Let:
            rhs = self.go(e.rhs, env)
            name, env = self.bind(e.name, env)
            chain.append((name, rhs, self.lab(e)))
            e = e.body
        out = self._go(e, env)
        for name, rhs, lab in reversed(chain):
            out = Let(name, rhs, out, label=lab)
        return out

    def _go(self, e: Expr, env: dict) -> Expr:
        t = type(e)
        lab = self.lab(e)
        if t is Var:
            return Var(env.get(e.name, e.name), label=lab)
        if t is Fun:
            name, env2 = self.bind(e.param, env)
            return Fun(name, self.go(e.body, env2), label=lab)
        if t is Match:
            scrut = self.go(e.scrutinee, env)
            arms = []
            for pat, body in e.arms:
                env2 = env
                if isinstance(pat, PCons):
                    hd, env2 = self.bind(pat.head, env2)
                    tl, env2 = self.bind(pat.tail, env2)
                    pat = PCons(hd, tl)
                elif isinstance(pat, PVariant):
                    v, env2 = self.bind(pat.var, env2)
                    pat = PVariant(pat.ctor, v)
                arms.append((pat, self.go(body, env2)))
            return Match(scrut, tuple(arms), label=lab)
        if t is LetTyped or t is TypeLit:
            raise ValueError("typed declarations must be instrumented before evaluation")
        if t in (Int, Bool, ErrorExpr, PickI, PickB, MZero, Untouch):
            return replace(e, label=lab)
        if t is App:
            return App(self.go(e.fn, env), self.go(e.arg, env), label=lab)
        if t is BinOp:
            return BinOp(e.op, self.go(e.left, env), self.go(e.right, env), label=lab)
        if t is If:
            return If(self.go(e.cond, env), self.go(e.then, env), self.go(e.orelse, env), label=lab)
        if t is Record:
            return Record(tuple((k, self.go(v, env)) for k, v in e.fields), label=lab)
        if t is ListLit:
            return ListLit(tuple(self.go(x, env) for x in e.items), label=lab)
        if t is Cons:
            return Cons(self.go(e.head, env), self.go(e.tail, env), label=lab)
        if t is Variant:
            return Variant(e.ctor, self.go(e.payload, env), label=lab)
        if t is Not:
            return Not(self.go(e.operand, env), label=lab)
        if t in (Proj, PatTest, Retag, PolyEq, Destruct, Assert, Assume):
            return replace(e, expr=self.go(e.expr, env), label=lab)
        raise TypeError(f"unknown node {t.__name__}")


# -- A-normal form ---------------------------------------------------------------


def _atomic(e: Expr) -> bool:
    return type(e) in (Int, Bool, Var)


def normalize(program: Expr) -> Expr:
    """Bind every compound subexpression to a uniquely named clause."""
    e = prepare(program)
    fresh = _Fresh(_existing_labels(e))
    out = _Anf(fresh).block(e)
    # Label the nodes introduced above (fresh variables, compiled matches).
    return _relabel(out, fresh)


class _Anf:
    def __init__(self, fresh: _Fresh):
        self.fresh = fresh
        self.names = itertools.count(1)

    def tmp(self, hint: str) -> str:
        return f"{_HINT_RE.sub('', hint) or 'c'}%{next(self.names)}"

    def block(self, e: Expr) -> Expr:
        return self.name(e, lambda a: a)

    def name(self, e: Expr, k) -> Expr:
        def bind(c: Expr) -> Expr:
            if _atomic(c):
                return k(c)
            hint = (c.label or "c").split("$", 1)[0]
            n = self.tmp(hint)
            return Let(n, c, k(Var(n)))

        return self.norm(e, bind)

    def names_of(self, es, k, acc=()):
        if not es:
            return k(acc)
        return self.name(es[0], lambda a: self.names_of(es[1:], k, acc + (a,)))

    def norm(self, e: Expr, k) -> Expr:
        t = type(e)
        lab = e.label
        if t in (Int, Bool, Var, ErrorExpr, PickI, PickB, MZero, Untouch):
            return k(e)
        if t is Let:
            # Flatten chains iteratively to keep recursion shallow.
            chain = []
            while type(e) is Let:
                chain.append(e)
                e = e.body
            inner = self.norm(e, k)
            for let in reversed(chain):
                body = inner
                inner = self.norm(let.rhs, lambda c, let=let, body=body: Let(let.name, c, body, label=let.label))
            return inner
        if t is Fun:
            return k(Fun(e.param, self.block(e.body), label=lab))
        if t is App:
            return self.names_of((e.fn, e.arg), lambda a: k(App(a[0], a[1], label=lab)))
        if t is BinOp:
            return self.names_of((e.left, e.right), lambda a: k(BinOp(e.op, a[0], a[1], label=lab)))
        if t is If:
            return self.name(e.cond, lambda c: k(If(c, self.block(e.then), self.block(e.orelse), label=lab)))
        if t is Match:
            return self.name(e.scrutinee, lambda s: self.norm(self.compile_match(s, e.arms, lab), k))
        if t is Record:
            labels = tuple(l for l, _ in e.fields)
            return self.names_of(tuple(v for _, v in e.fields),
                                 lambda a: k(Record(tuple(zip(labels, a)), label=lab)))
        if t is ListLit:
            return self.names_of(e.items, lambda a: k(ListLit(a, label=lab)))
        if t is Cons:
            return self.names_of((e.head, e.tail), lambda a: k(Cons(a[0], a[1], label=lab)))
        if t is Variant:
            return self.name(e.payload, lambda a: k(Variant(e.ctor, a, label=lab)))
        if t is Not:
            return self.name(e.operand, lambda a: k(Not(a, label=lab)))
        if t in (Proj, PatTest, Retag, PolyEq, Destruct):
            return self.name(e.expr, lambda a: k(replace(e, expr=a)))
        if t is Assert:
            return self.norm(If(e.expr, Bool(True), ErrorExpr(label=lab)), k)
        if t is Assume:
            return self.norm(If(e.expr, Bool(True), MZero(label=lab)), k)
        raise TypeError(f"cannot normalize {t.__name__}")

    def compile_match(self, s: Var, arms, lab) -> Expr:
        # each use of the scrutinee is its own (unlabelled) node so clause labels stay unique
        def sv() -> Var:
            return Var(s.name)

        out: Expr = ErrorExpr(label=self.fresh.label("nomatch"))
        for pat, body in reversed(arms):
            if isinstance(pat, PCons):
                if pat.tail != "_":
                    body = Let(pat.tail, Destruct(sv(), "tail"), body)
                if pat.head != "_":
                    body = Let(pat.head, Destruct(sv(), "head"), body)
            elif isinstance(pat, PVariant) and pat.var != "_":
                body = Let(pat.var, Destruct(sv(), "payload"), body)
            out = If(PatTest(sv(), pat), body, out)
        return out


def _relabel(e: Expr, fresh: _Fresh) -> Expr:
    r = _Renamer(fresh)
    return _Labeler(r).go(e)


class _Labeler:
    def __init__(self, r: _Renamer):
        self.r = r

    def go(self, e: Expr) -> Expr:
        chain = []
        while type(e) is Let:
            chain.append((e.name, self.go(e.rhs), self.r.lab(e)))
            e = e.body
        out = self._go(e)
        for name, rhs, lab in reversed(chain):
            out = Let(name, rhs, out, label=lab)
        return out

    def _go(self, e: Expr) -> Expr:
        lab = self.r.lab(e)
        kids = children(e)
        if not kids:
            return e if e.label == lab else replace(e, label=lab)
        t = type(e)
        if t is Fun:
            return Fun(e.param, self.go(e.body), label=lab)
        if t is App:
            return App(self.go(e.fn), self.go(e.arg), label=lab)
        if t is BinOp:
            return BinOp(e.op, self.go(e.left), self.go(e.right), label=lab)
        if t is If:
            return If(self.go(e.cond), self.go(e.then), self.go(e.orelse), label=lab)
        if t is Record:
            return Record(tuple((k, self.go(v)) for k, v in e.fields), label=lab)
        if t is ListLit:
            return ListLit(tuple(self.go(x) for x in e.items), label=lab)
        if t is Cons:
            return Cons(self.go(e.head), self.go(e.tail), label=lab)
        if t is Variant:
            return Variant(e.ctor, self.go(e.payload), label=lab)
        if t is Not:
            return Not(self.go(e.operand), label=lab)
        if t in (Proj, PatTest, Retag, PolyEq, Destruct):
            return replace(e, expr=self.go(e.expr), label=lab)
        raise TypeError(f"cannot label {t.__name__}")
