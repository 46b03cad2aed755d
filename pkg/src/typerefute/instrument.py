"""Compile declared types into executable generator/checker/wrapper code.

``embed`` turns a type into an expression evaluating to a record
``{gen; check; wrap}``.  ``instrument_program`` rewrites a parsed program so
that every typed declaration is checked (reaching ERROR when the check
fails), every use goes through the wrapper, and primitive operations are
guarded.  A type error is then exactly a run that reaches ERROR.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

from .parser import z_combinator
from .syntax import (
    PAny, PBool, PCons, PFun, PInt, PNil, PRecord, PVariant,
    App, Assert, Assume, BinOp, Bool, Cons, DeclInfo, ErrorExpr, Expr, Fun, If, Int, Let,
    LetTyped, ListLit, Match, MZero, Not, PatTest, PickB, PickI, PolyEq, Proj, Record,
    Retag, TArrow, TBool, TDep, TExpr, TForall, TInt, TIntersect, TList, TMu, TPoly, TRecord,
    TRefine, TVariant, TypeExpr, TypeLit, Untouch, Var, Variant, poly_vars, render_type,
)


class IllFormedType(Exception):
    """A type outside the supported forms (e.g. an unrestricted intersection)."""


@dataclass
class PolyTags:
    """Registry of untouchable tags; one fresh tag per quantified variable."""

    used: set = field(default_factory=set)

    def fresh(self, name: str) -> str:
        tag, n = name, 1
        while tag in self.used:
            n += 1
            tag = f"{name}{n}"
        self.used.add(tag)
        return tag


@dataclass
class InstrumentConfig:
    wrap_enabled: bool = True
    guard_primitives: bool = True
    poly_tags: PolyTags = field(default_factory=PolyTags)


@dataclass(frozen=True)
class SiteInfo:
    """What an ERROR (or failing clause) site means, for reports.

    kind: decl | gen_arg | wrap_arg | intersect | guard | assert | nomatch | runtime
    """

    kind: str
    decl: Optional[str] = None
    info: Optional[DeclInfo] = None
    expected: Optional[str] = None
    node: Optional[Expr] = None


@dataclass
class Instrumented:
    program: Expr
    sites: dict  # error label -> SiteInfo
    checks: dict  # check-lambda label -> TypeExpr
    decls: dict  # declaration-check lambda label -> SiteInfo
    config: InstrumentConfig

    @property
    def watch(self) -> set:
        return set(self.checks) | set(self.decls)


# -- small constructors --------------------------------------------------------


def _app(f: Expr, *args: Expr) -> Expr:
    for a in args:
        f = App(f, a)
    return f


def _call(emb: Expr, part: str, *args: Expr) -> Expr:
    return _app(Proj(emb, part), *args)


def _gen(emb: Expr) -> Expr:
    return _call(emb, "gen", Int(0))


def _lets(binds, body: Expr) -> Expr:
    for name, rhs in reversed(binds):
        body = Let(name, rhs, body)
    return body


def _z(fn: Expr) -> Expr:
    return App(z_combinator(), fn)


E, A, V, G = Var("e$"), Var("a$"), Var("v$"), Var("g$")

_EXPECTED = {op: "int" for op in ("+", "-", "*", "<", "<=", ">", ">=")}
_EXPECTED.update({"==": "int or bool", "!=": "int or bool", "and": "bool", "or": "bool", "xor": "bool"})


class _Instrumenter:
    def __init__(self, cfg: InstrumentConfig):
        self.cfg = cfg
        self.counter = itertools.count(1)
        self.sites: dict = {}
        self.checks: dict = {}
        self.decls: dict = {}
        self.decl_ctx: list = []  # (name, info) of the declaration being embedded

    # -- labels and sites --
    def label(self, hint: str) -> str:
        return f"{hint}${next(self.counter)}"

    def error(self, kind: str, expected: Optional[TypeExpr] = None, node: Optional[Expr] = None,
              hint: str = "err") -> ErrorExpr:
        lab = self.label(hint)
        decl, info = self.decl_ctx[-1] if self.decl_ctx else (None, None)
        exp = render_type(expected) if expected is not None else None
        self.sites[lab] = SiteInfo(kind, decl, info, exp, node)
        return ErrorExpr(label=lab)

    def record(self, t: TypeExpr, gen: Expr, check_param: str, check_body: Expr, wrap: Expr) -> Expr:
        lab = self.label("check")
        self.checks[lab] = t
        check = Fun(check_param, check_body, label=lab)
        return Record((("gen", gen), ("check", check), ("wrap", wrap)))

    # -- types --
    def embed(self, t: TypeExpr, env: dict) -> Expr:
        k = type(t)
        if k is TInt or k is TBool:
            pick, pat = (PickI(), PInt()) if k is TInt else (PickB(), PBool())
            return self.record(t, Fun("_", pick), "e$", PatTest(E, pat), Fun("e$", E))
        if k is TArrow:
            return self.embed_arrow(t, self.embed(t.dom, env), lambda a: Var("t2$"),
                                    [("t2$", self.embed(t.cod, env))])
        if k is TDep:
            t2f = Fun(t.var, self.embed(t.cod, env))
            return self.embed_arrow(t, self.embed(t.dom, env), lambda a: App(Var("t2f$"), a),
                                    [("t2f$", t2f)])
        if k is TRefine:
            return self.embed_refine(t, env)
        if k is TPoly:
            if t.name not in env:
                raise IllFormedType(f"unbound type variable '{t.name}")
            return Var(env[t.name])
        if k is TForall:
            return self.embed_forall(t, env)
        if k is TVariant:
            return self.embed_variant(t, env)
        if k is TIntersect:
            return self.embed_intersect(t, env)
        if k is TRecord:
            return self.embed_record(t, env)
        if k is TMu:
            return self.embed_mu(t, env)
        if k is TList:
            return self.embed_list(t, env)
        if k is TExpr:
            return self.expr(t.expr)
        raise IllFormedType(f"unsupported type {k.__name__}")

    def embed_arrow(self, t, dom: Expr, cod, binds) -> Expr:
        t1 = Var("t1$")
        dom_t = t.dom
        gen = Fun("_", Fun("a$", If(
            PickB(),
            If(_call(t1, "check", A), _gen(cod(A)), self.error("gen_arg", dom_t)),
            _gen(cod(A)))))
        check = If(PatTest(E, PFun()),
                   Let("a$", _gen(t1), _call(cod(A), "check", App(E, A))),
                   Bool(False))
        use = lambda: _call(cod(A), "wrap", App(E, _call(t1, "wrap", A)))  # noqa: E731
        wrap = Fun("e$", Fun("a$", If(
            PickB(),
            If(_call(t1, "check", A), use(), self.error("wrap_arg", dom_t)),
            use())))
        return _lets([("t1$", dom)] + binds, self.record(t, gen, "e$", check, wrap))

    def embed_refine(self, t: TRefine, env) -> Expr:
        base, pred = Var("tb$"), Var("p$")
        gen = Fun("_", Let("g$", _gen(base), If(App(pred, G), G, MZero())))
        check = BinOp("and", _call(base, "check", E), App(pred, E))
        return _lets([("tb$", self.embed(t.base, env)), ("p$", self.expr(t.pred))],
                     self.record(t, gen, "e$", check, Proj(base, "wrap")))

    def poly_record(self, tag: str) -> Expr:
        t = TPoly(tag)
        return self.record(t, Fun("_", Untouch(tag)), "e$", PolyEq(E, tag), Fun("e$", E))

    def embed_forall(self, t: TForall, env) -> Expr:
        names = t.binders
        tags = [self.cfg.poly_tags.fresh(n) for n in names]

        def body() -> Expr:
            return self.embed(t.body, env)

        inst = [(n, self.poly_record(tag)) for n, tag in zip(names, tags)]
        check = If(PatTest(E, PFun()),
                   _lets(inst, _call(body(), "check", _app(E, *[Var(n) for n in names]))),
                   Bool(False))
        gen = Fun("_", self._funs(names, _gen(body())))
        wrap = Fun("e$", self._funs(names, _call(body(), "wrap", _app(E, *[Var(n) for n in names]))))
        return self.record(t, gen, "e$", check, wrap)

    @staticmethod
    def _funs(params, body: Expr) -> Expr:
        for p in reversed(params):
            body = Fun(p, body)
        return body

    def embed_variant(self, t: TVariant, env) -> Expr:
        ctors = [c for c, _ in t.clauses]
        if len(set(ctors)) != len(ctors):
            raise IllFormedType(f"duplicate constructor in {render_type(t)}")
        binds = [(f"t{i}$", self.embed(ty, env)) for i, (_, ty) in enumerate(t.clauses)]
        n = len(ctors)
        gen: Expr = Variant(ctors[-1], _gen(Var(f"t{n - 1}$")))
        for i in range(n - 2, -1, -1):
            gen = If(PickB(), Variant(ctors[i], _gen(Var(f"t{i}$"))), gen)
        check_arms = tuple((PVariant(c, "v$"), _call(Var(f"t{i}$"), "check", V))
                           for i, c in enumerate(ctors)) + ((PAny(), Bool(False)),)
        wrap_arms = tuple((PVariant(c, "v$"), Variant(c, _call(Var(f"t{i}$"), "wrap", V)))
                          for i, c in enumerate(ctors))
        return _lets(binds, self.record(t, Fun("_", gen), "e$", Match(E, check_arms),
                                        Fun("e$", Match(E, wrap_arms))))

    def embed_intersect(self, t: TIntersect, env) -> Expr:
        ctors, doms, cods = [], [], []
        for c in t.clauses:
            if not (isinstance(c, TArrow) and isinstance(c.dom, TVariant) and len(c.dom.clauses) == 1):
                raise IllFormedType(
                    f"intersection clauses must have the form (V of t) -> t', got {render_type(c)}")
            (ctor, dom), = c.dom.clauses
            ctors.append(ctor)
            doms.append(dom)
            cods.append(c.cod)
        if len(set(ctors)) != len(ctors):
            raise IllFormedType(f"duplicate constructor in {render_type(t)}")
        binds = []
        for i, c in enumerate(t.clauses):
            binds += [(f"d{i}$", self.embed(doms[i], env)), (f"c{i}$", self.embed(cods[i], env)),
                      (f"f{i}$", self.embed(c, env))]
        iv = Var("i$")
        check: Expr = MZero()
        for i in range(len(ctors) - 1, -1, -1):
            check = If(BinOp("==", iv, Int(i + 1)), _call(Var(f"f{i}$"), "check", E), check)
        check = Let("i$", PickI(), check)

        def dispatch(result) -> Expr:
            arms = []
            for i, c in enumerate(ctors):
                d = Var(f"d{i}$")
                arms.append((PVariant(c, "v$"), If(
                    PickB(),
                    If(_call(d, "check", V), result(i), self.error("intersect", doms[i])),
                    result(i))))
            arms.append((PAny(), self.error("intersect", t)))
            return Match(A, tuple(arms))

        gen = Fun("_", Fun("a$", dispatch(lambda i: _gen(Var(f"c{i}$")))))
        wrap = Fun("e$", Fun("a$", dispatch(lambda i: _call(
            Var(f"c{i}$"), "wrap",
            App(E, Variant(ctors[i], _call(Var(f"d{i}$"), "wrap", V)))))))
        return _lets(binds, self.record(t, gen, "e$", check, wrap))

    def embed_record(self, t: TRecord, env) -> Expr:
        labels = [l for l, _ in t.fields]
        if len(set(labels)) != len(labels):
            raise IllFormedType(f"duplicate label in {render_type(t)}")
        binds = [(f"t{i}$", self.embed(ty, env)) for i, (_, ty) in enumerate(t.fields)]
        gen = Record(tuple((l, _gen(Var(f"t{i}$"))) for i, l in enumerate(labels)))
        fields_ok: Expr = Bool(True)
        for i in range(len(labels) - 1, -1, -1):
            fields_ok = If(_call(Var(f"t{i}$"), "check", Proj(E, labels[i])), fields_ok, Bool(False))
        check = If(PatTest(E, PRecord(tuple(labels))), fields_ok, Bool(False))
        rebuilt = Record(tuple((l, _call(Var(f"t{i}$"), "wrap", Proj(E, l)))
                               for i, l in enumerate(labels)))
        # a value without the labels cannot be rebuilt; that use is itself the violation
        wrap = Fun("e$", If(PatTest(E, PRecord(tuple(labels))),
                            Let("r$", rebuilt, Retag(Var("r$"), tuple(labels))),
                            self.error("wrap_arg", t)))
        return _lets(binds, self.record(t, Fun("_", gen), "e$", check, wrap))

    def embed_mu(self, t: TMu, env) -> Expr:
        def unroll(part_body) -> Expr:
            return Let(t.var, App(Var("self$"), Int(0)), part_body(self.embed(t.body, env)))

        gen = Fun("_", unroll(_gen))
        check_body = unroll(lambda emb: _call(emb, "check", E))
        wrap = Fun("e$", unroll(lambda emb: _call(emb, "wrap", E)))
        rec = self.record(t, gen, "e$", check_body, wrap)
        return App(_z(Fun("self$", Fun("_", rec))), Int(0))

    def embed_list(self, t: TList, env) -> Expr:
        te = Var("te$")
        loop = Var("loop$")
        gen = Fun("_", App(_z(Fun("loop$", Fun("_", If(
            PickB(), ListLit(()), Cons(_gen(te), App(loop, Int(0))))))), Int(0)))
        check_loop = _z(Fun("loop$", Fun("l$", Match(Var("l$"), (
            (PNil(), Bool(True)),
            (PCons("h$", "tl$"), If(_call(te, "check", Var("h$")), App(loop, Var("tl$")), Bool(False))),
            (PAny(), Bool(False)),
        )))))
        wrap_loop = _z(Fun("loop$", Fun("l$", Match(Var("l$"), (
            (PNil(), ListLit(())),
            (PCons("h$", "tl$"), Cons(_call(te, "wrap", Var("h$")), App(loop, Var("tl$")))),
        )))))
        return Let("te$", self.embed(t.elem, env),
                   self.record(t, gen, "e$", App(check_loop, E), Fun("e$", App(wrap_loop, E))))

    def closed_embed(self, t: TypeExpr) -> tuple:
        """Embed with implicit ``'a`` variables bound to fresh untouchables.
        Returns the expression and whether the type was polymorphic."""
        names = poly_vars(t)
        env = {n: f"tv${n}" for n in names}
        binds = [(env[n], self.poly_record(self.cfg.poly_tags.fresh(n))) for n in names]
        return _lets(binds, self.embed(t, env)), bool(names)

    # -- expressions --
    def expr(self, e: Expr) -> Expr:
        t = type(e)
        if t in (Int, Bool, Var, ErrorExpr):
            return e
        if t is Fun:
            return Fun(e.param, self.expr(e.body), label=e.label)
        if t is App:
            return App(self.expr(e.fn), self.expr(e.arg), label=self.user_site(e))
        if t is BinOp:
            return self.guard_binop(e)
        if t is Not:
            a = self.expr(e.operand)
            if not self.cfg.guard_primitives:
                return Not(a)
            return Let("gl$", a, Match(Var("gl$"), (
                (PBool(), Not(Var("gl$"))),
                (PAny(), self.guard_error(e, "bool")))))
        if t is Proj:
            a = self.expr(e.expr)
            if not self.cfg.guard_primitives:
                return Proj(a, e.field)
            return Let("gl$", a, Match(Var("gl$"), (
                (PRecord((e.field,)), Proj(Var("gl$"), e.field)),
                (PAny(), self.guard_error(e, f"{{{e.field}}}")))))
        if t is If:
            return If(self.expr(e.cond), self.expr(e.then), self.expr(e.orelse), label=self.user_site(e))
        if t is Match:
            arms = tuple((p, self.expr(b)) for p, b in e.arms)
            if not any(isinstance(p, PAny) for p, _ in arms):
                arms += ((PAny(), self.error("nomatch", None, e, "nomatch")),)
            return Match(self.expr(e.scrutinee), arms)
        if t is PatTest:
            return PatTest(self.expr(e.expr), e.pattern)
        if t is Let:
            return Let(e.name, self.expr(e.rhs), self.expr(e.body))
        if t is LetTyped:
            return self.decl(e)
        if t is Record:
            return Record(tuple((k, self.expr(v)) for k, v in e.fields))
        if t is ListLit:
            return ListLit(tuple(self.expr(x) for x in e.items))
        if t is Cons:
            return Cons(self.expr(e.head), self.expr(e.tail), label=self.user_site(e))
        if t is Variant:
            return Variant(e.ctor, self.expr(e.payload))
        if t is Assert:
            return If(self.expr(e.expr), Bool(True), self.error("assert", None, e, "assert"))
        if t is Assume:
            return If(self.expr(e.expr), Bool(True), MZero())
        if t is TypeLit:
            emb, _ = self.closed_embed(e.type)
            return emb
        raise TypeError(f"cannot instrument {t.__name__}")

    def user_site(self, e: Expr) -> str:
        lab = self.label("u" + type(e).__name__.lower())
        decl, info = self.decl_ctx[-1] if self.decl_ctx else (None, None)
        self.sites[lab] = SiteInfo("runtime", decl, info, None, e)
        return lab

    def guard_binop(self, e: BinOp) -> Expr:
        l, r = self.expr(e.left), self.expr(e.right)
        if not self.cfg.guard_primitives:
            return BinOp(e.op, l, r)
        a, b = Var("gl$"), Var("gr$")
        op = BinOp(e.op, a, b)
        if e.op in ("+", "-", "*", "<", "<=", ">", ">="):
            kinds = [PInt()]
        elif e.op in ("==", "!="):
            kinds = [PInt(), PBool()]
        else:
            kinds = [PBool()]
        arms = []
        for k in kinds:
            inner = Match(b, ((k, op), (PAny(), self.guard_error(e, _EXPECTED[e.op]))))
            arms.append((k, inner))
        arms.append((PAny(), self.guard_error(e, _EXPECTED[e.op])))
        return Let("gl$", l, Let("gr$", r, Match(a, tuple(arms))))

    def guard_error(self, e: Expr, expected: str) -> ErrorExpr:
        lab = self.label("guard")
        decl, info = self.decl_ctx[-1] if self.decl_ctx else (None, None)
        self.sites[lab] = SiteInfo("guard", decl, info, expected, e)
        return ErrorExpr(label=lab)

    # -- declarations --
    def decl(self, d: LetTyped) -> Expr:
        rhs = self.expr(d.rhs)
        if d.rec:
            rhs = _z(Fun(d.name, rhs))
        self.decl_ctx.append((d.name, d.info))
        try:
            emb, poly = self.closed_embed(d.type)
            fail = self.error("decl", d.type, None, "declerr")
        finally:
            self.decl_ctx.pop()
        body = self.expr(d.body)
        lab = self.label("decl")
        self.decls[lab] = SiteInfo("decl", d.name, d.info, render_type(d.type), None)
        raw, ty = Var("raw$"), Var("ty$")
        exported = _call(ty, "wrap", raw) if self.cfg.wrap_enabled and not poly else raw
        return _lets([
            ("raw$", rhs),
            ("ty$", emb),
            ("dchk$", Fun("v$", _call(ty, "check", V), label=lab)),
            ("chk$", App(Var("dchk$"), raw)),
        ], If(Var("chk$"), Let(d.name, exported, body), fail))


def embed(t: TypeExpr, env: Optional[dict] = None, cfg: Optional[InstrumentConfig] = None) -> Expr:
    """The ``{gen; check; wrap}`` record expression for ``t``.

    ``env`` maps implicit ``'a`` names to variables bound around the result;
    when omitted they are bound to fresh untouchables."""
    ins = _Instrumenter(cfg or InstrumentConfig())
    if env is None:
        return ins.closed_embed(t)[0]
    return ins.embed(t, env)


def instrument_program(p: Expr, cfg: Optional[InstrumentConfig] = None) -> Instrumented:
    from .interp import run_deep

    cfg = cfg or InstrumentConfig()
    ins = _Instrumenter(cfg)
    prog = run_deep(ins.expr, p)
    return Instrumented(prog, ins.sites, ins.checks, ins.decls, cfg)
