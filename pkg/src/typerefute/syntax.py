"""Abstract syntax for the surface and core languages, plus the pretty-printer.

One frozen dataclass per production.  Every node has a ``label`` that is
ignored by equality; labels become clause identifiers once a program has
been prepared for evaluation (see :mod:`typerefute.normalize`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

BINOPS = ("+", "-", "*", "<", "<=", ">", ">=", "==", "!=", "and", "or", "xor")
ARITH_OPS = frozenset({"+", "-", "*"})
COMPARE_OPS = frozenset({"<", "<=", ">", ">="})
EQUALITY_OPS = frozenset({"==", "!="})
BOOL_OPS = frozenset({"and", "or", "xor"})


def _label():
    return field(default=None, compare=False, repr=False)


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Int(Expr):
    value: int
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Bool(Expr):
    value: bool
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Fun(Expr):
    param: str
    body: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class App(Expr):
    fn: Expr
    arg: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Not(Expr):
    operand: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class If(Expr):
    cond: Expr
    then: Expr
    orelse: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Match(Expr):
    scrutinee: Expr
    arms: tuple  # tuple[tuple[Pattern, Expr], ...]
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class PatTest(Expr):
    expr: Expr
    pattern: "Pattern"
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Let(Expr):
    """Administrative binding.  Produced by normalization and instrumentation,
    never by the surface parser (which desugars ``let`` to application)."""

    name: str
    rhs: Expr
    body: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True)
class DeclInfo:
    """Source fragments of a typed declaration, kept for error reports."""

    header: str
    rhs: str
    body: str


@dataclass(frozen=True, slots=True)
class LetTyped(Expr):
    name: str
    type: "TypeExpr"
    rhs: Expr
    body: Expr
    rec: bool = False
    info: Optional[DeclInfo] = field(default=None, compare=False, repr=False)
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Record(Expr):
    fields: tuple  # tuple[tuple[str, Expr], ...]
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Proj(Expr):
    expr: Expr
    field: str
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class ListLit(Expr):
    items: tuple
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Cons(Expr):
    head: Expr
    tail: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Variant(Expr):
    ctor: str
    payload: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Assert(Expr):
    expr: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Assume(Expr):
    expr: Expr
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class TypeLit(Expr):
    """A type written in expression position; types are first-class values."""

    type: "TypeExpr"
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class ErrorExpr(Expr):
    label: Optional[str] = _label()


# -- instrumentation-only forms ------------------------------------------------


@dataclass(frozen=True, slots=True)
class PickI(Expr):
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class PickB(Expr):
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class MZero(Expr):
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Retag(Expr):
    expr: Expr
    labels: tuple
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class PolyEq(Expr):
    """``e ≃ α``: true iff the value is the untouchable V(α)."""

    expr: Expr
    tag: str
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Untouch(Expr):
    """The untouchable literal V(α)."""

    tag: str
    label: Optional[str] = _label()


@dataclass(frozen=True, slots=True)
class Destruct(Expr):
    """Pattern-variable extraction emitted when compiling ``match``:
    kind is ``head``, ``tail`` or ``payload``."""

    expr: Expr
    kind: str
    label: Optional[str] = _label()


INSTRUMENTATION_ONLY = (PickI, PickB, MZero, Retag, PolyEq, Untouch, Destruct, Let)


# -- patterns ------------------------------------------------------------------


class Pattern:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class PInt(Pattern):
    pass


@dataclass(frozen=True, slots=True)
class PBool(Pattern):
    pass


@dataclass(frozen=True, slots=True)
class PFun(Pattern):
    pass


@dataclass(frozen=True, slots=True)
class PAny(Pattern):
    pass


@dataclass(frozen=True, slots=True)
class PRecord(Pattern):
    labels: tuple


@dataclass(frozen=True, slots=True)
class PNil(Pattern):
    pass


@dataclass(frozen=True, slots=True)
class PCons(Pattern):
    head: str
    tail: str


@dataclass(frozen=True, slots=True)
class PVariant(Pattern):
    ctor: str
    var: str


# -- types ---------------------------------------------------------------------


class TypeExpr:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class TInt(TypeExpr):
    pass


@dataclass(frozen=True, slots=True)
class TBool(TypeExpr):
    pass


@dataclass(frozen=True, slots=True)
class TArrow(TypeExpr):
    dom: TypeExpr
    cod: TypeExpr


@dataclass(frozen=True, slots=True)
class TDep(TypeExpr):
    var: str
    dom: TypeExpr
    cod: TypeExpr


@dataclass(frozen=True, slots=True)
class TRefine(TypeExpr):
    base: TypeExpr
    pred: Expr


@dataclass(frozen=True, slots=True)
class TPoly(TypeExpr):
    """Implicitly quantified type variable ``'a``."""

    name: str


@dataclass(frozen=True, slots=True)
class TForall(TypeExpr):
    binders: tuple
    body: TypeExpr


@dataclass(frozen=True, slots=True)
class TVariant(TypeExpr):
    clauses: tuple  # tuple[tuple[str, TypeExpr], ...]


@dataclass(frozen=True, slots=True)
class TIntersect(TypeExpr):
    clauses: tuple  # each a TArrow whose domain is a one-constructor TVariant


@dataclass(frozen=True, slots=True)
class TRecord(TypeExpr):
    fields: tuple  # tuple[tuple[str, TypeExpr], ...]


@dataclass(frozen=True, slots=True)
class TMu(TypeExpr):
    var: str
    body: TypeExpr


@dataclass(frozen=True, slots=True)
class TList(TypeExpr):
    elem: TypeExpr


@dataclass(frozen=True, slots=True)
class TExpr(TypeExpr):
    """A type given by an arbitrary expression (type variable, type function call)."""

    expr: Expr


Node = Union[Expr, TypeExpr]


# -- free variables ------------------------------------------------------------


def free_vars(e: Expr) -> frozenset:
    out: set = set()
    _fv_expr(e, frozenset(), out)
    return frozenset(out)


def type_free_vars(t: TypeExpr) -> frozenset:
    out: set = set()
    _fv_type(t, frozenset(), out)
    return frozenset(out)


def pattern_binders(p: Pattern) -> tuple:
    if isinstance(p, PCons):
        return tuple(n for n in (p.head, p.tail) if n != "_")
    if isinstance(p, PVariant):
        return () if p.var == "_" else (p.var,)
    return ()


def _fv_expr(e, bound, out):
    t = type(e)
    if t is Var:
        if e.name not in bound:
            out.add(e.name)
    elif t is Fun:
        _fv_expr(e.body, bound | {e.param}, out)
    elif t is Let:
        _fv_expr(e.rhs, bound, out)
        _fv_expr(e.body, bound | {e.name}, out)
    elif t is LetTyped:
        _fv_type(e.type, bound, out)
        _fv_expr(e.rhs, bound | {e.name} if e.rec else bound, out)
        _fv_expr(e.body, bound | {e.name}, out)
    elif t is Match:
        _fv_expr(e.scrutinee, bound, out)
        for pat, body in e.arms:
            _fv_expr(body, bound | set(pattern_binders(pat)), out)
    elif t is TypeLit:
        _fv_type(e.type, bound, out)
    else:
        for child in children(e):
            _fv_expr(child, bound, out)


def _fv_type(t, bound, out):
    k = type(t)
    if k is TExpr:
        _fv_expr(t.expr, bound, out)
    elif k is TArrow:
        _fv_type(t.dom, bound, out)
        _fv_type(t.cod, bound, out)
    elif k is TDep:
        _fv_type(t.dom, bound, out)
        _fv_type(t.cod, bound | {t.var}, out)
    elif k is TRefine:
        _fv_type(t.base, bound, out)
        _fv_expr(t.pred, bound, out)
    elif k is TForall:
        _fv_type(t.body, bound | set(t.binders), out)
    elif k is TMu:
        _fv_type(t.body, bound | {t.var}, out)
    elif k is TVariant:
        for _, ty in t.clauses:
            _fv_type(ty, bound, out)
    elif k is TIntersect:
        for ty in t.clauses:
            _fv_type(ty, bound, out)
    elif k is TRecord:
        for _, ty in t.fields:
            _fv_type(ty, bound, out)
    elif k is TList:
        _fv_type(t.elem, bound, out)


def poly_vars(t: TypeExpr) -> list:
    """Implicit ``'a`` variables of a type, in order of first occurrence."""
    seen: list = []

    def walk(x):
        if isinstance(x, TPoly):
            if x.name not in seen:
                seen.append(x.name)
        elif isinstance(x, TypeExpr):
            for c in type_children(x):
                walk(c)

    walk(t)
    return seen


def children(e: Expr) -> tuple:
    """Direct expression children (types are not descended into)."""
    t = type(e)
    if t in (Int, Bool, Var, ErrorExpr, PickI, PickB, MZero, Untouch, TypeLit):
        return ()
    if t is Fun:
        return (e.body,)
    if t is App:
        return (e.fn, e.arg)
    if t is BinOp:
        return (e.left, e.right)
    if t is If:
        return (e.cond, e.then, e.orelse)
    if t is Match:
        return (e.scrutinee,) + tuple(b for _, b in e.arms)
    if t is Let:
        return (e.rhs, e.body)
    if t is LetTyped:
        return (e.rhs, e.body)
    if t is Record:
        return tuple(v for _, v in e.fields)
    if t is ListLit:
        return e.items
    if t is Cons:
        return (e.head, e.tail)
    if t in (Not, Assert, Assume):
        return (e.operand,) if t is Not else (e.expr,)
    if t in (Proj, PatTest, Retag, PolyEq, Destruct):
        return (e.expr,)
    if t is Variant:
        return (e.payload,)
    raise TypeError(f"unknown node {t.__name__}")


def type_children(t: TypeExpr) -> tuple:
    k = type(t)
    if k is TArrow:
        return (t.dom, t.cod)
    if k is TDep:
        return (t.dom, t.cod)
    if k is TRefine:
        return (t.base,)
    if k is TForall or k is TMu:
        return (t.body,)
    if k is TVariant:
        return tuple(ty for _, ty in t.clauses)
    if k is TIntersect:
        return t.clauses
    if k is TRecord:
        return tuple(ty for _, ty in t.fields)
    if k is TList:
        return (t.elem,)
    return ()


def walk(e: Expr):
    """Yield every expression node, including those nested inside types."""
    stack = [e]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, TypeLit):
            stack.extend(_type_exprs(n.type))
        elif isinstance(n, LetTyped):
            stack.extend(_type_exprs(n.type))
            stack.extend(children(n))
        else:
            stack.extend(children(n))


def _type_exprs(t: TypeExpr) -> list:
    out = []
    if isinstance(t, TExpr):
        out.append(t.expr)
    elif isinstance(t, TRefine):
        out.append(t.pred)
    for c in type_children(t):
        out.extend(_type_exprs(c))
    return out


# -- rendering -----------------------------------------------------------------


def render(e: Expr) -> str:
    """Print an expression in surface syntax (fully parenthesized)."""
    return _r(e)


def _r(e) -> str:
    t = type(e)
    if t is Int:
        return str(e.value) if e.value >= 0 else f"({e.value})"
    if t is Bool:
        return "true" if e.value else "false"
    if t is Var:
        return e.name
    if t is Fun:
        return f"(fun {e.param} -> {_r(e.body)})"
    if t is App:
        return f"({_r(e.fn)} {_r(e.arg)})"
    if t is BinOp:
        return f"({_r(e.left)} {e.op} {_r(e.right)})"
    if t is Not:
        return f"(not {_r(e.operand)})"
    if t is If:
        return f"(if {_r(e.cond)} then {_r(e.then)} else {_r(e.orelse)})"
    if t is Match:
        arms = " ".join(f"| {render_pattern(p)} -> {_r(b)}" for p, b in e.arms)
        return f"(match {_r(e.scrutinee)} with {arms})"
    if t is PatTest:
        return f"({_r(e.expr)} ~ {render_pattern(e.pattern)})"
    if t is Let:
        return f"(let {e.name} = {_r(e.rhs)} in {_r(e.body)})"
    if t is LetTyped:
        rec = "rec " if e.rec else ""
        return f"(let {rec}({e.name} : {render_type(e.type)}) = {_r(e.rhs)} in {_r(e.body)})"
    if t is Record:
        if not e.fields:
            return "{}"
        return "{" + "; ".join(f"{k} = {_r(v)}" for k, v in e.fields) + "}"
    if t is Proj:
        return f"{_r(e.expr)}.{e.field}"
    if t is ListLit:
        return "[" + "; ".join(_r(x) for x in e.items) + "]"
    if t is Cons:
        return f"({_r(e.head)} :: {_r(e.tail)})"
    if t is Variant:
        return f"({e.ctor} {_r(e.payload)})"
    if t is Assert:
        return f"(assert {_r(e.expr)})"
    if t is Assume:
        return f"(assume {_r(e.expr)})"
    if t is TypeLit:
        return _paren_type(e.type)
    if t is ErrorExpr:
        return "ERROR"
    if t is PickI:
        return "pick_i"
    if t is PickB:
        return "pick_b"
    if t is MZero:
        return "mzero"
    if t is Retag:
        return f"retag({_r(e.expr)}, {{{'; '.join(e.labels)}}})"
    if t is PolyEq:
        return f"({_r(e.expr)} =~ '{e.tag})"
    if t is Untouch:
        return f"(untouchable '{e.tag})"
    if t is Destruct:
        return f"({e.kind}_of {_r(e.expr)})"
    raise TypeError(f"cannot render {t.__name__}")


def _paren_type(t: TypeExpr) -> str:
    s = render_type(t)
    if isinstance(t, (TInt, TBool, TPoly, TRecord, TRefine)) or s.startswith("("):
        return s
    return f"({s})"


def render_pattern(p: Pattern) -> str:
    t = type(p)
    if t is PInt:
        return "int"
    if t is PBool:
        return "bool"
    if t is PFun:
        return "fun"
    if t is PAny:
        return "any"
    if t is PRecord:
        return "{" + "; ".join(p.labels) + "}"
    if t is PNil:
        return "[]"
    if t is PCons:
        return f"{p.head} :: {p.tail}"
    if t is PVariant:
        return f"{p.ctor} {p.var}"
    raise TypeError(f"cannot render pattern {t.__name__}")


def render_type(t: TypeExpr) -> str:
    k = type(t)
    if k is TInt:
        return "int"
    if k is TBool:
        return "bool"
    if k is TArrow:
        return f"({render_type(t.dom)} -> {render_type(t.cod)})"
    if k is TDep:
        return f"(({t.var} : {render_type(t.dom)}) -> {render_type(t.cod)})"
    if k is TRefine:
        return f"{{{render_type(t.base)} | {_r(t.pred)}}}"
    if k is TPoly:
        return f"'{t.name}"
    if k is TForall:
        return f"(forall {' '.join(t.binders)}. {render_type(t.body)})"
    if k is TVariant:
        return "(" + " || ".join(f"{c} of {_type_arg(ty)}" for c, ty in t.clauses) + ")"
    if k is TIntersect:
        return "(" + " && ".join(render_type(c) for c in t.clauses) + ")"
    if k is TRecord:
        return "{" + "; ".join(f"{l} : {render_type(ty)}" for l, ty in t.fields) + "}"
    if k is TMu:
        return f"(Mu {t.var}. {render_type(t.body)})"
    if k is TList:
        return f"(list {_type_arg(t.elem)})"
    if k is TExpr:
        return _render_type_expr(t.expr)
    raise TypeError(f"cannot render type {k.__name__}")


def _type_arg(t: TypeExpr) -> str:
    s = render_type(t)
    if isinstance(t, TExpr) and not isinstance(t.expr, Var):
        return f"({s})"
    return s


def _render_type_expr(e: Expr) -> str:
    # Type-function applications print without the outer parentheses the
    # expression printer would add, e.g. ``mk_rec n``.
    if isinstance(e, App):
        parts = []
        while isinstance(e, App):
            parts.append(_r(e.arg))
            e = e.fn
        parts.append(_r(e))
        return " ".join(reversed(parts))
    return _r(e)
