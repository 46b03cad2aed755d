"""Deterministic environment-based interpreter for the instrumented language.

Every pick site is resolved through a :class:`Feed` keyed by
:class:`ClauseKey` (clause label, function-entry count).  ERROR, mzero and
budget exhaustion are Python exceptions internally and become
:class:`Outcome` values at the boundary.
"""

from __future__ import annotations

import random
import sys
import threading
from dataclasses import dataclass, field
from typing import Optional, Union

from . import solver as smt
from .normalize import prepare
from .syntax import (
    App, Assert, Assume, BinOp, Bool, Cons, Destruct, ErrorExpr, Expr, Fun, If, Int, Let,
    ListLit, Match, MZero, Not, PAny, PBool, PCons, PFun, PInt, PNil, PRecord, PVariant,
    PatTest, Pattern, PickB, PickI, PolyEq, Proj, Record, Retag, Untouch, Var, Variant,
)

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


# -- values --------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Closure:
    param: str
    body: Expr
    frame: "Frame" = field(compare=False, repr=False)
    label: Optional[str] = None


@dataclass(frozen=True, slots=True)
class Untouchable:
    tag: str


@dataclass(frozen=True, slots=True)
class RecordVal:
    fields: tuple  # tuple[tuple[str, value], ...] in literal order
    declared: frozenset

    def get(self, label: str):
        for k, v in self.fields:
            if k == label:
                return v
        raise KeyError(label)

    @property
    def labels(self) -> frozenset:
        return frozenset(k for k, _ in self.fields)


@dataclass(frozen=True, slots=True)
class VariantVal:
    ctor: str
    payload: object


class _Nil:
    __slots__ = ()

    def __repr__(self):
        return "Nil"


NIL = _Nil()


@dataclass(frozen=True, slots=True)
class ConsVal:
    head: object
    tail: object


@dataclass(slots=True)
class SymVal:
    """A concrete int/bool paired with the symbolic term it was computed from.
    Only created during concolic runs."""

    v: Union[int, bool]
    term: object


Value = Union[int, bool, Closure, Untouchable, RecordVal, VariantVal, ConsVal, _Nil]


def concrete(v):
    """Strip symbolic annotations, recursively through data."""
    t = type(v)
    if t is SymVal:
        return v.v
    if t is RecordVal:
        return RecordVal(tuple((k, concrete(x)) for k, x in v.fields), v.declared)
    if t is VariantVal:
        return VariantVal(v.ctor, concrete(v.payload))
    if t is ConsVal:
        items = list_items(v)
        out = NIL
        for x in reversed(items):
            out = ConsVal(concrete(x), out)
        return out
    return v


def list_items(v) -> list:
    out = []
    while type(v) is ConsVal:
        out.append(v.head)
        v = v.tail
    return out


def render_value(v) -> str:
    t = type(v)
    if t is SymVal:
        return render_value(v.v)
    if t is bool:
        return "true" if v else "false"
    if t is int:
        return str(v)
    if t is Closure:
        return "<fun>"
    if t is Untouchable:
        return f"V('{v.tag})"
    if t is RecordVal:
        shown = sorted((k, x) for k, x in v.fields if k in v.declared)
        return "{" + "; ".join(f"{k} = {render_value(x)}" for k, x in shown) + "}"
    if t is VariantVal:
        return f"{v.ctor} {render_value(v.payload)}"
    if t is ConsVal or v is NIL:
        return "[" + "; ".join(render_value(x) for x in list_items(v)) + "]"
    return repr(v)


def shape(v) -> str:
    """A short type-like description of a value."""
    t = type(v)
    if t is SymVal:
        return shape(v.v)
    if t is bool:
        return "bool"
    if t is int:
        return "int"
    if t is Closure:
        return "function"
    if t is Untouchable:
        return f"'{v.tag}"
    return render_value(v)


# -- feeds, keys, outcomes -------------------------------------------------------


@dataclass(frozen=True, order=True, slots=True)
class ClauseKey:
    clause: str
    depth: int

    def __str__(self):
        return f"{self.clause}@{self.depth}"


class FeedMiss(Exception):
    """Replay reached a pick site that the feed does not cover."""

    def __init__(self, key: ClauseKey):
        super().__init__(f"no recorded value for pick {key}")
        self.key = key


DEFAULT_INT_RANGE = (-(2**31), 2**31 - 1)


@dataclass
class Feed:
    """Pick values keyed by clause, with a fallback for unseen keys.

    ``policy`` is ``"random"`` (seeded) or ``"fail"`` (replay)."""

    values: dict = field(default_factory=dict)
    policy: str = "random"
    seed: int = 0
    int_range: tuple = DEFAULT_INT_RANGE

    def __post_init__(self):
        self._rng = random.Random(self.seed)

    def resolve(self, key: ClauseKey, kind: str):
        v = self.values.get(key)
        if v is not None:
            if kind == "bool" and type(v) is not bool:
                raise ValueError(f"feed value for {key} is not a bool")
            if kind == "int" and type(v) is not int:
                raise ValueError(f"feed value for {key} is not an int")
            return v
        if self.policy == "fail":
            raise FeedMiss(key)
        if kind == "bool":
            return self._rng.random() < 0.5
        lo, hi = self.int_range
        return self._rng.randint(lo, hi)

    @classmethod
    def replay_of(cls, picks: dict) -> "Feed":
        return cls(dict(picks), policy="fail")

    # .feed text format: one pick per line, ``clause_id depth kind value``
    def dumps(self) -> str:
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            kind = "bool" if type(v) is bool else "int"
            text = ("true" if v else "false") if kind == "bool" else str(v)
            lines.append(f"{key.clause} {key.depth} {kind} {text}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def loads(cls, text: str, policy: str = "fail") -> "Feed":
        values = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4 or parts[2] not in ("int", "bool"):
                raise ValueError(f"malformed feed line {n}: {line!r}")
            clause, depth, kind, text_v = parts
            if kind == "bool":
                if text_v not in ("true", "false"):
                    raise ValueError(f"malformed bool on feed line {n}")
                v = text_v == "true"
            else:
                v = int(text_v)
            values[ClauseKey(clause, int(depth))] = v
        return cls(values, policy=policy)


@dataclass(frozen=True)
class Outcome:
    """kind is one of ``value``, ``error``, ``mzero``, ``steplimit``."""

    kind: str
    value: object = None
    site: Optional[str] = None  # label of the clause that raised Error/MZero
    steps: int = 0

    @property
    def is_error(self) -> bool:
        return self.kind == "error"

    def __str__(self):
        if self.kind == "value":
            return f"Value {render_value(self.value)}"
        if self.kind == "error":
            return "Error" + (f" at {self.site}" if self.site else "")
        if self.kind == "mzero":
            return "MZero"
        return f"StepLimit({self.steps})"


@dataclass
class SymBranch:
    key: ClauseKey
    taken: bool
    term: object  # boolean solver term for the condition
    formulas: list  # formulas gathered since the previous symbolic branch


@dataclass
class Trace:
    branches: list = field(default_factory=list)  # (ClauseKey, bool)
    picks: dict = field(default_factory=dict)  # ClauseKey -> value, in order consumed
    path: list = field(default_factory=list)  # SymBranch, concolic runs only
    tail_formulas: list = field(default_factory=list)
    truncated: bool = False
    pick_vars: dict = field(default_factory=dict)  # solver var name -> ClauseKey


class _Error(Exception):
    __slots__ = ("site",)

    def __init__(self, site):
        self.site = site


class _MZero(Exception):
    __slots__ = ("site",)

    def __init__(self, site):
        self.site = site


class _StepLimit(Exception):
    pass


class Frame:
    __slots__ = ("vars", "parent")

    def __init__(self, vars: dict, parent: Optional["Frame"]):
        self.vars = vars
        self.parent = parent


ERROR = _Error(None)  # sentinel returned by :func:`matches` for opaque scrutinees


def matches(v, p: Pattern):
    """Pattern match on a value: True, False, or the ``ERROR`` sentinel."""
    if type(v) is SymVal:
        v = v.v
    if type(v) is Untouchable:
        return ERROR
    t = type(p)
    if t is PAny:
        return True
    if t is PInt:
        return type(v) is int
    if t is PBool:
        return type(v) is bool
    if t is PFun:
        return type(v) is Closure
    if t is PRecord:
        return type(v) is RecordVal and all(l in v.declared for l in p.labels)
    if t is PNil:
        return v is NIL
    if t is PCons:
        return type(v) is ConsVal
    if t is PVariant:
        return type(v) is VariantVal and v.ctor == p.ctor
    raise TypeError(f"unknown pattern {t.__name__}")


# -- evaluation ------------------------------------------------------------------

_PREPARED: dict = {}


def prepared(e: Expr) -> Expr:
    """Labelled, binder-unique version of ``e`` (cached by identity)."""
    hit = _PREPARED.get(id(e))
    if hit is not None and hit[0] is e:
        return hit[1]
    p = prepare(e)
    if len(_PREPARED) > 256:
        _PREPARED.clear()
    _PREPARED[id(e)] = (e, p)
    _PREPARED[id(p)] = (p, p)
    return p


class Interpreter:
    """One run.  ``symbolic`` turns on concolic term tracking."""

    def __init__(self, feed: Feed, step_budget: int, *, symbolic: bool = False,
                 max_branches: Optional[int] = None, record_branches: bool = True,
                 watch: Optional[set] = None, observer=None):
        self.feed = feed
        self.budget = step_budget
        self.steps = 0
        self.entries = 0
        self.symbolic = symbolic
        self.max_branches = max_branches
        self.record_branches = record_branches
        self.trace = Trace()
        self.segment: list = []
        self.watch = watch or set()
        self.observer = observer  # called with each RecordVal built (debug walks)
        self.calls: list = []  # watched-call records, see diagnose
        self._call_stack: list = []
        self.error_frame: Optional[Frame] = None

    # -- entry --
    def run(self, e: Expr) -> Outcome:
        try:
            v = self.ev(e, Frame({}, None), 0)
            return Outcome("value", concrete(v), steps=self.steps)
        except _Error as err:
            return Outcome("error", site=err.site, steps=self.steps)
        except _MZero as mz:
            return Outcome("mzero", site=mz.site, steps=self.steps)
        except _StepLimit:
            return Outcome("steplimit", steps=self.steps)
        except RecursionError:
            return Outcome("steplimit", steps=self.steps)

    # -- helpers --
    def lookup(self, name: str, frame: Frame, node):
        f = frame
        while f is not None:
            d = f.vars
            if name in d:
                return d[name]
            f = f.parent
        raise _Error(node.label)

    def branch(self, node, cond, fid):
        """Record a conditional and return its concrete direction."""
        if type(cond) is SymVal:
            taken = cond.v
            if type(taken) is not bool:
                raise _Error(node.label)
            key = ClauseKey(node.label, fid)
            tr = self.trace
            if self.record_branches:
                tr.branches.append((key, taken))
            if self.max_branches is None or len(tr.path) < self.max_branches:
                tr.path.append(SymBranch(key, taken, cond.term, self.segment))
                self.segment = []
            else:
                tr.truncated = True
            return taken
        if type(cond) is not bool:
            raise _Error(node.label)
        if self.record_branches and not self.symbolic:
            self.trace.branches.append((ClauseKey(node.label, fid), cond))
        return cond

    def pick(self, node, fid, kind):
        key = ClauseKey(node.label, fid)
        v = self.feed.resolve(key, kind)
        self.trace.picks[key] = v
        if self.symbolic:
            name = smt.pick_var_name(key)
            self.trace.pick_vars[name] = key
            return SymVal(v, smt.Var(name, smt.INT if kind == "int" else smt.BOOL))
        return v

    # -- the evaluator proper --
    def ev(self, node, frame: Frame, fid: int):
        while True:
            self.steps += 1
            if self.steps > self.budget:
                raise _StepLimit()
            t = type(node)
            if t is Let:
                frame.vars[node.name] = self.ev(node.rhs, frame, fid)
                node = node.body
                continue
            if t is Var:
                return self.lookup(node.name, frame, node)
            if t is If:
                c = self.ev(node.cond, frame, fid)
                node = node.then if self.branch(node, c, fid) else node.orelse
                continue
            if t is App:
                fn = self.ev(node.fn, frame, fid)
                arg = self.ev(node.arg, frame, fid)
                if type(fn) is not Closure:
                    raise _Error(node.label)
                self.entries += 1
                fid = self.entries
                new = Frame({fn.param: arg}, fn.frame)
                if self.watch and fn.label in self.watch:
                    return self.watched_call(fn, arg, new, fid)
                frame = new
                node = fn.body
                continue
            if t is Match:
                v = self.ev(node.scrutinee, frame, fid)
                for pat, body in node.arms:
                    m = matches(v, pat)
                    if m is ERROR:
                        raise _Error(node.label)
                    if m:
                        self.bind_pattern(pat, v, frame)
                        node = body
                        break
                else:
                    raise _Error(node.label)
                continue
            if t is Int or t is Bool:
                return node.value
            if t is Fun:
                return Closure(node.param, node.body, frame, node.label)
            h = _DISPATCH.get(t)
            if h is None:
                raise ValueError(f"cannot evaluate {t.__name__}; instrument the program first")
            return h(self, node, frame, fid)

    def watched_call(self, fn: Closure, arg, frame: Frame, fid: int):
        rec = {"label": fn.label, "arg": arg, "children": [], "result": None}
        parent = self._call_stack[-1]["children"] if self._call_stack else self.calls
        parent.append(rec)
        self._call_stack.append(rec)
        try:
            v = self.ev(fn.body, frame, fid)
            rec["result"] = v
            return v
        except _Error:
            rec["result"] = ERROR
            raise
        finally:
            self._call_stack.pop()

    def bind_pattern(self, pat, v, frame):
        if type(pat) is PCons:
            if pat.head != "_":
                frame.vars[pat.head] = v.head
            if pat.tail != "_":
                frame.vars[pat.tail] = v.tail
        elif type(pat) is PVariant and pat.var != "_":
            frame.vars[pat.var] = v.payload

    # -- non-tail node handlers --
    def ev_binop(self, node, frame, fid):
        a = self.ev(node.left, frame, fid)
        b = self.ev(node.right, frame, fid)
        sa = type(a) is SymVal
        sb = type(b) is SymVal
        ca = a.v if sa else a
        cb = b.v if sb else b
        op = node.op
        ta, tb = type(ca), type(cb)
        if op in ("+", "-", "*"):
            if ta is not int or tb is not int:
                raise _Error(node.label)
            r = ca + cb if op == "+" else ca - cb if op == "-" else ca * cb
            if r < INT_MIN or r > INT_MAX:
                raise _Error(node.label)
        elif op in ("<", "<=", ">", ">="):
            if ta is not int or tb is not int:
                raise _Error(node.label)
            r = ca < cb if op == "<" else ca <= cb if op == "<=" else ca > cb if op == ">" else ca >= cb
        elif op in ("==", "!="):
            if ta is not tb or ta not in (int, bool):
                raise _Error(node.label)
            r = (ca == cb) if op == "==" else (ca != cb)
        else:
            if ta is not bool or tb is not bool:
                raise _Error(node.label)
            r = (ca and cb) if op == "and" else (ca or cb) if op == "or" else (ca != cb)
        if sa or sb:
            return self.symbolic_result(node, fid, r, op, a, b)
        return r

    def symbolic_result(self, node, fid, r, op, *operands):
        key = ClauseKey(node.label, fid)
        terms = [x.term if type(x) is SymVal else smt.literal(x) for x in operands]
        var, formulas = smt.encode_op(key, op, terms)
        self.segment.extend(formulas)
        return SymVal(r, var)

    def ev_not(self, node, frame, fid):
        a = self.ev(node.operand, frame, fid)
        c = a.v if type(a) is SymVal else a
        if type(c) is not bool:
            raise _Error(node.label)
        if type(a) is SymVal:
            return self.symbolic_result(node, fid, not c, "not", a)
        return not c

    def ev_pattest(self, node, frame, fid):
        v = self.ev(node.expr, frame, fid)
        m = matches(v, node.pattern)
        if m is ERROR:
            raise _Error(node.label)
        return m

    def ev_record(self, node, frame, fid):
        fields = tuple((k, self.ev(x, frame, fid)) for k, x in node.fields)
        r = RecordVal(fields, frozenset(k for k, _ in fields))
        if self.observer is not None:
            self.observer(r)
        return r

    def ev_proj(self, node, frame, fid):
        v = self.ev(node.expr, frame, fid)
        if type(v) is not RecordVal or node.field not in v.declared:
            raise _Error(node.label)
        return v.get(node.field)

    def ev_retag(self, node, frame, fid):
        v = self.ev(node.expr, frame, fid)
        if type(v) is not RecordVal:
            raise _Error(node.label)
        new = frozenset(node.labels)
        if not new <= v.labels:
            raise _Error(node.label)
        r = RecordVal(v.fields, new)
        if self.observer is not None:
            self.observer(r)
        return r

    def ev_list(self, node, frame, fid):
        items = [self.ev(x, frame, fid) for x in node.items]
        out = NIL
        for x in reversed(items):
            out = ConsVal(x, out)
        return out

    def ev_cons(self, node, frame, fid):
        h = self.ev(node.head, frame, fid)
        tl = self.ev(node.tail, frame, fid)
        if tl is not NIL and type(tl) is not ConsVal:
            raise _Error(node.label)
        return ConsVal(h, tl)

    def ev_variant(self, node, frame, fid):
        return VariantVal(node.ctor, self.ev(node.payload, frame, fid))

    def ev_destruct(self, node, frame, fid):
        v = self.ev(node.expr, frame, fid)
        kind = node.kind
        if kind == "payload" and type(v) is VariantVal:
            return v.payload
        if kind == "head" and type(v) is ConsVal:
            return v.head
        if kind == "tail" and type(v) is ConsVal:
            return v.tail
        raise _Error(node.label)

    def ev_polyeq(self, node, frame, fid):
        v = self.ev(node.expr, frame, fid)
        return type(v) is Untouchable and v.tag == node.tag

    def ev_untouch(self, node, frame, fid):
        return Untouchable(node.tag)

    def ev_pick_i(self, node, frame, fid):
        return self.pick(node, fid, "int")

    def ev_pick_b(self, node, frame, fid):
        return self.pick(node, fid, "bool")

    def ev_error(self, node, frame, fid):
        self.error_frame = frame
        raise _Error(node.label)

    def ev_mzero(self, node, frame, fid):
        raise _MZero(node.label)

    def ev_assert(self, node, frame, fid):
        c = self.ev(node.expr, frame, fid)
        if self.branch(node, c, fid):
            return True
        raise _Error(node.label) if type(node) is Assert else _MZero(node.label)


_DISPATCH = {
    BinOp: Interpreter.ev_binop,
    Not: Interpreter.ev_not,
    PatTest: Interpreter.ev_pattest,
    Record: Interpreter.ev_record,
    Proj: Interpreter.ev_proj,
    Retag: Interpreter.ev_retag,
    ListLit: Interpreter.ev_list,
    Cons: Interpreter.ev_cons,
    Variant: Interpreter.ev_variant,
    Destruct: Interpreter.ev_destruct,
    PolyEq: Interpreter.ev_polyeq,
    Untouch: Interpreter.ev_untouch,
    PickI: Interpreter.ev_pick_i,
    PickB: Interpreter.ev_pick_b,
    ErrorExpr: Interpreter.ev_error,
    MZero: Interpreter.ev_mzero,
    Assert: Interpreter.ev_assert,
    Assume: Interpreter.ev_assert,
}


# Deep object-language recursion maps onto Python recursion, so runs execute
# on a worker thread with a large stack.
_STACK_BYTES = 512 * 1024 * 1024
_RECURSION = 400_000


def run_deep(fn, *args, **kwargs):
    box: dict = {}

    def target():
        try:
            box["v"] = fn(*args, **kwargs)
        except BaseException as exc:  # re-raised on the calling thread
            box["e"] = exc

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, _RECURSION))
    old_size = threading.stack_size()
    threading.stack_size(_STACK_BYTES)
    try:
        th = threading.Thread(target=target, daemon=True)
        th.start()
    finally:
        threading.stack_size(old_size)
    th.join()
    if "e" in box:
        raise box["e"]
    return box["v"]


def eval(e: Expr, feed: Optional[Feed] = None, step_budget: int = 50_000, *,
         max_branches: Optional[int] = None):
    """Run ``e`` once; return ``(Outcome, Trace)``."""
    interp = Interpreter(feed if feed is not None else Feed(), step_budget,
                         max_branches=max_branches)
    if max_branches is not None:
        interp.record_branches = True
    prog = prepared(e)
    outcome = run_deep(interp.run, prog)
    if max_branches is not None and len(interp.trace.branches) > max_branches:
        del interp.trace.branches[max_branches:]
        interp.trace.truncated = True
    return outcome, interp.trace


def replay(e: Expr, feed: Feed, step_budget: int = 50_000) -> Outcome:
    """Re-run with ``feed`` in fail-on-miss mode; raises :class:`FeedMiss`."""
    strict = Feed(dict(feed.values), policy="fail")
    outcome, _ = eval(e, strict, step_budget)
    return outcome


def run_concolic(e: Expr, feed: Feed, step_budget: int, max_branches: int):
    """A symbolic run for the concolic engine; ``e`` should be prepared."""
    interp = Interpreter(feed, step_budget, symbolic=True, max_branches=max_branches,
                         record_branches=False)
    outcome = run_deep(interp.run, e)
    interp.trace.tail_formulas = interp.segment
    return outcome, interp.trace
