"""Path-constraint formulas and the two satisfiability back ends.

Terms are tiny immutable trees with one sort each: ``Int``, ``Bool``,
``Fun`` (opaque function identifiers, carried as integers) and ``BV<n>``
(record label sets, bit i = the i-th program label).  ``SmtProcess`` talks
SMT-LIB 2 to an external solver; ``BoundedEnumerator`` searches small
domains directly.
"""

from __future__ import annotations

import logging
import os
import re
import select
import shutil
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

log = logging.getLogger(__name__)

INT, BOOL, FUN = "Int", "Bool", "Fun"
SOLVER_ENV = "TYPEREFUTE_SOLVER"


def bv_sort(width: int) -> str:
    return f"BV{width}"


# -- terms ---------------------------------------------------------------------


class Term:
    __slots__ = ()


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str
    sort: str


@dataclass(frozen=True, slots=True)
class Lit(Term):
    value: Union[int, bool]
    sort: str


@dataclass(frozen=True, slots=True)
class Op(Term):
    op: str
    args: tuple
    sort: str


TRUE = Lit(True, BOOL)
FALSE = Lit(False, BOOL)

_RESULT_SORT = {
    "+": INT, "-": INT, "*": INT, "<": BOOL, "<=": BOOL, ">": BOOL, ">=": BOOL,
    "==": BOOL, "!=": BOOL, "and": BOOL, "or": BOOL, "xor": BOOL, "not": BOOL,
}


def literal(v) -> Lit:
    if type(v) is bool:
        return Lit(v, BOOL)
    if type(v) is int:
        return Lit(v, INT)
    raise TypeError(f"no literal for {v!r}")


def eq(a: Term, b: Term) -> Term:
    return Op("=", (a, b), BOOL)


def not_(a: Term) -> Term:
    return Op("not", (a,), BOOL)


def and_(*xs: Term) -> Term:
    return Op("and", tuple(xs), BOOL) if len(xs) != 1 else xs[0]


def bvand(a: Term, b: Term) -> Term:
    return Op("bvand", (a, b), a.sort)


def sort_of(t: Term) -> str:
    return t.sort


def pick_var_name(key) -> str:
    return f"p!{key.clause}!{key.depth}"


def clause_var_name(key) -> str:
    return f"c!{key.clause}!{key.depth}"


def is_pick_var(name: str) -> bool:
    return name.startswith("p!")


def encode_op(key, op: str, terms: list) -> tuple:
    """Formulas for one arithmetic/boolean clause: ``c_k = a_k op b_k``.

    Returns ``(result_var, formulas)``."""
    sort = _RESULT_SORT[op]
    var = Var(clause_var_name(key), sort)
    if op == "==":
        rhs = Op("=", tuple(terms), BOOL)
    elif op == "!=":
        rhs = not_(Op("=", tuple(terms), BOOL))
    else:
        rhs = Op(op, tuple(terms), sort)
    return var, [eq(var, rhs)]


# -- record labels as bitvectors ---------------------------------------------------


@dataclass(frozen=True)
class LabelLayout:
    """Fixed label -> bit mapping for one program (bit 0 = first label)."""

    labels: tuple

    @classmethod
    def of(cls, labels) -> "LabelLayout":
        return cls(tuple(sorted(set(labels))))

    @property
    def width(self) -> int:
        return max(1, len(self.labels))

    def bits(self, labels) -> int:
        out = 0
        for l in labels:
            out |= 1 << self.labels.index(l)
        return out

    def literal(self, labels) -> Lit:
        return Lit(self.bits(labels), bv_sort(self.width))

    def bitstring(self, labels) -> str:
        return format(self.bits(labels), f"0{self.width}b")


class UnsupportedTerm(Exception):
    """A clause form with no formula encoding."""


def encode_clause(clause, key, operands: dict, layout: Optional[LabelLayout] = None) -> list:
    """Encode one normalized clause ``x = rhs`` at ``key``.

    ``operands`` maps each variable name used by ``rhs`` to its term, or to a
    concrete record label set (a frozenset) for record-valued operands, or to
    the string ``"fun"`` for function values."""
    from . import syntax as S

    var_name = clause_var_name(key)
    rhs = clause.rhs if isinstance(clause, S.Let) else clause

    def term_of(a):
        if isinstance(a, S.Int) or isinstance(a, S.Bool):
            return literal(a.value)
        if isinstance(a, S.Var):
            if a.name not in operands:
                raise UnsupportedTerm(f"no term for {a.name}")
            return operands[a.name]
        raise UnsupportedTerm(f"non-atomic operand {type(a).__name__}")

    if isinstance(rhs, S.BinOp):
        _, fs = encode_op(key, rhs.op, [term_of(rhs.left), term_of(rhs.right)])
        return fs
    if isinstance(rhs, S.Not):
        _, fs = encode_op(key, "not", [term_of(rhs.operand)])
        return fs
    if isinstance(rhs, (S.Int, S.Bool, S.Var)):
        t = term_of(rhs)
        return [eq(Var(var_name, t.sort), t)]
    if isinstance(rhs, S.PickI):
        return []  # a free Int variable
    if isinstance(rhs, S.PickB):
        return []
    if isinstance(rhs, S.PatTest):
        scrut = operands.get(rhs.expr.name) if isinstance(rhs.expr, S.Var) else None
        out = Var(var_name, BOOL)
        pat = rhs.pattern
        if isinstance(pat, S.PRecord):
            if layout is None:
                raise UnsupportedTerm("record test without a label layout")
            if not isinstance(scrut, Term):
                scrut = layout.literal(scrut if isinstance(scrut, frozenset) else ())
            p = layout.literal(pat.labels)
            return [eq(out, eq(p, bvand(scrut, p)))]
        if isinstance(pat, S.PFun):
            return [eq(out, Lit(scrut == "fun", BOOL))]
        if isinstance(pat, S.PInt):
            return [eq(out, Lit(isinstance(scrut, Term) and scrut.sort == INT, BOOL))]
        if isinstance(pat, S.PBool):
            return [eq(out, Lit(isinstance(scrut, Term) and scrut.sort == BOOL, BOOL))]
        raise UnsupportedTerm(f"pattern {type(pat).__name__}")
    raise UnsupportedTerm(type(rhs).__name__)


def variant_tag_term(ctor: str, ctors: tuple) -> Lit:
    """Constructors are encoded as a bounded integer enumeration."""
    return Lit(ctors.index(ctor), INT)


# -- evaluation under a model --------------------------------------------------------


def evaluate(t: Term, model: dict):
    k = type(t)
    if k is Lit:
        return t.value
    if k is Var:
        return model[t.name]
    args = [evaluate(a, model) for a in t.args]
    op = t.op
    if op == "+":
        return args[0] + args[1]
    if op == "-":
        return args[0] - args[1]
    if op == "*":
        return args[0] * args[1]
    if op == "<":
        return args[0] < args[1]
    if op == "<=":
        return args[0] <= args[1]
    if op == ">":
        return args[0] > args[1]
    if op == ">=":
        return args[0] >= args[1]
    if op == "=" or op == "==":
        return args[0] == args[1]
    if op == "!=":
        return args[0] != args[1]
    if op == "not":
        return not args[0]
    if op == "and":
        return all(args)
    if op == "or":
        return any(args)
    if op == "xor":
        return args[0] != args[1]
    if op == "bvand":
        return args[0] & args[1]
    raise UnsupportedTerm(op)


def free_vars(t: Term, out: Optional[dict] = None) -> dict:
    out = {} if out is None else out
    stack = [t]
    while stack:
        x = stack.pop()
        if type(x) is Var:
            out[x.name] = x.sort
        elif type(x) is Op:
            stack.extend(x.args)
    return out


# -- SMT-LIB rendering ----------------------------------------------------------------

_SMT_OPS = {"==": "=", "xor": "xor", "bvand": "bvand"}


def smt_sort(sort: str) -> str:
    if sort in (INT, FUN):
        return "Int"
    if sort == BOOL:
        return "Bool"
    if sort.startswith("BV"):
        return f"(_ BitVec {int(sort[2:])})"
    raise ValueError(sort)


def smt_symbol(name: str) -> str:
    return f"|{name}|"


def to_smt(t: Term) -> str:
    k = type(t)
    if k is Var:
        return smt_symbol(t.name)
    if k is Lit:
        if t.sort == BOOL:
            return "true" if t.value else "false"
        if t.sort.startswith("BV"):
            return "#b" + format(t.value, f"0{int(t.sort[2:])}b")
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    op = t.op
    if op == "!=":
        return f"(not (= {' '.join(to_smt(a) for a in t.args)}))"
    if op == "and" and not t.args:
        return "true"
    return f"({_SMT_OPS.get(op, op)} {' '.join(to_smt(a) for a in t.args)})"


def smt_script(formulas: list) -> tuple:
    """Declarations and assertions for a query; returns ``(text, var_names)``."""
    sorts: dict = {}
    for f in formulas:
        free_vars(f, sorts)
    names = sorted(sorts)
    lines = [f"(declare-const {smt_symbol(n)} {smt_sort(sorts[n])})" for n in names]
    lines += [f"(assert {to_smt(f)})" for f in formulas]
    return "\n".join(lines), names, sorts


# -- results ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Sat:
    model: dict


@dataclass(frozen=True)
class Unsat:
    bounded: bool = False  # True when only a bounded domain was searched


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


SolverResult = Union[Sat, Unsat, Unknown]


class SolverUnavailable(Exception):
    pass


# -- external SMT process -----------------------------------------------------------------


def find_solver(path: Optional[str] = None) -> Optional[str]:
    """Resolve the solver executable: explicit path, environment, then PATH."""
    for cand in (path, os.environ.get(SOLVER_ENV)):
        if cand:
            found = shutil.which(cand) or (cand if os.path.exists(cand) else None)
            if found:
                return found
            return None
    for name in ("z3", "cvc5"):
        found = shutil.which(name)
        if found:
            return found
    return None


def _solver_args(exe: str) -> list:
    base = os.path.basename(exe)
    if base.startswith("z3"):
        return [exe, "-in", "-smt2"]
    if base.startswith("cvc5"):
        return [exe, "--lang=smt2", "--incremental", "--produce-models"]
    return [exe]


_SEXP_TOKEN = re.compile(r"\s*(\(|\)|\|[^|]*\||[^\s()|]+)")


def parse_sexp(text: str):
    pos = 0
    stack: list = [[]]
    while True:
        m = _SEXP_TOKEN.match(text, pos)
        if not m:
            break
        tok = m.group(1)
        pos = m.end()
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ValueError("unbalanced s-expression")
    return stack[0]


def _model_value(v, sort: str):
    if isinstance(v, list):
        if len(v) == 2 and v[0] == "-":
            return -_model_value(v[1], sort)
        raise ValueError(f"unexpected model value {v}")
    if sort == BOOL:
        return v == "true"
    if v.startswith("#b"):
        return int(v[2:], 2)
    if v.startswith("#x"):
        return int(v[2:], 16)
    return int(v)


class SmtProcess:
    """A solver executable spoken to over stdin/stdout.

    One process is reused, but every query starts with ``(reset)`` so no
    assertions carry over between queries."""

    def __init__(self, path: Optional[str] = None, timeout_s: float = 10.0,
                 log_dir: Optional[str] = None):
        exe = find_solver(path)
        if exe is None:
            raise SolverUnavailable(
                f"no SMT solver found (pass --solver or set {SOLVER_ENV})")
        self.exe = exe
        self.timeout_s = timeout_s
        self.log_dir = Path(log_dir) if log_dir else None
        self.queries = 0
        self.proc: Optional[subprocess.Popen] = None
        self._buf = b""
        self._start()

    def _start(self):
        try:
            self.proc = subprocess.Popen(
                _solver_args(self.exe), stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT, bufsize=0)
        except OSError as exc:
            raise SolverUnavailable(str(exc)) from exc
        self._buf = b""

    def close(self):
        if self.proc is not None:
            try:
                self.proc.stdin.write(b"(exit)\n")
                self.proc.stdin.flush()
            except OSError:
                pass
            self.proc.kill()
            self.proc.wait()
            self.proc = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _send(self, text: str):
        self.proc.stdin.write(text.encode())
        self.proc.stdin.flush()

    def _read_line(self, deadline: float) -> str:
        while b"\n" not in self._buf:
            self._fill(deadline)
        line, _, self._buf = self._buf.partition(b"\n")
        return line.decode().strip()

    def _read_sexp(self, deadline: float) -> str:
        while True:
            text = self._buf.decode(errors="replace")
            depth, started = 0, False
            for i, ch in enumerate(text):
                if ch == "(":
                    depth += 1
                    started = True
                elif ch == ")":
                    depth -= 1
                    if started and depth == 0:
                        self._buf = text[i + 1:].encode()
                        return text[: i + 1]
            self._fill(deadline)

    def _fill(self, deadline: float):
        fd = self.proc.stdout.fileno()
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise TimeoutError
        ready, _, _ = select.select([fd], [], [], remaining)
        if not ready:
            raise TimeoutError
        chunk = os.read(fd, 65536)
        if not chunk:
            raise EOFError("solver closed its output")
        self._buf += chunk

    def check(self, formulas: list) -> SolverResult:
        body, names, sorts = smt_script(formulas)
        self.queries += 1
        script = "(reset)\n(set-option :produce-models true)\n(set-logic ALL)\n" + body + "\n(check-sat)\n"
        if self.log_dir is not None:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            (self.log_dir / f"query{self.queries:05d}.smt2").write_text(script)
        deadline = time.monotonic() + self.timeout_s
        try:
            if self.proc is None or self.proc.poll() is not None:
                self._start()
            self._send(script)
            answer = self._read_line(deadline)
            while answer in ("", "success"):
                answer = self._read_line(deadline)
            if answer == "unsat":
                return Unsat()
            if answer != "sat":
                return Unknown(answer)
            if not names:
                return Sat({})
            self._send(f"(get-value ({' '.join(smt_symbol(n) for n in names)}))\n")
            reply = parse_sexp(self._read_sexp(deadline))
            model = {}
            for pair in reply[0]:
                name = pair[0].strip("|")
                model[name] = _model_value(pair[1], sorts[name])
            return Sat(model)
        except (TimeoutError, EOFError, OSError, ValueError, IndexError, KeyError) as exc:
            log.info("solver query failed: %r", exc)
            self.close()
            return Unknown(type(exc).__name__)


# -- bounded enumerator ---------------------------------------------------------------------


@dataclass(frozen=True)
class EnumeratorBounds:
    int_lo: int = -16
    int_hi: int = 16
    fun_ids: int = 4
    max_nodes: int = 2_000_000
    seed_constants: bool = True  # also try integer literals of the query, and their neighbours


def _int_order(lo: int, hi: int) -> list:
    vals = [0] if lo <= 0 <= hi else []
    for m in range(1, max(abs(lo), abs(hi)) + 1):
        if m <= hi:
            vals.append(m)
        if -m >= lo:
            vals.append(-m)
    return vals if vals else list(range(lo, hi + 1))


_INT_LIMIT = 2**62


def _int_constants(formulas) -> set:
    out, stack = set(), list(formulas)
    while stack:
        x = stack.pop()
        if type(x) is Lit and x.sort == INT and abs(x.value) < _INT_LIMIT:
            out.add(x.value)
        elif type(x) is Op:
            stack.extend(x.args)
    return out


class BoundedEnumerator:
    """Backtracking search over small domains.

    Variables defined by an equation ``v = t`` (intermediate clause values)
    are computed rather than enumerated; only the remaining free variables
    range over the bounds.  ``Unsat`` results are marked ``bounded``."""

    def __init__(self, bounds: EnumeratorBounds = EnumeratorBounds()):
        self.bounds = bounds
        self.queries = 0

    def domain(self, sort: str, constants=()) -> list:
        b = self.bounds
        if sort == BOOL:
            return [False, True]
        if sort == INT:
            base = _int_order(b.int_lo, b.int_hi)
            extra = sorted({c + d for c in constants for d in (0, -1, 1)} - set(base),
                           key=lambda v: (abs(v), v < 0))
            return base + extra
        if sort == FUN:
            return list(range(b.fun_ids))
        if sort.startswith("BV"):
            width = int(sort[2:])
            return list(range(1 << min(width, 12)))
        raise ValueError(sort)

    def check(self, formulas: list) -> SolverResult:
        self.queries += 1
        sorts: dict = {}
        for f in formulas:
            free_vars(f, sorts)
        # Split into definitions v = t and plain constraints.
        defs: dict = {}
        constraints = []
        for f in formulas:
            if (type(f) is Op and f.op == "=" and type(f.args[0]) is Var
                    and not is_pick_var(f.args[0].name) and f.args[0].name not in defs
                    and f.args[0].name not in free_vars(f.args[1])):
                defs[f.args[0].name] = f.args[1]
            else:
                constraints.append(f)
        free = [n for n in sorted(sorts) if n not in defs]
        order = self._def_order(defs)
        if order is None:
            constraints.extend(eq(Var(n, sorts[n]), t) for n, t in defs.items())
            free = sorted(sorts)
            defs, order = {}, []
        # Each constraint is tested once all its variables are known.
        need = [set(free_vars(c)) for c in constraints]
        known_after: list = []
        free_index = {n: i for i, n in enumerate(free)}
        def_deps = {n: self._closure_free(n, defs, free_index) for n in defs}
        for c_vars in need:
            idx = -1
            for v in c_vars:
                idx = max(idx, free_index[v] if v in free_index else def_deps[v])
            known_after.append(idx)
        checks_at: list = [[] for _ in range(len(free) + 1)]
        for c, idx in zip(constraints, known_after):
            checks_at[idx + 1].append(c)
        defs_at: list = [[] for _ in range(len(free) + 1)]
        for n in order:
            defs_at[def_deps[n] + 1].append(n)
        consts = _int_constants(formulas) if self.bounds.seed_constants else ()
        domains = [self.domain(sorts[n], consts) for n in free]
        model: dict = {}
        nodes = 0

        def settle(level: int) -> bool:
            for n in defs_at[level]:
                try:
                    model[n] = evaluate(defs[n], model)
                except (KeyError, UnsupportedTerm):
                    return False
            for c in checks_at[level]:
                if not evaluate(c, model):
                    return False
            return True

        def search(i: int) -> bool:
            nonlocal nodes
            if i == len(free):
                return True
            name = free[i]
            for v in domains[i]:
                nodes += 1
                if nodes > self.bounds.max_nodes:
                    raise TimeoutError
                model[name] = v
                if settle(i + 1) and search(i + 1):
                    return True
            del model[name]
            return False

        try:
            if settle(0) and search(0):
                return Sat({n: model[n] for n in sorts})
        except TimeoutError:
            return Unknown("enumeration budget")
        return Unsat(bounded=True)

    @staticmethod
    def _def_order(defs: dict) -> Optional[list]:
        order, state = [], {}

        def visit(n) -> bool:
            if state.get(n) == 1:
                return False
            if state.get(n) == 2:
                return True
            state[n] = 1
            for d in free_vars(defs[n]):
                if d in defs and not visit(d):
                    return False
            state[n] = 2
            order.append(n)
            return True

        for n in defs:
            if not visit(n):
                return None
        return order

    @staticmethod
    def _closure_free(name: str, defs: dict, free_index: dict) -> int:
        seen, stack, idx = set(), [name], -1
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            if n in free_index:
                idx = max(idx, free_index[n])
            elif n in defs:
                stack.extend(free_vars(defs[n]))
        return idx

    def close(self):
        pass


def check(formulas: list, handle) -> SolverResult:
    """Satisfiability of a conjunction of boolean formulas."""
    return handle.check(formulas)


def make_solver(kind: str = "auto", path: Optional[str] = None, timeout_s: float = 10.0,
                log_dir: Optional[str] = None):
    """``kind`` is ``smt``, ``enum`` or ``auto`` (SMT when a binary is found)."""
    if kind == "enum":
        return BoundedEnumerator()
    if kind == "smt":
        return SmtProcess(path, timeout_s, log_dir)
    if find_solver(path) is not None:
        return SmtProcess(path, timeout_s, log_dir)
    log.warning("no SMT solver found; falling back to the bounded enumerator")
    return BoundedEnumerator()
