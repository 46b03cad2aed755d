"""Explain a witness: which declaration failed, what was expected, what was seen.

The witness is replayed once more with every checker lambda watched, giving a
tree of checker calls.  The failing declaration is the last top-level
declaration check that did not return true; its "actual" type is read off the
failing path through that tree.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

from .instrument import Instrumented, SiteInfo
from .interp import (
    ERROR, Closure, Feed, Interpreter, prepared, render_value, run_deep, shape,
)
from .syntax import (
    BinOp, DeclInfo, Not, Proj, TArrow, TBool, TDep, TForall, TInt, TIntersect, TMu, TPoly,
    TRefine, render, render_type,
)

UNKNOWN_TYPE = "Type unknown"
HEADER = "** Bluejay Type Errors **"
RULE = "-" * 20
_SHORT_CLAUSE = 48
_SHORT_BODY = 24


@dataclass(frozen=True)
class Diagnosis:
    clause: str
    value: str
    expected: str
    actual: str
    kind: str
    site: Optional[str] = None


def diagnose(inst: Instrumented, program, feed: Feed, step_budget: int = 50_000) -> Diagnosis:
    """Replay ``feed`` on ``program`` (the instrumented or normalized form)."""
    strict = Feed(dict(feed.values), policy="fail")
    it = Interpreter(strict, step_budget, watch=inst.watch)
    outcome = run_deep(it.run, prepared(program))
    if outcome.kind != "error":
        return Diagnosis("-", "-", "-", f"replay ended with {outcome}", "none", outcome.site)
    site = inst.sites.get(outcome.site)
    if site is not None and site.kind == "wrap_arg":
        rec = _last_failing(it.calls, set(inst.checks))
        if rec is not None:
            actual = _actual(rec, inst)
        else:
            seen = _frame_values(it, ("a", "e"))
            actual = _value_text(seen["a"] if "a" in seen else seen.get("e", ERROR))
        return Diagnosis(clause_text(site.decl, site.info), site.decl or "-",
                         site.expected or "-", actual, "wrap", outcome.site)
    root = _failing_decl(it.calls, inst)
    if root is not None:
        info: SiteInfo = inst.decls[root["label"]]
        if site is not None and site.kind in ("guard", "assert", "nomatch") and site.node is not None:
            actual = f"{_site_actual(site, it)} at {_clip(render(site.node), 40)}"
        else:
            actual = _decl_actual(root, inst)
        return Diagnosis(clause_text(info.decl, info.info), info.decl, info.expected,
                         actual, "decl", outcome.site)
    if site is not None and site.node is not None:
        text = _clip(render(site.node))
        actual = _site_actual(site, it)
        expected = site.expected or ("true" if site.kind == "assert" else "-")
        return Diagnosis(text, text, expected, actual, site.kind, outcome.site)
    return Diagnosis(outcome.site or "-", "-", "-", UNKNOWN_TYPE, "runtime", outcome.site)


def _failing_decl(calls: list, inst: Instrumented):
    for rec in reversed(calls):
        if rec["label"] in inst.decls:
            if rec["result"] is not True:
                return rec
            return None
    return None


def _last_failing(calls: list, labels: set):
    found = None
    stack = list(reversed(calls))
    while stack:
        rec = stack.pop()
        if rec["label"] in labels and rec["result"] is not True:
            found = rec
        stack.extend(reversed(rec["children"]))
    return found


def _failing_child(rec):
    kids = rec["children"]
    for k in reversed(kids):
        if k["result"] is not True:
            return k
    return kids[-1] if kids else None


def _decl_actual(root, inst: Instrumented) -> str:
    child = _failing_child(root)
    if child is None:
        return _value_text(root["arg"])
    return _actual(child, inst)


def _actual(rec, inst: Instrumented) -> str:
    t = inst.checks.get(rec["label"])
    arg = rec["arg"]
    k = type(t)
    if k in (TArrow, TDep, TForall, TIntersect, TMu):
        if type(arg) is not Closure and k is not TMu:
            return shape(arg)
        child = _failing_child(rec)
        if child is None:
            return UNKNOWN_TYPE if k is not TMu else _value_text(arg)
        inner = _actual(child, inst)
        if k is TArrow:
            return f"({render_type(t.dom)} -> {inner})"
        if k is TDep:
            return f"(({t.var} : {render_type(t.dom)}) -> {inner})"
        return inner
    if k is TRefine:
        base = rec["children"][0] if rec["children"] else None
        if base is None or base["result"] is True:
            return _value_text(arg)
        return _actual(base, inst)
    if k in (TInt, TBool, TPoly):
        return shape(arg)
    return _value_text(arg)


def _value_text(v) -> str:
    if v is ERROR:
        return UNKNOWN_TYPE
    if type(v) is Closure:
        return "function"
    return render_value(v)


def _frame_values(it: Interpreter, bases: tuple) -> dict:
    """Latest binding for each base name, searching outward from the error frame."""
    vals: dict = {}
    f = it.error_frame
    while f is not None and len(vals) < len(bases):
        for name in reversed(list(f.vars)):
            base = name.split("$", 1)[0]
            if base in bases and base not in vals:
                vals[base] = f.vars[name]
        f = f.parent
    return vals


def _site_actual(site: SiteInfo, it: Interpreter) -> str:
    if site.kind == "assert":
        return "false"
    if site.kind == "nomatch":
        return "no matching pattern"
    if site.kind != "guard":
        return UNKNOWN_TYPE
    vals = _frame_values(it, ("gl", "gr"))
    node = site.node
    if isinstance(node, BinOp) and "gl" in vals and "gr" in vals:
        return f"{shape(vals['gl'])} {node.op} {shape(vals['gr'])}"
    if isinstance(node, Not) and "gl" in vals:
        return f"not {shape(vals['gl'])}"
    if isinstance(node, Proj) and "gl" in vals:
        return _value_text(vals["gl"])
    return UNKNOWN_TYPE


def _clip(text: str, width: int = 72) -> str:
    text = " ".join(text.split())
    return text if len(text) <= width else text[: width - 3] + "..."


def clause_text(name: Optional[str], info: Optional[DeclInfo]) -> str:
    """The declaration as shown on the ``Found at clause`` line."""
    if info is None:
        return f"let {name} ... in ..." if name else "-"
    full = f"{info.header} = {info.rhs} in {info.body}"
    if len(full) <= _SHORT_CLAUSE:
        return full
    body = info.body if len(info.body) <= _SHORT_BODY else "..."
    words = info.header.split()
    if len(words) > 1 and words[1].startswith("(") or words[1:2] == ["rec"] and words[2].startswith("("):
        return f"{info.header} = ... in {body}"
    head = "let rec" if words[1:2] == ["rec"] else "let"
    return f"{head} {name} ... in {body}"


def format_report(d: Optional[Diagnosis]) -> str:
    if d is None:
        return "No errors found"
    return "\n".join([
        HEADER,
        f"- Found at clause : {d.clause}",
        RULE,
        f"* Value    : {d.value}",
        f"* Expected : {d.expected}",
        f"* Actual   : {d.actual}",
    ])


def structured(record: dict) -> str:
    """One line of JSON."""
    return json.dumps(record, sort_keys=True, default=str)


def diagnosis_dict(d: Optional[Diagnosis]) -> Optional[dict]:
    return asdict(d) if d is not None else None


__all__ = ["Diagnosis", "diagnose", "format_report", "clause_text", "structured", "diagnosis_dict"]
