from __future__ import annotations

import random

from hypothesis import given, strategies as st

from conftest import run
from progen import gen_program
from typerefute.instrument import instrument_program
from typerefute.interp import Feed, eval as run_once, render_value
from typerefute.normalize import normalize, prepare
from typerefute.parser import parse
from typerefute.syntax import App, BinOp, Fun, If, Int, Let, PickB, PickI, Var, walk


def _labels(e) -> list:
    return [n.label for n in walk(e) if n.label is not None]


def test_nested_arithmetic_is_bound_in_order():
    n = normalize(parse("(1 + 2) + 3"))
    assert isinstance(n, Let) and n.rhs == BinOp("+", Int(1), Int(2))
    inner = n.body
    assert isinstance(inner, Let) and inner.rhs == BinOp("+", Var(n.name), Int(3))
    assert run(n).value == 6


def test_function_literal_is_bound_unchanged():
    n = normalize(parse("fun x -> x"))
    f = n.rhs if isinstance(n, Let) else n
    assert isinstance(f, Fun) and f.body == Var(f.param)
    assert run(App(parse("fun x -> x"), Int(4))).value == 4


def test_conditions_are_bound_to_clauses():
    n = normalize(parse("if 1 < 2 then (if 2 < 1 then 1 else 2) else 3"))
    conds = [x.cond for x in walk(n) if isinstance(x, If)]
    assert conds and all(isinstance(c, Var) for c in conds)
    assert run(n).value == 2


def test_clause_labels_are_unique():
    n = normalize(instrument_program(parse("let f (x : int) : int = x + 1 in f 2")).program)
    labels = _labels(n)
    assert len(labels) == len(set(labels))


def test_prepare_keeps_existing_labels():
    e = If(PickB(label="keep$1"), Int(1), Int(2))
    assert "keep$1" in _labels(prepare(e))


def _program_with_picks(rng: random.Random):
    # a tiny nondeterministic arithmetic program, built directly as core syntax
    body = BinOp("+", PickI(label="pa$1"), Int(rng.randint(-3, 3)))
    for i in range(rng.randint(1, 3)):
        body = If(PickB(label=f"pb${i}"), BinOp("<", body, Int(rng.randint(-3, 3))),
                  BinOp("==", body, Int(0)))
        body = If(body, Int(i), PickI(label=f"pi${i}"))
    return body


@given(st.integers(0, 10**6), st.integers(0, 2**32))
def test_normalize_preserves_outcome_on_core_programs(seed, feed_seed):
    e = _program_with_picks(random.Random(seed))
    a, ta = run_once(prepare(e), Feed(seed=feed_seed, int_range=(-4, 4)))
    b, tb = run_once(normalize(e), Feed(seed=feed_seed, int_range=(-4, 4)))
    assert (a.kind, a.value, a.site) == (b.kind, b.value, b.site)
    assert ta.picks == tb.picks


@given(st.integers(0, 10**6), st.integers(0, 2**32))
def test_normalize_preserves_outcome_on_instrumented_programs(seed, feed_seed):
    prog = instrument_program(parse(gen_program(random.Random(seed)))).program
    a, ta = run_once(prepare(prog), Feed(seed=feed_seed, int_range=(-8, 8)), 20_000)
    b, tb = run_once(normalize(prog), Feed(seed=feed_seed, int_range=(-8, 8)), 200_000)
    if a.kind == "steplimit":
        return  # the normalized form takes more steps; only completed runs compare
    assert (a.kind, a.site) == (b.kind, b.site)
    if a.kind == "value":
        # closures differ only in renamed binders, so compare the printed value
        assert render_value(a.value) == render_value(b.value)
    assert ta.picks == tb.picks
