from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from conftest import check_expr, gen_expr, run
from progen import gen_type
from progen import gen_expr as gen_src
from progen import src
from typerefute.instrument import IllFormedType, InstrumentConfig, embed, instrument_program
from typerefute.interp import Feed
from typerefute.oracle import EnumBounds, NoErrorWithinBounds, Refuted, exhaustive_refute
from typerefute.parser import parse, parse_type
from typerefute.syntax import (
    App, BinOp, Bool, ErrorExpr, Fun, If, Int, Let, Match, PAny, Proj, Record, Untouch, Var, walk,
)


def _field(e, name: str):
    """The ``name`` component of an embedding record."""
    recs = [n for n in walk(e) if isinstance(n, Record) and [k for k, _ in n.fields] == ["gen", "check", "wrap"]]
    return dict(recs[-1].fields)[name]


def test_int_checker_rejects_bool():
    assert run(check_expr("int", "true")).value is False
    assert run(check_expr("int", "3")).value is True


def test_arrow_generator_can_reach_error_on_wrong_argument():
    e = App(gen_expr("int -> int"), Bool(True))
    assert isinstance(exhaustive_refute(e), Refuted)


def test_arrow_generator_never_errors_on_right_argument():
    e = App(gen_expr("int -> int"), Int(3))
    v = exhaustive_refute(e, EnumBounds(int_lo=-2, int_hi=2))
    assert isinstance(v, NoErrorWithinBounds) and v.exhaustive


@pytest.mark.parametrize("pick,expected", [(-3, ("mzero", None)), (7, ("value", 7))])
def test_refinement_generator_discards_failing_values(pick, expected):
    out = run(gen_expr("{int | fun a -> a > 0}"), Feed(int_range=(pick, pick)))
    assert (out.kind, out.value) == expected


@pytest.mark.parametrize("t", ["int", "bool"])
def test_wrap_is_identity_on_base_types(t):
    w = _field(embed(parse_type(t)), "wrap")
    assert isinstance(w, Fun) and w.body == Var(w.param)


def test_record_wrap_hides_extra_labels():
    e = App(Proj(embed(parse_type("{a : int}")), "wrap"), parse("{a = 1; b = 2}"))
    assert run(Proj(e, "b")).kind == "error"
    assert run(Proj(e, "a")).value == 1


def test_record_wrap_of_a_value_missing_labels_is_an_error():
    e = App(Proj(embed(parse_type("{a : int}")), "wrap"), parse("{b = 2}"))
    assert run(e).kind == "error"


def test_not_is_guarded_with_an_error_arm():
    p = instrument_program(parse("not x")).program
    m = next(n for n in walk(p) if isinstance(n, Match))
    pat, body = m.arms[-1]
    assert isinstance(pat, PAny) and isinstance(body, ErrorExpr)


def test_literal_is_unchanged():
    assert instrument_program(parse("1")).program == Int(1)


def test_untouchable_arithmetic_reaches_error():
    guarded = instrument_program(BinOp("+", Var("x"), Int(1))).program
    out = run(Let("x", Untouch("a"), guarded))
    assert out.kind == "error"


def test_guards_can_be_disabled():
    p = instrument_program(parse("1 + 2"), InstrumentConfig(guard_primitives=False)).program
    assert p == BinOp("+", Int(1), Int(2))


def test_declaration_check_reaches_error():
    inst = instrument_program(parse("let id (x : bool) : bool = 1 in id"))
    assert isinstance(exhaustive_refute(inst.program), Refuted)
    assert any(s.kind == "decl" for s in inst.sites.values())


def test_well_typed_declaration_is_clean():
    inst = instrument_program(parse("let id (x : bool) : bool = x in id"))
    assert isinstance(exhaustive_refute(inst.program), NoErrorWithinBounds)


@pytest.mark.parametrize("wrap", [True, False])
def test_wrapper_checks_the_argument_of_a_use(wrap):
    p = parse("let (f : (int -> int)) = fun x -> x + 1 in f true")
    inst = instrument_program(p, InstrumentConfig(wrap_enabled=wrap))
    kinds = set()
    for seed in range(16):  # the only pick is the wrapper's pick_b
        out = run(inst.program, Feed(seed=seed))
        assert out.kind == "error"  # the body's own guard fails either way
        kinds.add(inst.sites[out.site].kind)
    assert ("wrap_arg" in kinds) == wrap


@pytest.mark.parametrize("t", [
    "((A of int) -> int) && (int -> bool)",
    "((A of int) -> int) && ((A of bool) -> bool)",
])
def test_ill_formed_types(t):
    with pytest.raises(IllFormedType):
        embed(parse_type(t))


def test_intersection_type_is_embeddable():
    embed(parse_type("((A of int) -> int) && ((B of bool) -> bool)"))


def test_poly_tags_are_fresh_per_binder():
    inst = instrument_program(parse(
        "let f (type a) (x : a) : a = x in let g (type a) (x : a) : a = x in g"))
    tags = [n.tag for n in walk(inst.program) if isinstance(n, Untouch)]
    assert len(tags) == len(set(tags)) >= 2


_KINDS = {"error", "mzero", "steplimit"}


@given(st.integers(0, 10**6), st.integers(0, 2**32))
def test_checker_range(seed, feed_seed):
    rng = random.Random(seed)
    t = gen_type(rng, 2)
    e = gen_src(rng, gen_type(rng, 2) if rng.random() < 0.5 else t, 2)
    out = run(check_expr(src(t), e), Feed(seed=feed_seed, int_range=(-8, 8)), 20_000)
    assert out.kind in _KINDS or out.value is True or out.value is False


_SMALL = ["int", "bool", "{int | fun v -> v > 2}", "(A of int || B of bool)", "{a : int; b : bool}",
          "{a : {int | fun v -> v != 0}; b : (A of bool || B of int)}", "(list bool)"]


@pytest.mark.parametrize("t", _SMALL)
def test_generated_values_pass_their_own_checker(t):
    emb = Var("t$")
    e = Let("t$", embed(parse_type(t)),
            If(App(Proj(emb, "check"), App(Proj(emb, "gen"), Int(0))), Int(0), ErrorExpr()))
    v = exhaustive_refute(e, EnumBounds(int_lo=-4, int_hi=4, max_picks=6))
    assert isinstance(v, NoErrorWithinBounds)
