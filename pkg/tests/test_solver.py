from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from agree import compare
from typerefute import solver as S
from typerefute.interp import ClauseKey
from typerefute.syntax import BinOp, Let, PatTest, PRecord, PickI, Var as EVar

K = ClauseKey("c$1", 0)


@pytest.fixture(scope="module")
def smt():
    if S.find_solver() is None:
        pytest.skip("no SMT solver binary available")
    h = S.SmtProcess()
    yield h
    h.close()


@pytest.fixture(scope="module")
def enum():
    return S.BoundedEnumerator()


def _x(name="x"):
    return S.Var(name, S.INT)


def test_addition_clause_is_an_equality():
    a, b = _x("a"), _x("b")
    fs = S.encode_clause(Let("c", BinOp("+", EVar("a"), EVar("b")), EVar("c")), K, {"a": a, "b": b})
    assert fs == [S.eq(S.Var(S.clause_var_name(K), S.INT), S.Op("+", (a, b), S.INT))]


def test_record_labels_are_a_bitvector():
    layout = S.LabelLayout.of(["a", "b", "c"])
    assert layout.bitstring({"a", "c"}) == "101"
    assert S.to_smt(layout.literal({"a", "c"})) == "#b101"


def test_record_pattern_is_a_subset_test():
    layout = S.LabelLayout.of(["a", "b", "c"])
    r = S.Var("r", S.bv_sort(3))
    fs = S.encode_clause(PatTest(EVar("r"), PRecord(("a",))), K, {"r": r}, layout)
    p = S.Lit(0b001, S.bv_sort(3))
    assert fs == [S.eq(S.Var(S.clause_var_name(K), S.BOOL), S.eq(p, S.bvand(r, p)))]
    assert layout.bitstring({"a"}) == "001"


def test_subset_formula_on_concrete_records():
    layout = S.LabelLayout.of(["a", "b", "c"])
    p = layout.literal({"a"})
    for labels, expected in [({"a", "c"}, True), ({"b"}, False), ({"a"}, True)]:
        f = S.eq(p, S.bvand(layout.literal(labels), p))
        assert S.evaluate(f, {}) is expected


def test_picks_are_free_variables():
    assert S.encode_clause(Let("x", PickI(), EVar("x")), K, {}) == []


def test_unknown_operand_is_unsupported():
    with pytest.raises(S.UnsupportedTerm):
        S.encode_clause(BinOp("+", EVar("a"), EVar("b")), K, {})


def test_smt_text_declares_and_asserts():
    text, names, _ = S.smt_script([S.Op(">", (_x(), S.Lit(-3, S.INT)), S.BOOL)])
    assert names == ["x"]
    assert "(declare-const |x| Int)" in text
    assert "(assert (> |x| (- 3)))" in text


@pytest.mark.parametrize("backend", ["smt", "enum"])
def test_unique_integer_solution(backend, request):
    h = request.getfixturevalue(backend)
    r = h.check([S.Op(">", (_x(), S.Lit(3, S.INT)), S.BOOL), S.Op("<", (_x(), S.Lit(5, S.INT)), S.BOOL)])
    assert isinstance(r, S.Sat) and r.model["x"] == 4


@pytest.mark.parametrize("backend", ["smt", "enum"])
def test_contradiction_is_unsat(backend, request):
    h = request.getfixturevalue(backend)
    r = h.check([S.Op(">", (_x(), S.Lit(3, S.INT)), S.BOOL), S.Op("<", (_x(), S.Lit(3, S.INT)), S.BOOL)])
    assert isinstance(r, S.Unsat)
    assert r.bounded == (backend == "enum")


def test_queries_are_independent(smt):
    assert isinstance(smt.check([S.eq(_x(), S.Lit(1, S.INT))]), S.Sat)
    r = smt.check([S.eq(_x(), S.Lit(2, S.INT))])
    assert isinstance(r, S.Sat) and r.model["x"] == 2


def test_enumerator_finds_seeded_constants_outside_the_box(enum):
    r = enum.check([S.eq(_x(), S.Lit(32767, S.INT))])
    assert isinstance(r, S.Sat) and r.model["x"] == 32767


def test_missing_solver_binary_is_reported():
    with pytest.raises(S.SolverUnavailable):
        S.SmtProcess("/nonexistent/solver")


_OPS = ["+", "-", "<", "<=", "==", "!="]


def _random_query(draw_ops, consts):
    x, y = _x("x"), _x("y")
    fs = []
    for (op, c, neg) in zip(draw_ops, consts, [False, True, False]):
        var, f = S.encode_op(ClauseKey(f"k${len(fs)}", 0), op, [x if len(fs) % 2 == 0 else y, S.Lit(c, S.INT)])
        fs += f
        if var.sort == S.BOOL:
            fs.append(S.not_(var) if neg else var)
        else:
            fs.append(S.Op("<", (var, S.Lit(c + 2, S.INT)), S.BOOL))
    return fs


@given(st.lists(st.sampled_from(_OPS), min_size=1, max_size=3),
       st.lists(st.integers(-20, 20), min_size=3, max_size=3))
def test_backends_agree_inside_the_enumerator_box(ops, consts):
    global _SMT
    if S.find_solver() is None:
        pytest.skip("no SMT solver binary available")
    if "_SMT" not in globals():  # module fixtures do not mix with @given
        _SMT = S.SmtProcess()
    _, ok = compare(_random_query(ops, consts), _SMT, S.BoundedEnumerator())
    assert ok
