from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import CORPUS, quick
from progen import gen_program
from typerefute import solver as smt
from typerefute.concolic import (
    ErrorFound, Exhausted, ExhaustedAtDepth, PathTree, SearchConfig, SolvedFeed,
    TargetQueues, Timeout, acquire_targets, search, solve_target,
)
from typerefute.instrument import instrument_program
from typerefute.interp import ClauseKey, Feed, replay, run_concolic
from typerefute.normalize import normalize
from typerefute.parser import parse
from typerefute.syntax import BinOp, Bool, ErrorExpr, If, Int, Let, PickB, PickI, Var


def _inst(name: str):
    return instrument_program(parse((CORPUS / f"{name}.bjy").read_text())).program


def _merged(e, feed=None):
    prog = normalize(e)
    tree = PathTree()
    _, trace = run_concolic(prog, feed or Feed(), 1_000, 60)
    tree.merge(trace)
    return prog, tree, trace


@pytest.fixture(scope="module")
def solver():
    h = smt.make_solver("smt")
    yield h
    h.close()


def test_appl_int_is_refuted(solver):
    res = search(_inst("appl_int"), quick(), solver)
    assert isinstance(res.verdict, ErrorFound)
    assert replay(res.program, res.verdict.witness).kind == "error"


def test_appl_int_witness_uses_the_magic_constant(solver):
    res = search(_inst("appl_int"), quick(), solver)
    assert 32767 in res.verdict.witness.values.values()


def test_id_is_refuted(solver):
    res = search(_inst("id_bool"), quick(), solver)
    assert isinstance(res.verdict, ErrorFound)


def test_constant_program_is_exhausted_in_one_run(solver):
    res = search(instrument_program(parse("42")).program, quick(), solver)
    assert res.verdict == Exhausted() and res.stats.runs == 1


def test_transform_record_has_no_error(solver):
    res = search(_inst("transform_record"), quick(), solver)
    assert isinstance(res.verdict, (Exhausted, ExhaustedAtDepth))


def test_straight_line_trace_has_no_targets():
    _, tree, trace = _merged(BinOp("+", PickI(), Int(1)))
    assert acquire_targets(trace, tree) == []


def test_one_branch_gives_one_target():
    _, tree, trace = _merged(If(BinOp("<", PickI(), Int(0)), Int(1), Int(2)))
    targets = acquire_targets(trace, tree)
    assert len(targets) == 1 and targets[0].depth == 1


def test_literal_conditions_are_not_branch_points():
    _, tree, trace = _merged(If(Bool(True), Int(1), Int(2)))
    assert trace.path == [] and acquire_targets(trace, tree) == []


def test_identical_runs_add_no_duplicate_targets():
    e = If(BinOp("<", PickI(), Int(0)), If(PickB(), Int(1), Int(2)), Int(3))
    prog, tree, trace = _merged(e, Feed(seed=1))
    q = TargetQueues(random.Random(0))
    for t in acquire_targets(trace, tree):
        q.push(t)
    n = len(q)
    _, trace2 = run_concolic(prog, Feed(seed=1), 1_000, 60)
    tree.merge(trace2)
    for t in acquire_targets(trace2, tree):
        q.push(t)
    assert len(q) == n > 0


def test_solving_an_equality_target(solver):
    e = If(BinOp("==", PickI(label="pi$1"), Int(7)), ErrorExpr(), Int(0))
    prog, tree, trace = _merged(e, Feed({ClauseKey("pi$1", 0): 0}))
    (t,) = acquire_targets(trace, tree)
    res = solve_target(t, tree, solver)
    assert isinstance(res, SolvedFeed) and res.feed.values[ClauseKey("pi$1", 0)] == 7
    assert replay(prog, res.feed).kind == "error"


def test_contradictory_target_is_unsat(solver):
    # x < 0 and then not (x < 5): the inner else branch is unreachable
    x = Var("x")
    e = Let("x", PickI(label="pi$1"),
            If(BinOp("<", x, Int(0)), If(BinOp("<", x, Int(5)), Int(1), ErrorExpr()), Int(2)))
    _, tree, trace = _merged(e, Feed({ClauseKey("pi$1", 0): -1}))
    inner, outer = sorted(acquire_targets(trace, tree), key=lambda t: -t.depth)
    assert isinstance(solve_target(inner, tree, solver), smt.Unsat)
    assert tree.child(inner.path).status == "unsatisfiable"
    assert isinstance(solve_target(outer, tree, solver), SolvedFeed)


def test_search_is_reproducible_for_a_seed(solver):
    prog = _inst("sum_e")
    a = search(prog, quick(seed=5), solver)
    b = search(prog, quick(seed=5), solver)
    assert type(a.verdict) is type(b.verdict)
    assert (a.stats.runs, a.stats.solver_calls) == (b.stats.runs, b.stats.solver_calls)


def test_run_budget_is_a_timeout(solver):
    res = search(_inst("sum_ok"), quick(max_runs=2), solver)
    assert res.verdict == Timeout("run budget")


def test_step_limited_runs_are_not_exhaustion(solver):
    prog = instrument_program(parse("let rec f n = f n in f 1")).program
    res = search(prog, quick(max_step=500), solver)
    assert isinstance(res.verdict, ExhaustedAtDepth)


@pytest.mark.parametrize("kw", [dict(max_step=0), dict(max_tree_depth=60, depth_increments=7),
                                dict(global_timeout=0)])
def test_invalid_configs(kw):
    with pytest.raises(ValueError):
        SearchConfig(**kw)


def test_enumerator_backend_finds_appl_int():
    res = search(_inst("appl_int"), quick(solver="enum"))
    assert isinstance(res.verdict, ErrorFound)


@settings(max_examples=40)
@given(st.integers(0, 10**6))
def test_no_false_positives_on_generated_programs(seed):
    prog = instrument_program(parse(gen_program(random.Random(seed)))).program
    res = search(prog, quick(max_runs=30, global_timeout=10.0, solver="enum"))
    if isinstance(res.verdict, ErrorFound):
        assert replay(res.program, res.verdict.witness).kind == "error"
