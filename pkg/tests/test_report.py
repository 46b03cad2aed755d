from __future__ import annotations

import json

import pytest

from conftest import CORPUS, quick
from typerefute.pipeline import check_source
from typerefute.report import HEADER, UNKNOWN_TYPE, clause_text, format_report, structured
from typerefute.parser import parse

ID_REPORT = """** Bluejay Type Errors **
- Found at clause : let id (x : bool) : bool = 1 in id
--------------------
* Value    : id
* Expected : (bool -> bool)
* Actual   : (bool -> int)"""


def _check(name: str, **kw):
    return check_source((CORPUS / f"{name}.bjy").read_text(), quick(**kw))


def test_id_report_matches_the_published_output():
    assert _check("id_bool").report() == ID_REPORT


def test_bad_tree_report():
    d = _check("bad_tree").diagnosis
    assert d.clause == "let (bad_tree : { tree_type | is_bst }) = ... in bad_tree"
    assert d.expected == "{tree_type | is_bst}"
    assert d.actual == ("Node {item = 2; left = Node {item = 6; left = Leaf {leaf = true}; "
                        "right = Leaf {leaf = true}}; right = Leaf {leaf = true}}")


def test_mk_student_report_names_the_dependent_type():
    d = _check("mk_student").diagnosis
    assert d.clause == "let mk_student ... in mk_student"
    assert d.expected == "((n : int) -> (bool -> mk_rec n))"
    assert d.actual != UNKNOWN_TYPE  # a value shape is available here


def test_prepend_report_clause():
    d = _check("prepend").diagnosis
    assert (d.clause, d.value) == ("let rec prepend ... in prepend", "prepend")


def test_appl_int_actual_shows_the_bool_result():
    d = _check("appl_int").diagnosis
    assert d.expected == "((int -> int) -> int)"
    assert d.actual == "((int -> int) -> bool)"


def test_operator_misuse_points_at_the_operation():
    d = _check("operator_misuse").diagnosis
    assert d.kind in ("guard", "decl")
    assert "+" in d.actual or "int" in d.expected


def test_no_error_text():
    assert format_report(None) == "No errors found"
    assert _check("transform_record").report() == "No errors found"


def test_report_starts_with_header():
    assert _check("assertion").report().splitlines()[0] == HEADER


@pytest.mark.parametrize("src,expected", [
    ("let id (x : bool) : bool = 1 in id", "let id (x : bool) : bool = 1 in id"),
    ("let f (x : int) : int = x + 1 + 1 + 1 + 1 + 1 + 1 + 1 + 1 + 1 + 1 in f", "let f ... in f"),
    ("let rec g (x : int) : int = if x <= 0 then 0 else g (x - 1) + 1 + 1 + 1 in g",
     "let rec g ... in g"),
])
def test_clause_text(src, expected):
    d = parse(src)
    assert clause_text(d.name, d.info) == expected


def test_structured_output_is_one_json_line():
    line = structured({"verdict": "error", "runs": 3})
    assert "\n" not in line and json.loads(line) == {"runs": 3, "verdict": "error"}
