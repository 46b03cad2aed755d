from __future__ import annotations

import pytest

from conftest import CORPUS, quick
from typerefute.concolic import ErrorFound
from typerefute.corpus import (
    FEATURES, default_dir, feature_coverage, load_corpus, read_expect, run_entry, validate_corpus,
)
from typerefute.interp import replay
from typerefute.pipeline import check_source

ENTRIES = load_corpus(CORPUS)
ERRORS = [e for e in ENTRIES if e.expected == "error"]
CLEAN = [e for e in ENTRIES if e.expected == "no-error"]


def test_default_directory_is_the_repository_corpus():
    assert default_dir().resolve() == CORPUS.resolve()


def test_environment_overrides_the_directory(monkeypatch, tmp_path):
    monkeypatch.setenv("TYPEREFUTE_CORPUS", str(tmp_path))
    assert default_dir() == tmp_path and load_corpus() == []


def test_every_feature_letter_is_used_by_an_error_entry():
    cov = feature_coverage(ENTRIES)
    assert set(cov) == set(FEATURES)
    assert [f for f, names in cov.items() if not names] == []


@pytest.mark.parametrize("name,expected", [
    ("appl_int", "error"), ("prepend", "error"), ("mk_student", "error"), ("bad_tree", "error"),
    ("id_bool", "error"), ("transform_record", "no-error"),
])
def test_listed_programs_have_their_published_verdicts(name, expected):
    e = next(e for e in ENTRIES if e.name == name)
    assert e.expected == expected and not e.reconstruction


def test_prepend_checks_lengths():
    e = next(e for e in ENTRIES if e.name == "prepend")
    text = " ".join(e.source.split())
    assert "(length r) == (length x) + (length y)" in text


def test_malformed_sidecar(tmp_path):
    p = tmp_path / "x.expect"
    p.write_text("maybe\n")
    with pytest.raises(ValueError):
        read_expect(p)


def test_unknown_feature_letter(tmp_path):
    (tmp_path / "x.bjy").write_text("(* features: Q | source: test *)\n1")
    (tmp_path / "x.expect").write_text("no-error\n")
    with pytest.raises(ValueError):
        load_corpus(tmp_path)


def test_entry_failures_are_reported_not_raised(tmp_path):
    (tmp_path / "bad.bjy").write_text("let x = in x")
    (tmp_path / "bad.expect").write_text("error\n")
    (tmp_path / "ok.bjy").write_text("1")
    (tmp_path / "ok.expect").write_text("no-error\n")
    rep = validate_corpus(tmp_path, quick())
    assert [r.entry.name for r in rep.failures()] == ["bad"]
    assert "ParseError" in rep.failures()[0].detail


@pytest.mark.parametrize("entry", ERRORS, ids=lambda e: e.name)
def test_error_entries_are_found_for_three_seeds(entry):
    for seed in (0, 1, 2):
        res = check_source(entry.source, quick(seed=seed))
        assert isinstance(res.search.verdict, ErrorFound), (entry.name, seed)
        assert replay(res.search.program, res.search.verdict.witness).kind == "error"


@pytest.mark.parametrize("entry", CLEAN, ids=lambda e: e.name)
def test_clean_entries_have_no_error(entry):
    r = run_entry(entry, quick())
    assert r.ok, r.detail
