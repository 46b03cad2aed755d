from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from typerefute.concolic import SearchConfig  # noqa: E402
from typerefute.instrument import embed  # noqa: E402
from typerefute.interp import Feed, eval as run_once  # noqa: E402
from typerefute.normalize import normalize  # noqa: E402
from typerefute.parser import parse, parse_type  # noqa: E402
from typerefute.syntax import App, Int, Proj  # noqa: E402

settings.register_profile(
    "repo", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("repo")

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"


def check_expr(type_src: str, expr_src: str):
    """``embed(tau).check e`` as a runnable expression."""
    return App(Proj(embed(parse_type(type_src)), "check"), parse(expr_src))


def gen_expr(type_src: str):
    return App(Proj(embed(parse_type(type_src)), "gen"), Int(0))


def run(e, feed: Feed = None, budget: int = 50_000):
    """One run of ``e`` after normalization; returns the Outcome."""
    out, _ = run_once(normalize(e), feed if feed is not None else Feed(), budget)
    return out


def quick(**kw) -> SearchConfig:
    base = dict(global_timeout=30.0, solver="smt")
    base.update(kw)
    return SearchConfig(**base)


@pytest.fixture
def corpus_dir() -> Path:
    return CORPUS


# -- acceptance summary -------------------------------------------------------------

ACCEPTANCE: list = []  # (number, passed, line)


def acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    """Record one criterion's result; it is printed in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})"
    ACCEPTANCE.append((number, passed, line))
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
