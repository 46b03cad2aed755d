"""Reference refuters: exhaustive bounded feed enumeration and seeded fuzzing.

Both run the instrumented program concretely and report a feed that drives it
to ERROR.  The enumerator explores the tree of pick choices depth-first, one
integer magnitude at a time (0, 1, -1, 2, -2, ...), so small witnesses are
found first and every feed inside the bounds is reached after finitely many
runs.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Union

from .interp import (
    DEFAULT_INT_RANGE, ClauseKey, Feed, Interpreter, Outcome, prepared, replay, run_deep,
)
from .normalize import normalize
from .syntax import Expr

MAGNITUDES = (1, 2, 4, 8, 16)


@dataclass(frozen=True)
class EnumBounds:
    int_lo: int = -16
    int_hi: int = 16
    max_picks: int = 8
    max_feeds: int = 200_000
    step_budget: int = 50_000
    extra_ints: tuple = ()

    def __post_init__(self):
        if self.int_lo > 0 or self.int_hi < 0:
            raise ValueError("integer range must contain 0")
        if self.max_picks <= 0 or self.max_feeds <= 0 or self.step_budget <= 0:
            raise ValueError("bounds must be positive")

    def int_domain(self, magnitude: int) -> list:
        out = [0]
        for m in range(1, magnitude + 1):
            for v in (m, -m):
                if self.int_lo <= v <= self.int_hi:
                    out.append(v)
        out.extend(v for v in self.extra_ints if v not in out)
        return out


@dataclass(frozen=True)
class Refuted:
    feed: Feed
    outcome: Outcome
    runs: int


@dataclass(frozen=True)
class NoErrorWithinBounds:
    exhaustive: bool  # False when some run hit the pick cap or the step budget
    runs: int


@dataclass(frozen=True)
class BudgetExceeded:
    runs: int


@dataclass(frozen=True)
class NotFound:
    runs: int


class _ChoiceFeed(Feed):
    """Answers picks from a choice vector; picks past its end take choice 0."""

    def __init__(self, choices: list, int_dom: list, max_picks: int):
        super().__init__({}, policy="fail")
        self.choices = choices
        self.int_dom = int_dom
        self.max_picks = max_picks
        self.order: list = []  # (key, domain size) in first-seen order
        self.capped = False

    def resolve(self, key: ClauseKey, kind: str):
        v = self.values.get(key)
        if v is not None:
            return v
        i = len(self.order)
        if i >= self.max_picks:
            self.capped = True
            idx = 0
        else:
            idx = self.choices[i] if i < len(self.choices) else 0
        dom = (False, True) if kind == "bool" else self.int_dom
        self.order.append((key, len(dom) if i < self.max_picks else 1))
        v = dom[idx]
        self.values[key] = v
        return v


def _advance(choices: list, order: list) -> Optional[list]:
    """Odometer step over the choice tree; ``None`` when it is exhausted."""
    nxt = choices[: len(order)] + [0] * (len(order) - len(choices))
    for i in range(len(order) - 1, -1, -1):
        if nxt[i] + 1 < order[i][1]:
            return nxt[:i] + [nxt[i] + 1]
    return None


def _enumerate(prog: Expr, b: EnumBounds, magnitude: int, budget: int):
    dom = b.int_domain(magnitude)
    choices: list = []
    runs = 0
    complete = True
    saw_int = False
    while choices is not None:
        if runs >= budget:
            return "budget", runs, complete, saw_int
        feed = _ChoiceFeed(choices, dom, b.max_picks)
        out = Interpreter(feed, b.step_budget, record_branches=False).run(prog)
        runs += 1
        saw_int = saw_int or any(type(v) is int for v in feed.values.values())
        if out.kind == "error":
            return Refuted(Feed(dict(feed.values), policy="fail"), out, runs), runs, complete, saw_int
        if out.kind == "steplimit" or feed.capped:
            complete = False
        choices = _advance(choices, feed.order)
    return None, runs, complete, saw_int


def exhaustive_refute(p: Expr, b: Optional[EnumBounds] = None, *, normalized: bool = False
                      ) -> Union[Refuted, NoErrorWithinBounds, BudgetExceeded]:
    """Search every feed inside ``b``; ``p`` is an instrumented program."""
    b = b or EnumBounds()
    prog = prepared(p if normalized else normalize(p))
    widest = max(-b.int_lo, b.int_hi)
    mags = sorted({m for m in MAGNITUDES if m < widest} | {widest})

    def go():
        total = 0
        for m in mags:
            res, runs, complete, saw_int = _enumerate(prog, b, m, b.max_feeds - total)
            total += runs
            if isinstance(res, Refuted):
                return Refuted(res.feed, res.outcome, total)
            if res == "budget":
                return BudgetExceeded(total)
            if not saw_int or m == mags[-1]:
                return NoErrorWithinBounds(complete, total)
        return NoErrorWithinBounds(False, total)

    found = run_deep(go)
    if isinstance(found, Refuted):
        _verify(prog, found.feed, b.step_budget)
    return found


def fuzz_refute(p: Expr, seed: int = 0, runs: int = 1000, step_budget: int = 50_000, *,
                int_range: tuple = DEFAULT_INT_RANGE, normalized: bool = False
                ) -> Union[Refuted, NotFound]:
    """Run ``p`` on ``runs`` random feeds drawn from one seeded stream."""
    prog = prepared(p if normalized else normalize(p))
    rng = random.Random(seed)

    def go():
        for i in range(runs):
            feed = Feed({}, seed=rng.getrandbits(64), int_range=int_range)
            it = Interpreter(feed, step_budget, record_branches=False)
            out = it.run(prog)
            if out.kind == "error":
                return Refuted(Feed.replay_of(it.trace.picks), out, i + 1)
        return NotFound(runs)

    found = run_deep(go)
    if isinstance(found, Refuted):
        _verify(prog, found.feed, step_budget)
    return found


def _verify(prog: Expr, feed: Feed, step_budget: int) -> None:
    out = replay(prog, feed, step_budget)
    if out.kind != "error":
        raise AssertionError(f"witness does not replay to an error: {out}")


__all__ = [
    "EnumBounds", "Refuted", "NoErrorWithinBounds", "BudgetExceeded", "NotFound",
    "exhaustive_refute", "fuzz_refute",
]
