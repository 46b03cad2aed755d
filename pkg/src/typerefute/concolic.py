"""Concolic search for an input feed that drives a program to ERROR.

Each run executes the program concretely while recording, for every
conditional whose condition depends on a pick, the symbolic condition and the
formulas computed since the previous such branch.  Runs are merged into a
:class:`PathTree`; unexplored directions become :class:`Target` paths held in
three priority queues, and the solver turns a popped target into the feed for
the next run.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Optional, Union

from . import solver as smt
from .interp import ClauseKey, Feed, Outcome, Trace, replay, run_concolic
from .normalize import normalize
from .syntax import Expr

log = logging.getLogger(__name__)

UNSOLVED, UNKNOWN, UNSAT, HIT = "unsolved", "unknown", "unsatisfiable", "hit"


class InternalInvariant(Exception):
    pass


# -- path tree ------------------------------------------------------------------


@dataclass
class Child:
    status: str = UNSOLVED
    node: Optional["Node"] = None


@dataclass
class Node:
    """Formulas between two symbolic branches, and the branch that ends them."""

    formulas: list
    key: ClauseKey
    term: object
    children: dict = field(default_factory=lambda: {True: Child(), False: Child()})


def branch_constraint(term, taken: bool):
    return term if taken else smt.not_(term)


class PathTree:
    def __init__(self):
        self.root = Child(HIT)
        self.nodes = 0

    def merge(self, trace: Trace) -> int:
        """Mark every branch of the run's path as hit; returns newly hit children."""
        fresh = 0
        at = self.root
        for b in trace.path:
            if at.node is None:
                at.node = Node(b.formulas, b.key, b.term)
                self.nodes += 1
            elif at.node.key != b.key:
                raise InternalInvariant(
                    f"path diverged at {at.node.key} vs {b.key}; runs are not path-deterministic")
            child = at.node.children[b.taken]
            if child.status != HIT:
                fresh += 1
                child.status = HIT
            at = child
        return fresh

    def child(self, path) -> Optional[Child]:
        at = self.root
        for key, taken in path:
            if at.node is None or at.node.key != key:
                return None
            at = at.node.children[taken]
        return at

    def formulas_for(self, path) -> list:
        """All node formulas and branch constraints along ``path``."""
        out: list = []
        at = self.root
        for key, taken in path:
            node = at.node
            if node is None or node.key != key:
                raise InternalInvariant(f"target path leaves the tree at {key}")
            out.extend(node.formulas)
            out.append(branch_constraint(node.term, taken))
            at = node.children[taken]
        return out

    def statuses(self) -> dict:
        counts = {UNSOLVED: 0, UNKNOWN: 0, UNSAT: 0, HIT: 0}
        stack = [self.root]
        while stack:
            c = stack.pop()
            counts[c.status] += 1
            if c.node is not None:
                stack.extend(c.node.children.values())
        return counts


# -- targets ----------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    path: tuple  # ((ClauseKey, bool), ...); the last pair is the child to reach

    @property
    def depth(self) -> int:
        return len(self.path)


class _Queue:
    """A priority queue where pushing an existing target replaces it."""

    def __init__(self):
        self.heap: list = []
        self.entries: dict = {}
        self.count = itertools.count()

    def push(self, target: Target, priority):
        old = self.entries.pop(target, None)
        if old is not None:
            old[-1] = None
        entry = [priority, next(self.count), target]
        self.entries[target] = entry
        heapq.heappush(self.heap, entry)

    def pop(self) -> Optional[Target]:
        while self.heap:
            _, _, t = heapq.heappop(self.heap)
            if t is not None:
                del self.entries[t]
                return t
        return None

    def __len__(self):
        return len(self.entries)

    def __contains__(self, t):
        return t in self.entries


class TargetQueues:
    """Depth-first, breadth-first and uniform-random horizons."""

    def __init__(self, rng: random.Random, weights=(0.5, 0.5, 0.0)):
        self.rng = rng
        self.weights = weights
        self.dfs, self.bfs, self.uniform = _Queue(), _Queue(), _Queue()
        self.order = itertools.count()

    def push(self, t: Target):
        n = next(self.order)
        self.dfs.push(t, (-t.depth, -n))
        self.bfs.push(t, (t.depth, n))
        self.uniform.push(t, self.rng.random())

    def pop(self, prefer_bfs: bool = False) -> Optional[Target]:
        queues = [self.dfs, self.bfs, self.uniform]
        if prefer_bfs:
            order = [self.bfs]
        else:
            order = [self.rng.choices(queues, weights=self.weights)[0]] if any(self.weights) else []
        for q in order + queues:
            t = q.pop()
            if t is not None:
                return t
        return None

    def __len__(self):
        return max(len(self.dfs), len(self.bfs), len(self.uniform))


def acquire_targets(trace: Trace, tree: PathTree) -> list:
    """Negations of the run's branches whose child is still unsolved."""
    out = []
    prefix: tuple = ()
    at = tree.root
    for b in trace.path:
        node = at.node
        if node is None or node.key != b.key:
            break
        if node.children[not b.taken].status == UNSOLVED:
            out.append(Target(prefix + ((b.key, not b.taken),)))
        prefix = prefix + ((b.key, b.taken),)
        at = node.children[b.taken]
    return out


# -- solving ------------------------------------------------------------------------

INT64 = (-(2**63), 2**63 - 1)


@dataclass(frozen=True)
class SolvedFeed:
    feed: Feed


def pick_key(var_name: str) -> ClauseKey:
    _, clause, depth = var_name.rsplit("!", 2)
    return ClauseKey(clause, int(depth))


def target_formulas(t: Target, tree: PathTree) -> list:
    fs = tree.formulas_for(t.path)
    sorts: dict = {}
    for f in fs:
        smt.free_vars(f, sorts)
    for name, sort in sorted(sorts.items()):
        if smt.is_pick_var(name) and sort == smt.INT:
            v = smt.Var(name, smt.INT)
            fs.append(smt.Op(">=", (v, smt.literal(INT64[0])), smt.BOOL))
            fs.append(smt.Op("<=", (v, smt.literal(INT64[1])), smt.BOOL))
    return fs


def solve_target(t: Target, tree: PathTree, solver, seed: int = 0,
                 int_range=(-64, 64), record: Optional[list] = None):
    """SolvedFeed | Unsat | Unknown; Unsat/Unknown are recorded in the tree."""
    child = tree.child(t.path)
    if child is None:
        raise InternalInvariant("target path is not in the tree")
    fs = target_formulas(t, tree)
    if record is not None:
        record.append(fs)
    res = solver.check(fs)
    if isinstance(res, smt.Sat):
        values = {pick_key(n): v for n, v in res.model.items() if smt.is_pick_var(n)}
        return SolvedFeed(Feed(values, policy="random", seed=seed, int_range=int_range))
    child.status = UNSAT if isinstance(res, smt.Unsat) else UNKNOWN
    return res


# -- search ---------------------------------------------------------------------------


@dataclass
class SearchConfig:
    max_step: int = 50_000
    max_tree_depth: int = 60
    depth_increments: int = 6
    global_timeout: float = 90.0
    seed: int = 0
    solver: str = "auto"  # auto | smt | enum
    solver_path: Optional[str] = None
    solver_timeout: float = 10.0
    horizon_weights: tuple = (0.5, 0.5, 0.0)  # dfs, bfs, uniform
    int_range: tuple = (-64, 64)  # fallback range for picks the solver did not fix
    max_runs: Optional[int] = None
    record_queries: bool = False
    solver_log_dir: Optional[str] = None

    def __post_init__(self):
        for name in ("max_step", "max_tree_depth", "depth_increments"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.global_timeout <= 0:
            raise ValueError("global_timeout must be positive")
        if self.max_tree_depth % self.depth_increments:
            raise ValueError("depth_increments must divide max_tree_depth")


@dataclass
class Stats:
    runs: int = 0
    solver_calls: int = 0
    wall_time: float = 0.0
    depth_cap: int = 0
    tree_nodes: int = 0
    unsat: int = 0
    unknown: int = 0
    step_limits: int = 0
    misses: int = 0
    queries: list = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class ErrorFound:
    witness: Feed
    outcome: Outcome


@dataclass(frozen=True)
class Exhausted:
    bounded: bool = False  # some Unsat came from the bounded enumerator


@dataclass(frozen=True)
class ExhaustedAtDepth:
    depth: int


@dataclass(frozen=True)
class Timeout:
    reason: str = "timeout"


Verdict = Union[ErrorFound, Exhausted, ExhaustedAtDepth, Timeout]


@dataclass
class SearchResult:
    verdict: Verdict
    stats: Stats
    program: Expr  # the normalized program the witness refers to


def search(program: Expr, cfg: Optional[SearchConfig] = None, solver=None) -> SearchResult:
    cfg = cfg or SearchConfig()
    own = solver is None
    if own:
        solver = smt.make_solver(cfg.solver, cfg.solver_path, cfg.solver_timeout, cfg.solver_log_dir)
    try:
        return _Search(normalize(program), cfg, solver).run()
    finally:
        if own:
            solver.close()


class _Search:
    def __init__(self, prog: Expr, cfg: SearchConfig, solver):
        self.prog = prog
        self.cfg = cfg
        self.solver = solver
        self.rng = random.Random(cfg.seed)
        self.tree = PathTree()
        self.queues = TargetQueues(self.rng, cfg.horizon_weights)
        self.held: dict = {}  # targets deeper than the current cap
        self.step = cfg.max_tree_depth // cfg.depth_increments
        self.cap = self.step
        self.stats = Stats(depth_cap=self.cap)
        self.incomplete = False
        self.bounded = False

    def enqueue(self, targets):
        for t in targets:
            if t.depth <= self.cap:
                self.queues.push(t)
            else:
                self.held[t] = None

    def raise_cap(self) -> bool:
        if self.cap >= self.cfg.max_tree_depth or not self.held:
            return False
        self.cap = min(self.cap + self.step, self.cfg.max_tree_depth)
        self.stats.depth_cap = self.cap
        ready = [t for t in self.held if t.depth <= self.cap]
        for t in ready:
            del self.held[t]
            self.queues.push(t)
        return True

    def fresh_seed(self) -> int:
        return self.rng.randrange(2**32)

    def finish(self, verdict) -> SearchResult:
        self.stats.wall_time = time.monotonic() - self.start
        self.stats.tree_nodes = self.tree.nodes
        return SearchResult(verdict, self.stats, self.prog)

    def run(self) -> SearchResult:
        cfg = self.cfg
        self.start = time.monotonic()
        deadline = self.start + cfg.global_timeout
        feed = Feed(policy="random", seed=self.fresh_seed(), int_range=cfg.int_range)
        target: Optional[Target] = None
        while True:
            if time.monotonic() > deadline:
                return self.finish(Timeout("timeout"))
            if cfg.max_runs is not None and self.stats.runs >= cfg.max_runs:
                return self.finish(Timeout("run budget"))
            outcome, trace = run_concolic(self.prog, feed, cfg.max_step, cfg.max_tree_depth)
            self.stats.runs += 1
            self.tree.merge(trace)
            if target is not None:
                child = self.tree.child(target.path)
                if child is None or child.status != HIT:
                    # The solved feed did not reproduce the target path.
                    self.stats.misses += 1
                    if child is not None and child.status == UNSOLVED:
                        child.status = UNKNOWN
                    self.incomplete = True
            if outcome.kind == "error":
                witness = Feed.replay_of(trace.picks)
                check = replay(self.prog, witness, cfg.max_step)
                if check.kind == "error":
                    return self.finish(ErrorFound(witness, check))
                raise InternalInvariant(f"witness replayed to {check}, not Error")
            prefer_bfs = False
            if outcome.kind == "steplimit":
                self.stats.step_limits += 1
                self.incomplete = True
                prefer_bfs = True
            if trace.truncated:
                self.incomplete = True
            self.enqueue(acquire_targets(trace, self.tree))
            target, feed = self.next_target(prefer_bfs, deadline)
            if target is None:
                if feed is not None:  # timed out while solving
                    return self.finish(Timeout("timeout"))
                if self.incomplete or self.held:
                    return self.finish(ExhaustedAtDepth(self.cap))
                return self.finish(Exhausted(self.bounded))

    def next_target(self, prefer_bfs: bool, deadline: float):
        while True:
            if time.monotonic() > deadline:
                return None, True
            t = self.queues.pop(prefer_bfs)
            prefer_bfs = False
            if t is None:
                if self.raise_cap():
                    continue
                return None, None
            child = self.tree.child(t.path)
            if child is None or child.status != UNSOLVED:
                continue
            self.stats.solver_calls += 1
            record = self.stats.queries if self.cfg.record_queries else None
            res = solve_target(t, self.tree, self.solver, self.fresh_seed(), self.cfg.int_range, record)
            if isinstance(res, SolvedFeed):
                return t, res.feed
            if isinstance(res, smt.Unsat):
                self.stats.unsat += 1
                self.bounded = self.bounded or res.bounded
            else:
                self.stats.unknown += 1
                self.incomplete = True
