"""Command-line driver: ``check``, ``replay`` and ``bench``."""

from __future__ import annotations

import argparse
import logging
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import __version__
from .concolic import (
    ErrorFound, Exhausted, ExhaustedAtDepth, SearchConfig, Timeout, search,
)
from .corpus import load_corpus
from .instrument import IllFormedType, InstrumentConfig, instrument_program
from .interp import Feed, FeedMiss, render_value, replay
from .normalize import normalize
from .oracle import EnumBounds, Refuted, exhaustive_refute, fuzz_refute
from .parser import ParseError, parse
from .report import diagnose, diagnosis_dict, format_report, structured
from .solver import SOLVER_ENV, SolverUnavailable
from .syntax import render

EXIT_OK, EXIT_ERROR, EXIT_USAGE = 0, 1, 2
BACKENDS = ("concolic", "exhaustive", "fuzz")


@dataclass
class RunOptions:
    path: str
    backend: str = "concolic"
    wrap: bool = True
    max_step: int = 50_000
    max_depth: int = 60
    timeout_s: float = 90.0
    seed: int = 0
    solver: Optional[str] = None  # executable path, or "enum" for the built-in enumerator
    fmt: str = "human"
    dump_core: Optional[str] = None
    witness_out: Optional[str] = None
    fuzz_runs: int = 10_000

    def search_config(self) -> SearchConfig:
        kind, path = "auto", self.solver
        if self.solver == "enum":
            kind, path = "enum", None
        elif self.solver:
            kind = "smt"
        return SearchConfig(max_step=self.max_step, max_tree_depth=self.max_depth,
                            depth_increments=_increments(self.max_depth),
                            global_timeout=self.timeout_s, seed=self.seed,
                            solver=kind, solver_path=path)


def _increments(depth: int) -> int:
    """Six equal steps when possible, otherwise the largest divisor below six."""
    return next(k for k in range(6, 0, -1) if depth % k == 0)


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _front_end(src: str, wrap: bool):
    try:
        inst = instrument_program(parse(src), InstrumentConfig(wrap_enabled=wrap))
    except (ParseError, IllFormedType) as exc:
        raise UsageError(f"{type(exc).__name__}: {exc}") from exc
    return inst, normalize(inst.program)


def cmd_check(opts: RunOptions, out=None) -> int:
    out = out or sys.stdout
    t0 = time.perf_counter()
    inst, prog = _front_end(_read(opts.path), opts.wrap)
    t_instr = time.perf_counter() - t0
    if opts.dump_core:
        Path(opts.dump_core).write_text(render(prog) + "\n")
    record: dict = {"file": opts.path, "backend": opts.backend}
    witness = None
    t1 = time.perf_counter()
    if opts.backend == "concolic":
        res = search(prog, opts.search_config())
        v = res.verdict
        st = res.stats
        record["stats"] = {"runs": st.runs, "solver_calls": st.solver_calls,
                           "wall_time": round(st.wall_time, 4), "depth_cap": st.depth_cap}
        if isinstance(v, ErrorFound):
            witness = v.witness
            prog = res.program  # the witness is keyed to the program the search ran
        notice = _notice(v)
        record["verdict"] = type(v).__name__
    elif opts.backend == "exhaustive":
        r = exhaustive_refute(prog, EnumBounds(step_budget=opts.max_step), normalized=True)
        record["verdict"] = type(r).__name__
        record["stats"] = {"runs": r.runs}
        if isinstance(r, Refuted):
            witness = r.feed
        notice = _oracle_notice(r)
    else:
        r = fuzz_refute(prog, opts.seed, opts.fuzz_runs, opts.max_step, normalized=True)
        record["verdict"] = type(r).__name__
        record["stats"] = {"runs": r.runs}
        if isinstance(r, Refuted):
            witness = r.feed
        notice = _oracle_notice(r)
    t_search = time.perf_counter() - t1
    record["times_ms"] = {"translation": round(t_instr * 1e3, 3), "run": round(t_search * 1e3, 3)}
    diag = None
    if witness is not None:
        diag = diagnose(inst, prog, witness, opts.max_step)
        if opts.witness_out:
            Path(opts.witness_out).write_text(witness.dumps())
            record["witness"] = opts.witness_out
        else:
            record["witness_feed"] = witness.dumps()
    record["error"] = diagnosis_dict(diag)
    if opts.fmt == "structured":
        print(structured(record), file=out)
    else:
        print(format_report(diag) if diag is not None else notice, file=out)
    return EXIT_ERROR if witness is not None else EXIT_OK


def _notice(v) -> str:
    if isinstance(v, Exhausted):
        return "No errors found"
    if isinstance(v, ExhaustedAtDepth):
        return f"No errors found (search incomplete: exhausted up to depth {v.depth})"
    if isinstance(v, Timeout):
        return f"No errors found before the time limit ({v.reason})"
    return ""


def _oracle_notice(r) -> str:
    name = type(r).__name__
    if name == "NoErrorWithinBounds":
        return "No errors found" + ("" if r.exhaustive else " (bounds truncated some runs)")
    if name == "BudgetExceeded":
        return f"No errors found (feed budget exhausted after {r.runs} runs)"
    return f"No errors found in {r.runs} random runs"


def cmd_replay(path: str, feed_path: str, wrap: bool = True, max_step: int = 50_000,
               expect_error: bool = False, out=None) -> int:
    out = out or sys.stdout
    _, prog = _front_end(_read(path), wrap)
    try:
        feed = Feed.loads(_read(feed_path))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        o = replay(prog, feed, max_step)
    except FeedMiss as exc:
        print(f"feed miss: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if o.kind == "value":
        print(f"value {render_value(o.value)}", file=out)
    elif o.kind == "error":
        print(f"ERROR at {o.site}", file=out)
    else:
        print(o.kind, file=out)
    return EXIT_ERROR if expect_error and o.kind != "error" else EXIT_OK


def cmd_bench(directory: str, opts: RunOptions, out=None) -> int:
    out = out or sys.stdout
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"not a directory: {directory}")
    try:
        entries = load_corpus(d)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = []
    for e in entries:
        row = {"name": e.name, "expected": e.expected, "loc": e.loc,
               "features": "".join(sorted(e.features))}
        t0 = time.perf_counter()
        try:
            inst, prog = _front_end(e.source, opts.wrap)
            t1 = time.perf_counter()
            res = search(prog, opts.search_config())
            t2 = time.perf_counter()
            row.update(verdict="error" if isinstance(res.verdict, ErrorFound) else "no-error",
                       detail=type(res.verdict).__name__,
                       transl_ms=(t1 - t0) * 1e3, run_ms=(t2 - t1) * 1e3)
        except Exception as exc:  # per-file failure, keep going
            row.update(verdict="failed", detail=f"{type(exc).__name__}: {exc}",
                       transl_ms=0.0, run_ms=0.0)
        row["total_ms"] = row["transl_ms"] + row["run_ms"]
        row["match"] = row["verdict"] == e.expected
        rows.append(row)
    if opts.fmt == "structured":
        for r in rows:
            print(structured(r), file=out)
    else:
        print(_table(rows), file=out)
    return EXIT_OK if all(r["match"] for r in rows) else EXIT_ERROR


def _table(rows: list) -> str:
    head = f"{'name':24} {'run':>9} {'transl':>9} {'total':>9} {'LOC':>4}  {'expected':8} {'verdict':8} ok  features"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(f"{r['name']:24} {r['run_ms']:9.1f} {r['transl_ms']:9.1f} {r['total_ms']:9.1f} "
                     f"{r['loc']:4}  {r['expected']:8} {r['verdict']:8} {'y' if r['match'] else 'N':2}  "
                     f"{r['features']}")
    if rows:
        ok = sum(r["match"] for r in rows)
        med = statistics.median(r["run_ms"] for r in rows)
        lines.append("-" * len(head))
        lines.append(f"{ok}/{len(rows)} verdicts matched; median run {med:.1f} ms; "
                     f"total {sum(r['total_ms'] for r in rows):.1f} ms")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--no-wrap", action="store_true", help="do not check uses of typed values")
    common.add_argument("--max-step", type=int, default=50_000, help="step budget per run")
    common.add_argument("--max-depth", type=int, default=60, help="path tree depth limit")
    common.add_argument("--timeout-s", type=float, default=90.0, help="global search time limit")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--solver", default=None,
                        help=f"SMT solver executable, or 'enum' for the built-in enumerator "
                             f"(default: ${SOLVER_ENV}, then z3/cvc5 on PATH)")
    common.add_argument("--format", dest="fmt", choices=("human", "structured"), default="human")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="typerefute", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)
    c = sub.add_parser("check", parents=[common], help="search a program for a type error")
    c.add_argument("path")
    c.add_argument("--backend", choices=BACKENDS, default="concolic")
    c.add_argument("--dump-core", metavar="PATH", help="write the instrumented core program")
    c.add_argument("--witness-out", metavar="PATH", help="write the witness feed here")
    c.add_argument("--fuzz-runs", type=int, default=10_000)
    r = sub.add_parser("replay", parents=[common], help="re-run a program on a witness feed")
    r.add_argument("path")
    r.add_argument("feed")
    r.add_argument("--expect-error", action="store_true",
                   help="exit 1 unless the replay reaches ERROR")
    b = sub.add_parser("bench", parents=[common], help="run a corpus directory")
    b.add_argument("directory")
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if a.cmd == "replay":
            return cmd_replay(a.path, a.feed, not a.no_wrap, a.max_step, a.expect_error)
        opts = RunOptions(path=getattr(a, "path", a.cmd), wrap=not a.no_wrap,
                          max_step=a.max_step, max_depth=a.max_depth, timeout_s=a.timeout_s,
                          seed=a.seed, solver=a.solver, fmt=a.fmt)
        opts.search_config()  # validate budgets before doing any work
        if a.cmd == "check":
            opts.backend, opts.dump_core = a.backend, a.dump_core
            opts.witness_out, opts.fuzz_runs = a.witness_out, a.fuzz_runs
            return cmd_check(opts)
        return cmd_bench(a.directory, opts)
    except UsageError as exc:
        print(f"typerefute: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"typerefute: invalid option: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverUnavailable as exc:
        print(f"typerefute: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
