"""The benchmark corpus: ``<name>.bjy`` programs with ``<name>.expect`` sidecars.

Each program opens with a header comment
``(* features: P R F | source: ... *)`` naming its feature letters and
provenance.  The sidecar holds one line, ``error`` or ``no-error``.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .concolic import SearchConfig
from .instrument import InstrumentConfig
from .pipeline import check_source

CORPUS_ENV = "TYPEREFUTE_CORPUS"
FEATURES = "PVIRMHSTOFDACWNUYX"
FEATURE_NAMES = {
    "P": "polymorphic types", "V": "variants", "I": "intersection types",
    "R": "recursive functions", "M": "Mu types", "H": "higher order functions",
    "S": "subtyping", "T": "type casing", "O": "OOP-style", "F": "refinement types",
    "D": "dependent types", "A": "parametric types", "C": "records",
    "W": "wrap required", "N": "assertions", "U": "operator misuse", "Y": "return type",
    "X": "match",
}
VERDICTS = ("error", "no-error")
_HEADER = re.compile(r"\(\*\s*features:\s*([A-Z ]*)\|\s*source:\s*(.*?)\s*\*\)")


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    path: Path
    expected: str
    features: frozenset
    provenance: str

    @property
    def source(self) -> str:
        return self.path.read_text()

    @property
    def reconstruction(self) -> bool:
        return not self.provenance.startswith("published listing")

    @property
    def loc(self) -> int:
        return sum(1 for line in self.source.splitlines() if line.strip())


def default_dir() -> Path:
    env = os.environ.get(CORPUS_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "corpus"


def read_expect(path: Path) -> str:
    lines = [l.strip() for l in path.read_text().splitlines() if l.strip()]
    if len(lines) != 1 or lines[0] not in VERDICTS:
        raise ValueError(f"{path}: expected a single line 'error' or 'no-error'")
    return lines[0]


def load_entry(bjy: Path) -> CorpusEntry:
    text = bjy.read_text()
    m = _HEADER.match(text.lstrip())
    feats, prov = (frozenset(m.group(1).split()), m.group(2)) if m else (frozenset(), "")
    unknown = feats - set(FEATURES)
    if unknown:
        raise ValueError(f"{bjy}: unknown feature letters {sorted(unknown)}")
    return CorpusEntry(bjy.stem, bjy, read_expect(bjy.with_suffix(".expect")), feats, prov)


def load_corpus(directory: Optional[Path] = None) -> list:
    d = Path(directory) if directory is not None else default_dir()
    return [load_entry(p) for p in sorted(d.glob("*.bjy"))]


def feature_coverage(entries: list) -> dict:
    """Feature letter -> names of error-expected entries that use it."""
    cov = {f: [] for f in FEATURES}
    for e in entries:
        if e.expected == "error":
            for f in sorted(e.features):
                cov[f].append(e.name)
    return cov


@dataclass
class EntryResult:
    entry: CorpusEntry
    verdict: Optional[str]  # error | no-error | None on failure
    detail: str
    seconds: float

    @property
    def ok(self) -> bool:
        return self.verdict == self.entry.expected


@dataclass
class CorpusReport:
    results: list = field(default_factory=list)
    uncovered: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.uncovered and all(r.ok for r in self.results)

    def failures(self) -> list:
        return [r for r in self.results if not r.ok]


def run_entry(entry: CorpusEntry, cfg: Optional[SearchConfig] = None,
              icfg: Optional[InstrumentConfig] = None, check: Callable = check_source
              ) -> EntryResult:
    t0 = time.perf_counter()
    try:
        res = check(entry.source, cfg, icfg)
    except Exception as exc:  # reported per entry, the run continues
        return EntryResult(entry, None, f"{type(exc).__name__}: {exc}",
                           time.perf_counter() - t0)
    verdict = "error" if res.found_error else "no-error"
    return EntryResult(entry, verdict, type(res.search.verdict).__name__,
                       time.perf_counter() - t0)


def validate_corpus(directory: Optional[Path] = None, cfg: Optional[SearchConfig] = None,
                    icfg: Optional[InstrumentConfig] = None) -> CorpusReport:
    """Parse, instrument and search every entry; compare with its sidecar."""
    entries = load_corpus(directory)
    rep = CorpusReport()
    rep.uncovered = [f for f, names in feature_coverage(entries).items() if not names]
    for e in entries:
        rep.results.append(run_entry(e, cfg, icfg))
    return rep
