"""Source text in, verdict and report out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .concolic import ErrorFound, SearchConfig, SearchResult, search
from .instrument import InstrumentConfig, Instrumented, instrument_program
from .parser import parse
from .report import Diagnosis, diagnose, format_report


@dataclass
class CheckResult:
    instrumented: Instrumented
    search: SearchResult
    diagnosis: Optional[Diagnosis]

    @property
    def found_error(self) -> bool:
        return isinstance(self.search.verdict, ErrorFound)

    def report(self) -> str:
        return format_report(self.diagnosis)


def check_source(src: str, cfg: Optional[SearchConfig] = None,
                 icfg: Optional[InstrumentConfig] = None, solver=None) -> CheckResult:
    """Parse, instrument and search ``src``; diagnose the witness if one is found."""
    cfg = cfg or SearchConfig()
    inst = instrument_program(parse(src), icfg)
    res = search(inst.program, cfg, solver=solver)
    diag = None
    if isinstance(res.verdict, ErrorFound):
        diag = diagnose(inst, res.program, res.verdict.witness, cfg.max_step)
    return CheckResult(inst, res, diag)
