"""Type-error refutation by instrumentation and concolic search."""

from __future__ import annotations

__version__ = "0.1.0"

from .concolic import (  # noqa: E402
    ErrorFound, Exhausted, ExhaustedAtDepth, SearchConfig, SearchResult, Timeout, search,
)
from .corpus import load_corpus, validate_corpus  # noqa: E402
from .instrument import InstrumentConfig, Instrumented, embed, instrument_program  # noqa: E402
from .interp import Feed, FeedMiss, Outcome, replay  # noqa: E402
from .normalize import normalize  # noqa: E402
from .oracle import (  # noqa: E402
    BudgetExceeded, EnumBounds, NoErrorWithinBounds, NotFound, Refuted, exhaustive_refute,
    fuzz_refute,
)
from .parser import ParseError, parse, parse_type  # noqa: E402
from .pipeline import CheckResult, check_source  # noqa: E402
from .report import Diagnosis, diagnose, format_report  # noqa: E402

__all__ = [
    "BudgetExceeded", "CheckResult", "Diagnosis", "EnumBounds", "ErrorFound", "Exhausted",
    "ExhaustedAtDepth", "Feed", "FeedMiss", "InstrumentConfig", "Instrumented",
    "NoErrorWithinBounds", "NotFound", "Outcome", "ParseError", "Refuted", "SearchConfig",
    "SearchResult", "Timeout", "check_source", "diagnose", "embed", "exhaustive_refute",
    "format_report", "fuzz_refute", "instrument_program", "load_corpus", "normalize", "parse",
    "parse_type", "replay", "search", "validate_corpus",
]
