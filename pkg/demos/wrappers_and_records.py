"""Two effects of checking uses of typed values.

1. A function typed ``int -> int`` that is called with ``true`` is caught at
   the call when use checks are on, and only deeper inside the body when off.
2. A record typed ``{a : int}`` hides its other labels from later code, so a
   projection of a hidden label is an error even though the field exists.

    python3 demos/wrappers_and_records.py
"""

from __future__ import annotations

from collections import Counter

from typerefute import Feed, InstrumentConfig, instrument_program, parse
from typerefute.interp import eval as run_once
from typerefute.normalize import normalize

USE = "let (f : (int -> int)) = fun x -> x + 1 in f true"
RECORD = "let (r : {a : int}) = {a = 1; b = 2} in r.b"


def error_sites(src: str, wrap: bool, seeds: int = 32) -> Counter:
    inst = instrument_program(parse(src), InstrumentConfig(wrap_enabled=wrap))
    prog = normalize(inst.program)
    kinds = Counter()
    for seed in range(seeds):
        out, _ = run_once(prog, Feed(seed=seed))
        kinds[inst.sites[out.site].kind if out.kind == "error" else out.kind] += 1
    return kinds


def main():
    for wrap in (True, False):
        print(f"use check {'on ' if wrap else 'off'}: {dict(error_sites(USE, wrap))}")
    for wrap in (True, False):
        inst = instrument_program(parse(RECORD), InstrumentConfig(wrap_enabled=wrap))
        out, _ = run_once(normalize(inst.program), Feed())
        print(f"record projection, use check {'on ' if wrap else 'off'}: {out}")


if __name__ == "__main__":
    main()
