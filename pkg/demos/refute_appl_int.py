"""Walk through one refutation end to end.

The program below claims ``appl_int : (int -> int) -> int`` but returns a
bool when its argument maps 1 to 32767.  Random testing almost never picks
that value; the concolic search solves for it.

    python3 demos/refute_appl_int.py
"""

from __future__ import annotations

from typerefute import SearchConfig, fuzz_refute, instrument_program, parse, search
from typerefute.interp import replay
from typerefute.report import diagnose, format_report
from typerefute.syntax import render

SOURCE = """
let appl_int (fn : int -> int) : int =
  let res = fn 1 in if res != 32767 then fn 0 else (res - 1) < 0
in appl_int
"""


def main():
    inst = instrument_program(parse(SOURCE))
    core = render(inst.program)
    print(f"instrumented program: {len(core)} characters, {len(inst.sites)} error sites")

    fuzz = fuzz_refute(inst.program, seed=0, runs=5_000)
    print(f"fuzzing, 5000 random runs: {type(fuzz).__name__}")

    res = search(inst.program, SearchConfig(seed=0))
    st = res.stats
    print(f"concolic search: {type(res.verdict).__name__} after {st.runs} runs "
          f"and {st.solver_calls} solver calls")

    witness = res.verdict.witness
    print("witness feed:")
    print(witness.dumps().rstrip())
    print(f"replay: {replay(res.program, witness)}")
    print()
    print(format_report(diagnose(inst, res.program, witness)))


if __name__ == "__main__":
    main()
