"""
Shrinking the state graph
=========================

One Church-numeral program, analyzed by each engine in turn.  Every step
down the list keeps the same answers while exploring fewer states or doing
less work per state.
"""

import time

from aam import corpus_dir
from aam import syntax as S
from aam.engine import AnalysisConfig, ResourceLimit, analyze
from aam.machine import parse_policy, show_value

src = (corpus_dir() / "church-distrib.lif").read_text(encoding="utf-8")
program = S.parse(src, "church-distrib")
mono = parse_policy("mono")

# %%
# Per-state stores (naive) explode quickly, so give that run a cap.

ladder = [
    ("naive", dict(engine="naive", max_states=20_000)),
    ("widened", dict(engine="widened")),
    ("frontier", dict(engine="frontier")),
    ("delta", dict(engine="delta")),
    ("delta + lazy", dict(engine="delta", lazy="super")),
    ("delta + lazy + compiled", dict(engine="delta", lazy="super", compiled=True)),
]

print(f"{'engine':26} {'states':>7} {'iterations':>10} {'ms':>7}  answers")
for name, flags in ladder:
    t0 = time.perf_counter()
    try:
        r = analyze(program, AnalysisConfig(policy=mono, **flags))
    except ResourceLimit as e:
        print(f"{name:26} {'-':>7} {'-':>10} {'-':>7}  gave up: {e}")
        continue
    ms = (time.perf_counter() - t0) * 1000
    answers = sorted(show_value(v) for v in r.answers)
    print(f"{name:26} {r.metrics['state_count']:>7} {r.metrics['iterations']:>10} "
          f"{ms:>7.1f}  {answers}")

# %%
# The widened engine keeps one store, so its count is of bare states; the
# frontier engines count (state, store version) pairs.
#
# Lazy nondeterminism stops variable references from fanning out into one
# state per value; compilation removes the Ev corridor states in between.
