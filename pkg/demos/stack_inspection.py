"""
Inspecting the whole stack
==========================

Stack inspection and garbage collection both need more than the top
frame.  Over a pushdown analysis the stack is a path through the
continuation table, so both questions are answered by walking it.
"""

from aam import corpus_dir
from aam import machine as M
from aam import syntax as S
from aam.engine import AnalysisConfig
from aam.inspection import gc, kll, ok_hat
from aam.pushdown import analyze_pushdown

src = (corpus_dir() / "marks.lif").read_text(encoding="utf-8")
program = S.parse(src, "marks")
print(src)
mono = M.parse_policy("mono")
cfg = AnalysisConfig(policy=mono, engine="naive", pushdown=True)
system = analyze_pushdown(program, mono, cfg)
print("answers:", sorted(M.show_value(v) for v in system.answers))

# %%
# Each ``test`` asks whether p is granted somewhere above the nearest
# denying frame.  The abstract answer is a set: {True}, {False} or both.

for s, _ in sorted(system.seen, key=lambda c: c[0].key()):
    if isinstance(s, M.Ev) and isinstance(s.expr, S.Test):
        verdicts = ok_hat(system.xi, s.expr.perms, s.kont)
        print(f"test at label {s.expr.label}: ok = {sorted(verdicts)}")

# %%
# Collection keeps what the state and its possible stacks can touch.
# The exact mode splits per stack; the inexact mode keeps one union.

def size(store):
    return sum(1 for _ in store)


shown = 0
for s, store in sorted(system.seen, key=lambda c: c[0].key()):
    if isinstance(s, M.Ans) or shown == 4:
        continue
    exact = gc(s, system.xi, store, "exact")
    [(_, wide)] = gc(s, system.xi, store, "inexact")
    live = kll(system.xi, s.kont)
    print(f"{type(s).__name__:3} store {size(store):2} -> exact {[size(x) for _, x in exact]}"
          f", inexact {size(wide)}, {len(live)} live set(s) below")
    shown += 1

# %%
# The same analysis with exact collection running at every step.
collected = analyze_pushdown(program, mono, AnalysisConfig(policy=mono, engine="naive",
                                                           pushdown=True, gc="exact"))
print("states without / with collection:", len(system.seen), len(collected.seen))
