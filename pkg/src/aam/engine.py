"""Fixpoint engines, abstract compilation and the commit oracle.

Engines differ in how stores are shared between states:

``naive``
    every state carries its own store; the result is the least fixed
    point of the global transfer function over full states.
``widened``
    one global store shared by a growing set of contexts; every
    iteration steps all contexts against the current store.
``frontier``
    only newly reached (context, store version) pairs are stepped.  The
    ``stores`` backend keeps whole stores in the seen set, the
    ``timestamped`` backend replaces them with chain indices, and the
    ``delta`` backend merges per-step change logs once per iteration.
    With ``store="versioned"`` the global store is a value-stack store.
"""

from __future__ import annotations

import time as _time
import warnings
from dataclasses import dataclass, field, replace as _dc_replace
from typing import Optional

from . import syntax as S
from .machine import (
    Ans, ArK, Clo, Co, EAGER, EMPTY_ENV, Ev, HALT, IfK, Mode, Policy, STORE_KONTS,
    AddrRef, Super, StepContext, lit_value, make_policy, marks_frame, marks_grant,
    step_ev, transitions, _dedupe_sorted,
)
from .store import (
    EMPTY_STORE, FlatStore, StoreChain, VersionedStore, append_all, join_stores,
    replay, replay_at, snapshot,
)


class ConfigError(ValueError):
    """An invalid combination of analysis options."""


class ResourceLimit(RuntimeError):
    """The analysis exceeded its state or iteration budget."""


ENGINES = ("naive", "widened", "frontier", "delta")


@dataclass(frozen=True)
class AnalysisConfig:
    policy: Policy = field(default_factory=lambda: make_policy("mono"))
    engine: str = "frontier"
    lazy: str = "off"
    compiled: bool = False
    store: str = "flat"
    keep_history: bool = True
    gc: str = "none"
    pushdown: bool = False
    memo: bool = False
    granularity: str = "call"  # pushdown contexts per call (CESIK) or per frame
    max_states: int = 200_000
    max_iterations: Optional[int] = None

    def validate(self) -> list:
        """Raise ConfigError for invalid combinations; return warnings."""
        notes = []
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.lazy not in ("off", "addr", "super"):
            raise ConfigError(f"unknown lazy mode {self.lazy!r}")
        if self.store not in ("flat", "versioned"):
            raise ConfigError(f"unknown store backend {self.store!r}")
        if self.gc not in ("none", "exact", "inexact"):
            raise ConfigError(f"unknown gc mode {self.gc!r}")
        if self.granularity not in ("call", "frame"):
            raise ConfigError(f"unknown context granularity {self.granularity!r}")
        if self.memo and not self.pushdown:
            raise ConfigError("--memo requires --pushdown")
        if self.memo and self.gc == "inexact":
            raise ConfigError("memoization with inexact GC can leave dangling addresses")
        if self.memo and self.granularity != "call":
            raise ConfigError("memoization needs per-call contexts")
        if self.memo and self.gc == "exact":
            notes.append("memoization with exact GC: completeness checks do not apply")
        if self.store == "versioned" and self.engine not in ("frontier", "delta"):
            raise ConfigError("the versioned store backs the frontier engines only")
        if self.gc != "none" and not self.pushdown and self.engine != "naive":
            raise ConfigError("garbage collection needs per-state stores (naive engine or pushdown)")
        if self.gc != "none" and self.pushdown and self.engine != "naive":
            raise ConfigError("pushdown garbage collection needs per-state stores (--engine naive)")
        if self.pushdown and self.compiled and self.granularity == "frame":
            raise ConfigError("compiled mode is not available with per-frame contexts")
        if self.pushdown and self.store == "versioned":
            raise ConfigError("the pushdown analysis uses flat stores")
        return notes

    def mode(self, program: S.Program) -> Mode:
        return Mode(self.lazy, self.compiled, program.permissions)

    def describe(self) -> dict:
        return {
            "alloc": self.policy.label(),
            "engine": self.engine,
            "lazy": self.lazy,
            "compiled": self.compiled,
            "store": self.store,
            "gc": self.gc,
            "pushdown": self.pushdown,
            "memo": self.memo,
        }


@dataclass
class AnalysisResult:
    """Reachable graph of an analysis.

    ``states`` holds (state, store) pairs for per-state engines and
    (state, version) pairs for global-store engines.
    """
    states: frozenset
    edges: frozenset
    stuck: frozenset
    answers: frozenset
    metrics: dict
    store: Optional[FlatStore] = None
    chain: Optional[list] = None
    per_state: bool = False

    def contexts(self) -> frozenset:
        return frozenset(s for s, _ in self.states)

    def store_of(self, config) -> FlatStore:
        s, tag = config
        if self.per_state:
            return tag
        if self.chain is not None:
            return self.chain[tag]
        return self.store


# ---------------------------------------------------------------------------
# abstract compilation

class CompiledExpr:
    """Transfer function for one expression.

    Calling it with (step context, env, kont, time, log) returns the
    successor (state, log) pairs that interpreting the Ev state and
    every following Ev-dispatch step would produce.
    """

    __slots__ = ("source", "run")

    def __init__(self, source, run):
        self.source = source
        self.run = run

    def __call__(self, cx, env, kont, t, log=()):
        return self.run(cx, env, kont, t, log)

    def __repr__(self):
        return f"CompiledExpr({S.show(self.source)})"


_compiled: dict = {}


def compile_expr(e) -> CompiledExpr:
    c = _compiled.get(id(e))
    if c is not None and c.source is e:
        return c
    c = _compile(e)
    _compiled[id(e)] = c
    return c


def _compile(e) -> CompiledExpr:
    if isinstance(e, S.Var):
        name = e.name

        def run(cx, env, kont, t, log):
            a = env[name]
            lazy = cx.mode.lazy
            if lazy == "addr":
                return [(Co(kont, AddrRef(a), t), log)]
            if lazy == "super":
                return [(Co(kont, Super(cx.store.lookup(a)), t), log)]
            return [(Co(kont, v, t), log) for v in cx.store.lookup(a)]
    elif isinstance(e, S.Lit):
        val = lit_value(e)

        def run(cx, env, kont, t, log):
            return [(Co(kont, val, t), log)]
    elif isinstance(e, S.Lam):
        def run(cx, env, kont, t, log):
            return [(Co(kont, Clo(e, env), t), log)]
    elif isinstance(e, S.App):
        fn = compile_expr(e.fn)
        arg, label = e.arg, e.label

        def run(cx, env, kont, t, log):
            k2, log2 = cx.ops.push(cx, kont, ArK(arg, env, label, t), log)
            return fn.run(cx.overlay(log2[: len(log2) - len(log)]), env, k2, t, log2)
    elif isinstance(e, S.If):
        cond = compile_expr(e.cond)
        then, orelse, label = e.then, e.orelse, e.label

        def run(cx, env, kont, t, log):
            k2, log2 = cx.ops.push(cx, kont, IfK(then, orelse, env, label, t), log)
            return cond.run(cx.overlay(log2[: len(log2) - len(log)]), env, k2, t, log2)
    elif isinstance(e, S.Grant):
        body, perms = compile_expr(e.body), e.perms

        def run(cx, env, kont, t, log):
            k2 = cx.ops.set_marks(cx, kont, lambda m: marks_grant(m, perms))
            return body.run(cx, env, k2, t, log)
    elif isinstance(e, S.Frame):
        body, perms = compile_expr(e.body), e.perms

        def run(cx, env, kont, t, log):
            universe = cx.mode.permissions
            k2 = cx.ops.set_marks(cx, kont, lambda m: marks_frame(m, perms, universe))
            return body.run(cx, env, k2, t, log)
    elif isinstance(e, S.Test):
        then, orelse, perms = compile_expr(e.then), compile_expr(e.orelse), e.perms

        def run(cx, env, kont, t, log):
            out = []
            for b in sorted(cx.ops.ok(cx, kont, perms), reverse=True):
                out.extend((then if b else orelse).run(cx, env, kont, t, log))
            return out
    else:
        raise TypeError(f"not an expression: {e!r}")
    return CompiledExpr(e, run)


def commit(s, store, policy: Policy, mode: Mode = EAGER, ops=STORE_KONTS) -> list:
    """Run the interpreted Ev-dispatch rules until no Ev state remains.

    Returns every resulting (state, log) pair; eager variable references
    can fork, so there may be several.  Non-Ev states commit to themselves.
    """
    cx = StepContext(store, policy, _dc_replace(mode, compiled=False), ops)
    out = []
    work = [(s, ())]
    while work:
        st, log = work.pop()
        if not isinstance(st, Ev):
            out.append((st, log))
            continue
        for st2, l2 in step_ev(cx, st):
            work.append((st2, l2 + log))
    return _dedupe_sorted(out) if len(out) > 1 else out


def initial(program: S.Program, policy: Policy, mode: Mode, ops=STORE_KONTS, store=EMPTY_STORE):
    """Injected (state, log) pairs; compiled mode runs the compiled program first."""
    s = Ev(program.root, EMPTY_ENV, HALT, policy.t0)
    if mode.compiled:
        cx = StepContext(store, policy, mode, ops)
        return compile_expr(program.root)(cx, EMPTY_ENV, HALT, policy.t0, ())
    return [(s, ())]


# ---------------------------------------------------------------------------
# naive: per-state stores

def naive_step(config, policy: Policy, mode: Mode, gc: str = "none") -> list:
    """Successors of one (state, store) pair under per-state stores."""
    from .inspection import collect_plain
    s, store = config
    out = []
    for s2, log in transitions(StepContext(store, policy, mode), s):
        store2, _ = replay(log, store)
        if gc != "none":
            store2 = collect_plain(s2, store2)
        out.append((s2, store2))
    return out


def naive_initial(program: S.Program, policy: Policy, mode: Mode, gc: str = "none") -> list:
    from .inspection import collect_plain
    out = []
    for s, log in initial(program, policy, mode):
        store, _ = replay(log, EMPTY_STORE)
        if gc != "none":
            store = collect_plain(s, store)
        out.append((s, store))
    return out


def analyze_naive(program: S.Program, policy: Policy, mode: Mode | None = None,
                  gc: str = "none", max_states: int = 200_000) -> AnalysisResult:
    mode = mode or Mode(permissions=program.permissions)
    start = _time.perf_counter()
    seen = set()
    frontier = []
    for c in naive_initial(program, policy, mode, gc):
        if c not in seen:
            seen.add(c)
            frontier.append(c)
    edges = set()
    stuck = set()
    iterations = 0
    while frontier:
        iterations += 1
        nxt = []
        for c in frontier:
            succ = naive_step(c, policy, mode, gc)
            if not succ and not isinstance(c[0], Ans):
                stuck.add(c)
            for c2 in succ:
                edges.add((c, c2))
                if c2 not in seen:
                    seen.add(c2)
                    nxt.append(c2)
        if len(seen) > max_states:
            raise ResourceLimit(f"more than {max_states} states")
        frontier = nxt
    answers = frozenset(s.value for s, _ in seen if isinstance(s, Ans))
    return AnalysisResult(
        frozenset(seen), frozenset(edges), frozenset(stuck), answers,
        _metrics(len(seen), len(edges), iterations, len({st for _, st in seen}), start),
        per_state=True,
    )


def _metrics(states, edges, iterations, versions, start) -> dict:
    return {
        "state_count": states,
        "edge_count": edges,
        "iterations": iterations,
        "store_versions": versions,
        "elapsed_ms": round((_time.perf_counter() - start) * 1000.0, 3),
    }


# ---------------------------------------------------------------------------
# widened: (C, σ) iteration

def analyze_widened(program: S.Program, policy: Policy, mode: Mode | None = None,
                    max_states: int = 200_000) -> AnalysisResult:
    """Step every known context against the shared store until nothing grows.

    Reported states pair each context with the store version at which it
    was first reached; edges connect contexts at the version of the step.
    """
    mode = mode or Mode(permissions=program.permissions)
    start = _time.perf_counter()
    init = initial(program, policy, mode)
    store, _ = replay(append_all([log for _, log in init]), EMPTY_STORE)
    chain = StoreChain(store)
    contexts = {s: 0 for s, _ in init}
    results: dict = {}  # context -> successors under the current store
    edges = set()
    stuck = set()
    iterations = 0
    dirty = True
    while True:
        iterations += 1
        version = chain.current_version
        cx = StepContext(store, policy, mode)
        logs = []
        for c in list(contexts):
            if dirty or c not in results:
                results[c] = transitions(cx, c)
            succ = results[c]
            for c2, log in succ:
                logs.append(log)
                edges.add(((c, version), c2))
        new = {}
        for c in list(contexts):
            for c2, _ in results[c]:
                if c2 not in contexts and c2 not in new:
                    new[c2] = version
        store2, changed = replay(append_all(logs), store)
        for c2 in new:
            contexts[c2] = chain.current_version + (1 if changed else 0)
        if changed:
            chain.advance(store2)
            store = store2
        dirty = changed
        if len(contexts) > max_states:
            raise ResourceLimit(f"more than {max_states} contexts")
        if not new and not changed:
            break
    final = chain.current_version
    states = frozenset((c, final) for c in contexts)
    edge_set = frozenset(((c, final), (c2, final)) for (c, _), c2 in edges)
    for c in contexts:
        if not results[c] and not isinstance(c, Ans):
            stuck.add((c, final))
    answers = frozenset(c.value for c in contexts if isinstance(c, Ans))
    return AnalysisResult(
        states, edge_set, frozenset(stuck), answers,
        _metrics(len(states), len(edge_set), iterations, len(chain), start),
        store=store, chain=None,
    )


# ---------------------------------------------------------------------------
# frontier engines

def analyze_frontier(program: S.Program, policy: Policy, mode: Mode | None = None,
                     backend: str = "timestamped", store_kind: str = "flat",
                     keep_history: bool = True, max_states: int = 200_000) -> AnalysisResult:
    """Frontier iteration over (context, store version) pairs.

    ``backend``: ``stores`` (whole stores in the seen set),
    ``timestamped`` (versions in the seen set; stores joined per successor)
    or ``delta`` (change logs merged and replayed once per iteration).
    ``store_kind="versioned"`` keeps a value-stack store and implies delta replay.
    """
    if backend not in ("stores", "timestamped", "delta"):
        raise ConfigError(f"unknown frontier backend {backend!r}")
    mode = mode or Mode(permissions=program.permissions)
    start = _time.perf_counter()
    init = initial(program, policy, mode)
    first, _ = replay(append_all([log for _, log in init]), EMPTY_STORE)
    versioned = store_kind == "versioned"
    chain = StoreChain(first, keep_history=keep_history or backend == "stores")
    vstore = None
    if versioned:
        vstore, _ = replay_at(append_all([log for _, log in init]), VersionedStore(), 0)
    t = 0
    store = first
    # seen: context -> versions at which it was stepped (newest last)
    seen: dict = {}
    seen_stores: set = set()
    frontier = sorted({s for s, _ in init}, key=lambda s: s.key())
    edges = set()
    stuck = set()
    iterations = 0
    n_seen = 0
    while frontier:
        iterations += 1
        view = vstore.view(t) if versioned else store
        cx = StepContext(view, policy, mode)
        succs = []
        for c in frontier:
            out = transitions(cx, c)
            if not out and not isinstance(c, Ans):
                stuck.add((c, t))
            succs.append((c, out))
        # merge store effects
        if versioned:
            vstore2, changed = replay_at(append_all([l for _, out in succs for _, l in out]), vstore, t)
            store2 = None
        elif backend == "delta":
            store2, changed = replay(append_all([l for _, out in succs for _, l in out]), store)
        else:
            # each successor's own store, joined into the next version
            grown = []
            for _, out in succs:
                for _, log in out:
                    own, grew = replay(log, store)
                    if grew:
                        grown.append(own)
            store2 = store
            for own in grown:
                store2 = join_stores(store2, own) if store2 is not store else own
            changed = bool(grown)
        t2 = t + 1 if changed else t
        for c in frontier:
            if backend == "stores":
                seen_stores.add((c, store))
            versions = seen.setdefault(c, [])
            if not versions or versions[-1] != t:
                versions.append(t)
                n_seen += 1
            if not keep_history and len(versions) > 1:
                del versions[:-1]
        if changed:
            if versioned:
                vstore = vstore2
                store = None
                chain.advance(snapshot(vstore, t2) if keep_history else FlatStore())
            else:
                store = store2
                chain.advance(store)
        nxt = {}
        for c, out in succs:
            for c2, _ in out:
                edges.add(((c, t), (c2, t2)))
                if backend == "stores":
                    fresh = (c2, store) not in seen_stores
                else:
                    vs = seen.get(c2)
                    fresh = changed or not vs or vs[-1] != t2
                if fresh:
                    nxt[c2] = None
        t = t2
        if n_seen > max_states:
            raise ResourceLimit(f"more than {max_states} states")
        frontier = sorted(nxt, key=lambda s: s.key())
    if versioned:
        final_store = snapshot(vstore, t)
    else:
        final_store = store
    if backend == "stores":
        index = {st: i for i, st in enumerate(chain._versions)}
        states = frozenset((c, index[st]) for c, st in seen_stores)
    else:
        states = frozenset((c, v) for c, vs in seen.items() for v in vs)
    answers = frozenset(c.value for c in seen if isinstance(c, Ans))
    result = AnalysisResult(
        states, frozenset(edges), frozenset(stuck), answers,
        _metrics(len(states), len(edges), iterations, len(chain), start),
        store=final_store, chain=list(chain._versions) if chain.keep_history else None,
    )
    result.vstore = vstore
    return result


# ---------------------------------------------------------------------------
# dispatch

def analyze(program: S.Program, config: AnalysisConfig):
    """Run the analysis a config describes (pushdown configs return a PushdownSystem)."""
    for note in config.validate():
        warnings.warn(note)
    mode = config.mode(program)
    if config.pushdown:
        from .pushdown import analyze_pushdown
        return analyze_pushdown(program, config.policy, config)
    if config.engine == "naive":
        return analyze_naive(program, config.policy, mode, config.gc, config.max_states)
    if config.engine == "widened":
        return analyze_widened(program, config.policy, mode, config.max_states)
    backend = "delta" if config.engine == "delta" else "timestamped"
    return analyze_frontier(program, config.policy, mode, backend, config.store,
                            config.keep_history, config.max_states)
