"""Pushdown analysis: exact call/return matching through a continuation
table Ξ.

A pushdown stack is a ``PStack``: the local frames pushed since the
enclosing function entry, the marks of that boundary, and a context
``τ`` (or None for the bottom of the stack).  ``Ξ[τ]`` holds every
stack that was live when some caller entered ``τ``.

Two context granularities are available.  Per-call contexts (the
default) are created when a closure is entered and are keyed by the
closure, its argument and the store.  Per-frame contexts are created
at every push and keyed by the pushing expression, environment, store
and time; their stacks never hold more than one local frame.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace as _dc_replace
from typing import Optional

from .machine import (
    Ans, Ap, Clo, Co, EMPTY_ENV, Ev, Mode, NO_MARKS, Policy, StepContext,
    _Keyed, value_class, _mkey, marks_override, step_co, transitions, with_marks,
)
from .store import EMPTY_STORE, FlatStore, StoreChain, append_all, join_stores, replay
from . import inspection as I


# ---------------------------------------------------------------------------
# stacks and contexts

@value_class
class Context(_Keyed):
    """A function-entry context: closure, forced argument, store identity, entry time.

    ``store`` is a FlatStore for per-state stores or an int version for a
    shared store.  ``time`` is the callee's time after the tick; the body
    allocates with it, so two entries that differ only in time are
    different computations.
    """
    fn: Clo
    arg: frozenset
    store: object
    time: tuple = ()

    def _make_key(self):
        st = self.store.key() if isinstance(self.store, FlatStore) else f"v{self.store}"
        args = ",".join(sorted(v.key() for v in self.arg))
        t = ",".join(map(str, self.time))
        return f"τ[{self.fn.key()};{args};{st};{t}]"


@value_class
class FrameContext(_Keyed):
    """A per-frame context: pushing expression label, env, store identity, time."""
    label: int
    env: object
    store: object
    time: tuple

    def _make_key(self):
        st = self.store.key() if isinstance(self.store, FlatStore) else f"v{self.store}"
        return f"τ[{self.label}{self.env.key()};{st};{'.'.join(map(str, self.time))}]"


@value_class
class PStack(_Keyed):
    frames: tuple = ()
    marks: tuple = NO_MARKS
    ctx: Optional[object] = None

    def _make_key(self):
        fs = "::".join(f.key() for f in self.frames)
        c = self.ctx.key() if self.ctx is not None else "ε"
        return f"⟨{fs}|{_mkey(self.marks)}|{c}⟩"

    def push(self, frame) -> "PStack":
        return PStack((frame,) + self.frames, self.marks, self.ctx)


EMPTY_STACK = PStack()


@value_class
class FStack(_Keyed):
    """An explicit frame list (top first) over a bottom carrying halt marks.

    ``more`` marks a stack cut short by an unroll depth bound.
    """
    frames: tuple = ()
    halt_marks: tuple = NO_MARKS
    more: bool = False

    def _make_key(self):
        fs = "::".join(f.key() for f in self.frames)
        return f"[{fs}{'::…' if self.more else ''}|{_mkey(self.halt_marks)}]"


FULL_EMPTY = FStack()


# ---------------------------------------------------------------------------
# pop and unroll

def pop(stack: PStack, xi: dict) -> list:
    """Every (top frame, remaining stack) for a return to ``stack``.

    Chains of saved stacks with no local frames are followed through Ξ
    with a guard set so cyclic tail-call chains terminate.
    """
    tops, _, _ = _pop_all(stack, xi)
    return tops


def _pop_all(stack: PStack, xi: dict):
    """(tops, reaches bottom?, contexts dereferenced)."""
    if stack.frames:
        return [(stack.frames[0], PStack(stack.frames[1:], stack.marks, stack.ctx))], False, ()
    if stack.ctx is None:
        return [], True, ()
    tops = []
    halts = False
    guard = set()
    visited = []
    todo = [stack.ctx]
    while todo:
        tau = todo.pop()
        if tau in guard:
            continue
        guard.add(tau)
        visited.append(tau)
        for saved in xi.get(tau, ()):
            if saved.frames:
                tops.append((saved.frames[0], PStack(saved.frames[1:], saved.marks, saved.ctx)))
            elif saved.ctx is None:
                halts = True
            else:
                todo.append(saved.ctx)
    tops.sort(key=lambda p: (p[0].key(), p[1].key()))
    return tops, halts, visited


def restore_on_pop(stack: PStack, xi: dict, store):
    """Join the stores of the contexts a return pops through.

    Under garbage collection a callee may drop addresses that only a
    continuation added to Ξ later needs.  Those addresses were mapped in
    the caller's store, which the context records, so they come back here.
    """
    if stack.frames or stack.ctx is None:
        return store
    _, _, visited = _pop_all(stack, xi)
    for tau in visited:
        store = join_stores(store, tau.store)
    return store


def _override_top(stack: FStack, marks: tuple) -> FStack:
    if not marks:
        return stack
    if stack.frames:
        top = stack.frames[0]
        return FStack((with_marks(top, marks_override(marks, top.marks)),) + stack.frames[1:],
                      stack.halt_marks, stack.more)
    return FStack((), marks_override(marks, stack.halt_marks), stack.more)


def unroll(xi: dict, stack: PStack, depth: int = 32) -> set:
    """Explicit stacks a pushdown stack can stand for, cut at ``depth`` frames.

    Cut stacks carry ``more=True``.  Boundary marks written by a callee
    override the marks of the caller's top frame, mirroring how mark
    updates hit the top frame of an explicit stack.
    """
    out = set()

    def go(st: PStack, prefix: tuple, pending: tuple, guard: frozenset):
        frames = st.frames
        if frames:
            top = frames[0]
            frames = (with_marks(top, marks_override(pending, top.marks)),) + frames[1:]
            below = st.marks
            guard = frozenset()
        else:
            below = marks_override(pending, st.marks)
        full = prefix + frames
        if len(full) > depth:
            out.add(FStack(full[:depth], NO_MARKS, True))
            return
        if st.ctx is None:
            out.add(FStack(full, below))
            return
        if st.ctx in guard:
            return
        guard = guard | {st.ctx}
        for saved in sorted(xi.get(st.ctx, ()), key=lambda k: k.key()):
            go(saved, full, below, guard)

    go(stack, (), NO_MARKS, frozenset())
    return out


def stack_contains(xi: dict, stack: PStack, full: FStack) -> bool:
    """Whether ``full`` is one of the unrollings of ``stack`` (no depth bound)."""
    target = full.frames
    n = len(target)

    def frames_match(mine: tuple, pos: int, pending: tuple):
        if pos + len(mine) > n:
            return False
        for i, f in enumerate(mine):
            expect = with_marks(f, marks_override(pending, f.marks)) if i == 0 else f
            if target[pos + i] != expect:
                return False
        return True

    seen = set()
    todo = [(stack, 0, NO_MARKS)]
    while todo:
        st, pos, pending = todo.pop()
        if (st, pos, pending) in seen:
            continue
        seen.add((st, pos, pending))
        if not frames_match(st.frames, pos, pending):
            continue
        below = st.marks if st.frames else marks_override(pending, st.marks)
        pos2 = pos + len(st.frames)
        if st.ctx is None:
            if pos2 == n and below == full.halt_marks:
                return True
            continue
        for saved in xi.get(st.ctx, ()):
            todo.append((saved, pos2, below))
    return False


# ---------------------------------------------------------------------------
# continuation disciplines

@value_class
class Relevant(_Keyed):
    """A memoized result: returned value and the store identity it was returned with."""
    value: object
    store: object

    def _make_key(self):
        st = self.store.key() if isinstance(self.store, FlatStore) else f"v{self.store}"
        return f"{self.value.key()}/{st}"


class _Accum:
    def __init__(self):
        self.xi_add = []
        self.memo_add = []


class _Reads:
    """A read-only view of Ξ that records the contexts a step consults."""

    def __init__(self, xi: dict):
        self.xi = xi
        self.log: set = set()

    def get(self, tau, default=None):
        self.log.add(tau)
        return self.xi.get(tau, default)

    def __contains__(self, tau):
        self.log.add(tau)
        return tau in self.xi


class CallOps:
    """Per-call contexts with local continuations.

    ``pop_xi`` is the table returns read; with memoization it is the bare
    table, since later callers get results from the memo table instead.
    """

    def __init__(self, xi: dict, memo_table: dict, memo: bool = False, accum: _Accum | None = None,
                 plug_store=None, pop_xi=None):
        self.xi = xi
        self.pop_xi = xi if pop_xi is None else pop_xi
        self.memo_table = memo_table
        self.memo = memo
        self.accum = accum if accum is not None else _Accum()
        # maps (relevant, caller context) to the (store, identity) a plugged result runs with
        self.plug_store = plug_store or (lambda r, tau: (r.store, r.store))
        self.memo_hits = 0

    def push(self, cx, kont, frame, log):
        return kont.push(frame), log

    def returns(self, cx, kont, value):
        tops, halts, visited = _pop_all(kont, self.pop_xi)
        if self.memo and visited:
            r = Relevant(value, cx.token)
            for tau in visited:
                self.accum.memo_add.append((tau, r))
        return halts, tops

    def replace(self, cx, handle, frame):
        return handle.push(frame)

    def rest(self, cx, handle):
        return (handle,)

    def set_marks(self, cx, kont, fn):
        if kont.frames:
            top = kont.frames[0]
            return PStack((with_marks(top, fn(top.marks)),) + kont.frames[1:], kont.marks, kont.ctx)
        return PStack((), fn(kont.marks), kont.ctx)

    def ok(self, cx, kont, perms):
        return I.ok_hat_xi(self.xi, perms, kont)

    def enter(self, cx, state: Ap):
        tau = push_context(state, cx.store, cx.token, cx.policy)
        self.accum.xi_add.append((tau, state.kont))
        if self.memo and tau in self.memo_table:
            self.memo_hits += 1
            for r in sorted(self.memo_table[tau], key=lambda r: r.key()):
                for s2, log, token in plug_return(cx, self, state.kont, r, tau):
                    cx.extra.append((s2, log, token))
            return ()
        return (PStack((), NO_MARKS, tau),)


def plug_return(cx, ops: CallOps, kont: PStack, r: Relevant, tau) -> list:
    """Return a memoized result to a caller's stack.

    The plugged Co state is stepped at once, so the successors are the
    same states an ordinary return through ``tau`` produces.
    """
    store, token = ops.plug_store(r, tau)
    cx2 = StepContext(store, cx.policy, cx.mode, ops, token)
    out = step_co(cx2, Co(kont, r.value, cx.policy.t0))
    return [(s, log, token) for s, log in out]


class FrameOps:
    """Per-frame contexts: every push saves the whole continuation in Ξ."""

    def __init__(self, xi: dict, accum: _Accum | None = None):
        self.xi = xi
        self.accum = accum if accum is not None else _Accum()

    def push(self, cx, kont, frame, log):
        tau = FrameContext(frame.label, frame.env, cx.token, frame.time)
        self.accum.xi_add.append((tau, kont))
        return PStack((frame,), NO_MARKS, tau), log

    def returns(self, cx, kont, value):
        if not kont.frames:
            return True, ()
        return False, ((kont.frames[0], kont.ctx),)

    def replace(self, cx, handle, frame):
        return PStack((frame,), NO_MARKS, handle)

    def rest(self, cx, handle):
        return sorted(self.xi.get(handle, ()), key=lambda k: k.key())

    def set_marks(self, cx, kont, fn):
        if kont.frames:
            top = kont.frames[0]
            return PStack((with_marks(top, fn(top.marks)),), NO_MARKS, kont.ctx)
        return PStack((), fn(kont.marks), None)

    def ok(self, cx, kont, perms):
        return I.ok_hat_xi(self.xi, perms, kont)

    def enter(self, cx, state):
        return (state.kont,)


class FullStackOps:
    """Explicit, unbounded frame lists: the reference machine for pushdown checks."""

    def push(self, cx, kont, frame, log):
        return FStack((frame,) + kont.frames, kont.halt_marks), log

    def returns(self, cx, kont, value):
        if not kont.frames:
            return True, ()
        return False, ((kont.frames[0], FStack(kont.frames[1:], kont.halt_marks)),)

    def replace(self, cx, handle, frame):
        return FStack((frame,) + handle.frames, handle.halt_marks)

    def rest(self, cx, handle):
        return (handle,)

    def set_marks(self, cx, kont, fn):
        if kont.frames:
            top = kont.frames[0]
            return FStack((with_marks(top, fn(top.marks)),) + kont.frames[1:], kont.halt_marks)
        return FStack((), fn(kont.halt_marks))

    def ok(self, cx, kont, perms):
        return frozenset((I.ok(perms, kont),))

    def enter(self, cx, state):
        return (state.kont,)


FULL_STACK_OPS = FullStackOps()


def push_context(state: Ap, store, token=None, policy: Policy | None = None) -> Context:
    """The context a closure application enters."""
    if not isinstance(state.fn, Clo):
        raise ValueError("push_context needs an application of a closure")
    t = policy.tick_ap(state.label, state.time) if policy is not None else ()
    return Context(state.fn, store.lookup(state.arg), store if token is None else token, t)


def step_pushdown(s, store, xi: dict, policy: Policy, mode: Mode, memo_table: dict | None = None,
                  token=None):
    """Successors of a pushdown state with the Ξ and memo additions they cause.

    Returns (successors, Ξ additions, memo additions); successors are
    (state, log, store identity) triples, where the identity differs from
    ``token`` only for memoized results.
    """
    token = store if token is None else token
    ops = CallOps(xi, memo_table or {}, memo=memo_table is not None)
    cx = StepContext(store, policy, mode, ops, token)
    out = [(s2, log, token) for s2, log in transitions(cx, s)] + cx.extra
    return out, ops.accum.xi_add, ops.accum.memo_add


# ---------------------------------------------------------------------------
# the frontier system

@dataclass
class PushdownSystem:
    seen: dict
    edges: set
    frontier: list
    xi: dict
    memo: dict
    answers: frozenset
    stuck: frozenset
    metrics: dict
    per_state: bool = True
    store: Optional[FlatStore] = None
    chain: Optional[list] = None
    rendezvous: int = 0
    rendezvous_states: set = field(default_factory=set)
    memo_hits: int = 0
    converged: bool = True

    @property
    def states(self) -> frozenset:
        return frozenset(self.seen)

    def contexts(self) -> frozenset:
        return frozenset(s for s, _ in self.seen)

    def store_of(self, config) -> FlatStore:
        s, tag = config
        if self.per_state:
            return tag
        return self.chain[tag] if self.chain is not None else self.store


def _merge(table: dict, additions) -> dict:
    """Add (key, item) pairs to a set-valued table; return the new items per key."""
    delta = {}
    for k, v in additions:
        cur = table.get(k)
        if cur is None or v not in cur:
            table[k] = (cur or frozenset()) | {v}
            delta.setdefault(k, set()).add(v)
    return delta


def analyze_pushdown(program, policy: Policy, config=None, *, max_iterations: int | None = None,
                     gc: str | None = None, memo: bool | None = None) -> PushdownSystem:
    """Iterate the pushdown frontier system to a fixed point.

    Per-state stores are used with ``engine="naive"`` (the default for
    pushdown); otherwise one store is shared and contexts record its
    version.  ``max_iterations`` bounds the run (needed for concrete
    allocation on diverging programs).
    """
    from .engine import AnalysisConfig, ResourceLimit
    if config is None:
        config = AnalysisConfig(policy=policy, engine="naive", pushdown=True)
    gc = config.gc if gc is None else gc
    memo_on = config.memo if memo is None else memo
    max_iterations = config.max_iterations if max_iterations is None else max_iterations
    per_state = config.engine == "naive"
    per_frame = config.granularity == "frame"
    mode = config.mode(program)
    start = _time.perf_counter()

    xi: dict = {}
    reads = _Reads(xi)
    deps: dict = {}  # context -> configs whose step read it
    memo_table: dict = {}
    chain = None if per_state else StoreChain(EMPTY_STORE)
    rendezvous = 0
    rendezvous_states: set = set()
    memo_hits = 0

    def make_ops(accum):
        if per_frame:
            return FrameOps(reads, accum)
        return CallOps(reads, memo_table, memo_on, accum, plug_store, xi if memo_on else reads)

    def plug_store(r, tau):
        if per_state:
            st = r.store
            if gc != "none":
                st = join_stores(st, tau.store)
            return st, st
        return chain.current, chain.current_version

    def finish(s2, log, base):
        st, _ = replay(log, base)
        if per_state and gc != "none":
            return I.gc(s2, reads, st, gc)
        return [(s2, st)]

    # injection
    accum = _Accum()
    ops = make_ops(accum)
    base_kont = EMPTY_STACK
    root = program.root
    from .machine import make_ev
    cx0 = StepContext(EMPTY_STORE, policy, mode, ops, EMPTY_STORE if per_state else 0)
    init = make_ev(cx0, root, EMPTY_ENV, base_kont, policy.t0, ())
    _merge(xi, accum.xi_add)
    if per_state:
        configs = []
        for s, log in init:
            configs.extend(finish(s, log, EMPTY_STORE))
    else:
        st, _ = replay(append_all([log for _, log in init]), EMPTY_STORE)
        chain = StoreChain(st)
        configs = [(s, 0) for s, _ in init]
    seen: dict = {c: 0 for c in configs}

    def depend(c):
        for tau in reads.log:
            deps.setdefault(tau, set()).add(c)
        reads.log = set()

    frontier = sorted(set(configs), key=_config_key)
    edges = set()
    iterations = 0
    converged = True

    while frontier:
        if max_iterations is not None and iterations >= max_iterations:
            converged = False
            break
        iterations += 1
        accum = _Accum()
        ops = make_ops(accum)
        raw = []
        if per_state:
            for c in frontier:
                s, st = c
                reads.log = set()
                if gc != "none" and isinstance(s, Co):
                    st = restore_on_pop(s.kont, reads, st)
                cx = StepContext(st, policy, mode, ops, st)
                for s2, log in transitions(cx, s):
                    raw.append((c, s2, log, st))
                for s2, log, token in cx.extra:
                    raw.append((c, s2, log, token))
                depend(c)
        else:
            version = chain.current_version
            store = chain.current
            for c in frontier:
                s, _ = c
                reads.log = set()
                cx = StepContext(store, policy, mode, ops, version)
                for s2, log in transitions(cx, s):
                    raw.append((c, s2, log, store))
                for s2, log, _tok in cx.extra:
                    raw.append((c, s2, log, store))
                depend(c)
        if not per_frame:
            memo_hits += ops.memo_hits
        dxi = _merge(xi, accum.xi_add)
        dmemo = _merge(memo_table, accum.memo_add)
        # rendezvous: new callers of τ meet new results of τ
        extra_targets = []
        while memo_on and dxi and dmemo:
            shared = sorted(set(dxi) & set(dmemo), key=lambda t: t.key())
            if not shared:
                break
            acc2 = _Accum()
            ops2 = make_ops(acc2)
            for tau in shared:
                for kont in sorted(dxi[tau], key=lambda k: k.key()):
                    for r in sorted(dmemo[tau], key=lambda r: r.key()):
                        rendezvous += 1
                        store, token = plug_store(r, tau)
                        cx = StepContext(store, policy, mode, ops2, token)
                        for s2, log in step_co(cx, Co(kont, r.value, policy.t0)):
                            extra_targets.append((s2, log, store))
            _merge(xi, acc2.xi_add)
            dmemo = _merge(memo_table, acc2.memo_add)
        woken = set()
        for tau in dxi:
            woken.update(deps.get(tau, ()))
        if per_state:
            targets = []
            for c, s2, log, base in raw:
                reads.log = set()
                for c2 in finish(s2, log, base):
                    edges.add((c, c2))
                    targets.append(c2)
                depend(c)
            plugged = []
            for s2, log, base in extra_targets:
                plugged.extend(finish(s2, log, base))
        else:
            logs = [log for _, _, log, _ in raw] + [log for _, log, _ in extra_targets]
            st2, changed = replay(append_all(logs), chain.current)
            if changed:
                chain.advance(st2)
            t2 = chain.current_version
            targets = []
            for c, s2, _, _ in raw:
                c2 = (s2, t2)
                edges.add((c, c2))
                targets.append(c2)
            plugged = [(s2, t2) for s2, _, _ in extra_targets]
        rendezvous_states.update(plugged)
        nxt = dict.fromkeys(woken)
        for c2 in targets + plugged:
            if c2 not in seen:
                seen[c2] = iterations
                nxt[c2] = None
        if len(seen) > config.max_states:
            raise ResourceLimit(f"more than {config.max_states} states")
        frontier = sorted(nxt, key=_config_key)

    sources = {c for c, _ in edges}
    stuck = frozenset(c for c in seen if c not in sources and not isinstance(c[0], Ans)) \
        if converged else frozenset()
    answers = frozenset(s.value for s, _ in seen if isinstance(s, Ans))
    versions = len({st for _, st in seen}) if per_state else len(chain)
    metrics = {
        "state_count": len(seen),
        "edge_count": len(edges),
        "iterations": iterations,
        "store_versions": versions,
        "elapsed_ms": round((_time.perf_counter() - start) * 1000.0, 3),
    }
    return PushdownSystem(
        seen, edges, list(frontier), xi, memo_table, answers, stuck, metrics,
        per_state=per_state,
        store=None if per_state else chain.current,
        chain=None if per_state else list(chain._versions),
        rendezvous=rendezvous, rendezvous_states=rendezvous_states,
        memo_hits=memo_hits, converged=converged,
    )


def _config_key(c) -> str:
    s, tag = c
    t = tag.key() if isinstance(tag, FlatStore) else str(tag)
    return s.key() + "/" + t


# ---------------------------------------------------------------------------
# reification check

def full_state(s, stack):
    """Replace a state's continuation with an explicit stack."""
    if isinstance(s, Ans):
        return s
    return _dc_replace(s, kont=stack)


def unfold(program, policy: Policy, mode: Mode, fuel: int, gc: str = "none") -> tuple:
    """Breadth-first unfolding of the explicit-stack machine: (edges, depth reached)."""
    s0 = Ev(program.root, EMPTY_ENV, FULL_EMPTY, policy.t0)
    start = [(s0, EMPTY_STORE)]
    seen = set(start)
    frontier = start
    edges = set()
    for _ in range(fuel):
        nxt = []
        for c in frontier:
            for c2 in full_successors(c, policy, mode, gc):
                edges.add((c, c2))
                if c2 not in seen:
                    seen.add(c2)
                    nxt.append(c2)
        frontier = nxt
        if not frontier:
            break
    return edges, seen


def full_successors(c, policy: Policy, mode: Mode, gc: str = "none") -> list:
    s, st = c
    cx = StepContext(st, policy, mode, FULL_STACK_OPS)
    out = []
    for s2, log in transitions(cx, s):
        st2, _ = replay(log, st)
        if gc != "none":
            st2 = I.collect_plain(s2, st2)
        out.append((s2, st2))
    return out


@dataclass
class ReifyReport:
    unsound: list      # explicit-stack edges the pushdown system does not cover
    unrealized: list   # pushdown edges no explicit-stack step realizes
    extra: list        # reified edges missing from the unfolding (concrete only)
    checked_edges: int
    unfolded_edges: int

    @property
    def ok(self) -> bool:
        return not (self.unsound or self.unrealized or self.extra)


def reify_check(system: PushdownSystem, program, policy: Policy, fuel: int, mode: Mode | None = None,
                gc: str = "none") -> ReifyReport:
    """Compare a per-state pushdown system against the explicit-stack machine.

    * soundness: every edge of the unfolding (up to the depth the pushdown
      run explored) is a reified pushdown edge;
    * local completeness: every pushdown edge is realized by one step of
      the explicit-stack machine for some unrolling of its stacks;
    * for concrete allocation, every reified edge also appears in the
      unfolding (global completeness).
    """
    if not system.per_state:
        raise ValueError("reify_check needs per-state stores")
    mode = mode or Mode(permissions=program.permissions)
    xi = system.xi
    depth_iters = system.metrics["iterations"]
    unfold_edges, unfold_states = unfold(program, policy, mode, max(depth_iters + 2, fuel + 2), gc)
    max_depth = max((len(s.kont.frames) for s, _ in unfold_states if not isinstance(s, Ans)),
                    default=0) + 2

    def unrollings(s):
        if isinstance(s, Ans):
            return [None]
        return [k for k in unroll(xi, s.kont, max_depth) if not k.more]

    realized = set()
    unrealized = []
    for c, c2 in sorted(system.edges, key=lambda e: (_config_key(e[0]), _config_key(e[1]))):
        (s, st), (s2, st2) = c, c2
        targets = {full_state(s2, k) for k in unrollings(s2)}
        hit = False
        for k in unrollings(s):
            x = (full_state(s, k), st)
            for y in full_successors(x, policy, mode, gc):
                if y[1] == st2 and y[0] in targets:
                    realized.add((x, y))
                    hit = True
        if not hit:
            unrealized.append((c, c2))

    # soundness restricted to the horizon the pushdown run reached
    horizon_edges = _within(unfold_edges, program, policy, depth_iters - 1) \
        if not system.converged else unfold_edges
    unsound = sorted((e for e in horizon_edges if e not in realized), key=_edge_key)
    extra = []
    if not policy.abstract:
        extra = sorted((e for e in realized if e not in unfold_edges), key=_edge_key)
    return ReifyReport(unsound, unrealized, extra, len(system.edges), len(unfold_edges))


def _within(edges: set, program, policy, steps: int) -> set:
    """Edges whose source lies within ``steps`` steps of the initial state."""
    s0 = (Ev(program.root, EMPTY_ENV, FULL_EMPTY, policy.t0), EMPTY_STORE)
    succ: dict = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    level = {s0}
    seen = {s0}
    for _ in range(max(steps, 0)):
        nxt = set()
        for a in level:
            for b in succ.get(a, ()):
                if b not in seen:
                    seen.add(b)
                    nxt.add(b)
        level = nxt
    return {(a, b) for a, b in edges if a in seen}


def _edge_key(e) -> str:
    (s, st), (s2, st2) = e
    return f"{s.key()}/{st.key()}->{s2.key()}/{st2.key()}"
