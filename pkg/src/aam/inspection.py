"""Whole-stack computations: the ``terminal`` worklist, abstract garbage
collection and stack inspection (OK / ÔK) over permission marks.

Stacks come in three shapes and every function here accepts the ones
that make sense for it:

* store-allocated continuations (``Halt`` or a frame with a ``tail``),
* pushdown stacks (local frames, boundary marks and a context looked up in Ξ),
* explicit frame lists (``FStack``) used by the reference stack machine.
"""

from __future__ import annotations

from typing import Callable, Iterable

from . import syntax as S
from .machine import (
    AddrRef, Ans, Ap, ArK, Clo, Co, Ev, FnK, Halt, IfK, Super, denied, granted,
)
from .store import FlatStore


class _Done:
    """Terminal rewrite state carrying a result."""

    __slots__ = ("value",)

    def __init__(self, value):
        self.value = value

    def __eq__(self, other):
        return isinstance(other, _Done) and self.value == other.value

    def __hash__(self):
        return hash(("done", self.value))


def terminal(step_fn: Callable, seed, seen: set | None = None, max_states: int | None = None) -> set:
    """States reachable from ``seed`` that have no successors.

    Pass ``seen`` to share the visited set with an enclosing invocation;
    states already in it are not explored again.
    """
    visited = seen if seen is not None else set()
    todo = [seed]
    out = set()
    while todo:
        s = todo.pop()
        if s in visited:
            continue
        visited.add(s)
        if max_states is not None and len(visited) > max_states:
            raise RuntimeError("terminal: state cap exceeded")
        succ = step_fn(s)
        if not succ:
            out.add(s)
        else:
            todo.extend(x for x in succ if x not in visited)
    return out


def _results(terms) -> set:
    return {t.value for t in terms if isinstance(t, _Done)}


# ---------------------------------------------------------------------------
# touching and reachability

def touch_expr(e, env) -> frozenset:
    return frozenset(env[x] for x in S.fv(e) if x in env)


def touch_value(v) -> frozenset:
    if isinstance(v, Clo):
        return touch_expr(v.lam, v.env)
    if isinstance(v, AddrRef):
        return frozenset((v.addr,))
    if isinstance(v, Super):
        out = frozenset()
        for u in v.vals:
            out |= touch_value(u)
        return out
    return frozenset()


def touch_frame(f) -> frozenset:
    if isinstance(f, ArK):
        out = touch_expr(f.arg, f.env)
    elif isinstance(f, FnK):
        out = frozenset((f.faddr,))
    elif isinstance(f, IfK):
        out = touch_expr(f.then, f.env) | touch_expr(f.orelse, f.env)
    elif isinstance(f, Halt):
        return frozenset()
    else:
        raise TypeError(f"not a frame: {f!r}")
    if f.tail is not None:
        out |= {f.tail}
    return out


def touch_state(s) -> frozenset:
    """Addresses a state mentions outside its continuation."""
    if isinstance(s, Ev):
        return touch_expr(s.expr, s.env)
    if isinstance(s, Co):
        return touch_value(s.value)
    if isinstance(s, Ap):
        return touch_value(s.fn) | {s.arg}
    if isinstance(s, Ans):
        return touch_value(s.value)
    raise TypeError(f"not a state: {s!r}")


def touch(x) -> frozenset:
    """Addresses touched by a value, a frame, or an (expression, env) pair."""
    if isinstance(x, tuple) and len(x) == 2 and not hasattr(x, "key"):
        return touch_expr(*x)
    if isinstance(x, (ArK, FnK, IfK, Halt)):
        return touch_frame(x)
    return touch_value(x)


def touch_storable(s) -> frozenset:
    if isinstance(s, (ArK, FnK, IfK, Halt)):
        return touch_frame(s)
    return touch_value(s)


def reach(roots: Iterable, store) -> frozenset:
    """Addresses reachable from ``roots``; unbound roots are skipped.

    A stack added to Ξ after a callee collected its store can name
    addresses the callee no longer maps; the return restores them.
    """
    live = set()
    todo = list(roots)
    while todo:
        a = todo.pop()
        if a in live or a not in store:
            continue
        live.add(a)
        for s in store.lookup(a):
            for b in touch_storable(s):
                if b not in live:
                    todo.append(b)
    return frozenset(live)


def stack_roots(kont) -> frozenset:
    """Roots contributed by a store-allocated or explicit continuation."""
    frames = getattr(kont, "frames", None)
    if frames is not None and not hasattr(kont, "ctx"):
        out = frozenset()
        for f in frames:
            out |= touch_frame(f)
        return out
    if kont is None:
        return frozenset()
    return touch_frame(kont)


def collect_plain(s, store: FlatStore) -> FlatStore:
    """Collect against a state whose whole stack is visible (no Ξ)."""
    roots = touch_state(s)
    if not isinstance(s, Ans):
        roots |= stack_roots(s.kont)
    return store.restrict(reach(roots, store))


# ---------------------------------------------------------------------------
# live addresses through a pushdown stack

def kll(xi: dict, kont) -> set:
    """Per-stack live address sets for a pushdown continuation."""

    def succ(st):
        if isinstance(st, _Done):
            return ()
        live, ps = st
        for f in ps.frames:
            live = live | touch_frame(f)
        if ps.ctx is None:
            return (_Done(live),)
        return [(live, saved) for saved in xi.get(ps.ctx, ())]

    return _results(terminal(succ, (frozenset(), kont)))


def gc(s, xi: dict | None, store: FlatStore, mode: str = "exact") -> list:
    """Collected (state, store) results: one per live set (exact) or one for their union."""
    if mode == "none":
        return [(s, store)]
    if xi is None or isinstance(s, Ans) or not hasattr(s.kont, "ctx"):
        return [(s, collect_plain(s, store))]
    base = touch_state(s)
    lives = kll(xi, s.kont)
    if not lives:
        return []
    if mode == "inexact":
        roots = base.union(*lives)
        return [(s, store.restrict(reach(roots, store)))]
    out = {}
    for live in lives:
        st = store.restrict(reach(base | live, store))
        out[st] = None
    return [(s, st) for st in sorted(out, key=lambda st: st.key())]


# ---------------------------------------------------------------------------
# stack inspection

def passes(perms: frozenset, marks: tuple) -> bool:
    return not (perms & denied(marks))


def ok(perms, kont) -> bool:
    """Concrete OK over an explicit stack (``FStack``) or a Halt/frame list."""
    perms = frozenset(perms)
    frames = kont.frames
    for f in frames:
        if not perms:
            return True
        if not passes(perms, f.marks):
            return False
        perms = perms - granted(f.marks)
    if not perms:
        return True
    return passes(perms, kont.halt_marks)


def ok_hat_xi(xi: dict, perms, kont) -> frozenset:
    """ÔK over a pushdown stack: every boolean some unrolling can produce."""

    def succ(st):
        if isinstance(st, _Done):
            return ()
        p, ps = st
        for f in ps.frames:
            if not p:
                return (_Done(True),)
            if not passes(p, f.marks):
                return (_Done(False),)
            p = p - granted(f.marks)
        if not p:
            return (_Done(True),)
        if not passes(p, ps.marks):
            return (_Done(False),)
        if ps.ctx is None:
            return (_Done(True),)
        p = p - granted(ps.marks)
        if not p:
            return (_Done(True),)
        return [(p, saved) for saved in xi.get(ps.ctx, ())]

    return frozenset(_results(terminal(succ, (frozenset(perms), kont))))


def ok_hat_store(store, perms, kont) -> frozenset:
    """ÔK over continuations allocated in a store."""

    def succ(st):
        if isinstance(st, _Done):
            return ()
        p, k = st
        if not p:
            return (_Done(True),)
        if isinstance(k, Halt):
            return (_Done(passes(p, k.marks)),)
        if not passes(p, k.marks):
            return (_Done(False),)
        p = p - granted(k.marks)
        if not p:
            return (_Done(True),)
        return [(p, k2) for k2 in store.lookup(k.tail)]

    return frozenset(_results(terminal(succ, (frozenset(perms), kont))))


def ok_hat(xi: dict, perms, kont) -> frozenset:
    return ok_hat_xi(xi, perms, kont)


def cm_step(s, store, policy, mode, xi: dict | None = None) -> list:
    """One step of the continuation-mark machine (store-allocated or pushdown)."""
    from .machine import StepContext, transitions
    if xi is None:
        return transitions(StepContext(store, policy, mode), s)
    from .pushdown import CallOps
    ops = CallOps(xi, {}, memo=False)
    return transitions(StepContext(store, policy, mode, ops, token=store), s)
