import random

from hypothesis import given, settings, strategies as st

from aam import syntax as S
from aam.inspection import (
    cm_step, collect_plain, gc, kll, ok, ok_hat, reach, terminal, touch,
)
from aam.machine import (
    DENY, GRANT, HALT, NO_MARKS, Addr, AddrRef, ArK, Clo, Env, Ev, FnK, Halt, Int, Mode,
    make_policy, marks_get,
)
from aam.pushdown import EMPTY_STACK, Context, FStack, PStack
from aam.store import FlatStore, store_leq

from oracles import no_successor_states

MONO = make_policy("mono")
A, B, C = (Addr(("var", n)) for n in "abc")


def graph_step(g):
    return lambda n: g.get(n, ())


def test_terminal_examples():
    assert terminal(graph_step({}), "a") == {"a"}
    assert terminal(graph_step({"a": ["b"], "b": ["a"]}), "a") == set()
    assert terminal(graph_step({"a": ["b"], "b": ["c"]}), "a") == {"c"}


def test_terminal_shares_a_seen_set():
    g = {"a": ["b", "c"], "b": ["d"], "c": ["d"]}
    seen = set()
    assert terminal(graph_step(g), "b", seen) == {"d"}
    # the inner walk already visited d, so the outer one does not report it again
    assert terminal(graph_step(g), "a", seen) == set()
    assert seen == {"a", "b", "c", "d"}


def _random_graph(rng, n):
    return {i: sorted(rng.sample(range(n), rng.randint(0, min(3, n)))) for i in range(n)}


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.integers(0, 10_000))
def test_terminal_matches_brute_force(n, seed):
    g = _random_graph(random.Random(seed), n)
    assert terminal(graph_step(g), 0) == no_successor_states(g, 0)


def test_touch_examples():
    assert touch(Int(5)) == frozenset()
    x = S.Var("x", 1)
    assert touch((x, Env({"x": A, "y": B}))) == {A}
    assert touch(FnK(A, 0, (), B)) == {A, B}
    assert touch(AddrRef(C)) == {C}
    lam = S.Lam("y", S.App(S.Var("x", 2), S.Var("y", 3), 1), 0)
    assert touch(Clo(lam, Env({"x": A, "z": B}))) == {A}


def test_reach_examples():
    store = FlatStore({A: frozenset({AddrRef(B)}), B: frozenset({Int(5)}), C: frozenset({Int(1)})})
    assert reach(set(), store) == frozenset()
    assert reach({A}, store) == {A, B}
    assert reach(reach({A}, store), store) == reach({A}, store)


def test_reach_follows_stored_continuations():
    k = Addr(("k", 4))
    store = FlatStore({k: frozenset({ArK(S.Var("x", 9), Env({"x": A}), 4, ())}),
                       A: frozenset({Int(2)})})
    assert reach({k}, store) == {k, A}


def ctx(n) -> Context:
    return Context(Clo(S.Lam("x", S.Var("x", 1), 0), Env()), frozenset({Int(n)}), 0)


def fr(addr, marks=NO_MARKS):
    return FnK(addr, 7, (), None, marks)


def test_kll_examples():
    assert kll({}, EMPTY_STACK) == {frozenset()}
    tau = ctx(1)
    linear = {tau: {PStack((fr(B),), NO_MARKS, None)}}
    assert kll(linear, PStack((fr(A),), NO_MARKS, tau)) == {frozenset({A, B})}
    forked = {tau: {PStack((fr(B),), NO_MARKS, None), PStack((fr(C),), NO_MARKS, None)}}
    assert kll(forked, PStack((), NO_MARKS, tau)) == {frozenset({B}), frozenset({C})}


def test_kll_terminates_on_cycles():
    tau = ctx(1)
    xi = {tau: {PStack((fr(A),), NO_MARKS, tau), PStack((), NO_MARKS, None)}}
    assert kll(xi, PStack((), NO_MARKS, tau)) == {frozenset(), frozenset({A})}


def test_gc_modes():
    tau = ctx(1)
    xi = {tau: {PStack((fr(B),), NO_MARKS, None), PStack((fr(C),), NO_MARKS, None)}}
    store = FlatStore({a: frozenset({Int(0)}) for a in (A, B, C)})
    s = Ev(S.Var("x", 0), Env({"x": A}), PStack((), NO_MARKS, tau), ())
    exact = gc(s, xi, store, "exact")
    assert {frozenset(st) for _, st in exact} == {frozenset({A, B}), frozenset({A, C})}
    [(_, wide)] = gc(s, xi, store, "inexact")
    assert set(wide) == {A, B, C}
    for _, kept in exact:
        assert store_leq(kept, wide)
        # collecting again with the same live set gives the same store back
        assert kept in {x for _, x in gc(s, xi, kept, "exact")}


def test_gc_keeps_a_store_the_state_touches_entirely():
    store = FlatStore({A: frozenset({Int(0)}), B: frozenset({Int(1)})})
    lam = S.Lam("z", S.App(S.Var("x", 2), S.Var("y", 3), 1), 0)
    s = Ev(lam, Env({"x": A, "y": B}), HALT, ())
    assert collect_plain(s, store) == store
    assert gc(s, None, store, "inexact") == [(s, store)]


def test_ok_examples():
    deny, grant = ((("p", DENY),), (("p", GRANT),))
    assert ok(set(), FStack((), deny))
    assert not ok({"p"}, FStack((), deny))
    assert ok({"p"}, FStack((fr(A, grant),), deny))


def test_ok_hat_examples():
    tau = ctx(1)
    xi = {tau: {PStack((fr(A, (("p", GRANT),)),), NO_MARKS, None),
                PStack((fr(B, (("p", DENY),)),), NO_MARKS, None)}}
    top = PStack((), NO_MARKS, tau)
    assert ok_hat(xi, set(), top) == {True}
    assert ok_hat(xi, {"p"}, top) == {True, False}
    linear = {tau: {PStack((fr(B, (("p", DENY),)),), NO_MARKS, None)}}
    assert ok_hat(linear, {"p"}, top) == {False}


def test_grant_marks_the_top_frame():
    p = S.parse("(grant (p) 1)")
    [(s2, _)] = cm_step(Ev(p.root, Env(), HALT, ()), FlatStore(), MONO, Mode())
    assert marks_get(s2.kont.marks, "p") == GRANT


def test_frame_denies_the_complement():
    p = S.parse("(frame (p) (test (q) 1 2))")
    universe = p.permissions
    assert universe == {"p", "q"}
    start = Ev(p.root, Env(), Halt((("p", GRANT),)), ())
    [(s2, _)] = cm_step(start, FlatStore(), MONO, Mode(permissions=universe))
    assert marks_get(s2.kont.marks, "q") == DENY
    assert marks_get(s2.kont.marks, "p") == GRANT


def test_abstract_test_takes_both_branches():
    tau = ctx(1)
    xi = {tau: {PStack((), (("p", GRANT),), None), PStack((), (("p", DENY),), None)}}
    p = S.parse("(test (p) 1 2)")
    s = Ev(p.root, Env(), PStack((), NO_MARKS, tau), ())
    out = cm_step(s, FlatStore(), MONO, Mode(permissions=p.permissions), xi)
    assert sorted(s2.expr.value for s2, _ in out) == [1, 2]
