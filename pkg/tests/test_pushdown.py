import pytest
from hypothesis import given, settings, strategies as st

from aam import syntax as S
from aam.engine import AnalysisConfig
from aam.machine import NO_MARKS, Addr, Ans, ArK, Ap, Clo, Co, Env, Ev, Int, Mode, make_policy
from aam.pushdown import (
    EMPTY_STACK, Context, FStack, PStack, Relevant, analyze_pushdown, pop, push_context,
    reify_check, step_pushdown, unroll,
)
from aam.store import EMPTY_STORE, FlatStore, join

import support

MONO = make_policy("mono")
CONCRETE = make_policy("concrete")
ID = S.Lam("x", S.Var("x", 1), 0)
CLO = Clo(ID, Env())


def frame(n: int) -> ArK:
    return ArK(S.Lit("int", n, 10 + n), Env(), 10 + n, ())


def ctx(tag) -> Context:
    return Context(CLO, frozenset({Int(tag)}), 0)


def ap_state(store_arg=Int(5)):
    a = Addr(("arg", 3))
    store = FlatStore({a: frozenset({store_arg})})
    return Ap(CLO, a, EMPTY_STACK, 3, ()), store


def test_push_context_examples():
    s, store = ap_state()
    assert push_context(s, store) == push_context(s, store)
    s2, store2 = ap_state(Int(6))
    assert push_context(s, store) != push_context(s2, store2)


def test_fresh_calls_get_distinct_contexts():
    s, store = ap_state()
    grown, _ = join(store, Addr(("var", "y"), (), 0), {Int(1)})
    assert push_context(s, store, policy=CONCRETE) != push_context(s, grown, policy=CONCRETE)


def test_push_context_needs_a_closure():
    a = Addr(("arg", 3))
    with pytest.raises(ValueError):
        push_context(Ap(Int(1), a, EMPTY_STACK, 3, ()), FlatStore({a: frozenset({Int(1)})}))


def test_entry_rule_extends_xi():
    s, store = ap_state()
    out, xi_add, memo_add = step_pushdown(s, store, {}, MONO, Mode())
    [(s2, _, _)] = out
    tau = push_context(s, store, policy=MONO)
    assert isinstance(s2, Ev) and s2.expr == ID.body
    assert s2.kont == PStack((), NO_MARKS, tau)
    assert xi_add == [(tau, EMPTY_STACK)]
    assert memo_add == []


def test_memo_hit_plugs_the_caller():
    s, store = ap_state()
    tau = push_context(s, store, policy=MONO)
    memo = {tau: frozenset({Relevant(Int(9), store)})}
    out, xi_add, _ = step_pushdown(s, store, {}, MONO, Mode(), memo)
    assert [x for x, _, _ in out] == [Ans(Int(9))]
    assert xi_add == [(tau, EMPTY_STACK)]


def test_return_to_empty_stack_answers():
    out, _, _ = step_pushdown(Co(EMPTY_STACK, Int(2), ()), EMPTY_STORE, {}, MONO, Mode())
    assert [x for x, _, _ in out] == [Ans(Int(2))]


def test_pop_examples():
    phi = frame(1)
    rest = PStack((frame(2),), NO_MARKS, None)
    assert pop(rest.push(phi), {}) == [(phi, rest)]
    assert pop(EMPTY_STACK, {}) == []
    tau = ctx(1)
    assert pop(PStack((), NO_MARKS, tau), {tau: {PStack((), NO_MARKS, tau)}}) == []


def test_pop_chases_empty_chains():
    t1, t2 = ctx(1), ctx(2)
    below = PStack((frame(3),), NO_MARKS, None)
    xi = {t1: {PStack((), NO_MARKS, t2)}, t2: {below, PStack((), NO_MARKS, t1)}}
    assert pop(PStack((), NO_MARKS, t1), xi) == [(frame(3), EMPTY_STACK)]


def test_unroll_examples():
    assert unroll({}, EMPTY_STACK, 4) == {FStack()}
    tau = ctx(1)
    phi = frame(1)
    assert unroll({tau: {PStack((phi,), NO_MARKS, None)}}, PStack((), NO_MARKS, tau), 2) == \
        {FStack((phi,))}


def test_unroll_cyclic_is_bounded():
    tau = ctx(1)
    phi = frame(1)
    xi = {tau: {PStack((phi,), NO_MARKS, tau), PStack((), NO_MARKS, None)}}
    out = unroll(xi, PStack((), NO_MARKS, tau), 3)
    assert out == {FStack(()), FStack((phi,)), FStack((phi, phi)), FStack((phi,) * 3),
                   FStack((phi,) * 3, NO_MARKS, True)}


def test_identity_under_fresh_allocation():
    p = S.parse("((lambda (x) x) 5)")
    system = analyze_pushdown(p, CONCRETE, AnalysisConfig(policy=CONCRETE, engine="naive",
                                                          pushdown=True, max_iterations=50))
    assert system.answers == {Int(5)}
    assert reify_check(system, p, CONCRETE, 50).ok


@pytest.mark.parametrize("name", ["identity", "twice", "double-caller", "marks", "church-add"])
def test_mono_reify_soundness(name):
    system = support.pushdown(name)
    report = reify_check(system, support.program(name), MONO, 60)
    assert not report.unsound
    assert not report.unrealized


@pytest.mark.parametrize("name", ["twice", "double-caller", "church-mult", "marks", "omega"])
def test_memo_on_off_agree(name):
    off = support.pushdown(name, lazy="super")
    on = support.pushdown(name, lazy="super", memo=True)
    assert set(off.seen) == set(on.seen)
    assert off.answers == on.answers


def test_rendezvous_fires():
    off = support.pushdown("church-distrib", alloc="kcfa=1", lazy="super")
    on = support.pushdown("church-distrib", alloc="kcfa=1", lazy="super", memo=True)
    assert on.rendezvous > 0 and on.rendezvous_states
    assert on.rendezvous_states <= set(on.seen)
    assert set(off.seen) == set(on.seen)


@pytest.mark.parametrize("name", ["double-caller", "church-add", "church-distrib"])
def test_memo_domain_within_xi(name):
    system = support.pushdown(name, alloc="kcfa=1", lazy="super", memo=True)
    assert set(system.memo) <= set(system.xi)


# pop over random continuation tables terminates and agrees with a BFS reading

contexts = [ctx(i) for i in range(4)]


@st.composite
def tables(draw):
    xi = {}
    for tau in contexts:
        entries = draw(st.lists(st.tuples(st.sampled_from([None, 1, 2]),
                                          st.sampled_from([None] + contexts)), max_size=3))
        xi[tau] = {PStack(() if f is None else (frame(f),), NO_MARKS, below)
                   for f, below in entries}
    return xi


def _pop_oracle(tau, xi):
    out, seen, todo = set(), set(), [tau]
    while todo:
        t = todo.pop()
        if t in seen:
            continue
        seen.add(t)
        for k in xi.get(t, ()):
            if k.frames:
                out.add((k.frames[0], PStack(k.frames[1:], k.marks, k.ctx)))
            elif k.ctx is not None:
                todo.append(k.ctx)
    return out


@settings(max_examples=100, deadline=None)
@given(tables(), st.sampled_from(contexts))
def test_pop_terminates_and_matches_bfs(xi, tau):
    assert set(pop(PStack((), NO_MARKS, tau), xi)) == _pop_oracle(tau, xi)
