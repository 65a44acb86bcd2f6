import pytest
from hypothesis import given, strategies as st

from aam import syntax as S
from aam.machine import (
    FF, HALT, TOP, TT, Addr, AddrRef, Ans, Ap, Co, Env, Ev, Int, Mode, Prim, Super, concrete_trace,
    delta, force, inject, make_policy, parse_policy, step, truncate,
)
from aam.store import EMPTY_STORE, DanglingAddress, FlatStore

import support

MONO = make_policy("mono")


def test_inject_literal():
    p = S.parse("5")
    s, store = inject(p, MONO)
    assert s == Ev(p.root, Env(), HALT, ())
    assert len(store) == 0
    assert s.time == MONO.t0 == ()


def test_literal_steps_to_co():
    p = S.parse("5")
    s, store = inject(p, MONO)
    [(s2, log)] = step(s, store, MONO)
    assert s2 == Co(HALT, Int(5), ())
    assert log == ()


def test_lazy_variable_reference_defers_lookup():
    x = S.Var("x", 0)
    a = Addr(("var", "x"))
    store = FlatStore({a: frozenset({Int(1), TT})})
    s = Ev(x, Env({"x": a}), HALT, ())
    [(s2, log)] = step(s, store, MONO, Mode(lazy="addr"))
    assert s2 == Co(HALT, AddrRef(a), ())
    assert log == ()


def test_eager_variable_reference_forks():
    x = S.Var("x", 0)
    a = Addr(("var", "x"))
    store = FlatStore({a: frozenset({Int(1), TT})})
    out = step(Ev(x, Env({"x": a}), HALT, ()), store, MONO)
    assert {s2.value for s2, _ in out} == {Int(1), TT}
    assert [s2.key() for s2, _ in out] == sorted(s2.key() for s2, _ in out)


def test_super_variable_reference_is_one_state():
    x = S.Var("x", 0)
    a = Addr(("var", "x"))
    store = FlatStore({a: frozenset({Int(1), TT})})
    [(s2, _)] = step(Ev(x, Env({"x": a}), HALT, ()), store, MONO, Mode(lazy="super"))
    assert s2.value == Super(frozenset({Int(1), TT}))


def test_halt_return_is_an_answer():
    [(s2, _)] = step(Co(HALT, Int(3), ()), EMPTY_STORE, MONO)
    assert s2 == Ans(Int(3))


def test_stuck_states_have_no_successors():
    a = Addr(("arg", 0))
    store = FlatStore({a: frozenset({Int(1)})})
    assert step(Ap(Int(4), a, HALT, 0, ()), store, MONO) == []
    assert step(Ans(Int(1)), store, MONO) == []


@pytest.mark.parametrize("op,v,abstract,out", [
    ("zero?", Int(0), False, {TT}),
    ("add1", Int(3), False, {Int(4)}),
    ("sub1", Int(3), False, {Int(2)}),
    ("zero?", TOP, True, {TT, FF}),
    ("add1", Int(3), True, {TOP}),
    ("zero?", Int(2), True, {FF}),
    ("add1", TT, False, set()),
    ("zero?", Prim("add1"), True, set()),
])
def test_delta(op, v, abstract, out):
    assert delta(op, v, abstract) == out


def test_force():
    a = Addr(("var", "y"))
    store = FlatStore({a: frozenset({Int(1), Int(2)})})
    assert force(store, AddrRef(a)) == {Int(1), Int(2)}
    assert force(store, Int(7)) == {Int(7)}
    assert force(store, Super(frozenset({TT}))) == {TT}
    with pytest.raises(DanglingAddress):
        force(EMPTY_STORE, AddrRef(a))


def test_truncate():
    assert truncate((1, 2, 3), 1) == (1,)
    assert truncate((1, 2, 3), 0) == ()
    assert truncate((1,), 5) == (1,)


def test_concrete_allocation_is_fresh():
    conc = make_policy("concrete")
    a = conc.alloc(("var", "x"), (), EMPTY_STORE)
    store = FlatStore({a: frozenset({Int(0)})})
    b = conc.alloc(("var", "x"), (), store)
    assert a != b


def test_kcfa_addresses_and_ticks():
    k0 = make_policy("kcfa", 0)
    assert k0.alloc(("var", "x"), (4, 2), EMPTY_STORE) == Addr(("var", "x"), ())
    k1 = make_policy("kcfa", 1)
    assert k1.tick_ap(7, (3,)) == (7,)
    assert k1.alloc(("var", "x"), (7,), EMPTY_STORE) == Addr(("var", "x"), (7,))


def test_policy_parsing():
    assert parse_policy("kcfa=2") == make_policy("kcfa", 2)
    assert parse_policy("mono").k == 0
    assert not parse_policy("concrete").abstract
    with pytest.raises(ValueError):
        make_policy("kcfa")
    with pytest.raises(ValueError):
        parse_policy("poly")


@pytest.mark.parametrize("name", sorted(support.corpus()))
def test_concrete_runs_are_deterministic(name):
    p = support.program(name)
    conc = make_policy("concrete")
    for s, store in concrete_trace(p, 300):
        assert len(step(s, store, conc)) <= 1


def test_step_is_repeatable_and_pure():
    p = support.program("church-add")
    for s, store in concrete_trace(p, 60):
        before = store.render()
        assert step(s, store, MONO) == step(s, store, MONO)
        assert store.render() == before


@given(st.lists(st.integers(0, 9), max_size=8), st.integers(0, 4))
def test_truncate_is_a_prefix(t, k):
    t = tuple(t)
    out = truncate(t, k)
    assert len(out) <= k
    assert t[: len(out)] == out
    assert truncate(out, k) == out
