import pytest

from aam import syntax as S
from aam.engine import (
    AnalysisConfig, ConfigError, ResourceLimit, analyze, analyze_naive, commit, compile_expr,
    naive_step,
)
from aam.machine import (
    HALT, Answer, Ans, Co, Env, Ev, Int, Mode, OutOfFuel, StepContext, Stuck, TT, make_policy,
    run_concrete, step,
)
from aam.store import EMPTY_STORE, replay, store_leq

import support

MONO = make_policy("mono")
SMALL = ["identity", "id-chain", "const", "if-zero", "twice", "double-caller", "marks",
         "church-add", "omega", "stuck-add1-bool"]


def test_run_concrete_examples():
    r = run_concrete(S.parse("((lambda (x) x) 5)"))
    assert isinstance(r, Answer) and r.value == Int(5)
    assert isinstance(run_concrete(S.parse("(add1 #t)")), Stuck)
    r = run_concrete(S.parse("(if (zero? 0) 1 2)"))
    assert isinstance(r, Answer) and r.value == Int(1)
    assert isinstance(run_concrete(S.parse("((lambda (x) (x x)) (lambda (x) (x x)))"), 100),
                      OutOfFuel)
    with pytest.raises(ValueError):
        run_concrete(S.parse("1"), 0)


def test_naive_single_literal():
    r = analyze_naive(S.parse("5"), MONO)
    kinds = sorted(type(s).__name__ for s, _ in r.states)
    assert kinds == ["Ans", "Co", "Ev"]
    assert r.answers == {Int(5)}
    assert len(r.edges) == 2 and not r.stuck


@pytest.mark.parametrize("name", SMALL)
def test_naive_result_is_a_fixpoint(name):
    r = support.run(name, engine="naive", max_states=20_000)
    p = support.program(name)
    for c in r.states:
        for c2 in naive_step(c, MONO, support.mode(name)):
            assert c2 in r.states
            assert (c, c2) in r.edges
    assert r.answers == {s.value for s, _ in r.states if isinstance(s, Ans)}
    assert p.label_count > 0


@pytest.mark.parametrize("name", SMALL)
def test_widened_covers_naive(name):
    naive = support.run(name, engine="naive", max_states=20_000)
    wide = support.run(name, engine="widened")
    assert naive.contexts() <= wide.contexts()
    for _, st in naive.states:
        assert store_leq(st, wide.store)


@pytest.mark.parametrize("name", ["church-add", "church-mult", "factorial"])
def test_delta_and_timestamped_agree(name):
    ts = support.run(name, engine="frontier")
    dl = support.run(name, engine="delta")
    assert ts.store == dl.store
    assert ts.states == dl.states


def test_frontier_steps_fewer_times_than_naive():
    naive = support.run("church-mult", engine="naive", max_states=20_000)
    front = support.run("church-mult", engine="frontier")
    assert front.metrics["iterations"] < naive.metrics["iterations"]
    assert front.metrics["state_count"] < naive.metrics["state_count"]


def test_widened_always_holds_the_injected_context():
    for name in support.corpus():
        p = support.program(name)
        r = support.run(name, engine="widened")
        assert Ev(p.root, Env(), HALT, ()) in r.contexts()


def test_versioned_store_matches_flat():
    flat = support.run("church-mult", engine="delta")
    vers = support.run("church-mult", engine="delta", store="versioned")
    assert flat.states == vers.states
    assert flat.store == vers.store


def test_state_cap():
    with pytest.raises(ResourceLimit):
        analyze(support.program("church-distrib"),
                AnalysisConfig(policy=MONO, engine="naive", max_states=500))


@pytest.mark.parametrize("kw", [
    dict(memo=True), dict(engine="naive", store="versioned"), dict(gc="exact"),
    dict(pushdown=True, gc="exact", engine="delta"), dict(lazy="eager"), dict(engine="bfs"),
    dict(pushdown=True, memo=True, gc="inexact"),
])
def test_invalid_configs(kw):
    with pytest.raises(ConfigError):
        AnalysisConfig(**kw).validate()


# ---------------------------------------------------------------------------
# abstract compilation

def test_compiled_literal():
    lit = S.Lit("int", 5, 0)
    cx = StepContext(EMPTY_STORE, MONO, Mode(compiled=True))
    assert compile_expr(lit)(cx, Env(), HALT, ()) == [(Co(HALT, Int(5), ()), ())]


def test_commit_examples():
    co = Co(HALT, TT, ())
    assert commit(co, EMPTY_STORE, MONO) == [(co, ())]
    lit = Ev(S.Lit("int", 5, 0), Env(), HALT, ())
    assert commit(lit, EMPTY_STORE, MONO) == [(Co(HALT, Int(5), ()), ())]


def test_compiled_application_skips_two_steps():
    p = S.parse("((lambda (f) (f 1)) (lambda (y) y))")
    configs = analyze_naive(p, MONO).states
    ev = [(s, st) for s, st in configs
          if isinstance(s, Ev) and isinstance(s.expr, S.App) and s.expr.label == 2]
    assert ev
    for s, store in ev:
        two = []
        for s1, l1 in step(s, store, MONO):
            st1, _ = replay(l1, store)
            two.extend(step(s1, st1, MONO))
        cx = StepContext(store, MONO, Mode(compiled=True))
        once = compile_expr(s.expr)(cx, s.env, s.kont, s.time)
        assert {x for x, _ in once} == {x for x, _ in two}


@pytest.mark.parametrize("name", sorted(support.corpus()))
def test_compiled_runs_have_no_ev_states(name):
    r = support.run(name, engine="frontier", compiled=True)
    assert not any(isinstance(s, Ev) for s in r.contexts())


@pytest.mark.parametrize("name", sorted(support.corpus()))
@pytest.mark.parametrize("lazy", ["off", "super"])
def test_compile_equals_commit(name, lazy):
    """Every reachable Ev state: running its compiled code = committing it, logs included."""
    r = support.run(name, engine="frontier", lazy=lazy)
    m = support.mode(name, lazy)
    mc = support.mode(name, lazy, compiled=True)
    for s, v in sorted(r.states, key=lambda c: (c[0].key(), c[1])):
        if not isinstance(s, Ev):
            continue
        store = r.store_of((s, v))
        cx = StepContext(store, MONO, mc)
        compiled = compile_expr(s.expr)(cx, s.env, s.kont, s.time)
        committed = commit(s, store, MONO, m)
        assert sorted((x.key(), log) for x, log in compiled) == \
            sorted((x.key(), log) for x, log in committed)
