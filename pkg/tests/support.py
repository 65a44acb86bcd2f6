"""Shared fixtures for the test modules: the corpus and cached analyses."""

from __future__ import annotations

import warnings
from functools import lru_cache
from pathlib import Path

from aam import corpus_dir
from aam import syntax as S
from aam.engine import AnalysisConfig, ResourceLimit, analyze, analyze_frontier
from aam.machine import Mode, parse_policy
from aam.pushdown import analyze_pushdown

CORPUS = Path(str(corpus_dir()))
POLICIES = ("mono", "kcfa=1")

# criterion number -> (passed, detail); printed by conftest at the end
ACCEPTANCE: dict = {}


def record(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[n] = (passed, detail)


@lru_cache(maxsize=None)
def corpus() -> dict:
    return {p.stem: S.parse(p.read_text(encoding="utf-8"), p.stem)
            for p in sorted(CORPUS.glob("*.lif"))}


def program(name: str) -> S.Program:
    return corpus()[name]


def mode(name: str, lazy: str = "off", compiled: bool = False) -> Mode:
    return Mode(lazy, compiled, program(name).permissions)


@lru_cache(maxsize=None)
def run(name: str, alloc: str = "mono", engine: str = "frontier", lazy: str = "off",
        compiled: bool = False, store: str = "flat", gc: str = "none",
        max_states: int = 200_000):
    """A finite analysis of a corpus program, or None when it hits the cap."""
    cfg = AnalysisConfig(policy=parse_policy(alloc), engine=engine, lazy=lazy,
                         compiled=compiled, store=store, gc=gc, max_states=max_states)
    try:
        return analyze(program(name), cfg)
    except ResourceLimit:
        return None


@lru_cache(maxsize=None)
def whole_stores(name: str, alloc: str = "mono", lazy: str = "off"):
    """Frontier run that keeps whole stores (not versions) in its seen set."""
    return analyze_frontier(program(name), parse_policy(alloc), mode(name, lazy), backend="stores")


@lru_cache(maxsize=None)
def pushdown(name: str, alloc: str = "mono", engine: str = "naive", lazy: str = "off",
             compiled: bool = False, gc: str = "none", memo: bool = False,
             max_states: int = 60_000, max_iterations: int | None = None):
    """A pushdown analysis, or None when it hits the cap."""
    cfg = AnalysisConfig(policy=parse_policy(alloc), engine=engine, lazy=lazy,
                         compiled=compiled, gc=gc, pushdown=True, memo=memo,
                         max_states=max_states, max_iterations=max_iterations)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return analyze_pushdown(program(name), cfg.policy, cfg)
        except ResourceLimit:
            return None
