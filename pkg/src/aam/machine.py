"""The lambda-IF abstract machine.

One transition function serves every analysis in the package.  What
varies is supplied from outside:

* the allocation policy (concrete, monovariant, k-CFA),
* the mode (eager or lazy variable references, interpreted or compiled),
* the *continuation discipline*: how frames are pushed and popped.  The
  plain machine allocates continuations in the store; the pushdown
  machines keep local continuations and a context table; the reference
  stack machine keeps an unbounded frame list.

A State never embeds a store.  Stores travel beside states and the
engines decide how they are shared.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Optional

from . import syntax as S
from .store import MutableStore, EMPTY_STORE, LogView

Time = tuple  # labels, most recent first


def truncate(t: Time, k: int) -> Time:
    return t[:k]


def _tkey(t: Time) -> str:
    return ".".join(map(str, t))


class _Keyed:
    """Mixin caching a canonical string key on frozen dataclasses."""

    def key(self) -> str:
        k = self.__dict__.get("_k")
        if k is None:
            k = self._make_key()
            object.__setattr__(self, "_k", k)
        return k


def value_class(cls):
    """A frozen dataclass whose instances are interned.

    States nest deeply (frames hold environments, stacks hold frames).
    Interning makes equal values identical, so the seen-set lookups the
    engines do all the time compare by identity, and hashes are computed
    once per distinct value.
    """
    cls = dataclass(frozen=True)(cls)
    names = tuple(cls.__dataclass_fields__)
    build = cls.__init__
    field_hash = cls.__hash__
    field_eq = cls.__eq__
    table = weakref.WeakValueDictionary()

    def __new__(c, *args, **kwargs):
        obj = object.__new__(c)
        build(obj, *args, **kwargs)
        d = obj.__dict__
        ident = tuple(d[n] for n in names)
        found = table.get(ident)
        if found is not None:
            return found
        table[ident] = obj
        return obj

    def __init__(self, *args, **kwargs):
        pass

    def __hash__(self):
        h = self.__dict__.get("_h")
        if h is None:
            h = field_hash(self)
            object.__setattr__(self, "_h", h)
        return h

    def __eq__(self, other):
        if self is other:
            return True
        if other.__class__ is not self.__class__:
            return NotImplemented
        if hash(self) != hash(other):
            return False
        return field_eq(self, other)

    def __reduce__(self):
        return (cls, tuple(self.__dict__[n] for n in names))

    cls.__new__ = __new__
    cls.__init__ = __init__
    cls.__hash__ = __hash__
    cls.__eq__ = __eq__
    cls.__reduce__ = __reduce__
    return cls


# ---------------------------------------------------------------------------
# addresses and environments

_KIND_TAG = {"var": "", "k": "k", "fn": "f", "arg": "a"}


@value_class
class Addr(_Keyed):
    """An address.

    ``key`` names the allocation site: ``("var", x)`` for a binding,
    ``("k", label)`` for a continuation, ``("fn", label)`` and
    ``("arg", label)`` for the function and argument values of an
    application.  Abstract addresses pair the site with a bounded time;
    concrete ones also carry a fresh counter ``n``.
    """
    site: tuple
    time: Time = ()
    n: Optional[int] = None

    @property
    def is_fresh(self) -> bool:
        return self.n is not None

    def _make_key(self):
        kind, tag = self.site
        s = f"{_KIND_TAG[kind]}{tag}@{_tkey(self.time)}"
        return s if self.n is None else f"{s}#{self.n}"

    def __repr__(self):
        return self.key()


class Env(_Keyed):
    """Immutable variable → address map with a cached hash."""

    def __init__(self, m: dict | None = None):
        self._m = m or {}
        self._hash = None

    def __getitem__(self, x):
        return self._m[x]

    def get(self, x, default=None):
        return self._m.get(x, default)

    def __contains__(self, x):
        return x in self._m

    def __iter__(self):
        return iter(self._m)

    def __len__(self):
        return len(self._m)

    def items(self):
        return self._m.items()

    def __eq__(self, other):
        if self is other:
            return True
        return isinstance(other, Env) and hash(self) == hash(other) and self._m == other._m

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._m.items()))
        return self._hash

    def extend(self, x, a) -> "Env":
        m = dict(self._m)
        m[x] = a
        return Env(m)

    def restrict(self, names) -> "Env":
        return Env({x: a for x, a in self._m.items() if x in names})

    def _make_key(self):
        return "{" + ",".join(f"{x}={self._m[x].key()}" for x in sorted(self._m)) + "}"

    def __repr__(self):
        return self.key()


EMPTY_ENV = Env()


# ---------------------------------------------------------------------------
# values

@value_class
class Int(_Keyed):
    z: int

    def _make_key(self):
        return str(self.z)


@value_class
class IntTop(_Keyed):
    """The abstract integer."""

    def _make_key(self):
        return "Z"


TOP = IntTop()


@value_class
class Bool(_Keyed):
    b: bool

    def _make_key(self):
        return "#t" if self.b else "#f"


TT = Bool(True)
FF = Bool(False)


@value_class
class Prim(_Keyed):
    name: str

    def _make_key(self):
        return self.name


@value_class
class Clo(_Keyed):
    lam: S.Lam
    env: Env

    @property
    def param(self):
        return self.lam.param

    @property
    def body(self):
        return self.lam.body

    def _make_key(self):
        return f"λ{self.lam.label}{self.env.key()}"


@value_class
class AddrRef(_Keyed):
    """Lazy reference to everything stored at an address."""
    addr: Addr

    def _make_key(self):
        return "&" + self.addr.key()


@value_class
class Super(_Keyed):
    """Lazy superposition of several values."""
    vals: frozenset

    def _make_key(self):
        return "{" + "|".join(sorted(v.key() for v in self.vals)) + "}"


def lit_value(e: S.Lit):
    if e.kind == "int":
        return Int(e.value)
    if e.kind == "bool":
        return TT if e.value else FF
    return Prim(e.value)


def show_value(v) -> str:
    """Printed form used by the CLI and JSON reports."""
    if isinstance(v, Clo):
        return f"#<procedure:{v.param}@{v.lam.label}>"
    return v.key()


# ---------------------------------------------------------------------------
# permission marks (continuation-mark extension)

GRANT = "grant"
DENY = "deny"
NO_MARKS: tuple = ()


def marks_get(m: tuple, p: str):
    for q, g in m:
        if q == p:
            return g
    return None


def marks_update(m: tuple, perms, value: str) -> tuple:
    d = dict(m)
    for p in perms:
        d[p] = value
    return tuple(sorted(d.items()))


def marks_grant(m: tuple, perms) -> tuple:
    return marks_update(m, perms, GRANT)


def marks_frame(m: tuple, perms, universe) -> tuple:
    """Deny everything in the universe outside ``perms``; keep entries for ``perms``."""
    return marks_update(m, [p for p in universe if p not in perms], DENY)


def marks_override(top: tuple, under: tuple) -> tuple:
    """Marks of a frame whose entries ``top`` were written after ``under``."""
    if not top:
        return under
    d = dict(under)
    d.update(top)
    return tuple(sorted(d.items()))


def denied(m: tuple) -> frozenset:
    return frozenset(p for p, g in m if g == DENY)


def granted(m: tuple) -> frozenset:
    return frozenset(p for p, g in m if g == GRANT)


def _mkey(m: tuple) -> str:
    if not m:
        return ""
    return "[" + ",".join(p + ("+" if g == GRANT else "-") for p, g in m) + "]"


# ---------------------------------------------------------------------------
# frames and continuations
#
# Frames carry the label and time of the expression that pushed them; a
# pop restores that time.  ``tail`` is the continuation address for the
# store-allocated machine and None elsewhere.

@value_class
class ArK(_Keyed):
    arg: S.Expr
    env: Env
    label: int
    time: Time
    tail: Optional[Addr] = None
    marks: tuple = NO_MARKS

    def _make_key(self):
        t = f">{self.tail.key()}" if self.tail is not None else ""
        return f"ar{self.label}{self.env.key()}@{_tkey(self.time)}{t}{_mkey(self.marks)}"


@value_class
class FnK(_Keyed):
    faddr: Addr
    label: int
    time: Time
    tail: Optional[Addr] = None
    marks: tuple = NO_MARKS

    def _make_key(self):
        t = f">{self.tail.key()}" if self.tail is not None else ""
        return f"fn{self.label}({self.faddr.key()})@{_tkey(self.time)}{t}{_mkey(self.marks)}"


@value_class
class IfK(_Keyed):
    then: S.Expr
    orelse: S.Expr
    env: Env
    label: int
    time: Time
    tail: Optional[Addr] = None
    marks: tuple = NO_MARKS

    def _make_key(self):
        t = f">{self.tail.key()}" if self.tail is not None else ""
        return f"if{self.label}{self.env.key()}@{_tkey(self.time)}{t}{_mkey(self.marks)}"


@value_class
class Halt(_Keyed):
    marks: tuple = NO_MARKS

    def _make_key(self):
        return "halt" + _mkey(self.marks)


HALT = Halt()

FRAME_TYPES = (ArK, FnK, IfK)


def with_tail(frame, tail):
    return frame.__class__(**{**_fields(frame), "tail": tail})


def with_marks(frame, marks):
    return frame.__class__(**{**_fields(frame), "marks": marks})


def _fields(obj) -> dict:
    return {f: getattr(obj, f) for f in obj.__dataclass_fields__}


# ---------------------------------------------------------------------------
# states

@value_class
class Ev(_Keyed):
    expr: S.Expr
    env: Env
    kont: object
    time: Time

    def _make_key(self):
        return f"ev {self.expr.label} {self.env.key()} {self.kont.key()} @{_tkey(self.time)}"


@value_class
class Co(_Keyed):
    kont: object
    value: object
    time: Time

    def _make_key(self):
        return f"co {self.value.key()} {self.kont.key()} @{_tkey(self.time)}"


@value_class
class Ap(_Keyed):
    fn: object
    arg: Addr
    kont: object
    label: int
    time: Time

    def _make_key(self):
        return (f"ap {self.label} {self.fn.key()} {self.arg.key()} "
                f"{self.kont.key()} @{_tkey(self.time)}")


@value_class
class Ans(_Keyed):
    value: object

    def _make_key(self):
        return f"ans {self.value.key()}"


STATE_TYPES = (Ev, Co, Ap, Ans)


def state_kind(s) -> str:
    return {Ev: "ev", Co: "co", Ap: "ap", Ans: "ans"}[type(s)]


# ---------------------------------------------------------------------------
# allocation policies

# Concrete times keep this many recent call labels.  Fresh counters make
# concrete addresses unique on their own; the history only has to be long
# enough to abstract a concrete run to any k-CFA with k <= this bound.
CONCRETE_HISTORY = 16


class Policy:
    """Allocation policy: ``alloc``, ``allockont``, ``tick`` and ``t0``.

    ``k is None`` means concrete: every allocation draws a fresh counter
    from the store and times are recent call histories.
    """

    def __init__(self, name: str, k: Optional[int]):
        self.name = name
        self.k = k
        self.t0: Time = ()

    @property
    def abstract(self) -> bool:
        return self.k is not None

    def alloc(self, site: tuple, time: Time, store) -> Addr:
        if self.k is None:
            return Addr(site, time, store.fresh())
        return Addr(site, time[: self.k])

    def allockont(self, label: int, time: Time, store) -> Addr:
        return self.alloc(("k", label), time, store)

    def tick(self, state) -> Time:
        if isinstance(state, Ap):
            return self.tick_ap(state.label, state.time)
        return getattr(state, "time", self.t0)

    def tick_ap(self, label: int, time: Time) -> Time:
        return ((label,) + time)[: self.depth]

    @property
    def depth(self) -> int:
        return CONCRETE_HISTORY if self.k is None else self.k

    def abstract_time(self, t: Time) -> Time:
        return t[: self.depth]

    def __eq__(self, other):
        return isinstance(other, Policy) and (self.name, self.k) == (other.name, other.k)

    def __hash__(self):
        return hash((self.name, self.k))

    def __repr__(self):
        return self.label()

    def label(self) -> str:
        if self.name == "kcfa":
            return f"kcfa={self.k}"
        return self.name


def make_policy(name: str, k: Optional[int] = None) -> Policy:
    if name == "concrete":
        return Policy("concrete", None)
    if name == "mono":
        return Policy("mono", 0)
    if name == "kcfa":
        if k is None or k < 0:
            raise ValueError("kcfa needs a non-negative k")
        return Policy("kcfa", k)
    raise ValueError(f"unknown policy {name!r}")


def parse_policy(text: str) -> Policy:
    if text.startswith("kcfa="):
        return make_policy("kcfa", int(text[5:]))
    if text.startswith("kcfa") and text[4:].isdigit():
        return make_policy("kcfa", int(text[4:]))
    return make_policy(text)


# ---------------------------------------------------------------------------
# primitives and forcing

def delta(op: str, v, abstract: bool) -> frozenset:
    if op in ("add1", "sub1"):
        if isinstance(v, Int):
            if abstract:
                return frozenset((TOP,))
            return frozenset((Int(v.z + 1 if op == "add1" else v.z - 1),))
        if v is TOP or isinstance(v, IntTop):
            return frozenset((TOP,))
        return frozenset()
    if op == "zero?":
        if isinstance(v, Int):
            return frozenset((TT if v.z == 0 else FF,))
        if isinstance(v, IntTop):
            return frozenset((TT, FF))
        return frozenset()
    return frozenset()


def force(store, v) -> frozenset:
    if isinstance(v, AddrRef):
        return store.lookup(v.addr)
    if isinstance(v, Super):
        return v.vals
    return frozenset((v,))


@dataclass(frozen=True)
class Mode:
    """``lazy`` is ``off``, ``addr`` (address references) or ``super``
    (superpositions).  ``permissions`` is the program's permission universe."""
    lazy: str = "off"
    compiled: bool = False
    permissions: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.lazy not in ("off", "addr", "super"):
            raise ValueError(f"bad lazy mode {self.lazy!r}")


EAGER = Mode()


# ---------------------------------------------------------------------------
# continuation disciplines

class StoreKonts:
    """Continuations allocated in the value store (the plain machine)."""

    def push(self, cx, kont, frame, log):
        a = cx.policy.allockont(frame.label, frame.time, cx.store)
        return with_tail(frame, a), ((a, frozenset((kont,))),) + log

    def returns(self, cx, kont, value):
        """(halts?, [(top frame, handle)]) for a value returned to ``kont``."""
        if isinstance(kont, Halt):
            return True, ()
        return False, ((kont, kont),)

    def replace(self, cx, handle, frame):
        return with_tail(frame, handle.tail)

    def rest(self, cx, handle):
        return cx.store.lookup(handle.tail)

    def set_marks(self, cx, kont, fn):
        return with_marks(kont, fn(kont.marks))

    def ok(self, cx, kont, perms) -> frozenset:
        from .inspection import ok_hat_store
        return ok_hat_store(cx.store, perms, kont)

    def enter(self, cx, state):
        """Continuations for entering a closure body, plus extra successors."""
        return (state.kont,)


STORE_KONTS = StoreKonts()


class StepContext:
    """Everything a transition reads besides the state itself."""

    __slots__ = ("store", "policy", "mode", "ops", "token", "extra")

    def __init__(self, store, policy: Policy, mode: Mode = EAGER, ops=STORE_KONTS, token=None):
        self.store = store
        self.policy = policy
        self.mode = mode
        self.ops = ops
        self.token = token  # store identity recorded in pushdown contexts
        self.extra = []     # successors reported by the discipline (memo hits)

    def with_store(self, store, token=None) -> "StepContext":
        return StepContext(store, self.policy, self.mode, self.ops, token)

    def overlay(self, log) -> "StepContext":
        """The same context reading through ``log``; successors reported
        into ``extra`` stay shared."""
        if not log:
            return self
        cx = StepContext(LogView(self.store, log), self.policy, self.mode, self.ops, self.token)
        cx.extra = self.extra
        return cx


def truthy(vals) -> list:
    out = []
    if TT in vals:
        out.append(True)
    if FF in vals:
        out.append(False)
    return out


def _flat(cx, v) -> frozenset:
    return force(cx.store, v) if cx.mode.lazy != "off" else frozenset((v,))


def make_ev(cx, e, env, kont, t, log) -> list:
    """An Ev state, or in compiled mode the result of running the compiled code."""
    if cx.mode.compiled:
        from .engine import compile_expr
        return compile_expr(e)(cx.overlay(log), env, kont, t, log)
    return [(Ev(e, env, kont, t), log)]


def step_ev(cx, s: Ev) -> list:
    e, env, kont, t = s.expr, s.env, s.kont, s.time
    if isinstance(e, S.Var):
        a = env[e.name]
        lazy = cx.mode.lazy
        if lazy == "addr":
            return [(Co(kont, AddrRef(a), t), ())]
        if lazy == "super":
            return [(Co(kont, Super(cx.store.lookup(a)), t), ())]
        return [(Co(kont, v, t), ()) for v in cx.store.lookup(a)]
    if isinstance(e, S.Lit):
        return [(Co(kont, lit_value(e), t), ())]
    if isinstance(e, S.Lam):
        return [(Co(kont, Clo(e, env), t), ())]
    if isinstance(e, S.App):
        k2, log = cx.ops.push(cx, kont, ArK(e.arg, env, e.label, t), ())
        return [(Ev(e.fn, env, k2, t), log)]
    if isinstance(e, S.If):
        k2, log = cx.ops.push(cx, kont, IfK(e.then, e.orelse, env, e.label, t), ())
        return [(Ev(e.cond, env, k2, t), log)]
    if isinstance(e, S.Grant):
        k2 = cx.ops.set_marks(cx, kont, lambda m: marks_grant(m, e.perms))
        return [(Ev(e.body, env, k2, t), ())]
    if isinstance(e, S.Frame):
        universe = cx.mode.permissions
        k2 = cx.ops.set_marks(cx, kont, lambda m: marks_frame(m, e.perms, universe))
        return [(Ev(e.body, env, k2, t), ())]
    if isinstance(e, S.Test):
        out = []
        for b in sorted(cx.ops.ok(cx, kont, e.perms), reverse=True):
            out.append((Ev(e.then if b else e.orelse, env, kont, t), ()))
        return out
    raise TypeError(f"not an expression: {e!r}")


def step_co(cx, s: Co) -> list:
    kont, v = s.kont, s.value
    halts, tops = cx.ops.returns(cx, kont, v)
    out = []
    if halts:
        for u in _flat(cx, v):
            out.append((Ans(u), ()))
    for frame, handle in tops:
        if isinstance(frame, ArK):
            af = cx.policy.alloc(("fn", frame.label), frame.time, cx.store)
            log = ((af, _flat(cx, v)),)
            k2 = cx.ops.replace(cx, handle, FnK(af, frame.label, frame.time))
            out.extend(make_ev(cx, frame.arg, frame.env, k2, frame.time, log))
        elif isinstance(frame, FnK):
            a = cx.policy.alloc(("arg", frame.label), frame.time, cx.store)
            log = ((a, _flat(cx, v)),)
            fns = cx.store.lookup(frame.faddr)
            for k2 in cx.ops.rest(cx, handle):
                for u in fns:
                    out.append((Ap(u, a, k2, frame.label, frame.time), log))
        elif isinstance(frame, IfK):
            branches = truthy(_flat(cx, v))
            if branches:
                for k2 in cx.ops.rest(cx, handle):
                    for b in branches:
                        out.extend(make_ev(cx, frame.then if b else frame.orelse,
                                           frame.env, k2, frame.time, ()))
        else:  # pragma: no cover
            raise TypeError(f"not a frame: {frame!r}")
    return out


def step_ap(cx, s: Ap) -> list:
    fn = s.fn
    t2 = cx.policy.tick_ap(s.label, s.time)
    if isinstance(fn, Clo):
        b = cx.policy.alloc(("var", fn.param), t2, cx.store)
        log = ((b, cx.store.lookup(s.arg)),)
        env2 = fn.env.extend(fn.param, b)
        out = []
        for k2 in cx.ops.enter(cx, s):
            out.extend(make_ev(cx, fn.body, env2, k2, t2, log))
        return out
    if isinstance(fn, Prim):
        out = []
        for v in cx.store.lookup(s.arg):
            for u in delta(fn.name, v, cx.policy.abstract):
                out.append((Co(s.kont, u, t2), ()))
        return out
    return []


def transitions(cx, s) -> list:
    """Successors of ``s`` as (state, change log) pairs, in canonical order."""
    if isinstance(s, Ev):
        out = step_ev(cx, s)
    elif isinstance(s, Co):
        out = step_co(cx, s)
    elif isinstance(s, Ap):
        out = step_ap(cx, s)
    else:
        out = []
    if len(out) > 1:
        out = _dedupe_sorted(out)
    return out


def _dedupe_sorted(pairs: list) -> list:
    seen = {}
    for st, log in pairs:
        seen.setdefault((st, log), (st, log))
    return sorted(seen.values(), key=lambda p: (p[0].key(), _log_sort_key(p[1])))


def _log_sort_key(log) -> str:
    return "|".join(a.key() for a, _ in log)


def step(s, store, policy: Policy, mode: Mode = EAGER) -> list:
    """Successors under the store-allocated-continuation machine."""
    return transitions(StepContext(store, policy, mode), s)


def inject(program: S.Program, policy: Policy | None = None):
    """Initial state and store."""
    t0 = policy.t0 if policy is not None else ()
    return Ev(program.root, EMPTY_ENV, HALT, t0), EMPTY_STORE


# ---------------------------------------------------------------------------
# concrete runs

@dataclass(frozen=True)
class Answer:
    value: object
    steps: int


@dataclass(frozen=True)
class Stuck:
    state: object
    steps: int


@dataclass(frozen=True)
class OutOfFuel:
    steps: int


def run_concrete(program: S.Program, fuel: int = 100_000, mode: Mode | None = None):
    """Run the deterministic concrete machine for at most ``fuel`` steps."""
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    policy = make_policy("concrete")
    mode = mode or Mode(permissions=program.permissions)
    store = MutableStore()
    cx = StepContext(store, policy, mode)
    s, _ = inject(program, policy)
    for n in range(fuel):
        if isinstance(s, Ans):
            return Answer(s.value, n)
        succ = transitions(cx, s)
        if not succ:
            return Stuck(s, n)
        s, log = succ[0]
        store.apply(log)
    if isinstance(s, Ans):
        return Answer(s.value, fuel)
    return OutOfFuel(fuel)


def concrete_trace(program: S.Program, fuel: int, mode: Mode | None = None, gc: bool = False):
    """The first ``fuel`` steps of the concrete run as (state, FlatStore) pairs."""
    policy = make_policy("concrete")
    mode = mode or Mode(permissions=program.permissions)
    s, store = inject(program, policy)
    trace = [(s, store)]
    for _ in range(fuel):
        succ = step(s, store, policy, mode)
        if not succ:
            break
        s, log = succ[0]
        from .store import replay
        store, _ = replay(log, store)
        if gc:
            from .inspection import collect_plain
            store = collect_plain(s, store)
        trace.append((s, store))
    return trace
