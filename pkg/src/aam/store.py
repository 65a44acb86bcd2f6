"""Stores: flat set-valued stores, change logs, store chains and
versioned value-stack stores.

Addresses and storables only need to be hashable and expose ``key()``
(a canonical string used for deterministic ordering).
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Iterator, Mapping


class DanglingAddress(RuntimeError):
    """Lookup of an address the store does not bind.  Always an engine bug."""


EMPTY_LOG: tuple = ()


class FlatStore(Mapping):
    """Immutable map from addresses to non-empty frozensets."""

    __slots__ = ("_d", "_hash", "_fresh", "_key")

    def __init__(self, d: dict | None = None):
        self._d = d if d is not None else {}
        self._hash = None
        self._fresh = None
        self._key = None

    # Mapping protocol
    def __getitem__(self, a):
        return self._d[a]

    def __iter__(self) -> Iterator:
        return iter(self._d)

    def __len__(self) -> int:
        return len(self._d)

    def __contains__(self, a) -> bool:
        return a in self._d

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, FlatStore):
            return NotImplemented
        if self._hash is not None and other._hash is not None and self._hash != other._hash:
            return False
        return self._d == other._d

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._d.items()))
        return self._hash

    def __repr__(self):
        return "FlatStore(" + self.render() + ")"

    def lookup(self, a) -> frozenset:
        try:
            return self._d[a]
        except KeyError:
            raise DanglingAddress(f"unbound address {a.key()}") from None

    def fresh(self) -> int:
        """Next unused fresh-address counter."""
        if self._fresh is None:
            ns = [a.n for a in self._d if getattr(a, "n", None) is not None]
            self._fresh = max(ns) + 1 if ns else 0
        return self._fresh

    def render(self) -> str:
        parts = []
        for a in sorted(self._d, key=lambda a: a.key()):
            vals = ",".join(sorted(s.key() for s in self._d[a]))
            parts.append(f"{a.key()}->{{{vals}}}")
        return "; ".join(parts)

    def key(self) -> str:
        """Short content digest; equal stores have equal keys."""
        if self._key is None:
            self._key = hashlib.sha1(self.render().encode()).hexdigest()[:16]
        return self._key

    def restrict(self, live) -> "FlatStore":
        return FlatStore({a: vs for a, vs in self._d.items() if a in live})

    def as_dict(self) -> dict:
        return dict(self._d)


EMPTY_STORE = FlatStore()


def join(store: FlatStore, a, vs) -> tuple:
    """``store ⊔ [a ↦ vs]`` and whether the binding grew."""
    vs = frozenset(vs)
    old = store._d.get(a)
    if old is None:
        d = dict(store._d)
        d[a] = vs
        return FlatStore(d), True
    if vs <= old:
        return store, False
    d = dict(store._d)
    d[a] = old | vs
    return FlatStore(d), True


def replay(log: Iterable, store: FlatStore) -> tuple:
    """Apply every join recorded in ``log``; one dictionary copy at most."""
    d = None
    base = store._d
    changed = False
    for a, vs in log:
        cur = (d if d is not None else base).get(a)
        if cur is not None and vs <= cur:
            continue
        if d is None:
            d = dict(base)
        d[a] = vs if cur is None else cur | vs
        changed = True
    if d is None:
        return store, False
    return FlatStore(d), changed


def join_stores(s1: FlatStore, s2: FlatStore) -> FlatStore:
    if len(s1) < len(s2):
        s1, s2 = s2, s1
    out, _ = replay(s2._d.items(), s1)
    return out


def append_all(logs) -> tuple:
    """Concatenate change logs.  Unordered collections are put in canonical order first."""
    if isinstance(logs, (set, frozenset)):
        logs = sorted(logs, key=log_key)
    out = []
    for log in logs:
        out.extend(log)
    return tuple(out)


def log_key(log) -> str:
    return "|".join(f"{a.key()}:{','.join(sorted(s.key() for s in vs))}" for a, vs in log)


def store_leq(s1: Mapping, s2: Mapping) -> bool:
    for a, vs in s1.items():
        other = s2.get(a)
        if other is None or not vs <= other:
            return False
    return True


class LogView:
    """A store view with a pending change log layered on top.

    Compiled code runs several rules inside one step; later rules must
    see the joins earlier ones recorded.
    """

    __slots__ = ("base", "pending")

    def __init__(self, base, log):
        if isinstance(base, LogView):
            pending = dict(base.pending)
            base = base.base
        else:
            pending = {}
        for a, vs in log:
            cur = pending.get(a)
            pending[a] = vs if cur is None else cur | vs
        self.base = base
        self.pending = pending

    def lookup(self, a) -> frozenset:
        extra = self.pending.get(a)
        if extra is None:
            return self.base.lookup(a)
        try:
            return self.base.lookup(a) | extra
        except DanglingAddress:
            return extra

    def fresh(self) -> int:
        ns = [a.n for a in self.pending if getattr(a, "n", None) is not None]
        return max([self.base.fresh()] + [n + 1 for n in ns])


class MutableStore:
    """Single-threaded store used by concrete runs, where per-step copying
    would dominate.  Exposes the same read interface as FlatStore."""

    def __init__(self):
        self.d = {}
        self.next_fresh = 0

    def lookup(self, a) -> frozenset:
        try:
            return self.d[a]
        except KeyError:
            raise DanglingAddress(f"unbound address {a.key()}") from None

    def fresh(self) -> int:
        return self.next_fresh

    def apply(self, log) -> None:
        for a, vs in log:
            cur = self.d.get(a)
            self.d[a] = vs if cur is None else cur | vs
            if a.n is not None and a.n >= self.next_fresh:
                self.next_fresh = a.n + 1

    def freeze(self) -> FlatStore:
        return FlatStore(dict(self.d))

    def __contains__(self, a):
        return a in self.d

    def __len__(self):
        return len(self.d)


class StoreChain:
    """The totally ordered history of a widened store; index = version."""

    def __init__(self, initial: FlatStore = EMPTY_STORE, keep_history: bool = True):
        self.keep_history = keep_history
        self._versions = [initial]
        self.current_version = 0

    @property
    def current(self) -> FlatStore:
        return self._versions[-1]

    @property
    def versions(self) -> list:
        """Newest first."""
        return list(reversed(self._versions))

    def at(self, n: int) -> FlatStore:
        if not self.keep_history:
            if n != self.current_version:
                raise ValueError("store history was not kept")
            return self.current
        return self._versions[n]

    def advance(self, store: FlatStore) -> int:
        if self.keep_history:
            self._versions.append(store)
        else:
            self._versions[-1] = store
        self.current_version += 1
        return self.current_version

    def __len__(self):
        return self.current_version + 1


# ---------------------------------------------------------------------------
# value stacks

def lookup_at(stack, n: int) -> frozenset:
    """Newest entry whose version is at most ``n``."""
    for version, vs in stack:
        if version <= n:
            return vs
    raise DanglingAddress(f"no entry at or before version {n}")


def _push(stack: tuple, n: int, vs: frozenset) -> tuple:
    """The paper's ``⊔_n`` on one value stack; returns (stack, changed)."""
    if not stack:
        return ((n, vs),), True
    top_n, top_vs = stack[0]
    if top_n > n:
        merged = top_vs | vs
        if merged == top_vs:
            return stack, False
        return ((top_n, merged),) + stack[1:], True
    cur = lookup_at(stack, n)
    union = cur | vs
    if union == cur:
        return stack, False
    return ((n + 1, union),) + stack, True


class VersionedStore(Mapping):
    """Address ↦ value stack (newest first)."""

    __slots__ = ("_d",)

    def __init__(self, d: dict | None = None):
        self._d = d if d is not None else {}

    def __getitem__(self, a):
        return self._d[a]

    def __iter__(self):
        return iter(self._d)

    def __len__(self):
        return len(self._d)

    def __eq__(self, other):
        return isinstance(other, VersionedStore) and self._d == other._d

    def __hash__(self):
        return hash(frozenset(self._d.items()))

    def max_version(self) -> int:
        return max((stack[0][0] for stack in self._d.values()), default=0)

    def view(self, n: int) -> "VersionView":
        return VersionView(self, n)


class VersionView:
    """Read-only view of a versioned store at one version, usable as a store view."""

    __slots__ = ("vstore", "n")

    def __init__(self, vstore: VersionedStore, n: int):
        self.vstore = vstore
        self.n = n

    def lookup(self, a) -> frozenset:
        try:
            stack = self.vstore._d[a]
        except KeyError:
            raise DanglingAddress(f"unbound address {a.key()}") from None
        return lookup_at(stack, self.n)

    def fresh(self) -> int:
        ns = [a.n for a in self.vstore._d if getattr(a, "n", None) is not None]
        return max(ns) + 1 if ns else 0


def join_at(vstore: VersionedStore, a, vs, n: int) -> tuple:
    stack, changed = _push(vstore._d.get(a, ()), n, frozenset(vs))
    if not changed:
        return vstore, False
    d = dict(vstore._d)
    d[a] = stack
    return VersionedStore(d), True


def replay_at(log, vstore: VersionedStore, n: int) -> tuple:
    """Replay a change log with ``join_at`` at version ``n``; one copy at most."""
    d = None
    changed = False
    for a, vs in log:
        src = d if d is not None else vstore._d
        stack, grew = _push(src.get(a, ()), n, vs)
        if grew:
            if d is None:
                d = dict(vstore._d)
            d[a] = stack
            changed = True
    return (VersionedStore(d) if d is not None else vstore), changed


def snapshot(vstore: VersionedStore, n: int) -> FlatStore:
    out = {}
    for a, stack in vstore._d.items():
        for version, vs in stack:
            if version <= n:
                out[a] = vs
                break
    return FlatStore(out)


def build_versioned(chain) -> VersionedStore:
    """Value stacks equivalent to a chain of stores given oldest first.

    Each address records an entry at every version where its binding
    differs from the previous version, so ``snapshot(build(c), i) == c[i]``.
    """
    d: dict = {}
    prev: Mapping = {}
    for i, store in enumerate(chain):
        for a, vs in store.items():
            if prev.get(a) != vs:
                d[a] = ((i, vs),) + d.get(a, ())
        prev = store
    return VersionedStore(d)
