"""Surface syntax for the lambda-IF language.

Programs are s-expressions with unary lambdas, conditionals, three
primitive operations and the permission forms ``grant``, ``frame`` and
``test``.  Every node carries a label equal to its preorder index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

PRIMOPS = ("add1", "sub1", "zero?")
_SPECIAL = {"lambda", "if", "grant", "frame", "test"}
# forms that belong to richer lisps; rejected with a clear message
_FOREIGN = {"let", "let*", "letrec", "define", "set!", "begin", "cond", "and", "or", "quote"}


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# Expressions.  Equality is structural; hashing uses the label and node
# kind so that hashing deep trees stays O(1).

@dataclass(frozen=True)
class Var:
    name: str
    label: int

    def __hash__(self):
        return hash(("var", self.label, self.name))


@dataclass(frozen=True)
class Lit:
    """A literal: ``kind`` is one of ``int``, ``bool`` or ``prim``."""
    kind: str
    value: Union[int, bool, str]
    label: int

    def __hash__(self):
        return hash(("lit", self.label, self.kind, self.value))


@dataclass(frozen=True)
class Lam:
    param: str
    body: "Expr"
    label: int

    def __hash__(self):
        return hash(("lam", self.label, self.param))


@dataclass(frozen=True)
class App:
    fn: "Expr"
    arg: "Expr"
    label: int

    def __hash__(self):
        return hash(("app", self.label))


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"
    label: int

    def __hash__(self):
        return hash(("if", self.label))


@dataclass(frozen=True)
class Grant:
    perms: frozenset
    body: "Expr"
    label: int

    def __hash__(self):
        return hash(("grant", self.label))


@dataclass(frozen=True)
class Frame:
    perms: frozenset
    body: "Expr"
    label: int

    def __hash__(self):
        return hash(("frame", self.label))


@dataclass(frozen=True)
class Test:
    perms: frozenset
    then: "Expr"
    orelse: "Expr"
    label: int

    def __hash__(self):
        return hash(("test", self.label))


Expr = Union[Var, Lit, Lam, App, If, Grant, Frame, Test]


@dataclass(frozen=True)
class Program:
    root: Expr
    label_count: int
    permissions: frozenset = field(default_factory=frozenset)
    name: str = "<program>"

    def __hash__(self):
        return hash((self.name, self.label_count, self.root))


def children(e: Expr) -> tuple:
    if isinstance(e, Lam):
        return (e.body,)
    if isinstance(e, App):
        return (e.fn, e.arg)
    if isinstance(e, (If, Test)):
        return (e.cond, e.then, e.orelse) if isinstance(e, If) else (e.then, e.orelse)
    if isinstance(e, (Grant, Frame)):
        return (e.body,)
    return ()


def subexpressions(e: Expr) -> Iterator[Expr]:
    """Preorder walk."""
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Lam):
        return free_vars(e.body) - {e.param}
    out = frozenset()
    for c in children(e):
        out |= free_vars(c)
    return out


_fv_cache: dict = {}


def fv(e: Expr) -> frozenset:
    """Memoized free variables (keyed by node identity within a program)."""
    key = id(e)
    hit = _fv_cache.get(key)
    if hit is not None and hit[0] is e:
        return hit[1]
    r = free_vars(e)
    _fv_cache[key] = (e, r)
    return r


def permissions_of(e: Expr) -> frozenset:
    out = set()
    for node in subexpressions(e):
        if isinstance(node, (Grant, Frame, Test)):
            out |= node.perms
    return frozenset(out)


# ---------------------------------------------------------------------------
# reading

_TOKEN = re.compile(r"""\s+|;[^\n]*|(?P<open>[(\[])|(?P<close>[)\]])|(?P<atom>[^\s()\[\];]+)""")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


@dataclass
class _Node:
    """Raw s-expression node with source position."""
    items: object  # str for atoms, list for lists
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # pragma: no cover - the regex accepts every character class
            raise ParseError("unexpected character", line, pos - line_start + 1)
        col = pos - line_start + 1
        if m.lastgroup:
            toks.append(_Tok(m.lastgroup, m.group(), line, col))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _read(toks: list, i: int) -> tuple:
    t = toks[i]
    if t.kind == "atom":
        return _Node(t.text, t.line, t.col), i + 1
    if t.kind == "open":
        items = []
        i += 1
        while toks[i].kind != "close":
            if toks[i].kind == "eof":
                raise ParseError("unclosed parenthesis", t.line, t.col)
            node, i = _read(toks, i)
            items.append(node)
        return _Node(items, t.line, t.col), i + 1
    if t.kind == "close":
        raise ParseError("unexpected ')'", t.line, t.col)
    raise ParseError("unexpected end of input", t.line, t.col)


class _Builder:
    def __init__(self, allow_free: bool):
        self.next_label = 0
        self.allow_free = allow_free

    def label(self) -> int:
        n = self.next_label
        self.next_label += 1
        return n

    def perms(self, node: _Node, form: str) -> frozenset:
        if not isinstance(node.items, list):
            raise ParseError(f"{form} expects a parenthesized permission list", node.line, node.col)
        out = []
        for p in node.items:
            if not isinstance(p.items, str) or not _is_symbol(p.items):
                raise ParseError("permission names must be symbols", p.line, p.col)
            out.append(p.items)
        return frozenset(out)

    def build(self, node: _Node, scope: frozenset) -> Expr:
        items = node.items
        if isinstance(items, str):
            return self.atom(node, scope)
        if not items:
            raise ParseError("empty application", node.line, node.col)
        head = items[0].items
        if isinstance(head, str) and head in _SPECIAL and head not in scope:
            return self.special(head, node, scope)
        if isinstance(head, str) and head in _FOREIGN and head not in scope:
            raise ParseError(f"unsupported special form '{head}'", node.line, node.col)
        if len(items) != 2:
            raise ParseError(f"application takes exactly one argument, got {len(items) - 1}",
                             node.line, node.col)
        ell = self.label()
        fn = self.build(items[0], scope)
        arg = self.build(items[1], scope)
        return App(fn, arg, ell)

    def atom(self, node: _Node, scope: frozenset) -> Expr:
        text = node.items
        if re.fullmatch(r"[+-]?\d+", text):
            return Lit("int", int(text), self.label())
        if text in ("#t", "#f"):
            return Lit("bool", text == "#t", self.label())
        if text in scope:
            return Var(text, self.label())
        if text in PRIMOPS:
            return Lit("prim", text, self.label())
        if text in _SPECIAL:
            raise ParseError(f"special form '{text}' used as a value", node.line, node.col)
        if not _is_symbol(text):
            raise ParseError(f"bad token '{text}'", node.line, node.col)
        if not self.allow_free:
            raise ParseError(f"unknown primop or unbound variable '{text}'", node.line, node.col)
        return Var(text, self.label())

    def special(self, head: str, node: _Node, scope: frozenset) -> Expr:
        items = node.items
        arity = {"lambda": 3, "if": 4, "grant": 3, "frame": 3, "test": 4}[head]
        if len(items) != arity:
            raise ParseError(f"malformed {head} form", node.line, node.col)
        ell = self.label()
        if head == "lambda":
            params = items[1]
            if (not isinstance(params.items, list) or len(params.items) != 1
                    or not isinstance(params.items[0].items, str)
                    or not _is_symbol(params.items[0].items)):
                raise ParseError("lambda takes exactly one parameter symbol", params.line, params.col)
            x = params.items[0].items
            return Lam(x, self.build(items[2], scope | {x}), ell)
        if head == "if":
            return If(self.build(items[1], scope), self.build(items[2], scope),
                      self.build(items[3], scope), ell)
        perms = self.perms(items[1], head)
        if head == "grant":
            return Grant(perms, self.build(items[2], scope), ell)
        if head == "frame":
            return Frame(perms, self.build(items[2], scope), ell)
        return Test(perms, self.build(items[2], scope), self.build(items[3], scope), ell)


def _is_symbol(text: str) -> bool:
    return not re.fullmatch(r"[+-]?\d+", text) and not text.startswith("#")


def parse(text: str, name: str = "<program>", allow_free: bool = False) -> Program:
    """Parse one expression.  Raises ParseError with a line and column."""
    toks = _tokenize(text)
    if toks[0].kind == "eof":
        raise ParseError("empty program", toks[0].line, toks[0].col)
    node, i = _read(toks, 0)
    if toks[i].kind != "eof":
        raise ParseError("trailing input after expression", toks[i].line, toks[i].col)
    b = _Builder(allow_free)
    root = b.build(node, frozenset())
    return Program(root, b.next_label, permissions_of(root), name)


def relabel(p: Program) -> Program:
    """Reassign preorder labels.  Idempotent on parsed programs."""
    counter = [0]

    def go(e: Expr) -> Expr:
        ell = counter[0]
        counter[0] += 1
        if isinstance(e, Var):
            return Var(e.name, ell)
        if isinstance(e, Lit):
            return Lit(e.kind, e.value, ell)
        if isinstance(e, Lam):
            return Lam(e.param, go(e.body), ell)
        if isinstance(e, App):
            f = go(e.fn)
            return App(f, go(e.arg), ell)
        if isinstance(e, If):
            c = go(e.cond)
            t = go(e.then)
            return If(c, t, go(e.orelse), ell)
        if isinstance(e, Grant):
            return Grant(e.perms, go(e.body), ell)
        if isinstance(e, Frame):
            return Frame(e.perms, go(e.body), ell)
        t = go(e.then)
        return Test(e.perms, t, go(e.orelse), ell)

    root = go(p.root)
    return Program(root, counter[0], permissions_of(root), p.name)


def show(e: Expr) -> str:
    """Print an expression back in surface syntax."""
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        if e.kind == "bool":
            return "#t" if e.value else "#f"
        return str(e.value)
    if isinstance(e, Lam):
        return f"(lambda ({e.param}) {show(e.body)})"
    if isinstance(e, App):
        return f"({show(e.fn)} {show(e.arg)})"
    if isinstance(e, If):
        return f"(if {show(e.cond)} {show(e.then)} {show(e.orelse)})"
    ps = " ".join(sorted(e.perms))
    if isinstance(e, Grant):
        return f"(grant ({ps}) {show(e.body)})"
    if isinstance(e, Frame):
        return f"(frame ({ps}) {show(e.body)})"
    return f"(test ({ps}) {show(e.then)} {show(e.orelse)})"
