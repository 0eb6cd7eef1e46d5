"""Closed-form scalar expressions: parsing, exact differentiation, evaluation.

Expressions are immutable, hash-consed DAG nodes.  Structurally identical
subexpressions are shared, so the derivative and substitution memo tables
keep repeated differentiation of composite quantities tractable.

Only constant folding and zero/one elimination are performed; no algebraic
simplification.
"""

from __future__ import annotations

import math
import numbers
import re
import threading
from typing import Iterable, Mapping

__all__ = [
    "Expr",
    "ParseError",
    "EvaluationError",
    "Evaluator",
    "parse",
    "const",
    "var",
    "differentiate",
    "evaluate",
    "substitute",
    "free_variables",
    "FUNCTIONS",
    "ZERO",
    "ONE",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ParseError(ValueError):
    """Malformed expression text; ``offset`` is the byte offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    """Unbound variable or domain violation during numeric evaluation."""

    def __init__(self, message: str, node: "Expr | None" = None):
        if node is not None:
            message = f"{message} in subexpression '{_short(node)}'"
        super().__init__(message)
        self.node = node


# ---------------------------------------------------------------------------
# node construction
# ---------------------------------------------------------------------------

_intern: dict = {}
_intern_lock = threading.Lock()
_var_bits: dict[str, int] = {}


def _bit(name: str) -> int:
    bit = _var_bits.get(name)
    if bit is None:
        with _intern_lock:
            bit = _var_bits.setdefault(name, 1 << len(_var_bits))
    return bit


class Expr:
    """A node of an expression DAG.  Build with the module constructors or
    the arithmetic operators; never instantiate directly."""

    __slots__ = ("op", "args", "value", "mask", "_deriv")

    op: str
    args: tuple
    value: object
    mask: int

    def __new__(cls, op, args=(), value=None):
        key = (op, args, value)
        node = _intern.get(key)
        if node is not None:
            return node
        node = object.__new__(cls)
        node.op = op
        node.args = args
        node.value = value
        if op == "var":
            node.mask = _bit(value)
        else:
            m = 0
            for a in args:
                m |= a.mask
            node.mask = m
        node._deriv = None
        with _intern_lock:
            return _intern.setdefault(key, node)

    # Identity semantics are correct because nodes are interned.
    __hash__ = object.__hash__

    def __eq__(self, other):
        return self is other

    def __reduce__(self):
        return (Expr, (self.op, self.args, self.value))

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def depends_on(self, name: str) -> bool:
        bit = _var_bits.get(name)
        return bit is not None and bool(self.mask & bit)

    def __add__(self, other):
        if not _scalar(other):
            return NotImplemented
        return add(self, _coerce(other))

    def __radd__(self, other):
        if not _scalar(other):
            return NotImplemented
        return add(_coerce(other), self)

    def __sub__(self, other):
        if not _scalar(other):
            return NotImplemented
        return sub(self, _coerce(other))

    def __rsub__(self, other):
        if not _scalar(other):
            return NotImplemented
        return sub(_coerce(other), self)

    def __mul__(self, other):
        if not _scalar(other):
            return NotImplemented
        return mul(self, _coerce(other))

    def __rmul__(self, other):
        if not _scalar(other):
            return NotImplemented
        return mul(_coerce(other), self)

    def __truediv__(self, other):
        if not _scalar(other):
            return NotImplemented
        return div(self, _coerce(other))

    def __rtruediv__(self, other):
        if not _scalar(other):
            return NotImplemented
        return div(_coerce(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if isinstance(n, Expr):
            if n.op != "const" or n.value != int(n.value):
                raise TypeError("only integer exponents are supported")
            n = int(n.value)
        if int(n) != n:
            raise TypeError("only integer exponents are supported")
        return power(self, int(n))

    def __repr__(self):
        return f"Expr({_to_str(self)!r})"

    def __str__(self):
        return _to_str(self)


def _scalar(x) -> bool:
    return isinstance(x, (Expr, numbers.Real))


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    return const(x)


def const(value: float) -> Expr:
    v = float(value)
    if v == 0.0:
        v = 0.0  # fold -0.0
    return Expr("const", (), v)


def var(name: str) -> Expr:
    return Expr("var", (), name)


ZERO = const(0.0)
ONE = const(1.0)


def _is(e: Expr, v: float) -> bool:
    return e.op == "const" and e.value == v


def add(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value + b.value)
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is(b, 0.0):
        return a
    if a is b:
        return ZERO
    if _is(a, 0.0):
        return neg(b)
    if a.op == "const" and b.op == "const":
        return const(a.value - b.value)
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if a.op == "const" and b.op == "const":
        return const(a.value * b.value)
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is(b, 1.0):
        return a
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if a.op == "const" and b.op == "const" and b.value != 0.0:
        return const(a.value / b.value)
    return Expr("div", (a, b))


def neg(a: Expr) -> Expr:
    if a.op == "const":
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def power(a: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if a.op == "const" and not (a.value == 0.0 and n < 0):
        return const(a.value**n)
    return Expr("pow", (a,), int(n))


_FOLD = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": math.exp,
    "log": lambda x: math.log(x) if x > 0 else None,
    "sqrt": lambda x: math.sqrt(x) if x >= 0 else None,
}


def func(name: str, a: Expr) -> Expr:
    if name not in _FOLD:
        raise ValueError(f"unknown function '{name}'")
    if a.op == "const":
        v = _FOLD[name](a.value)
        if v is not None:
            return const(v)
    return Expr("func", (a,), name)


def sin(a):
    return func("sin", _coerce(a))


def cos(a):
    return func("cos", _coerce(a))


def exp(a):
    return func("exp", _coerce(a))


def log(a):
    return func("log", _coerce(a))


def sqrt(a):
    return func("sqrt", _coerce(a))


# ---------------------------------------------------------------------------
# traversal helpers
# ---------------------------------------------------------------------------


def _postorder(roots: Iterable[Expr], done) -> list[Expr]:
    """Nodes reachable from ``roots`` and not in ``done``, children first."""
    order = []
    seen = set()
    for root in roots:
        if root in done or root in seen:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node in seen or node in done:
                continue
            seen.add(node)
            stack.append((node, True))
            for a in node.args:
                if a not in seen and a not in done:
                    stack.append((a, False))
    return order


def free_variables(e: Expr) -> set[str]:
    return {n.value for n in _postorder([e], ()) if n.op == "var"}


# ---------------------------------------------------------------------------
# differentiation and substitution
# ---------------------------------------------------------------------------


def _rule(node: Expr, d: list, name: str) -> Expr:
    op = node.op
    if op == "var":
        return ONE if node.value == name else ZERO
    if op == "const":
        return ZERO
    args = node.args
    if op == "add":
        return add(d[0], d[1])
    if op == "sub":
        return sub(d[0], d[1])
    if op == "neg":
        return neg(d[0])
    if op == "mul":
        return add(mul(d[0], args[1]), mul(args[0], d[1]))
    if op == "div":
        a, b = args
        return sub(div(d[0], b), div(mul(a, d[1]), power(b, 2)))
    if op == "pow":
        n = node.value
        return mul(mul(const(n), power(args[0], n - 1)), d[0])
    if op == "func":
        a = args[0]
        fn = node.value
        if fn == "sin":
            outer = cos(a)
        elif fn == "cos":
            outer = neg(sin(a))
        elif fn == "exp":
            outer = node
        elif fn == "log":
            return div(d[0], a)
        else:  # sqrt
            return div(d[0], mul(const(2.0), node))
        return mul(outer, d[0])
    raise AssertionError(op)


def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``name``."""
    if not e.depends_on(name):
        return ZERO
    bit = _var_bits[name]

    def cached(node):
        if not node.mask & bit:
            return ZERO
        return node._deriv.get(name) if node._deriv else None

    if cached(e) is not None:
        return cached(e)
    # only nodes that depend on the variable need work
    stack = [e]
    order = []
    seen = set()
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        order.append(node)
        for a in node.args:
            if a.mask & bit and a not in seen and cached(a) is None:
                stack.append(a)
    # children before parents: a reverse DFS preorder is not a topological
    # order in a DAG, so sort by a proper postorder instead.
    for node in _postorder_subset(order, bit, cached):
        ds = [cached(a) for a in node.args]
        result = _rule(node, ds, name)
        if node._deriv is None:
            node._deriv = {}
        node._deriv[name] = result
    return cached(e)


def _postorder_subset(nodes, bit, cached):
    pending = set(nodes)
    out = []
    for root in nodes:
        if root not in pending:
            continue
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                out.append(node)
                continue
            if node not in pending:
                continue
            pending.discard(node)
            stack.append((node, True))
            for a in node.args:
                if a in pending:
                    stack.append((a, False))
    return out


def substitute(e: Expr, mapping: Mapping[str, Expr], memo: dict | None = None) -> Expr:
    """Replace variables by expressions.  ``memo`` may be shared across calls
    that use the same ``mapping``."""
    if memo is None:
        memo = {}
    smask = 0
    for k in mapping:
        smask |= _bit(k)
    if not e.mask & smask:
        return e
    if e in memo:
        return memo[e]
    for node in _postorder([e], memo):
        if not node.mask & smask:
            memo[node] = node
            continue
        if node.op == "var":
            memo[node] = _coerce(mapping[node.value])
            continue
        args = [memo[a] for a in node.args]
        memo[node] = _rebuild(node, args)
    return memo[e]


def _rebuild(node: Expr, args: list) -> Expr:
    op = node.op
    if op == "add":
        return add(*args)
    if op == "sub":
        return sub(*args)
    if op == "mul":
        return mul(*args)
    if op == "div":
        return div(*args)
    if op == "neg":
        return neg(args[0])
    if op == "pow":
        return power(args[0], node.value)
    if op == "func":
        return func(node.value, args[0])
    raise AssertionError(op)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


class Evaluator:
    """Numeric evaluation in a fixed variable environment.

    Values of shared subexpressions are cached, so evaluating many expressions
    built from common pieces at one point costs one pass over the DAG.
    """

    def __init__(self, env: Mapping[str, float]):
        self.env = {k: float(v) for k, v in env.items()}
        self.cache: dict = {}

    def __call__(self, e: Expr) -> float:
        cache = self.cache
        v = cache.get(e)
        if v is not None:
            return v
        for node in _postorder([e], cache):
            cache[node] = self._apply(node)
        return cache[e]

    def array(self, arr):
        """Evaluate an array (nested sequence or object ndarray) of expressions."""
        import numpy as np

        obj = np.asarray(arr, dtype=object)
        flat = [x if isinstance(x, Expr) else const(x) for x in obj.ravel()]
        cache = self.cache
        for node in _postorder(flat, cache):
            cache[node] = self._apply(node)
        return np.array([cache[x] for x in flat], dtype=float).reshape(obj.shape)

    def _apply(self, node: Expr) -> float:
        op = node.op
        c = self.cache
        if op == "const":
            return node.value
        if op == "var":
            try:
                return self.env[node.value]
            except KeyError:
                raise EvaluationError(f"unbound variable '{node.value}'") from None
        args = node.args
        if op == "add":
            return c[args[0]] + c[args[1]]
        if op == "sub":
            return c[args[0]] - c[args[1]]
        if op == "mul":
            return c[args[0]] * c[args[1]]
        if op == "neg":
            return -c[args[0]]
        if op == "div":
            b = c[args[1]]
            if b == 0.0:
                raise EvaluationError("division by zero", node)
            return c[args[0]] / b
        if op == "pow":
            a = c[args[0]]
            if a == 0.0 and node.value < 0:
                raise EvaluationError("zero raised to a negative power", node)
            return a**node.value
        x = c[args[0]]
        fn = node.value
        if fn == "sin":
            return math.sin(x)
        if fn == "cos":
            return math.cos(x)
        if fn == "exp":
            try:
                return math.exp(x)
            except OverflowError:
                raise EvaluationError("exp overflow", node) from None
        if fn == "log":
            if x <= 0.0:
                raise EvaluationError("log of non-positive value", node)
            return math.log(x)
        if x < 0.0:
            raise EvaluationError("sqrt of negative value", node)
        return math.sqrt(x)


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    return Evaluator(env)(e)


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------

_PREC = {"add": 1, "sub": 1, "mul": 2, "div": 2, "neg": 3, "pow": 4}


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _to_str(root: Expr) -> str:
    out: dict = {}
    for node in _postorder([root], ()):
        op = node.op
        if op == "const":
            s = _fmt_const(node.value)
            out[node] = (s, 5 if node.value >= 0 else 3)
        elif op == "var":
            out[node] = (node.value, 5)
        elif op == "func":
            out[node] = (f"{node.value}({out[node.args[0]][0]})", 5)
        elif op == "neg":
            s, p = out[node.args[0]]
            out[node] = ("-" + (s if p >= 3 else f"({s})"), 3)
        elif op == "pow":
            s, p = out[node.args[0]]
            out[node] = ((s if p > 4 else f"({s})") + f"^{node.value}", 4)
        else:
            prec = _PREC[op]
            (ls, lp), (rs, rp) = out[node.args[0]], out[node.args[1]]
            if lp < prec:
                ls = f"({ls})"
            # left-associative: equal precedence on the right needs parentheses
            if rp < prec or (rp == prec and op in ("sub", "div")):
                rs = f"({rs})"
            sym = {"add": " + ", "sub": " - ", "mul": "*", "div": "/"}[op]
            out[node] = (ls + sym + rs, prec)
    return out[root][0]


def _short(node: Expr, limit: int = 80) -> str:
    s = _to_str(node)
    return s if len(s) <= limit else s[: limit - 3] + "..."


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[a-zA-Z][a-zA-Z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind != "op":
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", pos)

    def expr(self):
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            left = add(left, right) if op == "+" else sub(left, right)
        return left

    def term(self):
        left = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.factor()
            left = mul(left, right) if op == "*" else div(left, right)
        return left

    def factor(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return neg(self.factor())
        b = self.base()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num":
                what = "end of input" if kind == "end" else repr(text)
                raise ParseError(f"expected integer exponent, found {what}", pos)
            if not text.isdigit():
                raise ParseError(f"non-integer exponent {text!r}", pos)
            return power(b, int(text))
        return b

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return const(float(text))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function '{text}'", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            return var(text)
        if kind == "op" and text == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", pos)


def parse(text: str) -> Expr:
    """Parse ``text`` per the expression grammar (``^`` takes an integer
    literal and binds tighter than unary minus)."""
    p = _Parser(text)
    e = p.expr()
    kind, tok, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {tok!r}", pos)
    return e
