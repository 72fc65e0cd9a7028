"""Closed-form coefficient expressions.

Grammar (standard precedence, ``^`` binds tightest and is right-associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

Names are the coordinates ``x1..xn`` and ``y1..yn`` (``n`` the declared
dimension), the planar angle ``t`` when allowed, the constant ``pi`` and the
functions ``sqrt sin cos exp log``.  There is deliberately no ``abs``: norms
are written as square roots of sums of squares.

Note that ``-y1^2`` parses as ``-(y1^2)``, and ``2^-1`` is accepted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jets as J
from .jets import DivisionByZeroError, DomainError, Jet

FUNCTIONS = ("sqrt", "sin", "cos", "exp", "log")


class ParseError(ValueError):
    """Syntax or name error, with the 0-based character position."""

    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


# AST ------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # 'x', 'y' or 't'
    index: int  # 1-based for x/y, 0 for t


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expression:
    """Parsed expression over ``x1..xn, y1..yn`` (and optionally ``t``)."""

    root: Node
    dimension: int
    text: str = ""

    def to_text(self) -> str:
        return to_text(self.root)

    def variables(self) -> set[Var]:
        out: set[Var] = set()
        _collect(self.root, out)
        return out

    def evaluate(self, x=None, y=None, t=None):
        """Plain (vectorised) evaluation; arrays broadcast."""
        fn = self.__dict__.get("_compiled")
        if fn is None:
            fn = _compile(self.root)
            object.__setattr__(self, "_compiled", fn)
        return fn(None if x is None else np.asarray(x, dtype=float),
                  None if y is None else np.asarray(y, dtype=float),
                  None if t is None else np.asarray(t, dtype=float))

    def jet(self, x, y, order: int) -> Jet:
        return evaluate_jet(self, np.concatenate([np.asarray(x, float), np.asarray(y, float)]), order)


def _collect(node, out):
    if isinstance(node, Var):
        out.add(node)
    elif isinstance(node, Neg | Call):
        _collect(node.arg, out)
    elif isinstance(node, BinOp):
        _collect(node.left, out)
        _collect(node.right, out)


# serialization --------------------------------------------------------------


def to_text(node: Node) -> str:
    """Fully parenthesised text that reparses to the same tree."""
    if isinstance(node, Num):
        if node.value < 0:
            return f"(0-{repr(-node.value)})"
        return repr(float(node.value))
    if isinstance(node, Var):
        return "t" if node.kind == "t" else f"{node.kind}{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)}{node.op}{to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({to_text(node.arg)})"
    raise TypeError(node)


# tokenizer / parser ---------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ParseError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int, allow_t: bool):
        self.text = text
        self.n = dimension
        self.allow_t = allow_t
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, val, pos = self.advance()
        if val != value:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise ParseError(f"unknown function {val!r}", pos, self.text)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            return self.name(val, pos)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {found}", pos, self.text)

    def name(self, val, pos):
        if val == "pi":
            return Num(math.pi)
        if val == "t":
            if not self.allow_t:
                raise ParseError("unknown identifier 't'", pos, self.text)
            return Var("t", 0)
        m = re.fullmatch(r"([xy])([1-9]\d*)", val)
        if m is None:
            if val in FUNCTIONS:
                raise ParseError(f"function {val!r} needs an argument", pos, self.text)
            raise ParseError(f"unknown identifier {val!r}", pos, self.text)
        idx = int(m.group(2))
        if idx > self.n:
            raise ParseError(
                f"variable {val!r} out of range for dimension {self.n}", pos, self.text
            )
        return Var(m.group(1), idx)


def parse(text: str, dimension: int, *, allow_t: bool = False) -> Expression:
    """Parse ``text`` over coordinates of the given dimension."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression", 0, text if isinstance(text, str) else "")
    if dimension < 1:
        raise ValueError("dimension must be positive")
    root = _Parser(text, dimension, allow_t).parse()
    return Expression(root, dimension, text)


# evaluation -----------------------------------------------------------------


def _fdiv(a, b):
    if np.any(np.asarray(b) == 0):
        raise DivisionByZeroError("division by zero")
    return a / b


def _fpow(a, b):
    if isinstance(b, (int, float)) and float(b).is_integer():
        if b < 0 and np.any(np.asarray(a) == 0):
            raise DivisionByZeroError("zero raised to a negative power")
        return a ** int(b) if b >= 0 else 1.0 / a ** int(-b)
    bb = np.asarray(b, dtype=float)
    aa = np.asarray(a, dtype=float)
    if np.all(bb == np.round(bb)):
        if np.any((aa == 0) & (bb < 0)):
            raise DivisionByZeroError("zero raised to a negative power")
        return aa**bb
    if np.any(aa < 0):
        raise DomainError("fractional power of a negative argument")
    return aa**bb


def _fsqrt(a):
    if np.any(np.asarray(a) < 0):
        raise DomainError("sqrt of a negative argument")
    return np.sqrt(a)


def _flog(a):
    if np.any(np.asarray(a) <= 0):
        raise DomainError("log of a nonpositive argument")
    return np.log(a)


_FLOAT_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _fdiv,
    "^": _fpow,
    "sqrt": _fsqrt,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": _flog,
}


def _jpow(a, b):
    if isinstance(b, Jet):
        if b.order == 0 or not np.any(b.coeffs[1:]):
            return _jpow(a, b.value)
        if not isinstance(a, Jet):
            return a**b
        return J.exp(b * J.log(a))
    if isinstance(a, Jet):
        bb = np.asarray(b, dtype=float)
        if bb.ndim or not float(bb).is_integer():
            if bb.ndim and not np.all(bb == bb.flat[0]):
                return J.exp(J.log(a) * bb)
            return J.power(a, float(bb.flat[0]))
        return J.power(a, float(bb))
    return _fpow(a, b)


def _lift(fn_jet, fn_float):
    def f(a):
        if isinstance(a, Jet):
            return fn_jet(a)
        return fn_float(a)

    return f


def _jdiv(a, b):
    if isinstance(b, Jet):
        return a * J.reciprocal(b)
    return _fdiv(a, b)


_JET_OPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _jdiv,
    "^": _jpow,
    "sqrt": _lift(J.sqrt, _fsqrt),
    "sin": _lift(J.sin, np.sin),
    "cos": _lift(J.cos, np.cos),
    "exp": _lift(J.exp, np.exp),
    "log": _lift(J.log, _flog),
}


def _eval(node, env, ops):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node]
        except KeyError:
            raise ValueError(f"no value bound for {to_text(node)}") from None
    if isinstance(node, Neg):
        return -_eval(node.arg, env, ops)
    if isinstance(node, BinOp):
        return ops[node.op](_eval(node.left, env, ops), _eval(node.right, env, ops))
    if isinstance(node, Call):
        return ops[node.name](_eval(node.arg, env, ops))
    raise TypeError(node)


def _compile(node):
    """Closure ``f(x, y, t)`` doing float evaluation without per-call tree dispatch."""
    if isinstance(node, Num):
        v = node.value
        return lambda x, y, t: v
    if isinstance(node, Var):
        name, k = node.kind, node.index - 1
        label = to_text(node)

        def var(x, y, t):
            src = {"x": x, "y": y, "t": t}[name]
            if src is None:
                raise ValueError(f"no value bound for {label}")
            return src if name == "t" else src[k]

        return var
    if isinstance(node, Neg):
        a = _compile(node.arg)
        return lambda x, y, t: -a(x, y, t)
    if isinstance(node, BinOp):
        op, a, b = _FLOAT_OPS[node.op], _compile(node.left), _compile(node.right)
        return lambda x, y, t: op(a(x, y, t), b(x, y, t))
    if isinstance(node, Call):
        op, a = _FLOAT_OPS[node.name], _compile(node.arg)
        return lambda x, y, t: op(a(x, y, t))
    raise TypeError(node)


def evaluate_on(expr: Expression, xs, ys, ts=None):
    """Evaluate on arbitrary operands (floats, arrays or jets) bound per coordinate."""
    env = {}
    for i, v in enumerate(xs):
        env[Var("x", i + 1)] = v
    for i, v in enumerate(ys):
        env[Var("y", i + 1)] = v
    if ts is not None:
        env[Var("t", 0)] = ts
    return _eval(expr.root, env, _JET_OPS)


def evaluate_jet(expr: Expression, point, order: int) -> Jet:
    """Jet of ``expr`` at ``point = (x1..xn, y1..yn)`` up to total ``order``.

    ``point`` may carry trailing batch axes (shape ``(2n, *batch)``).
    """
    if not 0 <= order:
        raise ValueError("order must be nonnegative")
    point = np.asarray(point, dtype=float)
    n = expr.dimension
    if point.shape[0] != 2 * n:
        raise ValueError(f"point must have {2 * n} coordinates")
    variables = Jet.variables(point, order)
    out = evaluate_on(expr, variables[:n], variables[n:])
    if not isinstance(out, Jet):
        out = Jet.constant(variables[0].basis, out, point.shape[1:])
    out.point = point
    return out


def evaluate_theta_jet(expr: Expression, t, order: int) -> Jet:
    """Jet in the single planar variable ``t``."""
    t = np.asarray(t, dtype=float)
    (tv,) = Jet.variables(t[None], order)
    out = evaluate_on(expr, [], [], tv)
    if not isinstance(out, Jet):
        out = Jet.constant(tv.basis, out, t.shape)
    return out
