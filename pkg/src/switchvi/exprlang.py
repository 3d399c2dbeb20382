"""Small arithmetic expression language for problem coefficients.

Grammar (whitespace-insensitive, all binary operators left-associative)::

    expr   := term (('+' | '-') term)*
    term   := power (('*' | '/') power)*
    power  := unary ('^' unary)*
    unary  := '-' unary | '+' unary | atom
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Unary minus binds tighter than ``^``, so ``-x1^2`` is ``(-x1)^2``.

Variables are restricted to ``t``, ``x1..xk``, ``y_<i>_<j>`` and ``z1..zd``.
Evaluation works on floats and, elementwise, on numpy arrays.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "Expression", "Num", "Var", "Unary", "Binary", "Call",
    "ExprSyntaxError", "ExprNameError", "ExprDomainError", "UnboundVariableError",
    "parse", "evaluate", "free_vars", "pretty", "FUNCTIONS",
]


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, source: str, position: int):
        super().__init__(f"{message} at position {position} in {source!r}")
        self.source = source
        self.position = position


class ExprNameError(ValueError):
    """Unknown function or a variable name outside the allowed patterns."""


class UnboundVariableError(KeyError):
    pass


class ExprDomainError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str          # 'neg'
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str          # 'add' | 'sub' | 'mul' | 'div' | 'pow'
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Num, Var, Unary, Binary, Call]

_VAR_RE = re.compile(r"^(t|x[1-9][0-9]*|z[1-9][0-9]*|y_[1-9][0-9]*_[1-9][0-9]*)$")

# name -> (min arity, max arity)
FUNCTIONS = {
    "abs": (1, 1), "exp": (1, 1), "log": (1, 1), "sqrt": (1, 1),
    "pos": (1, 1), "neg": (1, 1), "sin": (1, 1), "cos": (1, 1),
    "pow": (2, 2), "min": (2, None), "max": (2, None),
}

_BINOPS = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_SYMBOL = {v: k for k, v in _BINOPS.items()}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class Expression:
    """A parsed expression: immutable, hashable, safe to share across threads."""

    root: Node
    source: str = ""

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    @property
    def free_vars(self) -> frozenset:
        return free_vars(self)

    def __str__(self) -> str:
        return pretty(self)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", source, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", self.source, pos)

    def fail(self, message):
        raise ExprSyntaxError(message, self.source, self.peek()[2])

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", self.source, pos)
        return node

    def _binary_level(self, ops, sub):
        node = sub()
        while self.peek()[0] == "op" and self.peek()[1] in ops:
            op = _BINOPS[self.take()[1]]
            node = Binary(op, node, sub())
        return node

    def expr(self):
        return self._binary_level("+-", self.term)

    def term(self):
        return self._binary_level("*/", self.power)

    def power(self):
        return self._binary_level("^", self.unary)

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.atom()

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(text, pos)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} used without arguments", self.source, pos)
            if not _VAR_RE.match(text):
                raise ExprNameError(f"unknown variable name {text!r} at position {pos}")
            return Var(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"unexpected {found}", self.source, pos)

    def call(self, name, pos):
        if name not in FUNCTIONS:
            raise ExprNameError(f"unknown function {name!r} at position {pos}")
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExprSyntaxError(
                f"function {name!r} takes {lo if lo == hi else f'at least {lo}'} argument(s), "
                f"got {len(args)}", self.source, pos)
        return Call(name, tuple(args))


def parse(source: str) -> Expression:
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", str(source), 0)
    return Expression(_Parser(source).parse(), source)


def free_vars(expr) -> frozenset:
    node = expr.root if isinstance(expr, Expression) else expr
    out = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Var):
            out.add(n.name)
        elif isinstance(n, Unary):
            stack.append(n.operand)
        elif isinstance(n, Binary):
            stack.extend((n.left, n.right))
        elif isinstance(n, Call):
            stack.extend(n.args)
    return frozenset(out)


def pretty(expr) -> str:
    """Fully parenthesised rendering; ``parse(pretty(e))`` rebuilds the same tree."""
    node = expr.root if isinstance(expr, Expression) else expr
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{pretty(node.operand)})"
    if isinstance(node, Binary):
        return f"({pretty(node.left)} {_SYMBOL[node.op]} {pretty(node.right)})"
    return f"{node.name}({', '.join(pretty(a) for a in node.args)})"


def _domain(name, ok):
    if not np.all(ok):
        raise ExprDomainError(f"{name}: argument outside the function's domain")


def _apply(name, args):
    a = args[0]
    if name == "abs":
        return np.abs(a)
    if name == "exp":
        return np.exp(a)
    if name == "log":
        _domain("log", np.asarray(a) > 0)
        return np.log(a)
    if name == "sqrt":
        _domain("sqrt", np.asarray(a) >= 0)
        return np.sqrt(a)
    if name == "pos":
        return np.maximum(a, 0.0)
    if name == "neg":
        return np.maximum(-a, 0.0)
    if name == "sin":
        return np.sin(a)
    if name == "cos":
        return np.cos(a)
    if name == "pow":
        return _power(a, args[1])
    if name == "min":
        out = a
        for b in args[1:]:
            out = np.minimum(out, b)
        return out
    if name == "max":
        out = a
        for b in args[1:]:
            out = np.maximum(out, b)
        return out
    raise ExprNameError(f"unknown function {name!r}")


def _power(a, b):
    with np.errstate(all="ignore"):
        out = np.power(np.asarray(a, dtype=float), b)
    if np.any(np.isnan(out) & ~np.isnan(a) & ~np.isnan(b)):
        raise ExprDomainError("pow: negative base with non-integer exponent")
    return out


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise UnboundVariableError(node.name) from None
    if isinstance(node, Unary):
        return -_eval(node.operand, env)
    if isinstance(node, Binary):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "add":
            return a + b
        if node.op == "sub":
            return a - b
        if node.op == "mul":
            return a * b
        if node.op == "div":
            _domain("division", np.asarray(b) != 0)
            return a / b
        return _power(a, b)
    return _apply(node.name, [_eval(arg, env) for arg in node.args])


def evaluate(expr: Expression, bindings: Mapping[str, object]):
    """Evaluate ``expr``; returns a float for scalar bindings, an array otherwise."""
    node = expr.root if isinstance(expr, Expression) else expr
    with np.errstate(over="ignore"):
        out = _eval(node, bindings)
    if isinstance(out, np.ndarray):
        if out.ndim == 0:
            return float(out)
        return out.astype(float, copy=False)
    return float(out)


def constant_value(expr: Expression):
    """Value of an expression without free variables, else None."""
    if free_vars(expr):
        return None
    return evaluate(expr, {})


def is_finite(value) -> bool:
    return bool(np.all(np.isfinite(value))) if isinstance(value, np.ndarray) else math.isfinite(value)
