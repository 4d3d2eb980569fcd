"""Arithmetic expression mini-language for circuit and neuron equations.

Configents keep device/circuit behaviour as plain strings, e.g.
``V_post1 - V_pre`` or ``G * V_TB``, so no host code is needed to swap a
synaptic circuit. The grammar is conventional infix arithmetic over named
variables with a fixed function set:

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := '-' factor | primary ('^' factor)?
    primary := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'

'^' is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-(2^2) = -4``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

FUNCTIONS = {
    "exp": (1, math.exp),
    "log": (1, math.log),
    "abs": (1, abs),
    "tanh": (1, math.tanh),
    "sqrt": (1, math.sqrt),
    "min": (2, min),
    "max": (2, max),
    "pow": (2, math.pow),
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class ExprError(ValueError):
    """Parse or evaluation failure; message carries position or variable."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expression", ...]


Expression = Num | Var | Neg | BinOp | Call


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens: list[tuple[str, str, int]] = []  # (kind, text, position)
        pos = 0
        while pos < len(source):
            m = _TOKEN_RE.match(source, pos)
            if m is None or m.end() == pos:
                stripped = source[pos:].lstrip()
                if not stripped:
                    break
                at = len(source) - len(stripped)
                raise ExprError(f"unexpected character {stripped[0]!r} at position {at}")
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ExprError(f"unexpected end of expression at position {len(self.source)}")
        self.i += 1
        return tok

    def expect(self, text: str):
        tok = self.next()
        if tok[1] != text:
            raise ExprError(f"expected {text!r} at position {tok[2]}, got {tok[1]!r}")

    def at_op(self, *texts: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] in texts

    def parse(self) -> Expression:
        e = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ExprError(f"trailing input {tok[1]!r} at position {tok[2]}")
        return e

    def expr(self) -> Expression:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.next()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.at_op("*", "/"):
            op = self.next()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        if self.at_op("-"):
            self.next()
            return Neg(self.factor())
        node = self.primary()
        if self.at_op("^"):
            self.next()
            return BinOp("^", node, self.factor())
        return node

    def primary(self) -> Expression:
        tok = self.next()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if self.at_op("("):
                return self.call(text, pos)
            return Var(text)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprError(f"unexpected {text!r} at position {pos}")

    def call(self, name: str, pos: int) -> Expression:
        if name not in FUNCTIONS:
            raise ExprError(f"unknown function {name!r} at position {pos}")
        self.expect("(")
        args = [self.expr()]
        while self.at_op(","):
            self.next()
            args.append(self.expr())
        self.expect(")")
        arity = FUNCTIONS[name][0]
        if len(args) != arity:
            raise ExprError(
                f"function {name!r} takes {arity} argument(s), got {len(args)} at position {pos}")
        return Call(name, tuple(args))


def parse(source: str) -> Expression:
    """Parse source text into an expression tree."""
    return _Parser(source).parse()


def evaluate(e: Expression, env: dict[str, float]) -> float:
    """Evaluate against variable bindings; rejects non-finite results."""
    result = _eval(e, env)
    if not math.isfinite(result):
        raise ExprError(f"expression produced non-finite value {result}")
    return result


def _eval(e: Expression, env: dict[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise ExprError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise ExprError("division by zero")
            return a / b
        try:
            return math.pow(a, b)
        except (OverflowError, ValueError) as err:
            raise ExprError(f"invalid power {a} ^ {b}: {err}") from None
    if isinstance(e, Call):
        args = [_eval(a, env) for a in e.args]
        if e.func == "log" and args[0] <= 0.0:
            raise ExprError(f"log of non-positive value {args[0]}")
        if e.func == "sqrt" and args[0] < 0.0:
            raise ExprError(f"sqrt of negative value {args[0]}")
        try:
            return float(FUNCTIONS[e.func][1](*args))
        except (OverflowError, ValueError) as err:
            raise ExprError(f"{e.func}({', '.join(map(str, args))}) failed: {err}") from None
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expression) -> set[str]:
    """Names of all variables appearing in the expression."""
    if isinstance(e, Num):
        return set()
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= free_vars(a)
        return out
    raise TypeError(f"not an expression node: {e!r}")


def unparse(e: Expression) -> str:
    """Render back to parseable source (fully parenthesized)."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{unparse(e.operand)})"
    if isinstance(e, BinOp):
        return f"({unparse(e.left)} {e.op} {unparse(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(unparse(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")
