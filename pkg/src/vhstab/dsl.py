"""Small arithmetic expression language used to describe problem data.

Expressions are parsed once into an immutable tree and evaluated either on
scalars or, with the same code path, on numpy arrays that broadcast against
each other.  Grammar (loosest binding first)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom (('^' | '**') unary)?
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

so ``-2^2 == -4`` and ``2^-1 == 0.5``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

ALL_VARS = frozenset("xyzrstv")

UNARY_FUNCS = ("exp", "sin", "cos", "abs", "sqrt")
BINARY_FUNCS = ("pow", "min", "max")
BINARY_OPS = ("+", "-", "*", "/", "^", "min", "max")


class ExpressionError(ValueError):
    pass


class ExprSyntaxError(ExpressionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownVariable(ExpressionError):
    def __init__(self, name: str, position: int):
        super().__init__(f"unknown variable {name!r} at position {position}")
        self.name = name
        self.position = position


class ArityError(ExpressionError):
    def __init__(self, func: str, expected: int, got: int, position: int):
        super().__init__(
            f"{func}() takes {expected} argument(s), got {got} (position {position})"
        )
        self.func = func
        self.position = position


class MissingBinding(ExpressionError):
    def __init__(self, name: str):
        super().__init__(f"no value bound for variable {name!r}")
        self.name = name


class DomainError(ExpressionError, ArithmeticError):
    """Raised when evaluation leaves the reals (sqrt of a negative, x/0, ...).

    ``index`` is the first offending position when evaluating on arrays.
    """

    def __init__(self, message: str, index: tuple | None = None):
        if index is not None:
            message = f"{message} at index {index}"
        super().__init__(message)
        self.index = index


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of BINARY_OPS
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]


def free_vars(node: Node) -> frozenset[str]:
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Unary):
        return free_vars(node.arg)
    return free_vars(node.left) | free_vars(node.right)


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its free variables."""

    ast: Node
    variables: frozenset[str]

    @classmethod
    def from_ast(cls, ast: Node) -> "Expression":
        return cls(ast, free_vars(ast))

    def __call__(self, **bindings):
        return evaluate(self, bindings)

    def __str__(self) -> str:
        return print_canonical(self)

    def depends_on(self, *names: str) -> bool:
        return any(n in self.variables for n in names)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r")"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed: frozenset[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            found = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return Unary("neg", self.unary())
        if kind == "op" and val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, val, _ = self.peek()
        if kind == "op" and val in ("^", "**"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, val, pos = self.take()
        if kind == "num":
            return Const(float(val))
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(val, pos)
            if val not in self.allowed:
                raise UnknownVariable(val, pos)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {found}", pos)

    def call(self, func: str, pos: int) -> Node:
        self.expect("(")
        args = [self.expr()]
        while self.peek()[1] == "," and self.peek()[0] == "op":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if func in UNARY_FUNCS:
            if len(args) != 1:
                raise ArityError(func, 1, len(args), pos)
            return Unary(func, args[0])
        if func in BINARY_FUNCS:
            if len(args) != 2:
                raise ArityError(func, 2, len(args), pos)
            return Binary("^" if func == "pow" else func, args[0], args[1])
        raise ExprSyntaxError(f"unknown function {func!r}", pos)


def parse(text: str, allowed_vars=ALL_VARS) -> Expression:
    """Parse ``text``; every variable must belong to ``allowed_vars``."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    allowed = frozenset(allowed_vars)
    return Expression.from_ast(_Parser(text, allowed).parse())


# --------------------------------------------------------------------------
# evaluation


def _first_bad(mask) -> tuple | None:
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return tuple(int(i) for i in np.argwhere(mask)[0])


def _check(bad, message: str):
    if np.any(bad):
        raise DomainError(message, _first_bad(bad))


def _finite(value, what: str):
    _check(~np.isfinite(value), f"non-finite result of {what}")
    return value


_UNARY = {
    "neg": np.negative,
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "sqrt": np.sqrt,
}


def _eval(node: Node, env: Mapping[str, object]):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise MissingBinding(node.name) from None
    if isinstance(node, Unary):
        a = _eval(node.arg, env)
        if node.op == "sqrt":
            _check(np.less(a, 0), "sqrt of a negative number")
        return _finite(_UNARY[node.op](a), node.op)
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    op = node.op
    if op == "+":
        return _finite(np.add(a, b), "+")
    if op == "-":
        return _finite(np.subtract(a, b), "-")
    if op == "*":
        return _finite(np.multiply(a, b), "*")
    if op == "/":
        _check(np.equal(b, 0), "division by zero")
        return _finite(np.divide(a, b), "/")
    if op == "^":
        a_b, b_b = np.broadcast_arrays(a, b)
        _check((a_b < 0) & (b_b != np.floor(b_b)), "non-integer power of a negative number")
        _check((a_b == 0) & (b_b < 0), "zero raised to a negative power")
        return _finite(np.power(a, b), "pow")
    if op == "min":
        return np.minimum(a, b)
    if op == "max":
        return np.maximum(a, b)
    raise AssertionError(op)


def evaluate(e: Expression | Node, bindings: Mapping[str, object]):
    """Evaluate on scalars (returns float) or arrays (returns ndarray)."""
    node = e.ast if isinstance(e, Expression) else e
    with np.errstate(all="ignore"):
        out = _eval(node, bindings)
    if np.ndim(out) == 0:
        return float(out)
    return out


# --------------------------------------------------------------------------
# printing / building


def _fmt_const(value: float) -> str:
    text = repr(float(value))
    if value < 0 or text.startswith("-"):
        return f"(-{text[1:]})"
    return text


def _print(node: Node) -> str:
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{_print(node.arg)})"
        return f"{node.op}({_print(node.arg)})"
    if node.op in ("min", "max"):
        return f"{node.op}({_print(node.left)}, {_print(node.right)})"
    return f"({_print(node.left)} {node.op} {_print(node.right)})"


def print_canonical(e: Expression | Node) -> str:
    """Fully parenthesised text that parses back to an equal-valued tree."""
    return _print(e.ast if isinstance(e, Expression) else e)


def const(value: float) -> Expression:
    return Expression.from_ast(Const(float(value)))


def product(*factors: Expression | float) -> Expression:
    """Left-folded product of expressions and numbers."""
    nodes = [f.ast if isinstance(f, Expression) else Const(float(f)) for f in factors]
    node = nodes[0]
    for other in nodes[1:]:
        node = Binary("*", node, other)
    return Expression.from_ast(node)


def plus(a: Expression, b: Expression) -> Expression:
    return Expression.from_ast(Binary("+", a.ast, b.ast))


def absolute(e: Expression) -> Expression:
    return Expression.from_ast(Unary("abs", e.ast))


def substitute(e: Expression, name: str, value: float) -> Expression:
    """Replace every occurrence of variable ``name`` with a constant."""

    def walk(node: Node) -> Node:
        if isinstance(node, Var) and node.name == name:
            return Const(float(value))
        if isinstance(node, Unary):
            return Unary(node.op, walk(node.arg))
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.left), walk(node.right))
        return node

    return Expression.from_ast(walk(e.ast))
