"""Scalar-field expressions in named variables, with exact forward-mode jets.

The expression language is deliberately small: real constants, declared
variables, the unary functions sin/cos/tan/exp/log/sqrt/sinh/cosh/tanh,
unary minus, and the binary operators + - * / ^ (exponent restricted to
constant sub-expressions).  Trees are immutable after parse and evaluation
is pure, so expressions can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union


class ExprError(Exception):
    """Base class for expression parsing/evaluation failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class ExprNameError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class EvalDomainError(ExprError):
    """Raised when evaluation leaves the domain of some node (log of a
    non-positive value, division by zero, sqrt of a negative, ...)."""

    def __init__(self, reason: str, node_text: str):
        super().__init__(f"{reason} in sub-expression '{node_text}'")
        self.reason = reason
        self.node_text = node_text


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a function name
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Unary, Binary]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")


@dataclass(frozen=True)
class Expr:
    """A parsed scalar field: immutable node tree plus its declared variables."""

    root: Node
    variables: tuple[str, ...]


def variables_of(node: Node) -> set[str]:
    if isinstance(node, Const):
        return set()
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return variables_of(node.arg)
    return variables_of(node.left) | variables_of(node.right)


# ---------------------------------------------------------------------------
# Tokenizer / parser

_OPS = set("+-*/^()")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c in _OPS:
            tokens.append(("op", c, i))
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ExprSyntaxError(f"bad number literal '{lit}'", i) from None
            tokens.append(("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character '{c}'", i)
    tokens.append(("eof", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], variables: tuple[str, ...]):
        self.tokens = tokens
        self.pos = 0
        self.variables = variables

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExprSyntaxError(f"expected '{op}'", pos)
        self.advance()

    def parse(self) -> Node:
        node = self.additive()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected '{text}'", pos)
        return node

    def additive(self) -> Node:
        node = self.multiplicative()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Binary(text, node, self.multiplicative())
            else:
                return node

    def multiplicative(self) -> Node:
        node = self.unary()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Binary(text, node, self.unary())
            else:
                return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            exponent = self.unary()  # right-associative
            if variables_of(exponent):
                raise ExprSyntaxError("exponent of '^' must be a constant expression", pos)
            return Binary("^", base, exponent)
        return base

    def atom(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            nk, nt, _ = self.peek()
            if nk == "op" and nt == "(":
                if text not in FUNCTIONS:
                    raise ExprNameError(f"unknown function '{text}'", pos)
                self.advance()
                arg = self.additive()
                self.expect_op(")")
                return Unary(text, arg)
            if text not in self.variables:
                raise ExprNameError(f"unknown identifier '{text}'", pos)
            return Var(text)
        if kind == "op" and text == "(":
            node = self.additive()
            self.expect_op(")")
            return node
        if kind == "eof":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected '{text}'", pos)


def parse_scalar_field(text: str, variables) -> Expr:
    """Parse ``text`` into an :class:`Expr` over the declared variables.

    Grammar: infix with precedence ``^`` > unary ``-`` > ``* /`` > ``+ -``,
    left-associative except ``^`` (right-associative), parentheses and
    ``f(x)`` function calls.
    """
    varnames = tuple(variables)
    if len(set(varnames)) != len(varnames):
        raise ValueError(f"duplicate variable names in {varnames}")
    for name in varnames:
        if name in FUNCTIONS:
            raise ValueError(f"variable name '{name}' shadows a function")
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    root = _Parser(_tokenize(text), varnames).parse()
    return Expr(root, varnames)


def to_text(e: Expr | Node) -> str:
    """Render an expression to re-parseable text (fully parenthesized)."""
    node = e.root if isinstance(e, Expr) else e
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text(node.arg)})"
        return f"{node.op}({to_text(node.arg)})"
    return f"({to_text(node.left)}{node.op}{to_text(node.right)})"


def substitute(e: Expr, mapping: dict[str, Expr]) -> Expr:
    """Replace variables by sub-expressions (used to compose patch and curve)."""

    def rec(node: Node) -> Node:
        if isinstance(node, Const):
            return node
        if isinstance(node, Var):
            repl = mapping.get(node.name)
            return repl.root if repl is not None else node
        if isinstance(node, Unary):
            return Unary(node.op, rec(node.arg))
        return Binary(node.op, rec(node.left), rec(node.right))

    new_vars: list[str] = []
    for name in e.variables:
        if name in mapping:
            for inner in mapping[name].variables:
                if inner not in new_vars:
                    new_vars.append(inner)
        elif name not in new_vars:
            new_vars.append(name)
    return Expr(rec(e.root), tuple(new_vars))


def constant_fold(e: Expr) -> Expr:
    """Collapse constant subtrees, using the same float operations as
    evaluation so folded and unfolded trees evaluate bit-for-bit equal."""

    def rec(node: Node) -> Node:
        if isinstance(node, (Const, Var)):
            return node
        if isinstance(node, Unary):
            arg = rec(node.arg)
            if isinstance(arg, Const):
                return Const(_float_unary(node.op, arg.value, node))
            return Unary(node.op, arg)
        left, right = rec(node.left), rec(node.right)
        if isinstance(left, Const) and isinstance(right, Const):
            return Const(_float_binary(node.op, left.value, right.value, node))
        return Binary(node.op, left, right)

    return Expr(rec(e.root), e.variables)


# ---------------------------------------------------------------------------
# Jet arithmetic

class _JetDomain(Exception):
    """Internal: domain violation inside a jet operation (no node context)."""


def _powf(base: float, expo: float) -> float:
    # base**expo with Taylor-friendly conventions: 0^0 == 1.
    if expo == 0.0:
        return 1.0
    if base == 0.0:
        if expo < 0.0:
            raise _JetDomain("zero base raised to a negative power")
        return 0.0
    if base < 0.0 and expo != round(expo):
        raise _JetDomain("negative base raised to a non-integer power")
    return base ** expo


def _pow_coeffs(v: float, p: float) -> tuple[float, float, float, float]:
    # Derivative coefficients of x^p at v, orders 0..3; a zero prefactor
    # short-circuits so 0^negative is never formed for integer p.
    out = []
    coef = 1.0
    for k in range(4):
        out.append(0.0 if coef == 0.0 else coef * _powf(v, p - k))
        coef *= p - k
    return out[0], out[1], out[2], out[3]


def _fn_coeffs(name: str, v: float) -> tuple[float, float, float, float]:
    # (f, f', f'', f''') of the named unary function at v.
    if name == "sin":
        s, c = math.sin(v), math.cos(v)
        return s, c, -s, -c
    if name == "cos":
        s, c = math.sin(v), math.cos(v)
        return c, -s, -c, s
    if name == "tan":
        t = math.tan(v)
        d = 1.0 + t * t
        return t, d, 2.0 * t * d, (2.0 + 6.0 * t * t) * d
    if name == "exp":
        ev = math.exp(v)
        return ev, ev, ev, ev
    if name == "log":
        if v <= 0.0:
            raise _JetDomain("log of a non-positive value")
        return math.log(v), 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)
    if name == "sqrt":
        if v <= 0.0:
            raise _JetDomain("sqrt of a non-positive value")
        r = math.sqrt(v)
        return r, 0.5 / r, -0.25 / (r * v), 0.375 / (r * v * v)
    if name == "sinh":
        return math.sinh(v), math.cosh(v), math.sinh(v), math.cosh(v)
    if name == "cosh":
        return math.cosh(v), math.sinh(v), math.cosh(v), math.sinh(v)
    if name == "tanh":
        t = math.tanh(v)
        d = 1.0 - t * t
        return t, d, -2.0 * t * d, (6.0 * t * t - 2.0) * d
    raise ValueError(f"no such function '{name}'")


class Jet2:
    """Value and exact partial derivatives to order 2 in two variables."""

    __slots__ = ("value", "du", "dv", "duu", "duv", "dvv")

    def __init__(self, value, du=0.0, dv=0.0, duu=0.0, duv=0.0, dvv=0.0):
        self.value = float(value)
        self.du = float(du)
        self.dv = float(dv)
        self.duu = float(duu)
        self.duv = float(duv)
        self.dvv = float(dvv)

    def __repr__(self):
        return (f"Jet2({self.value!r}, du={self.du!r}, dv={self.dv!r}, "
                f"duu={self.duu!r}, duv={self.duv!r}, dvv={self.dvv!r})")

    def __add__(self, o):
        return Jet2(self.value + o.value, self.du + o.du, self.dv + o.dv,
                    self.duu + o.duu, self.duv + o.duv, self.dvv + o.dvv)

    def __sub__(self, o):
        return Jet2(self.value - o.value, self.du - o.du, self.dv - o.dv,
                    self.duu - o.duu, self.duv - o.duv, self.dvv - o.dvv)

    def __neg__(self):
        return Jet2(-self.value, -self.du, -self.dv, -self.duu, -self.duv, -self.dvv)

    def __mul__(self, o):
        return Jet2(
            self.value * o.value,
            self.du * o.value + self.value * o.du,
            self.dv * o.value + self.value * o.dv,
            self.duu * o.value + 2.0 * self.du * o.du + self.value * o.duu,
            self.duv * o.value + self.du * o.dv + self.dv * o.du + self.value * o.duv,
            self.dvv * o.value + 2.0 * self.dv * o.dv + self.value * o.dvv,
        )

    def __truediv__(self, o):
        if o.value == 0.0:
            raise _JetDomain("division by zero")
        q = self.value / o.value
        qu = (self.du - q * o.du) / o.value
        qv = (self.dv - q * o.dv) / o.value
        quu = (self.duu - 2.0 * qu * o.du - q * o.duu) / o.value
        quv = (self.duv - qu * o.dv - qv * o.du - q * o.duv) / o.value
        qvv = (self.dvv - 2.0 * qv * o.dv - q * o.dvv) / o.value
        return Jet2(q, qu, qv, quu, quv, qvv)

    def _chain(self, c0, c1, c2):
        return Jet2(
            c0,
            c1 * self.du,
            c1 * self.dv,
            c2 * self.du * self.du + c1 * self.duu,
            c2 * self.du * self.dv + c1 * self.duv,
            c2 * self.dv * self.dv + c1 * self.dvv,
        )

    def pow_const(self, p: float):
        c0, c1, c2, _ = _pow_coeffs(self.value, p)
        return self._chain(c0, c1, c2)

    def apply(self, name: str):
        c0, c1, c2, _ = _fn_coeffs(name, self.value)
        return self._chain(c0, c1, c2)


class Jet3:
    """Value and exact derivatives to order 3 in one variable."""

    __slots__ = ("value", "d1", "d2", "d3")

    def __init__(self, value, d1=0.0, d2=0.0, d3=0.0):
        self.value = float(value)
        self.d1 = float(d1)
        self.d2 = float(d2)
        self.d3 = float(d3)

    def __repr__(self):
        return f"Jet3({self.value!r}, d1={self.d1!r}, d2={self.d2!r}, d3={self.d3!r})"

    def __add__(self, o):
        return Jet3(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2, self.d3 + o.d3)

    def __sub__(self, o):
        return Jet3(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2, self.d3 - o.d3)

    def __neg__(self):
        return Jet3(-self.value, -self.d1, -self.d2, -self.d3)

    def __mul__(self, o):
        return Jet3(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
            self.d3 * o.value + 3.0 * self.d2 * o.d1 + 3.0 * self.d1 * o.d2 + self.value * o.d3,
        )

    def __truediv__(self, o):
        if o.value == 0.0:
            raise _JetDomain("division by zero")
        q = self.value / o.value
        q1 = (self.d1 - q * o.d1) / o.value
        q2 = (self.d2 - 2.0 * q1 * o.d1 - q * o.d2) / o.value
        q3 = (self.d3 - 3.0 * q2 * o.d1 - 3.0 * q1 * o.d2 - q * o.d3) / o.value
        return Jet3(q, q1, q2, q3)

    def _chain(self, c0, c1, c2, c3):
        f1, f2, f3 = self.d1, self.d2, self.d3
        return Jet3(
            c0,
            c1 * f1,
            c2 * f1 * f1 + c1 * f2,
            c3 * f1 * f1 * f1 + 3.0 * c2 * f1 * f2 + c1 * f3,
        )

    def pow_const(self, p: float):
        return self._chain(*_pow_coeffs(self.value, p))

    def apply(self, name: str):
        return self._chain(*_fn_coeffs(name, self.value))


class Grad3:
    """Value and first partials in three variables (ambient-map Jacobians)."""

    __slots__ = ("value", "gx", "gy", "gz")

    def __init__(self, value, gx=0.0, gy=0.0, gz=0.0):
        self.value = float(value)
        self.gx = float(gx)
        self.gy = float(gy)
        self.gz = float(gz)

    def __add__(self, o):
        return Grad3(self.value + o.value, self.gx + o.gx, self.gy + o.gy, self.gz + o.gz)

    def __sub__(self, o):
        return Grad3(self.value - o.value, self.gx - o.gx, self.gy - o.gy, self.gz - o.gz)

    def __neg__(self):
        return Grad3(-self.value, -self.gx, -self.gy, -self.gz)

    def __mul__(self, o):
        return Grad3(
            self.value * o.value,
            self.gx * o.value + self.value * o.gx,
            self.gy * o.value + self.value * o.gy,
            self.gz * o.value + self.value * o.gz,
        )

    def __truediv__(self, o):
        if o.value == 0.0:
            raise _JetDomain("division by zero")
        q = self.value / o.value
        return Grad3(
            q,
            (self.gx - q * o.gx) / o.value,
            (self.gy - q * o.gy) / o.value,
            (self.gz - q * o.gz) / o.value,
        )

    def _chain(self, c0, c1):
        return Grad3(c0, c1 * self.gx, c1 * self.gy, c1 * self.gz)

    def pow_const(self, p: float):
        c0, c1, _, _ = _pow_coeffs(self.value, p)
        return self._chain(c0, c1)

    def apply(self, name: str):
        c0, c1, _, _ = _fn_coeffs(name, self.value)
        return self._chain(c0, c1)


# ---------------------------------------------------------------------------
# Evaluation

def _float_unary(op: str, v: float, node: Node) -> float:
    try:
        if op == "neg":
            return -v
        return _fn_coeffs(op, v)[0]
    except _JetDomain as err:
        raise EvalDomainError(str(err), to_text(node)) from None


def _float_binary(op: str, a: float, b: float, node: Node) -> float:
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise _JetDomain("division by zero")
            return a / b
        return _powf(a, b)
    except _JetDomain as err:
        raise EvalDomainError(str(err), to_text(node)) from None


def _eval_const(node: Node) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Unary):
        return _float_unary(node.op, _eval_const(node.arg), node)
    if isinstance(node, Binary):
        return _float_binary(node.op, _eval_const(node.left), _eval_const(node.right), node)
    raise ExprError("exponent is not constant")  # unreachable after parse


def _eval_jet(node: Node, env: dict, const):
    if isinstance(node, Const):
        return const(node.value)
    if isinstance(node, Var):
        return env[node.name]
    try:
        if isinstance(node, Unary):
            a = _eval_jet(node.arg, env, const)
            return -a if node.op == "neg" else a.apply(node.op)
        left = _eval_jet(node.left, env, const)
        if node.op == "^":
            return left.pow_const(_eval_const(node.right))
        right = _eval_jet(node.right, env, const)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    except _JetDomain as err:
        raise EvalDomainError(str(err), to_text(node)) from None


def eval_jet2(e: Expr, u: float, v: float) -> Jet2:
    """Evaluate a two-variable expression with exact partials to order 2.

    The first declared variable is seeded as the 'u' direction and the
    second as 'v'; no truncation error beyond floating point.
    """
    if len(e.variables) != 2:
        raise ExprError(f"eval_jet2 needs a two-variable expression, got {e.variables}")
    env = {
        e.variables[0]: Jet2(u, du=1.0),
        e.variables[1]: Jet2(v, dv=1.0),
    }
    return _eval_jet(e.root, env, Jet2)


def eval_jet3(e: Expr, s: float) -> Jet3:
    """Evaluate a one-variable expression with exact derivatives to order 3."""
    if len(e.variables) != 1:
        raise ExprError(f"eval_jet3 needs a one-variable expression, got {e.variables}")
    env = {e.variables[0]: Jet3(s, d1=1.0)}
    return _eval_jet(e.root, env, Jet3)


def eval_grad3(e: Expr, x: float, y: float, z: float) -> Grad3:
    """Evaluate a three-variable expression with exact first partials."""
    if len(e.variables) != 3:
        raise ExprError(f"eval_grad3 needs a three-variable expression, got {e.variables}")
    n0, n1, n2 = e.variables
    env = {n0: Grad3(x, gx=1.0), n1: Grad3(y, gy=1.0), n2: Grad3(z, gz=1.0)}
    return _eval_jet(e.root, env, Grad3)


def evaluate(e: Expr, *values: float) -> float:
    """Plain float evaluation, binding declared variables positionally."""
    if len(values) != len(e.variables):
        raise ExprError(f"expected {len(e.variables)} values for {e.variables}")

    def rec(node: Node) -> float:
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Var):
            return env[node.name]
        if isinstance(node, Unary):
            return _float_unary(node.op, rec(node.arg), node)
        return _float_binary(node.op, rec(node.left), rec(node.right), node)

    env = dict(zip(e.variables, (float(x) for x in values)))
    return rec(e.root)
