"""Scalar expressions over named coordinates, evaluated with exact derivatives.

Expressions are parsed once against an ordered coordinate list and evaluated
pointwise as jets: the value together with the exact gradient and Hessian,
propagated through the arithmetic. Grammar::

    expression := term (("+" | "-") term)*
    term       := factor (("*" | "/") factor)*
    factor     := "-" factor | power
    power      := atom ("^" factor)?
    atom       := NUMBER | NAME | NAME "(" expression ")" | "(" expression ")"

"^" binds tighter than unary minus and is right-associative; the other binary
operators are left-associative. NAME is a coordinate, one of the constants
``pi`` / ``e``, or a supported function name. ``^`` with a non-integer
exponent requires a positive base at evaluation time; integer exponents are
evaluated by repeated multiplication so negative bases stay legal.

Everything here is immutable after construction and safe to evaluate
concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "DomainError",
    "FUNCTIONS",
    "CONSTANTS",
    "ScalarExpr",
    "Jet",
    "parse",
    "eval_jet",
    "fd_derivative",
    "as_point",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")
CONSTANTS = {"pi": math.pi, "e": math.e}


class ExprError(ValueError):
    """Base class for expression-layer failures."""


class ParseError(ExprError):
    """Syntax or name error, carrying the offending position."""

    def __init__(self, message: str, source: str, position: int):
        super().__init__(f"{message} (at position {position} in {source!r})")
        self.source = source
        self.position = position


class DomainError(ExprError):
    """Evaluation left the real domain; names the offending subexpression."""

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in subexpression '{subexpression}'")
        self.subexpression = subexpression


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Coord:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Coord, Neg, BinOp, Call]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _render(node: Node) -> tuple[str, int]:
    """Render a node to source text, returning (text, precedence)."""
    if isinstance(node, Const):
        return repr(node.value) if node.value != int(node.value) else str(int(node.value)), _PREC["atom"]
    if isinstance(node, Coord):
        return node.name, _PREC["atom"]
    if isinstance(node, Call):
        return f"{node.func}({_render(node.arg)[0]})", _PREC["atom"]
    if isinstance(node, Neg):
        text, prec = _render(node.arg)
        if prec < _PREC["neg"]:
            text = f"({text})"
        return f"-{text}", _PREC["neg"]
    if isinstance(node, BinOp):
        lt, lp = _render(node.left)
        rt, rp = _render(node.right)
        prec = _PREC[node.op]
        if node.op == "^":
            # right-associative; parenthesize a left child of equal precedence
            if lp <= prec:
                lt = f"({lt})"
            if rp < prec:
                rt = f"({rt})"
        else:
            if lp < prec:
                lt = f"({lt})"
            if rp <= prec:
                rt = f"({rt})"
        return f"{lt} {node.op} {rt}", prec
    raise TypeError(f"unknown node {node!r}")


@dataclass(frozen=True)
class ScalarExpr:
    """A parsed expression bound to an ordered coordinate list."""

    vars: tuple[str, ...]
    root: Node

    def __str__(self) -> str:
        return _render(self.root)[0]

    @classmethod
    def constant(cls, vars: Sequence[str], value: float) -> "ScalarExpr":
        v = float(value)
        if not math.isfinite(v):
            raise ExprError(f"constant {value!r} is not finite")
        root: Node = Neg(Const(-v)) if v < 0 else Const(v)
        return cls(tuple(vars), root)

    @classmethod
    def coordinate(cls, vars: Sequence[str], index: int) -> "ScalarExpr":
        names = tuple(vars)
        if not 0 <= index < len(names):
            raise ExprError(f"coordinate index {index} out of range for {names}")
        return cls(names, Coord(index, names[index]))

    def _combine(self, other: "ScalarExpr | float", op: str) -> "ScalarExpr":
        if not isinstance(other, ScalarExpr):
            other = ScalarExpr.constant(self.vars, other)
        if other.vars != self.vars:
            raise ExprError(
                f"cannot combine expressions over {self.vars} and {other.vars}"
            )
        return ScalarExpr(self.vars, BinOp(op, self.root, other.root))

    def __add__(self, other):
        return self._combine(other, "+")

    def __sub__(self, other):
        return self._combine(other, "-")

    def __mul__(self, other):
        return self._combine(other, "*")

    def __truediv__(self, other):
        return self._combine(other, "/")

    def __pow__(self, other):
        return self._combine(other, "^")

    def __neg__(self):
        return ScalarExpr(self.vars, Neg(self.root))

    def is_zero_constant(self) -> bool:
        node = self.root
        while isinstance(node, Neg):
            node = node.arg
        return isinstance(node, Const) and node.value == 0.0

    def rebase(self, new_vars: Sequence[str]) -> "ScalarExpr":
        """Re-express this expression over another coordinate list.

        Every coordinate actually referenced must exist (by name) in
        ``new_vars``; this both lifts factor expressions onto a product chart
        and restricts lifted expressions back onto a factor.
        """
        names = tuple(new_vars)
        lookup = {name: i for i, name in enumerate(names)}

        def walk(node: Node) -> Node:
            if isinstance(node, Const):
                return node
            if isinstance(node, Coord):
                if node.name not in lookup:
                    raise ExprError(
                        f"coordinate '{node.name}' is not available in {names}"
                    )
                return Coord(lookup[node.name], node.name)
            if isinstance(node, Neg):
                return Neg(walk(node.arg))
            if isinstance(node, BinOp):
                return BinOp(node.op, walk(node.left), walk(node.right))
            if isinstance(node, Call):
                return Call(node.func, walk(node.arg))
            raise TypeError(f"unknown node {node!r}")

        return ScalarExpr(names, walk(self.root))


# --- parser ----------------------------------------------------------------


class _Tokenizer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.source, self.pos)

    def next(self) -> tuple[str, str, int]:
        src = self.source
        while self.pos < len(src) and src[self.pos].isspace():
            self.pos += 1
        start = self.pos
        if self.pos >= len(src):
            return ("eof", "", start)
        ch = src[self.pos]
        if ch in "+-*/^(),":
            self.pos += 1
            kind = {"(": "lparen", ")": "rparen"}.get(ch, "op")
            return (kind, ch, start)
        if ch.isdigit() or (ch == "." and self.pos + 1 < len(src) and src[self.pos + 1].isdigit()):
            i = self.pos
            while i < len(src) and src[i].isdigit():
                i += 1
            if i < len(src) and src[i] == ".":
                i += 1
                while i < len(src) and src[i].isdigit():
                    i += 1
            if i < len(src) and src[i] in "eE":
                j = i + 1
                if j < len(src) and src[j] in "+-":
                    j += 1
                if j < len(src) and src[j].isdigit():
                    i = j
                    while i < len(src) and src[i].isdigit():
                        i += 1
            text = src[self.pos : i]
            self.pos = i
            return ("number", text, start)
        if ch.isalpha() or ch == "_":
            i = self.pos
            while i < len(src) and (src[i].isalnum() or src[i] == "_"):
                i += 1
            text = src[self.pos : i]
            self.pos = i
            return ("name", text, start)
        raise self.error(f"unexpected character {ch!r}")


class _Parser:
    def __init__(self, source: str, vars: tuple[str, ...]):
        self.tok = _Tokenizer(source)
        self.vars = vars
        self.lookup = {name: i for i, name in enumerate(vars)}
        self.current = self.tok.next()

    def advance(self):
        self.current = self.tok.next()

    def error(self, message: str, position: int | None = None) -> ParseError:
        pos = self.current[2] if position is None else position
        return ParseError(message, self.tok.source, pos)

    def expect(self, kind: str, what: str):
        if self.current[0] != kind:
            raise self.error(f"expected {what}")
        self.advance()

    def parse(self) -> Node:
        if self.current[0] == "eof":
            raise self.error("empty expression")
        node = self.expression()
        if self.current[0] != "eof":
            raise self.error(f"unexpected {self.current[1]!r}")
        return node

    def expression(self) -> Node:
        node = self.term()
        while self.current[0] == "op" and self.current[1] in "+-":
            op = self.current[1]
            self.advance()
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.current[0] == "op" and self.current[1] in "*/":
            op = self.current[1]
            self.advance()
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.current[0] == "op" and self.current[1] == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        if self.current[0] == "op" and self.current[1] == "^":
            self.advance()
            node = BinOp("^", node, self.factor())
        return node

    def atom(self) -> Node:
        kind, text, pos = self.current
        if kind == "number":
            self.advance()
            value = float(text)
            if not math.isfinite(value):
                raise self.error(f"constant {text} overflows", pos)
            return Const(value)
        if kind == "lparen":
            self.advance()
            node = self.expression()
            self.expect("rparen", "')'")
            return node
        if kind == "name":
            self.advance()
            if self.current[0] == "lparen":
                if text not in FUNCTIONS:
                    raise self.error(f"unknown function '{text}'", pos)
                self.advance()
                arg = self.expression()
                self.expect("rparen", "')'")
                return Call(text, arg)
            if text in CONSTANTS:
                return Const(CONSTANTS[text])
            if text in self.lookup:
                return Coord(self.lookup[text], text)
            raise self.error(f"unknown identifier '{text}'", pos)
        raise self.error("expected operand")


def parse(source: str, vars: Sequence[str]) -> ScalarExpr:
    """Parse ``source`` against the ordered coordinate list ``vars``."""
    names = tuple(vars)
    if not names:
        raise ExprError("coordinate list must be nonempty")
    if len(set(names)) != len(names):
        raise ExprError(f"coordinate names must be distinct, got {names}")
    for name in names:
        if not name.isidentifier():
            raise ExprError(f"coordinate name {name!r} is not a valid identifier")
        if name in CONSTANTS or name in FUNCTIONS:
            raise ExprError(f"coordinate name {name!r} shadows a reserved name")
    return ScalarExpr(names, _Parser(source, names).parse())


# --- jets ------------------------------------------------------------------


class Jet:
    """Truncated Taylor scalar: value plus optional gradient and Hessian.

    ``grad``/``hess`` are present exactly up to the jet's order; order-0
    arithmetic coincides with plain float arithmetic, and Hessians stay
    symmetric by construction.
    """

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray | None = None, hess: np.ndarray | None = None):
        self.value = float(value)
        self.grad = grad
        self.hess = hess

    @property
    def order(self) -> int:
        if self.grad is None:
            return 0
        return 1 if self.hess is None else 2

    @classmethod
    def constant(cls, value: float, n: int, order: int) -> "Jet":
        grad = np.zeros(n) if order >= 1 else None
        hess = np.zeros((n, n)) if order >= 2 else None
        return cls(value, grad, hess)

    @classmethod
    def coordinate(cls, value: float, axis: int, n: int, order: int) -> "Jet":
        jet = cls.constant(value, n, order)
        if jet.grad is not None:
            jet.grad[axis] = 1.0
        return jet

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        n = 0 if self.grad is None else self.grad.shape[0]
        return Jet.constant(float(other), n, self.order)

    def __repr__(self) -> str:
        return f"Jet(value={self.value!r}, order={self.order})"

    def __neg__(self) -> "Jet":
        return Jet(
            -self.value,
            None if self.grad is None else -self.grad,
            None if self.hess is None else -self.hess,
        )

    def __add__(self, other) -> "Jet":
        o = self._coerce(other)
        return Jet(
            self.value + o.value,
            None if self.grad is None else self.grad + o.grad,
            None if self.hess is None else self.hess + o.hess,
        )

    __radd__ = __add__

    def __sub__(self, other) -> "Jet":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Jet":
        return (-self) + self._coerce(other)

    def __mul__(self, other) -> "Jet":
        o = self._coerce(other)
        value = self.value * o.value
        if self.grad is None:
            return Jet(value)
        grad = self.grad * o.value + self.value * o.grad
        if self.hess is None:
            return Jet(value, grad)
        cross = np.outer(self.grad, o.grad)
        hess = self.hess * o.value + self.value * o.hess + cross + cross.T
        return Jet(value, grad, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.value
        if v == 0.0:
            raise ZeroDivisionError("jet reciprocal of zero")
        return _chain(self, 1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def __truediv__(self, other) -> "Jet":
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, exponent: int) -> "Jet":
        if not isinstance(exponent, int):
            raise TypeError("Jet.__pow__ supports integer exponents only")
        return _int_pow(self, exponent)


def _chain(u: Jet, f0: float, f1: float | None = None, f2: float | None = None) -> Jet:
    """Compose an analytic function (with derivatives f1, f2 at u) onto a jet."""
    if u.grad is None:
        return Jet(f0)
    grad = f1 * u.grad
    if u.hess is None:
        return Jet(f0, grad)
    hess = f1 * u.hess + f2 * np.outer(u.grad, u.grad)
    return Jet(f0, grad, hess)


def _int_pow(base: Jet, n: int) -> Jet:
    if n == 0:
        k = 0 if base.grad is None else base.grad.shape[0]
        return Jet.constant(1.0, k, base.order)
    if n < 0:
        return _int_pow(base, -n).reciprocal()
    result = None
    square = base
    while n:
        if n & 1:
            result = square if result is None else result * square
        square = square * square
        n >>= 1
    return result


_FUNCTION_CHAINS: dict[str, Callable[[float], tuple[float, float, float]]] = {
    "sin": lambda v: (math.sin(v), math.cos(v), -math.sin(v)),
    "cos": lambda v: (math.cos(v), -math.sin(v), -math.cos(v)),
    "tan": lambda v: (lambda t: (t, 1.0 + t * t, 2.0 * t * (1.0 + t * t)))(math.tan(v)),
    "exp": lambda v: (lambda e: (e, e, e))(math.exp(v)),
    "sinh": lambda v: (math.sinh(v), math.cosh(v), math.sinh(v)),
    "cosh": lambda v: (math.cosh(v), math.sinh(v), math.cosh(v)),
    "tanh": lambda v: (lambda t: (t, 1.0 - t * t, -2.0 * t * (1.0 - t * t)))(math.tanh(v)),
}


def as_point(p: Sequence[float], dim: int | None = None) -> np.ndarray:
    """Validate and normalize a chart point to a float vector."""
    coords = np.asarray(p, dtype=float).reshape(-1)
    if dim is not None and coords.shape[0] != dim:
        raise ExprError(f"point has dimension {coords.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(coords)):
        raise ExprError(f"point {coords.tolist()} has non-finite entries")
    return coords


class _Evaluator:
    def __init__(self, n: int, coords: np.ndarray, order: int):
        self.n = n
        self.coords = coords
        self.order = order

    def domain_error(self, message: str, node: Node) -> DomainError:
        return DomainError(message, _render(node)[0])

    def visit(self, node: Node) -> Jet:
        if isinstance(node, Const):
            return Jet.constant(node.value, self.n, self.order)
        if isinstance(node, Coord):
            return Jet.coordinate(self.coords[node.index], node.index, self.n, self.order)
        if isinstance(node, Neg):
            return -self.visit(node.arg)
        if isinstance(node, BinOp):
            return self.binop(node)
        if isinstance(node, Call):
            return self.call(node)
        raise TypeError(f"unknown node {node!r}")

    def binop(self, node: BinOp) -> Jet:
        left = self.visit(node.left)
        right = self.visit(node.right)
        op = node.op
        try:
            if op == "+":
                return left + right
            if op == "-":
                return left - right
            if op == "*":
                return left * right
            if op == "/":
                if right.value == 0.0:
                    raise self.domain_error("division by zero", node)
                return left / right
            return self.pow(left, right, node)
        except OverflowError:
            raise self.domain_error("overflow", node) from None

    def pow(self, base: Jet, exponent: Jet, node: BinOp) -> Jet:
        exp_constant = exponent.grad is None or (
            not exponent.grad.any() and (exponent.hess is None or not exponent.hess.any())
        )
        if exp_constant and float(exponent.value).is_integer():
            n = int(exponent.value)
            if n < 0 and base.value == 0.0:
                raise self.domain_error("zero raised to a negative power", node)
            return _int_pow(base, n)
        if base.value <= 0.0:
            raise self.domain_error(
                "non-integer power requires a positive base", node
            )
        if exp_constant:
            e = exponent.value
            v = base.value
            f0 = v**e
            return _chain(base, f0, e * v ** (e - 1.0), e * (e - 1.0) * v ** (e - 2.0))
        # genuinely varying exponent: a^b = exp(b log a)
        log_base = _chain(base, math.log(base.value), 1.0 / base.value, -1.0 / base.value**2)
        product = exponent * log_base
        f = math.exp(product.value)
        return _chain(product, f, f, f)

    def call(self, node: Call) -> Jet:
        arg = self.visit(node.arg)
        v = arg.value
        func = node.func
        try:
            if func == "log":
                if v <= 0.0:
                    raise self.domain_error("log of a non-positive value", node)
                return _chain(arg, math.log(v), 1.0 / v, -1.0 / (v * v))
            if func == "sqrt":
                if v < 0.0:
                    raise self.domain_error("sqrt of a negative value", node)
                if v == 0.0:
                    if self.order == 0:
                        return Jet.constant(0.0, self.n, 0)
                    raise self.domain_error("sqrt not differentiable at zero", node)
                s = math.sqrt(v)
                return _chain(arg, s, 0.5 / s, -0.25 / (v * s))
            f0, f1, f2 = _FUNCTION_CHAINS[func](v)
            return _chain(arg, f0, f1, f2)
        except OverflowError:
            raise self.domain_error("overflow", node) from None


def eval_jet(e: ScalarExpr, p: Sequence[float], order: int = 2) -> Jet:
    """Evaluate ``e`` at ``p`` with exact derivatives up to ``order`` (0..2)."""
    if order not in (0, 1, 2):
        raise ExprError(f"order must be 0, 1 or 2, got {order}")
    coords = as_point(p, len(e.vars))
    return _Evaluator(len(e.vars), coords, order).visit(e.root)


def fd_derivative(e: ScalarExpr, p: Sequence[float], axis: int, step: float = 1e-5) -> float:
    """Central finite difference along one axis; the independent oracle."""
    if step <= 0.0:
        raise ExprError(f"step must be positive, got {step}")
    coords = as_point(p, len(e.vars))
    if not 0 <= axis < coords.shape[0]:
        raise ExprError(f"axis {axis} out of range for dimension {coords.shape[0]}")
    hi = coords.copy()
    lo = coords.copy()
    hi[axis] += step
    lo[axis] -= step
    f_hi = eval_jet(e, hi, order=0).value
    f_lo = eval_jet(e, lo, order=0).value
    return (f_hi - f_lo) / (2.0 * step)
