"""Expression language and forward-mode derivative jets.

The toolkit's scalar fields (metric components, log-densities, chart maps)
are written in a small expression language and differentiated with truncated
Taylor jets rather than symbolic manipulation.  A jet carries the value and
all partial derivatives through a requested order (at most 3) at a batch of
points; arithmetic on jets propagates derivatives exactly, so there is no
truncation error beyond floating point.

Grammar (EBNF)::

    expr    = term , { ( "+" | "-" ) , term } ;
    term    = unary , { ( "*" | "/" ) , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , unary ] ;            (* right-associative *)
    atom    = NUMBER | IDENT | IDENT , "(" , expr , ")" | "(" , expr , ")" ;
    NUMBER  = ( DIGITS , [ "." , [ DIGITS ] ] | "." , DIGITS ) , [ EXPONENT ] ;
    EXPONENT= ( "e" | "E" ) , [ "+" | "-" ] , DIGITS ;
    IDENT   = LETTER_OR_UNDERSCORE , { LETTER_OR_UNDERSCORE | DIGIT } ;

An IDENT followed by "(" must be one of the built-in functions
(exp, log, sqrt, sin, cos, sinh, cosh, tanh, abs); the bare idents
``pi`` and ``e`` denote the corresponding constants and survive
printing/reparsing as named constants.  ``^`` binds tighter than unary
minus, so ``-x^2`` parses as ``-(x^2)`` and ``x^-2`` is accepted.

Domain violations (log/sqrt of a non-positive value, division by zero,
overflow in exp/sinh/cosh, |.| or sqrt differentiated at 0) raise
:class:`EvalDomainError`; they are never converted to NaN or inf.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Const",
    "Var",
    "Neg",
    "Bin",
    "Call",
    "ExprSyntaxError",
    "EvalDomainError",
    "UnboundVariableError",
    "FUNCTIONS",
    "CONSTANTS",
    "parse",
    "parse_expr",
    "to_str",
    "variables",
    "substitute",
    "Jet",
    "DerivativeJet",
    "seed_point",
    "evaluate",
    "eval_value",
    "eval_jet",
]


# ---------------------------------------------------------------------------
# Errors


class ExprSyntaxError(ValueError):
    """Malformed source text; ``offset`` is the character offset of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class EvalDomainError(ArithmeticError):
    """A function or operator left its real domain during evaluation."""


class UnboundVariableError(KeyError):
    """An expression variable had no value in the evaluation environment."""

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self) -> str:
        return f"unbound variable {self.name!r}"


# ---------------------------------------------------------------------------
# Syntax trees


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"


Expr = Union[Num, Const, Var, Neg, Bin, Call]

CONSTANTS: dict[str, float] = {"pi": math.pi, "e": math.e}


# ---------------------------------------------------------------------------
# Tokenizer


_NUMBER = re.compile(r"(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")
_OPS = set("+-*/^()")


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "ident" | one of + - * / ^ ( ) | "end"
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER.match(src, i)
        if m:
            tokens.append(_Token("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT.match(src, i)
        if m:
            tokens.append(_Token("ident", m.group(), i))
            i = m.end()
            continue
        if ch in _OPS:
            tokens.append(_Token(ch, ch, i))
            i += 1
            continue
        raise ExprSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = tok.text if tok.kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {kind!r}, found {shown!r}", tok.pos)
        return self.next()

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            node = Bin(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            node = Bin(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        if self.peek().kind == "-":
            self.next()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().kind == "^":
            self.next()
            return Bin("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.next()
            if self.peek().kind == "(":
                if tok.text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {tok.text!r}", tok.pos)
                self.next()
                arg = self.parse_expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in CONSTANTS:
                return Const(tok.text)
            return Var(tok.text)
        if tok.kind == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        shown = tok.text if tok.kind != "end" else "end of input"
        raise ExprSyntaxError(f"expected a value, found {shown!r}", tok.pos)


def parse(src: str) -> Expr:
    """Parse source text into a syntax tree.

    Raises :class:`ExprSyntaxError` (with character offset) on malformed
    input, including unknown function names.
    """
    parser = _Parser(_tokenize(src))
    tree = parser.parse_expr()
    tail = parser.peek()
    if tail.kind != "end":
        raise ExprSyntaxError(f"unexpected trailing input {tail.text!r}", tail.pos)
    return tree


parse_expr = parse


# ---------------------------------------------------------------------------
# Printer

_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "neg": 25, "^": 30}


def _node_prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return 100


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _fmt(e: Expr, min_prec: int) -> str:
    if isinstance(e, Num):
        s = _fmt_num(e.value)
    elif isinstance(e, (Const, Var)):
        s = e.name
    elif isinstance(e, Call):
        s = f"{e.fn}({_fmt(e.arg, 0)})"
    elif isinstance(e, Neg):
        s = "-" + _fmt(e.arg, _PREC["neg"])
    elif isinstance(e, Bin):
        p = _PREC[e.op]
        if e.op == "^":
            left = _fmt(e.left, p + 1)  # right-associative
            right = _fmt(e.right, p)
            s = f"{left}^{right}"
        else:
            left = _fmt(e.left, p)
            right = _fmt(e.right, p + 1)
            glue = f" {e.op} " if e.op in ("+", "-") else e.op
            s = f"{left}{glue}{right}"
    else:  # pragma: no cover
        raise TypeError(f"not an expression node: {e!r}")
    if _node_prec(e) < min_prec:
        return f"({s})"
    return s


def to_str(e: Expr) -> str:
    """Render a tree to source text; reparsing yields a structurally equal tree."""
    return _fmt(e, 0)


def variables(e: Expr) -> set[str]:
    """The set of free variable names (named constants excluded)."""
    out: set[str] = set()

    def walk(node: Expr) -> None:
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Neg):
            walk(node.arg)
        elif isinstance(node, Bin):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Call):
            walk(node.arg)

    walk(e)
    return out


def substitute(e: Expr, subs: Mapping[str, Expr]) -> Expr:
    """Replace variables by subtrees (used for reparametrization tests)."""
    if isinstance(e, Var):
        return subs.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, subs))
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, subs), substitute(e.right, subs))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, subs))
    return e


# ---------------------------------------------------------------------------
# Jets


def _as_batch(value, batch_shape: tuple[int, ...]) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    return np.broadcast_to(arr, batch_shape).copy() if arr.shape != batch_shape else arr


class Jet:
    """Truncated Taylor jet of a scalar quantity in ``nvars`` variables.

    ``val`` has the batch shape; ``d1``/``d2``/``d3`` append one, two, three
    derivative axes of length ``nvars`` (present through ``order``).  All
    arithmetic truncates at the smaller operand order.
    """

    __slots__ = ("order", "nvars", "val", "d1", "d2", "d3")

    def __init__(self, order: int, nvars: int, val, d1=None, d2=None, d3=None):
        if not 0 <= order <= 3:
            raise ValueError("jet order must be between 0 and 3")
        self.order = order
        self.nvars = nvars
        self.val = np.asarray(val, dtype=float)
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    # -- construction -------------------------------------------------

    @classmethod
    def constant(cls, value, order: int, nvars: int, batch_shape: tuple[int, ...] = ()) -> "Jet":
        val = _as_batch(value, batch_shape)
        n = nvars
        d1 = np.zeros(batch_shape + (n,)) if order >= 1 else None
        d2 = np.zeros(batch_shape + (n, n)) if order >= 2 else None
        d3 = np.zeros(batch_shape + (n, n, n)) if order >= 3 else None
        return cls(order, n, val, d1, d2, d3)

    @classmethod
    def variable(cls, value, index: int, order: int, nvars: int,
                 batch_shape: tuple[int, ...] = ()) -> "Jet":
        out = cls.constant(value, order, nvars, batch_shape)
        if order >= 1:
            out.d1[..., index] = 1.0
        return out

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.val.shape

    # -- helpers ------------------------------------------------------

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        return Jet.constant(other, self.order, self.nvars, self.batch_shape)

    def _pair(self, other) -> tuple["Jet", "Jet", int]:
        other = self._lift(other)
        if other.nvars != self.nvars:
            raise ValueError("jets disagree on variable count")
        if other.batch_shape != self.batch_shape:
            raise ValueError("jets disagree on batch shape")
        return self, other, min(self.order, other.order)

    def truncated(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(order, self.nvars, self.val,
                   self.d1 if order >= 1 else None,
                   self.d2 if order >= 2 else None,
                   self.d3 if order >= 3 else None)

    def copy(self) -> "Jet":
        return Jet(self.order, self.nvars, self.val.copy(),
                   None if self.d1 is None else self.d1.copy(),
                   None if self.d2 is None else self.d2.copy(),
                   None if self.d3 is None else self.d3.copy())

    # -- linear structure ---------------------------------------------

    def __add__(self, other) -> "Jet":
        u, v, k = self._pair(other)
        return Jet(k, u.nvars, u.val + v.val,
                   u.d1 + v.d1 if k >= 1 else None,
                   u.d2 + v.d2 if k >= 2 else None,
                   u.d3 + v.d3 if k >= 3 else None)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        k = self.order
        return Jet(k, self.nvars, -self.val,
                   -self.d1 if k >= 1 else None,
                   -self.d2 if k >= 2 else None,
                   -self.d3 if k >= 3 else None)

    def __sub__(self, other) -> "Jet":
        u, v, k = self._pair(other)
        return Jet(k, u.nvars, u.val - v.val,
                   u.d1 - v.d1 if k >= 1 else None,
                   u.d2 - v.d2 if k >= 2 else None,
                   u.d3 - v.d3 if k >= 3 else None)

    def __rsub__(self, other) -> "Jet":
        return self._lift(other) - self

    def __mul__(self, other) -> "Jet":
        u, v, k = self._pair(other)
        a, b = u.val, v.val
        val = a * b
        d1 = d2 = d3 = None
        if k >= 1:
            d1 = u.d1 * b[..., None] + v.d1 * a[..., None]
        if k >= 2:
            cross = u.d1[..., :, None] * v.d1[..., None, :]
            d2 = (u.d2 * b[..., None, None] + v.d2 * a[..., None, None]
                  + cross + np.swapaxes(cross, -1, -2))
        if k >= 3:
            m1 = u.d2[..., :, :, None] * v.d1[..., None, None, :]
            m2 = u.d2[..., :, None, :] * v.d1[..., None, :, None]
            m3 = u.d2[..., None, :, :] * v.d1[..., :, None, None]
            n1 = v.d2[..., :, :, None] * u.d1[..., None, None, :]
            n2 = v.d2[..., :, None, :] * u.d1[..., None, :, None]
            n3 = v.d2[..., None, :, :] * u.d1[..., :, None, None]
            d3 = (u.d3 * b[..., None, None, None] + v.d3 * a[..., None, None, None]
                  + m1 + m2 + m3 + n1 + n2 + n3)
        return Jet(k, u.nvars, val, d1, d2, d3)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        u, v, k = self._pair(other)
        if np.any(v.val == 0.0):
            raise EvalDomainError("division by zero")
        return u * v._reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self._lift(other) / self

    # -- composition with scalar functions ----------------------------

    def compose(self, f0, f1=None, f2=None, f3=None) -> "Jet":
        """Chain rule: jet of f(u) from derivative arrays of f at u.val."""
        k = self.order
        val = np.asarray(f0, dtype=float)
        d1 = d2 = d3 = None
        if k >= 1:
            f1 = np.asarray(f1, dtype=float)
            d1 = f1[..., None] * self.d1
        if k >= 2:
            f2 = np.asarray(f2, dtype=float)
            outer11 = self.d1[..., :, None] * self.d1[..., None, :]
            d2 = f1[..., None, None] * self.d2 + f2[..., None, None] * outer11
        if k >= 3:
            f3 = np.asarray(f3, dtype=float)
            s1 = self.d2[..., :, :, None] * self.d1[..., None, None, :]
            s2 = self.d2[..., :, None, :] * self.d1[..., None, :, None]
            s3 = self.d2[..., None, :, :] * self.d1[..., :, None, None]
            outer111 = (self.d1[..., :, None, None] * self.d1[..., None, :, None]
                        * self.d1[..., None, None, :])
            d3 = (f1[..., None, None, None] * self.d3
                  + f2[..., None, None, None] * (s1 + s2 + s3)
                  + f3[..., None, None, None] * outer111)
        return Jet(k, self.nvars, val, d1, d2, d3)

    def _reciprocal(self) -> "Jet":
        t = self.val
        r = 1.0 / t
        return self.compose(r, -r * r, 2.0 * r ** 3, -6.0 * r ** 4)

    def __pow__(self, other) -> "Jet":
        u, w, k = self._pair(other)
        if w.is_constant():
            return u.truncated(k)._pow_const(w.val)
        # variable exponent: u^w = exp(w log u), requires u > 0
        return (w * u.log()).exp().truncated(k)

    def _pow_const(self, c: np.ndarray) -> "Jet":
        k = self.order
        t = self.val
        if np.all(c == np.round(c)):
            coeffs = [np.ones_like(c)]
            for j in range(1, k + 1):
                coeffs.append(coeffs[-1] * (c - (j - 1)))
            derivs = []
            for j in range(k + 1):
                coeff = coeffs[j]
                expo = c - j
                bad = (t == 0.0) & (expo < 0) & (coeff != 0)
                if np.any(bad):
                    raise EvalDomainError("zero raised to a negative power")
                safe_expo = np.where((t == 0.0) & (expo < 0), 0.0, expo)
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    term = np.where(coeff == 0, 0.0, coeff * np.power(t, safe_expo))
                derivs.append(term)
            out = self.compose(*derivs) if k else Jet(0, self.nvars, derivs[0])
            _require_finite(out.val, "power overflow")
            return out
        if np.any(t <= 0.0):
            raise EvalDomainError("non-integer power of a non-positive base")
        coeffs = [np.ones_like(c)]
        for j in range(1, k + 1):
            coeffs.append(coeffs[-1] * (c - (j - 1)))
        derivs = [coeffs[j] * np.power(t, c - j) for j in range(k + 1)]
        return self.compose(*derivs) if k else Jet(0, self.nvars, derivs[0])

    def __rpow__(self, other) -> "Jet":
        return self._lift(other) ** self

    def is_constant(self) -> bool:
        for d in (self.d1, self.d2, self.d3):
            if d is not None and np.any(d != 0.0):
                return False
        return True

    # -- built-in functions -------------------------------------------

    def exp(self) -> "Jet":
        with np.errstate(over="ignore"):
            f = np.exp(self.val)
        _require_finite(f, "exp overflow")
        return self.compose(f, f, f, f)

    def log(self) -> "Jet":
        if np.any(self.val <= 0.0):
            raise EvalDomainError("log of a non-positive value")
        t = self.val
        r = 1.0 / t
        return self.compose(np.log(t), r, -r * r, 2.0 * r ** 3)

    def sqrt(self) -> "Jet":
        if np.any(self.val < 0.0):
            raise EvalDomainError("sqrt of a negative value")
        if self.order >= 1 and np.any(self.val == 0.0):
            raise EvalDomainError("sqrt differentiated at 0")
        s = np.sqrt(self.val)
        t = self.val
        return self.compose(s, 0.5 / s if self.order >= 1 else None,
                            -0.25 / (s * t) if self.order >= 2 else None,
                            0.375 / (s * t * t) if self.order >= 3 else None)

    def sin(self) -> "Jet":
        s, c = np.sin(self.val), np.cos(self.val)
        return self.compose(s, c, -s, -c)

    def cos(self) -> "Jet":
        s, c = np.sin(self.val), np.cos(self.val)
        return self.compose(c, -s, -c, s)

    def sinh(self) -> "Jet":
        with np.errstate(over="ignore"):
            s, c = np.sinh(self.val), np.cosh(self.val)
        _require_finite(s, "sinh overflow")
        return self.compose(s, c, s, c)

    def cosh(self) -> "Jet":
        with np.errstate(over="ignore"):
            s, c = np.sinh(self.val), np.cosh(self.val)
        _require_finite(c, "cosh overflow")
        return self.compose(c, s, c, s)

    def tanh(self) -> "Jet":
        t = np.tanh(self.val)
        s = 1.0 - t * t
        return self.compose(t, s, -2.0 * t * s, -2.0 * s * s + 4.0 * t * t * s)

    def abs(self) -> "Jet":
        if self.order >= 1 and np.any(self.val == 0.0):
            raise EvalDomainError("abs differentiated at 0")
        sign = np.sign(self.val)
        zero = np.zeros_like(self.val)
        return self.compose(np.abs(self.val), sign, zero, zero)

    # -- extraction ----------------------------------------------------

    def dvar(self, index: int) -> "Jet":
        """Jet of the partial derivative in variable ``index`` (order drops by 1)."""
        if self.order < 1:
            raise ValueError("cannot extract a derivative from an order-0 jet")
        k = self.order - 1
        return Jet(k, self.nvars, self.d1[..., index],
                   self.d2[..., index, :] if k >= 1 else None,
                   self.d3[..., index, :, :] if k >= 2 else None,
                   None)

    def sum(self, axis: int = 0) -> "Jet":
        """Sum over one batch axis (derivative axes are untouched)."""
        nbatch = self.val.ndim
        if not -nbatch <= axis < nbatch:
            raise ValueError("axis outside the batch shape")
        axis = axis % nbatch if nbatch else axis
        k = self.order
        return Jet(k, self.nvars, self.val.sum(axis=axis),
                   self.d1.sum(axis=axis) if k >= 1 else None,
                   self.d2.sum(axis=axis) if k >= 2 else None,
                   self.d3.sum(axis=axis) if k >= 3 else None)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Jet(order={self.order}, nvars={self.nvars}, batch={self.batch_shape})"


def _require_finite(arr: np.ndarray, message: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise EvalDomainError(message)


_UNARY: dict[str, Callable[[Jet], Jet]] = {
    "exp": Jet.exp,
    "log": Jet.log,
    "sqrt": Jet.sqrt,
    "sin": Jet.sin,
    "cos": Jet.cos,
    "sinh": Jet.sinh,
    "cosh": Jet.cosh,
    "tanh": Jet.tanh,
    "abs": Jet.abs,
}

FUNCTIONS = frozenset(_UNARY)


# ---------------------------------------------------------------------------
# Evaluation


def seed_point(point: Mapping[str, Union[float, np.ndarray]], order: int,
               batch_shape: tuple[int, ...] = ()) -> dict[str, Jet]:
    """Environment of seeded variable jets, one per key, in mapping order."""
    n = len(point)
    env: dict[str, Jet] = {}
    for i, (name, value) in enumerate(point.items()):
        env[name] = Jet.variable(_as_batch(value, batch_shape), i, order, n, batch_shape)
    return env


def evaluate(e: Expr, env: Mapping[str, Union[Jet, float, np.ndarray]],
             order: int = 0) -> Jet:
    """Evaluate a tree over an environment of jets and constants.

    Any :class:`Jet` values fix the jet context (order, variable count,
    batch shape); plain numbers and arrays become constants in that
    context.  With no jets in ``env``, evaluation runs at the requested
    ``order`` with zero variables.
    """
    ctx = None
    for v in env.values():
        if isinstance(v, Jet):
            ctx = (v.order, v.nvars, v.batch_shape)
            break
    if ctx is None:
        ctx = (order, 0, ())
    k, n, batch = ctx

    def const(value) -> Jet:
        return Jet.constant(value, k, n, batch)

    def ev(node: Expr) -> Jet:
        if isinstance(node, Num):
            return const(node.value)
        if isinstance(node, Const):
            return const(CONSTANTS[node.name])
        if isinstance(node, Var):
            try:
                bound = env[node.name]
            except KeyError:
                raise UnboundVariableError(node.name) from None
            if isinstance(bound, Jet):
                return bound.truncated(k)
            return const(bound)
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Bin):
            left, right = ev(node.left), ev(node.right)
            if node.op == "+":
                return left + right
            if node.op == "-":
                return left - right
            if node.op == "*":
                return left * right
            if node.op == "/":
                return left / right
            return left ** right
        if isinstance(node, Call):
            return _UNARY[node.fn](ev(node.arg))
        raise TypeError(f"not an expression node: {node!r}")  # pragma: no cover

    return ev(e)


def eval_value(e: Expr, point: Mapping[str, float]) -> float:
    """Plain scalar evaluation at a coordinate-value map."""
    return float(evaluate(e, dict(point)).val)


# ---------------------------------------------------------------------------
# Public derivative table


def _sorted_multi_indices(n: int, order: int) -> Iterator[tuple[int, ...]]:
    if order >= 1:
        for i in range(n):
            yield (i,)
    if order >= 2:
        for i in range(n):
            for j in range(i, n):
                yield (i, j)
    if order >= 3:
        for i in range(n):
            for j in range(i, n):
                for l in range(j, n):
                    yield (i, j, l)


@dataclass(frozen=True)
class DerivativeJet:
    """Partial derivatives of a scalar at a point, one entry per multi-index.

    Entries are keyed by non-decreasing index tuples; lookups sort their
    argument first, so mixed partials are exactly symmetric by construction.
    """

    coords: tuple[str, ...]
    order: int
    value: float
    partials: Mapping[tuple[int, ...], float]

    def partial(self, *indices: int) -> float:
        if not 1 <= len(indices) <= self.order:
            raise ValueError(f"partial order must be between 1 and {self.order}")
        return self.partials[tuple(sorted(indices))]

    def gradient(self) -> np.ndarray:
        n = len(self.coords)
        return np.array([self.partial(i) for i in range(n)])

    def hessian(self) -> np.ndarray:
        n = len(self.coords)
        out = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                out[i, j] = self.partial(i, j)
        return out

    def third(self) -> np.ndarray:
        n = len(self.coords)
        out = np.empty((n, n, n))
        for i in range(n):
            for j in range(n):
                for l in range(n):
                    out[i, j, l] = self.partial(i, j, l)
        return out

    @classmethod
    def from_jet(cls, jet: Jet, coords: Sequence[str]) -> "DerivativeJet":
        if jet.batch_shape != ():
            raise ValueError("derivative tables are built from unbatched jets")
        table: dict[tuple[int, ...], float] = {}
        arrays = {1: jet.d1, 2: jet.d2, 3: jet.d3}
        for idx in _sorted_multi_indices(jet.nvars, jet.order):
            table[idx] = float(arrays[len(idx)][idx])
        return cls(tuple(coords), jet.order, float(jet.val), table)


def eval_jet(e: Expr, point: Mapping[str, float], order: int = 2,
             coords: Sequence[str] | None = None) -> DerivativeJet:
    """Derivative table of an expression at a point.

    Variables are seeded in the mapping's iteration order unless ``coords``
    fixes the order explicitly.  ``order`` may be 0 through 3.
    """
    if coords is None:
        coords = tuple(point)
    else:
        coords = tuple(coords)
        if set(coords) != set(point):
            raise ValueError("coords must name exactly the point's keys")
    env = seed_point({name: point[name] for name in coords}, order)
    return DerivativeJet.from_jet(evaluate(e, env), coords)
