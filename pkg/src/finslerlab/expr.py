"""Closed-form scalar field expressions over chart coordinates.

Expressions are immutable trees.  They evaluate on floats, numpy arrays or
:class:`~finslerlab.jet.Jet` values, so x-derivatives of any order are exact.
The text form (``"log(2 + cos(pi * x1))"``) is parsed with :mod:`ast` and is
what the JSON configs carry; coordinates are written ``x1 .. xn``.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass

import numpy as np

from . import jet as J
from .errors import DomainError, InputError


class Expr:
    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(Const(-1.0), as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), mul(Const(-1.0), self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, Pow(as_expr(other), -1.0))

    def __rtruediv__(self, other):
        return mul(as_expr(other), Pow(self, -1.0))

    def __neg__(self):
        return mul(Const(-1.0), self)

    def __pow__(self, p):
        return Pow(self, float(p))

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float


@dataclass(frozen=True, eq=True)
class Coord(Expr):
    index: int  # zero-based


@dataclass(frozen=True, eq=True)
class Add(Expr):
    terms: tuple


@dataclass(frozen=True, eq=True)
class Mul(Expr):
    factors: tuple


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: float


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str  # sin | cos | exp | log
    arg: Expr


FUNCS = ("sin", "cos", "exp", "log")


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Const(float(v))
    raise TypeError(f"cannot convert {type(v).__name__} to an expression")


def add(*terms) -> Expr:
    flat = []
    for t in terms:
        flat.extend(t.terms if isinstance(t, Add) else (t,))
    return flat[0] if len(flat) == 1 else Add(tuple(flat))


def mul(*factors) -> Expr:
    flat = []
    for f in factors:
        flat.extend(f.factors if isinstance(f, Mul) else (f,))
    return flat[0] if len(flat) == 1 else Mul(tuple(flat))


# ---- builders ----

def coord(i: int) -> Coord:
    """Coordinate x^i with zero-based ``i``."""
    return Coord(i)


def const(v: float) -> Const:
    return Const(float(v))


def sin(e) -> Func:
    return Func("sin", as_expr(e))


def cos(e) -> Func:
    return Func("cos", as_expr(e))


def exp(e) -> Func:
    return Func("exp", as_expr(e))


def ln(e) -> Func:
    return Func("log", as_expr(e))


def sqrt(e) -> Pow:
    return Pow(as_expr(e), 0.5)


PI = Const(math.pi)


# ---- evaluation ----

def _positive(v, what):
    val = np.asarray(J.value(v))
    if not np.all(np.isfinite(val)) or np.any(val <= 0):
        raise DomainError(f"{what} requires a positive argument", value=val)


def evaluate(e: Expr, x):
    """Evaluate at ``x`` (sequence of floats, arrays or jets, one per coordinate)."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Coord):
        if e.index >= len(x):
            raise DomainError(f"coordinate x{e.index + 1} outside a {len(x)}-dimensional chart")
        return x[e.index]
    if isinstance(e, Add):
        out = evaluate(e.terms[0], x)
        for t in e.terms[1:]:
            out = out + evaluate(t, x)
        return out
    if isinstance(e, Mul):
        out = evaluate(e.factors[0], x)
        for f in e.factors[1:]:
            out = out * evaluate(f, x)
        return out
    if isinstance(e, Pow):
        base = evaluate(e.base, x)
        p = e.exponent
        if p != int(p):
            _positive(base, "a fractional power")
        elif p < 0 and np.any(np.asarray(J.value(base)) == 0):
            raise DomainError("negative power of zero")
        if isinstance(base, J.Jet):
            return base ** p
        return np.power(np.asarray(base, dtype=float), p) if np.ndim(base) else float(base) ** p
    if isinstance(e, Func):
        arg = evaluate(e.arg, x)
        if e.name == "log":
            _positive(arg, "log")
        return getattr(J, e.name)(arg)
    raise TypeError(f"unknown expression node {e!r}")


def coords_used(e: Expr) -> set[int]:
    if isinstance(e, Coord):
        return {e.index}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Add,)):
        return set().union(*(coords_used(t) for t in e.terms))
    if isinstance(e, Mul):
        return set().union(*(coords_used(t) for t in e.factors))
    if isinstance(e, Pow):
        return coords_used(e.base)
    return coords_used(e.arg)


def is_constant(e: Expr) -> bool:
    return not coords_used(e)


# ---- text form ----

def to_string(e: Expr) -> str:
    if isinstance(e, Const):
        text = repr(float(e.value))
        # parenthesized so a negative base survives "**" precedence
        return f"({text})" if math.copysign(1.0, e.value) < 0 else text
    if isinstance(e, Coord):
        return f"x{e.index + 1}"
    if isinstance(e, Add):
        return "(" + " + ".join(to_string(t) for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(" + " * ".join(to_string(t) for t in e.factors) + ")"
    if isinstance(e, Pow):
        return f"({to_string(e.base)} ** {e.exponent!r})"
    return f"{e.name}({to_string(e.arg)})"


_NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}
_CALLS = {"sin": sin, "cos": cos, "exp": exp, "log": ln, "ln": ln, "sqrt": sqrt}


def parse(text: str) -> Expr:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise InputError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _from_ast(tree.body, text)


def _from_ast(node, text):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return Const(float(node.value))
    if isinstance(node, ast.Name):
        if node.id in _NAMED_CONSTANTS:
            return Const(_NAMED_CONSTANTS[node.id])
        if node.id.startswith("x") and node.id[1:].isdigit() and int(node.id[1:]) >= 1:
            return Coord(int(node.id[1:]) - 1)
        raise InputError(f"unknown name {node.id!r} in {text!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _from_ast(node.operand, text)
        if isinstance(node.op, ast.UAdd):
            return inner
        if isinstance(inner, Const):
            return Const(-inner.value)
        return -inner
    if isinstance(node, ast.BinOp):
        left = _from_ast(node.left, text)
        right = _from_ast(node.right, text)
        if isinstance(node.op, ast.Add):
            return add(left, right)
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return mul(left, right)
        if isinstance(node.op, ast.Div):
            return left / right
        if isinstance(node.op, ast.Pow):
            if not isinstance(right, Const):
                raise InputError(f"exponent must be a constant in {text!r}")
            return Pow(left, right.value)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _CALLS:
        if len(node.args) != 1 or node.keywords:
            raise InputError(f"{node.func.id} takes exactly one argument in {text!r}")
        return _CALLS[node.func.id](_from_ast(node.args[0], text))
    raise InputError(f"unsupported syntax in expression {text!r}")
