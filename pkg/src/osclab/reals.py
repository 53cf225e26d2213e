"""Real-number inputs and certified fixed-point arithmetic.

Parameters are accepted as decimal strings, ``p/q`` rationals, or small
closed-form expressions (``sqrt(2)``, ``(1+sqrt(5))/2``, ``phi``).  Exact
inputs become :class:`fractions.Fraction`; expressions are kept as source
text and re-evaluated with mpmath at whatever precision a caller asks for,
so a value can be refined instead of being frozen at one precision.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import mpmath

Number = Union[int, float, Fraction, str, "Real"]

DEFAULT_BITS = 256

_CONSTANTS = {
    "phi": lambda: (1 + mpmath.sqrt(5)) / 2,
    "golden": lambda: (1 + mpmath.sqrt(5)) / 2,
    "pi": lambda: mpmath.pi,
    "e": lambda: mpmath.e,
}
_FUNCTIONS = {"sqrt": mpmath.sqrt, "exp": mpmath.exp, "log": mpmath.log}


class PrecisionBudgetError(RuntimeError):
    """Raised when a computation would need more bits than the ceiling allows."""


def _eval_exact(node):
    # Fraction evaluation of a purely rational expression; None if not rational.
    if isinstance(node, ast.Expression):
        return _eval_exact(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return None if isinstance(node.value, float) else Fraction(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_exact(node.operand)
        if v is None:
            return None
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        lhs, rhs = _eval_exact(node.left), _eval_exact(node.right)
        if lhs is None or rhs is None:
            return None
        if isinstance(node.op, ast.Add):
            return lhs + rhs
        if isinstance(node.op, ast.Sub):
            return lhs - rhs
        if isinstance(node.op, ast.Mult):
            return lhs * rhs
        if isinstance(node.op, ast.Div):
            return lhs / rhs
        if isinstance(node.op, ast.Pow) and rhs.denominator == 1:
            return lhs ** int(rhs)
    return None


def _eval_mp(node):
    if isinstance(node, ast.Expression):
        return _eval_mp(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        # floats in source text are decimal literals, not binary doubles
        return mpmath.mpf(repr(node.value)) if isinstance(node.value, float) else mpmath.mpf(node.value)
    if isinstance(node, ast.Name) and node.id in _CONSTANTS:
        return _CONSTANTS[node.id]()
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_mp(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        lhs, rhs = _eval_mp(node.left), _eval_mp(node.right)
        ops = {ast.Add: lambda: lhs + rhs, ast.Sub: lambda: lhs - rhs,
               ast.Mult: lambda: lhs * rhs, ast.Div: lambda: lhs / rhs,
               ast.Pow: lambda: lhs ** rhs}
        for kind, fn in ops.items():
            if isinstance(node.op, kind):
                return fn()
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS and len(node.args) == 1 and not node.keywords):
        return _FUNCTIONS[node.func.id](_eval_mp(node.args[0]))
    raise ValueError(f"unsupported expression element: {ast.dump(node)}")


def _decimal_fraction(text: str) -> Fraction | None:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        return None


@dataclass(frozen=True)
class Real:
    """A real parameter: exact rational or a refinable closed-form expression."""

    source: str
    exact: Fraction | None = None

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    def fraction(self, bits: int = DEFAULT_BITS) -> Fraction:
        """Exact value, or a dyadic approximation with error at most 2**-bits."""
        if self.exact is not None:
            return self.exact
        man, shift = self.dyadic(bits)
        return Fraction(man, 1 << shift)

    def dyadic(self, bits: int) -> tuple[int, int]:
        """Return ``(m, s)`` with ``|value - m / 2**s| <= 2**-bits``.

        Exact dyadic inputs come back exactly (``s`` may then be below ``bits``).
        """
        if self.exact is not None:
            x = self.exact
            den = x.denominator
            if den & (den - 1) == 0:
                return x.numerator, den.bit_length() - 1
            return (x.numerator << bits) // den, bits
        tree = ast.parse(self.source, mode="eval")
        mag = 0
        with mpmath.workprec(64):
            v = _eval_mp(tree)
            if v != 0:
                mag = max(0, int(mpmath.floor(mpmath.log(abs(v), 2))) + 1)
        with mpmath.workprec(bits + mag + 32):
            v = _eval_mp(tree)
            return int(mpmath.floor(v * mpmath.mpf(2) ** bits)), bits

    def __float__(self) -> float:
        if self.exact is not None:
            return float(self.exact)
        return float(self.fraction(80))

    def __str__(self) -> str:
        return self.source


def parse_real(value: Number) -> Real:
    """Parse a parameter value.

    >>> parse_real("3/2").exact
    Fraction(3, 2)
    >>> parse_real("sqrt(2)").is_exact
    False
    """
    if isinstance(value, Real):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a real number")
    if isinstance(value, (int, Fraction)):
        return Real(str(value), Fraction(value))
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Real(repr(value), Fraction(value))
    text = str(value).strip()
    if not text:
        raise ValueError("empty real-number string")
    frac = _decimal_fraction(text)
    if frac is not None:
        return Real(text, frac)
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse real number {text!r}") from exc
    frac = _eval_exact(tree)
    if frac is not None:
        return Real(text, frac)
    with mpmath.workprec(64):
        v = _eval_mp(tree)
        if isinstance(v, mpmath.mpc) or not mpmath.isfinite(v):
            raise ValueError(f"not a finite real number: {text!r}")
    return Real(text, None)


def to_fraction(value: Number, bits: int = DEFAULT_BITS) -> Fraction:
    """Shorthand: parse and return the exact value or its dyadic approximation."""
    return parse_real(value).fraction(bits)


def frac_str(x: Fraction) -> str:
    """``p/q`` formatting used by JSON and CSV outputs."""
    return f"{x.numerator}/{x.denominator}"


def mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


# --- fixed-point balls ----------------------------------------------------

@dataclass(frozen=True)
class Ball:
    """Fixed-point interval ``[(mid - rad) * 2**-exp, (mid + rad) * 2**-exp]``."""

    mid: int
    rad: int
    exp: int

    @classmethod
    def from_real(cls, x: Real, bits: int) -> "Ball":
        man, shift = x.dyadic(bits)
        if x.is_exact:
            rad = 0 if _is_dyadic(x.exact) else 1
        else:
            rad = 2  # floor error plus mpmath evaluation slack
        return cls(man, rad, shift)

    @classmethod
    def from_int(cls, n: int) -> "Ball":
        return cls(n, 0, 0)

    def __mul__(self, other: "Ball") -> "Ball":
        mid = self.mid * other.mid
        rad = abs(self.mid) * other.rad + abs(other.mid) * self.rad + self.rad * other.rad
        return Ball(mid, rad, self.exp + other.exp)

    def __add__(self, other: "Ball") -> "Ball":
        e = max(self.exp, other.exp)
        a, b = self.rescale(e), other.rescale(e)
        return Ball(a.mid + b.mid, a.rad + b.rad, e)

    def rescale(self, exp: int) -> "Ball":
        """Round to ``exp`` fractional bits, widening the radius to stay certified."""
        if exp >= self.exp:
            s = exp - self.exp
            return Ball(self.mid << s, self.rad << s, exp)
        s = self.exp - exp
        return Ball(self.mid >> s, -((-self.rad) >> s) + 1, exp)

    def power(self, n: int, bits: int) -> "Ball":
        result = Ball(1 << bits, 0, bits)
        base = self.rescale(bits) if self.exp > bits else self
        while n:
            if n & 1:
                result = (result * base).rescale(bits)
            n >>= 1
            if n:
                base = (base * base).rescale(bits)
        return result


def _is_dyadic(x: Fraction) -> bool:
    d = x.denominator
    return d & (d - 1) == 0
