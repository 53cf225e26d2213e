"""Dense univariate and sparse multivariate polynomials over the rationals."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .reals import Number, frac_str, parse_real


def _coerce(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    return parse_real(c).fraction()


class Poly:
    """Univariate polynomial with exact rational coefficients, constant term first.

    The zero polynomial has ``degree == -1``.

    >>> p = Poly([0, 1]) * Poly([1, 1])
    >>> p.coeffs
    (Fraction(0, 1), Fraction(1, 1), Fraction(1, 1))
    >>> p(3)
    Fraction(12, 1)
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable[Number] = ()):
        cs = [_coerce(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs: tuple[Fraction, ...] = tuple(cs)

    @classmethod
    def constant(cls, c: Number) -> "Poly":
        return cls([c])

    @classmethod
    def monomial(cls, j: int, c: Number = 1) -> "Poly":
        return cls([0] * j + [c])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def coeff(self, j: int) -> Fraction:
        return self.coeffs[j] if 0 <= j < len(self.coeffs) else Fraction(0)

    def __call__(self, x):
        acc = Fraction(0) if isinstance(x, (int, Fraction)) else 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __add__(self, other) -> "Poly":
        other = other if isinstance(other, Poly) else Poly.constant(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self.coeff(j) + other.coeff(j) for j in range(n))

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(-c for c in self.coeffs)

    def __sub__(self, other) -> "Poly":
        other = other if isinstance(other, Poly) else Poly.constant(other)
        return self + (-other)

    def __rsub__(self, other) -> "Poly":
        return (-self) + other

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = _coerce(other)
            return Poly(c * a for a in self.coeffs)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative power")
        result, base = Poly([1]), self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def compose(self, inner: "Poly") -> "Poly":
        """``self(inner(n))``."""
        acc = Poly()
        for c in reversed(self.coeffs):
            acc = acc * inner + c
        return acc

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        if isinstance(other, (int, Fraction)):
            return self.coeffs == Poly.constant(other).coeffs
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"Poly([{', '.join(frac_str(c) for c in self.coeffs)}])"

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for j, c in enumerate(self.coeffs):
            if c:
                terms.append(f"{c}" if j == 0 else f"{c}*n" + (f"^{j}" if j > 1 else ""))
        return " + ".join(terms)

    def to_json(self) -> str:
        """JSON array of ``p/q`` coefficient strings, constant term first."""
        return json.dumps([frac_str(c) for c in self.coeffs])

    @classmethod
    def from_json(cls, text: str) -> "Poly":
        return cls(Fraction(s) for s in json.loads(text))


PhasePolynomial = Poly
RationalPoly = Poly


@dataclass(frozen=True)
class MultiPoly:
    """Sparse polynomial in ``x_1..x_m``: exponent tuple -> rational coefficient."""

    nvars: int
    terms: tuple[tuple[tuple[int, ...], Fraction], ...]

    @classmethod
    def from_dict(cls, nvars: int, terms: Mapping[Sequence[int], Number]) -> "MultiPoly":
        acc: dict[tuple[int, ...], Fraction] = {}
        for exps, c in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) < nvars:
                exps = exps + (0,) * (nvars - len(exps))
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent tuple {exps} for {nvars} variables")
            acc[exps] = acc.get(exps, Fraction(0)) + _coerce(c)
        items = tuple(sorted((e, c) for e, c in acc.items() if c != 0))
        return cls(nvars, items)

    @classmethod
    def univariate(cls, nvars: int, coeffs: Sequence[Number]) -> "MultiPoly":
        """Polynomial in ``x_1`` only."""
        return cls.from_dict(nvars, {(j,) + (0,) * (nvars - 1): c for j, c in enumerate(coeffs)})

    @property
    def degree(self) -> int:
        return max((sum(e) for e, _ in self.terms), default=-1)

    def depends_only_on_first(self) -> bool:
        return all(not any(e[1:]) for e, _ in self.terms)

    def __call__(self, *xs):
        if len(xs) != self.nvars:
            raise ValueError(f"expected {self.nvars} arguments")
        total = Fraction(0)
        for exps, c in self.terms:
            t = c
            for x, e in zip(xs, exps):
                if e:
                    t = t * x ** e
            total += t
        return total

    def compose(self, polys: Sequence[Poly]) -> Poly:
        """Substitute ``x_i = polys[i]`` (univariate in ``n``)."""
        if len(polys) != self.nvars:
            raise ValueError("arity mismatch")
        cache: dict[tuple[int, int], Poly] = {}

        def power(i, e):
            key = (i, e)
            if key not in cache:
                cache[key] = polys[i] ** e
            return cache[key]

        acc = Poly()
        for exps, c in self.terms:
            term = Poly([c])
            for i, e in enumerate(exps):
                if e:
                    term = term * power(i, e)
            acc = acc + term
        return acc


def binomial_poly(j: int) -> Poly:
    """``C(n, j)`` as a polynomial in ``n`` (falling factorial over ``j!``)."""
    p = Poly([1])
    for i in range(j):
        p = p * Poly([-i, 1])
    return p * Fraction(1, math.factorial(j))
