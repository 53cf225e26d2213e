"""Exact expansion of skew-product orbits as polynomials in the time ``n``.

For a polynomial skew product every lifted orbit coordinate ``x_i^n`` is a
polynomial ``P_i(n)``; these routines build those polynomials by summing
the increments with Faulhaber polynomials and report the attained degrees
next to the theoretical bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

from .polynomial import Poly, binomial_poly
from .reals import Number, parse_real
from .torus import (AffineMap, CharacterIndex, DimensionError, Flow, GeneralPolySkew,
                    SimplePolySkew, TorusPoint, TrigPolynomial, as_trigpoly, identity,
                    is_unipotent, mat_mul, mat_sub, mat_vec)


class InexactFlowError(ValueError):
    """Exact expansion requested for a flow with approximated parameters."""


@lru_cache(maxsize=None)
def _faulhaber(j: int) -> tuple[Fraction, ...]:
    # sum_{l=0}^{n-1} l^j, via (n)^{j+1} - ... recursion on the binomial expansion
    # of (l+1)^{j+1} - l^{j+1} telescoped over l = 0..n-1.
    # n^{j+1} = sum_{i=0}^{j} C(j+1, i) S_i(n)
    coeffs = [Fraction(0)] * (j + 2)
    coeffs[j + 1] = Fraction(1)
    for i in range(j):
        c = math.comb(j + 1, i)
        for m, v in enumerate(_faulhaber(i)):
            coeffs[m] -= c * v
    return tuple(v / (j + 1) for v in coeffs)


def faulhaber(j: int) -> Poly:
    """``sum_{l=0}^{n-1} l**j`` as a polynomial in ``n`` (``0**0 == 1``).

    >>> faulhaber(1)
    Poly([0/1, -1/2, 1/2])
    """
    if j < 0:
        raise ValueError("j must be >= 0")
    return Poly(_faulhaber(j))


def summation(q: Poly) -> Poly:
    """``S(n) = sum_{l=0}^{n-1} q(l)``."""
    acc = Poly()
    for j, c in enumerate(q.coeffs):
        if c:
            acc = acc + faulhaber(j) * c
    return acc


@dataclass(frozen=True)
class OrbitExpansion:
    """Orbit polynomials with degree bookkeeping.

    ``bounds[i]`` is the theoretical bound for ``P_{i+1}``; ``attained`` the
    actual degrees; ``order`` is ``max(1, attained[1:])``.
    """

    polys: tuple[Poly, ...]
    bounds: tuple[int, ...]
    attained: tuple[int, ...]

    @property
    def order(self) -> int:
        return max([1] + [max(k, 0) for k in self.attained[1:]])

    @property
    def within_bounds(self) -> bool:
        return all(a <= b for a, b in zip(self.attained, self.bounds))

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]

    def __len__(self):
        return len(self.polys)


def _check_inputs(flow, x: TorusPoint, exact: bool):
    if flow.d != x.d:
        raise DimensionError(f"flow has d={flow.d}, point has d={x.d}")
    if exact and not flow.exact:
        raise InexactFlowError("flow parameters are approximations; pass exact=False")


def expand_orbit_simple(flow: SimplePolySkew, x: TorusPoint, exact: bool = True) -> OrbitExpansion:
    """``(P_1, ..., P_d)`` with ``P_i(n)`` the lifted ``i``-th coordinate of ``f^n x``.

    Coordinate ``i`` advances by ``sum_j b_ij P_j(l) + h_i(P_1(l))`` at time
    ``l``, so ``P_i = x_i + summation(increment)``.  Bounds are ``1`` for
    ``P_1`` and ``i + k - 1`` afterwards.
    """
    if not isinstance(flow, SimplePolySkew):
        raise TypeError("expected a SimplePolySkew")
    _check_inputs(flow, x, exact)
    polys = [Poly([x.lift[0], flow.a])]
    for i in range(2, flow.d + 1):
        inc = flow.h[i - 2].compose(polys[0])
        for j in range(2, i):
            bij = flow.b.get((i, j))
            if bij:
                inc = inc + polys[j - 1] * bij
        polys.append(summation(inc) + x.lift[i - 1])
    bounds = (1,) + tuple(i + flow.k - 1 for i in range(2, flow.d + 1))
    res = OrbitExpansion(tuple(polys), bounds, tuple(p.degree for p in polys))
    if not res.within_bounds:
        raise AssertionError(f"degree bound violated: {res.attained} vs {res.bounds}")
    return res


def general_degree_bounds(d: int, k: int) -> tuple[int, ...]:
    """``1`` for ``P_1`` and ``k**(i-1) + 1`` for ``P_i``, ``i >= 2``."""
    return (1,) + tuple(k ** (i - 1) + 1 for i in range(2, d + 1))


def recursive_degree_bounds(d: int, k: int) -> tuple[int, ...]:
    """Bounds from composing degrees: ``D_1 = 1``, ``D_i = k * D_{i-1} + 1``."""
    out = [1]
    for _ in range(2, d + 1):
        out.append(k * out[-1] + 1)
    return tuple(out)


def expand_orbit_general(flow: GeneralPolySkew, x: TorusPoint, exact: bool = True) -> OrbitExpansion:
    """Orbit polynomials of a general skew product.

    The returned ``bounds`` are ``k**(i-1) + 1``.  They are *reported*, not
    enforced: a coordinate ``h_i`` containing a power of ``x_{i-1}`` beyond
    the first can exceed them (see :func:`recursive_degree_bounds` for a
    bound that always holds).
    """
    if isinstance(flow, SimplePolySkew):
        flow = flow.as_general()
    if not isinstance(flow, GeneralPolySkew):
        raise TypeError("expected a GeneralPolySkew")
    _check_inputs(flow, x, exact)
    polys = [Poly([x.lift[0], flow.a])]
    for i in range(2, flow.d + 1):
        inc = flow.h[i - 2].compose(polys[:i - 1])
        polys.append(summation(inc) + x.lift[i - 1])
    return OrbitExpansion(tuple(polys), general_degree_bounds(flow.d, flow.k),
                          tuple(p.degree for p in polys))


def expand_orbit_affine(flow: AffineMap, x: TorusPoint, exact: bool = True) -> OrbitExpansion:
    """Orbit polynomials of ``x -> A x + a`` for unipotent ``A``.

    With ``N = A - I``: ``A^n = sum_j C(n, j) N^j`` and
    ``sum_{m<n} A^m = sum_j C(n, j+1) N^j``.
    """
    if not is_unipotent(flow.A):
        raise ValueError("orbit coordinates are polynomial only for unipotent A")
    _check_inputs(flow, x, exact)
    d = flow.d
    N = mat_sub(flow.A, identity(d))
    polys = [Poly() for _ in range(d)]
    Nj = identity(d)
    for j in range(d):
        vx = mat_vec(Nj, x.lift)
        va = mat_vec(Nj, flow.a)
        bj, bj1 = binomial_poly(j), binomial_poly(j + 1)
        for i in range(d):
            polys[i] = polys[i] + bj * vx[i] + bj1 * va[i]
        Nj = mat_mul(Nj, N)
    bounds = tuple([d] * d)
    return OrbitExpansion(tuple(polys), bounds, tuple(p.degree for p in polys))


def expand_orbit(flow: Flow, x: TorusPoint, exact: bool = True) -> OrbitExpansion:
    if isinstance(flow, SimplePolySkew):
        return expand_orbit_simple(flow, x, exact)
    if isinstance(flow, GeneralPolySkew):
        return expand_orbit_general(flow, x, exact)
    return expand_orbit_affine(flow, x, exact)


@dataclass(frozen=True)
class ComposedObservable:
    """``p(f^n x) = constant + sum_k coeff_k e(phase_k(n))``."""

    constant: complex
    terms: tuple[tuple[complex, CharacterIndex, Poly], ...]


def compose_phase(p, polys: Sequence[Poly]) -> ComposedObservable:
    """Phase polynomials ``k . (P_1(n), ..., P_d(n))`` for each character of ``p``."""
    p = as_trigpoly(p)
    polys = tuple(polys)
    if p.terms and p.d != len(polys):
        raise DimensionError("observable and orbit dimensions differ")
    const = 0j
    terms = []
    for k, c in p.terms.items():
        if k.is_zero():
            const += c
            continue
        phase = Poly()
        for kj, Pj in zip(k.k_vec, polys):
            if kj:
                phase = phase + Pj * kj
        terms.append((c, k, phase))
    return ComposedObservable(const, tuple(terms))


@dataclass(frozen=True)
class BinomialPhase:
    """Phases ``theta_0..theta_d`` attached to ``C(n, j)``."""

    thetas: tuple[Fraction, ...]

    def __init__(self, thetas: Sequence[Number]):
        object.__setattr__(self, "thetas", tuple(parse_real(t).fraction() for t in thetas))

    @property
    def d(self) -> int:
        return len(self.thetas) - 1


def binomial_to_monomial(b: BinomialPhase | Sequence[Number]) -> Poly:
    """Monomial form of ``P(n) = sum_j theta_j C(n, j)``."""
    if not isinstance(b, BinomialPhase):
        b = BinomialPhase(b)
    acc = Poly()
    for j, t in enumerate(b.thetas):
        if t:
            acc = acc + binomial_poly(j) * t
    return acc


def eval_phase_mod1(P: Poly, n: int) -> Fraction:
    """Exact ``P(n) mod 1``."""
    v = P(Fraction(n))
    return v - math.floor(v)


def lifted_orbit(flow: Flow, x: TorusPoint, n: int) -> list[tuple[Fraction, ...]]:
    """Exact lifts of ``x, f x, ..., f^n x`` by direct iteration (test oracle)."""
    from .torus import orbit
    return [p.lift for p in orbit(flow, x, n)]
