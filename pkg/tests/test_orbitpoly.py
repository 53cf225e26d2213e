from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.acceptance import random_general_skew, random_simple_skew
from osclab.orbitpoly import (BinomialPhase, InexactFlowError, binomial_to_monomial, compose_phase,
                              eval_phase_mod1, expand_orbit, expand_orbit_affine,
                              expand_orbit_general, expand_orbit_simple, faulhaber,
                              general_degree_bounds, lifted_orbit, recursive_degree_bounds,
                              summation)
from osclab.polynomial import MultiPoly, Poly
from osclab.torus import (AffineMap, DimensionError, GeneralPolySkew, SimplePolySkew, TorusPoint,
                          TrigPolynomial)

F = Fraction


@pytest.mark.parametrize("j", range(8))
def test_faulhaber_against_sums(j):
    P = faulhaber(j)
    assert P.degree == j + 1
    for n in range(0, 30):
        assert P(n) == sum(l ** j for l in range(n))


@settings(max_examples=40)
@given(st.lists(st.fractions(-5, 5, max_denominator=20), max_size=6), st.integers(0, 40))
def test_summation_telescopes(cs, n):
    q = Poly(cs)
    S = summation(q)
    assert S(n + 1) - S(n) == q(n)
    assert S(0) == 0


def test_quarter_square_skew():
    exp = expand_orbit_simple(SimplePolySkew(2, 2, F(1, 4), (Poly([0, 0, 1]),)), TorusPoint.of(0, 0))
    n = Poly([0, 1])
    assert exp.polys[0] == n * F(1, 4)
    assert exp.polys[1] == (n - 1) * n * (2 * n - 1) * F(1, 96)
    assert exp.attained == (1, 3) and exp.bounds == (1, 3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_simple_expansion_exact(seed):
    rng = np.random.default_rng(seed)
    flow = random_simple_skew(rng)
    x = TorusPoint(tuple(F(int(rng.integers(-9, 10)), 7) for _ in range(flow.d)))
    exp = expand_orbit_simple(flow, x)
    lifts = lifted_orbit(flow, x, 30)
    assert all(tuple(P(n) for P in exp.polys) == lifts[n] for n in range(31))
    assert all(a <= i + flow.k for i, a in enumerate(exp.attained[1:], start=1))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_general_expansion_exact_and_recursive_bound(seed):
    rng = np.random.default_rng(seed)
    flow = random_general_skew(rng)
    x = TorusPoint(tuple(F(int(rng.integers(-9, 10)), 5) for _ in range(flow.d)))
    exp = expand_orbit_general(flow, x)
    lifts = lifted_orbit(flow, x, 30)
    assert all(tuple(P(n) for P in exp.polys) == lifts[n] for n in range(31))
    assert all(a <= b for a, b in zip(exp.attained, recursive_degree_bounds(flow.d, flow.k)))


def test_general_bound_exceeded_by_square_of_previous_coordinate():
    # x3 -> x3 + x2^2 with deg P2 = 3 gives deg P3 = 7 > 2^2 + 1
    h2 = MultiPoly.univariate(1, [0, 0, 1])
    h3 = MultiPoly.from_dict(2, {(0, 2): 1})
    flow = GeneralPolySkew(3, 2, F(1, 3), (h2, h3))
    exp = expand_orbit_general(flow, TorusPoint.zero(3))
    assert exp.attained == (1, 3, 7)
    assert exp.bounds == general_degree_bounds(3, 2) == (1, 3, 5)
    assert not exp.within_bounds
    assert recursive_degree_bounds(3, 2) == (1, 3, 7)
    lifts = lifted_orbit(flow, TorusPoint.zero(3), 60)
    assert all(tuple(P(n) for P in exp.polys) == lifts[n] for n in range(61))


def test_simple_as_general_agrees():
    flow = SimplePolySkew(3, 2, F(2, 5), (Poly([1, 0, 3]), Poly([0, -1])), b={(3, 2): 2})
    x = TorusPoint.of("1/2", "1/3", "1/7")
    assert expand_orbit_simple(flow, x).polys == expand_orbit_general(flow.as_general(), x).polys


def test_affine_unipotent_expansion():
    flow = AffineMap(((1, 0, 0), (2, 1, 0), (1, -1, 1)), (F(1, 3), F(1, 5), F(0)))
    x = TorusPoint.of("1/2", "1/4", "1/8")
    exp = expand_orbit_affine(flow, x)
    lifts = lifted_orbit(flow, x, 25)
    assert all(tuple(P(n) for P in exp.polys) == lifts[n] for n in range(26))
    with pytest.raises(ValueError):
        expand_orbit_affine(AffineMap(((2, 1), (1, 1)), (0, 0)), TorusPoint.zero(2))


def test_inexact_flow_needs_flag():
    flow = AffineMap.rotation("sqrt(2)")
    with pytest.raises(InexactFlowError):
        expand_orbit(flow, TorusPoint.zero(1))
    assert expand_orbit(flow, TorusPoint.zero(1), exact=False).attained == (1,)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        expand_orbit(AffineMap.rotation("1/3"), TorusPoint.zero(2))


def test_binomial_conversion():
    assert binomial_to_monomial([0, 0, 1]) == Poly([0, F(-1, 2), F(1, 2)])
    b = BinomialPhase(["1/3", "1/5", "1/7", "2"])
    P = binomial_to_monomial(b)
    from math import comb
    for n in range(12):
        assert P(n) == sum(t * comb(n, j) for j, t in enumerate(b.thetas))


def test_compose_phase_and_mod1():
    polys = (Poly([0, F(1, 4)]), Poly([0, 0, 1]))
    comp = compose_phase(TrigPolynomial({(1, 1): 2.0, (0, 0): 0.5}), polys)
    assert comp.constant == 0.5
    (c, k, P), = comp.terms
    assert c == 2.0 and P == Poly([0, F(1, 4), 1])
    assert eval_phase_mod1(P, 3) == F(3, 4)
