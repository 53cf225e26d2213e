from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.acceptance import random_unimodular
from osclab.polynomial import Poly
from osclab.torus import (AffineMap, DimensionError, SimplePolySkew, TorusPoint, TrigPolynomial,
                          character_eval, det, flow_from_dict, integer_inverse, is_lower_unitriangular,
                          is_unipotent, least_unipotent_power, mat_mul, orbit, power_affine, step,
                          torus_distance, trigpoly_eval, unipotent_triangularize)

F = Fraction


def test_character_quarter_point():
    # 1/4 + 1/4 = 1/2, so e(1/2) = -1
    assert character_eval((1, 1), (F(1, 4), F(1, 4))) == pytest.approx(-1)


def test_character_integer_point_is_one():
    assert character_eval((3, -2, 5), (F(7), F(-1), F(2))) == 1


def test_character_dimension_mismatch():
    with pytest.raises(DimensionError):
        character_eval((1, 1), (F(0),))


def test_power_affine_example():
    f = AffineMap(((1, 0), (1, 1)), (F(1, 3), F(1, 3)))
    g = power_affine(f, 3)
    assert g.A == ((1, 0), (3, 1))
    assert g.a == (F(0), F(0))


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.fractions(0, 1, max_denominator=50), st.fractions(0, 1, max_denominator=50))
def test_power_affine_matches_iteration(q, a1, a2):
    f = AffineMap(((1, 0), (2, 1)), (a1, a2))
    x = TorusPoint.of("1/5", "2/9")
    direct = x
    for _ in range(q):
        direct = step(f, direct)
    assert step(power_affine(f, q), x).coords == direct.coords


def test_affine_rejects_non_unimodular():
    with pytest.raises(ValueError):
        AffineMap(((2, 0), (0, 1)), (0, 0))


def test_unipotent_and_powers():
    assert is_unipotent(((1, 0), (5, 1)))
    assert not is_unipotent(((0, -1), (1, 0)))
    assert least_unipotent_power(((0, -1), (1, 0)), 12) == 4
    assert least_unipotent_power(((2, 1), (1, 1)), 12) is None


def test_triangularize_shear():
    P = unipotent_triangularize(((1, 1), (0, 1)))
    L = mat_mul(mat_mul(integer_inverse(P), ((1, 1), (0, 1))), P)
    assert det(P) == 1 and is_lower_unitriangular(L)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(2, 5))
def test_triangularize_conjugates(seed, d):
    rng = np.random.default_rng(seed)
    L = tuple(tuple(1 if i == j else (int(rng.integers(-5, 6)) if j < i else 0) for j in range(d))
              for i in range(d))
    Q = random_unimodular(rng, d)
    A = mat_mul(mat_mul(Q, L), integer_inverse(Q))
    P = unipotent_triangularize(A)
    assert det(P) == 1
    assert is_lower_unitriangular(mat_mul(mat_mul(integer_inverse(P), A), P))


def test_triangularize_rejects_non_unipotent():
    with pytest.raises(ValueError):
        unipotent_triangularize(((2, 1), (1, 1)))


def test_skew_step_uses_lift():
    f = SimplePolySkew(2, 2, F(1, 4), (Poly([0, 0, 1]),))
    pts = list(orbit(f, TorusPoint.of(0, 0), 4))
    # x1 lifts n/4; x2 accumulates (l/4)^2 for l < n
    assert [p.lift for p in pts] == [(F(n, 4), sum(F(l * l, 16) for l in range(n))) for n in range(5)]
    assert all(0 <= c < 1 for p in pts for c in p.coords)


def test_skew_validation():
    with pytest.raises(ValueError):
        SimplePolySkew(2, 1, F(0), (Poly([0, 0, 1]),))
    with pytest.raises(DimensionError):
        SimplePolySkew(3, 2, F(0), (Poly([1]),))
    with pytest.raises(ValueError):
        SimplePolySkew(3, 2, F(0), (Poly([1]), Poly([1])), b={(2, 1): 1})


def test_torus_distance():
    assert torus_distance((F(1, 10), F(9, 10)), (F(9, 10), F(0))) == pytest.approx(0.2)
    assert torus_distance((F(1, 3),), (F(1, 3),)) == 0


@settings(max_examples=50)
@given(st.lists(st.fractions(-3, 3, max_denominator=100), min_size=3, max_size=3),
       st.lists(st.fractions(-3, 3, max_denominator=100), min_size=3, max_size=3))
def test_torus_distance_symmetric_and_bounded(x, y):
    dxy = torus_distance(x, y)
    assert dxy == torus_distance(y, x)
    assert 0 <= dxy <= 0.5


def test_trig_polynomial_box_and_eval():
    p = TrigPolynomial({(1, 0): 2, (0, -3): 1j, (2, 1): -1})
    assert p.box == ((0, -3), (2, 1))
    x = (F(1, 4), F(1, 3))
    want = 2 * character_eval((1, 0), x) + 1j * character_eval((0, -3), x) - character_eval((2, 1), x)
    assert trigpoly_eval(p, x) == pytest.approx(want)


def test_flow_from_dict_and_unknown_keys():
    f = flow_from_dict({"type": "simple_skew", "d": 2, "k": 2, "a": "1/4", "h_2": ["0", "0", "1"]})
    assert isinstance(f, SimplePolySkew) and f.exact
    g = flow_from_dict({"type": "affine", "A": [[1, 0], [1, 1]], "a": ["sqrt(2)", "0"]})
    assert not g.exact
    with pytest.raises(ValueError, match="unknown"):
        flow_from_dict({"type": "affine", "A": [1], "colour": "red"})
