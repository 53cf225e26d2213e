from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab import phasor
from osclab.averaging import weyl_average
from osclab.seqgen import mobius_sequence


def direct_terms(coeffs, start, stop):
    # per-term exact Horner, the slow oracle
    return np.array([np.exp(2j * np.pi * float(phasor.horner_mod1(coeffs, n)))
                     for n in range(start, stop)])


coeff = st.fractions(min_value=-3, max_value=3, max_denominator=10 ** 6)


@settings(max_examples=30, deadline=None)
@given(st.lists(coeff, min_size=1, max_size=7), st.integers(0, 10 ** 9), st.integers(1, 9000))
def test_phase_block_matches_horner(coeffs, start, length):
    n = min(length, 600)
    got = phasor.unit_block(coeffs, start, start + n)
    assert np.max(np.abs(got - direct_terms(coeffs, start, start + n))) < 1e-9


def test_block_boundaries_are_seamless():
    coeffs = [Fraction(1, 3), Fraction(2, 7), Fraction(-5, 11), Fraction(1, 13)]
    whole = phasor.phase_block(coeffs, 1, 20001)
    parts = np.concatenate([phasor.phase_block(coeffs, a, a + 1234) for a in range(1, 20001, 1234)])
    # both are within a few grid units of the exact phase
    diff = (whole.astype(np.int64) - parts[:20000].astype(np.int64))
    assert np.max(np.abs(diff)) < 2 ** 30


def test_dyadic_coefficients_are_exact():
    coeffs = [Fraction(1, 2 ** 5), Fraction(3, 2 ** 40), Fraction(5, 2 ** 53), Fraction(1, 2 ** 61)]
    ph = phasor.phase_block(coeffs, 10 ** 6, 10 ** 6 + 5000)
    for i in (0, 1, 4095, 4096, 4999):
        exact = phasor.horner_mod1(coeffs, 10 ** 6 + i)
        assert int(ph[i]) == exact * phasor.PHASE_ONE


def test_degree_six_weyl_average_against_horner():
    mu = mobius_sequence(200_000)
    coeffs = [Fraction(float(c)) for c in np.random.default_rng(3).random(7)]
    fast = weyl_average(mu, coeffs, 200_000)
    c = mu.values(200_000)
    slow = 0j
    for a in range(1, 200_001, 50_000):
        b = a + 50_000
        ns = np.arange(a, b, dtype=object)
        ph = np.array([float(phasor.horner_mod1(coeffs, int(n))) for n in ns])
        slow += np.sum(c[a - 1:b - 1] * np.exp(2j * np.pi * ph))
    assert abs(fast - slow / 200_000) < 1e-10


def test_phases_to_float_range():
    ph = np.array([0, 2 ** 63, 2 ** 64 - 1], dtype=np.uint64)
    f = phasor.phases_to_float(ph)
    assert f[0] == 0 and f[1] == 0.5 and f[2] < 1


def test_constant_polynomial():
    assert np.allclose(phasor.unit_block([Fraction(1, 4)], 1, 10), 1j)
    assert np.allclose(phasor.unit_block([], 1, 10), 1)
