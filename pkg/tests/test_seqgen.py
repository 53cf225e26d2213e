import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.reals import PrecisionBudgetError
from osclab.seqgen import (ExpBetaSpec, Kind, PrecisionPolicy, SequenceExhausted,
                           SequenceFormatError, alternating_sequence, check_growth_condition,
                           exp_beta_sequence, frac_kernel, linear_sequence, load_sequence,
                           mobius_sequence, mobius_sieve, parse_sequence_spec)


def mu_bruteforce(n):
    r, p = 0, 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            r += 1
        p += 1
    if n > 1:
        r += 1
    return (-1) ** r


@pytest.fixture(scope="module")
def mu_big():
    return mobius_sieve(10 ** 8)


def test_mobius_examples():
    mu = mobius_sieve(30)
    assert mu[1] == 1
    assert mu[4] == 0
    assert mu[6] == 1
    assert mu[30] == -1


def test_mobius_matches_factorization():
    mu = mobius_sieve(10 ** 4)
    assert [int(v) for v in mu[1:]] == [mu_bruteforce(n) for n in range(1, 10 ** 4 + 1)]


def test_mobius_multiplicative(mu_big):
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 500:
        m, n = (int(v) for v in rng.integers(1, 10 ** 4 + 1, size=2))
        if math.gcd(m, n) != 1:
            continue
        assert mu_big[m * n] == mu_big[m] * mu_big[n]
        checked += 1


def test_mobius_small_and_invalid():
    assert list(mobius_sieve(1)) == [0, 1]
    with pytest.raises(ValueError):
        mobius_sieve(0)


def test_mobius_sequence_values():
    seq = mobius_sequence(100)
    assert seq.kind == Kind.MOBIUS
    v = seq.values(100)
    assert set(np.unique(v.real)) <= {-1.0, 0.0, 1.0}
    with pytest.raises(SequenceExhausted):
        seq.block(1, 102)


def test_expbeta_integer_beta_gives_ones():
    seq = exp_beta_sequence(ExpBetaSpec(1, 2), 50)
    assert np.allclose(seq.values(50), 1)
    assert seq.unimodular


def test_expbeta_third_alternates():
    fr = frac_kernel(ExpBetaSpec(Fraction(1, 3), 2), 6).as_fractions()
    assert [round(float(f), 12) for f in fr] == [round(x, 12) for x in [2/3, 1/3] * 3]


def test_expbeta_three_halves_exact():
    fr = frac_kernel(ExpBetaSpec(1, "3/2"), 4).as_fractions()
    assert fr == [Fraction(1, 2), Fraction(1, 4), Fraction(3, 8), Fraction(1, 16)]


def lucas_frac(n, bits=256):
    one = 1 << bits
    apsi = (math.isqrt(5 << (2 * bits)) - one) // 2
    p = one
    for _ in range(n):
        p = p * apsi >> bits
    v = Fraction(p, one)
    return v if n % 2 else (1 - v) % 1


def test_golden_ratio_lucas_oracle():
    fr = frac_kernel(ExpBetaSpec(1, "(1+sqrt(5))/2"), 500).as_fractions()
    for n in (1, 2, 3, 10, 77, 93, 250, 500):
        d = (fr[n - 1] - lucas_frac(n)) % 1
        assert min(d, 1 - d) <= Fraction(1, 2 ** 64)


@settings(max_examples=15, deadline=None)
@given(st.integers(11, 29), st.integers(1, 9))
def test_precision_doubling_agrees(b10, a):
    spec = ExpBetaSpec(Fraction(a, 7), Fraction(b10, 10) + Fraction(1, 3 * 10 ** 6))
    base = frac_kernel(spec, 300)
    more = frac_kernel(spec, 300, extra_bits=base.working_bits)
    assert more.working_bits >= 2 * base.working_bits - 64
    for x, y in zip(base.as_fractions(), more.as_fractions()):
        d = (x - y) % 1
        assert min(d, 1 - d) <= Fraction(1, 2 ** 64)


def test_precision_budget_error():
    spec = ExpBetaSpec(1, "1.5", precision=PrecisionPolicy(ceiling=500))
    with pytest.raises(PrecisionBudgetError, match="precision budget"):
        frac_kernel(spec, 10 ** 4)


def test_bits_for_monotone():
    pol = PrecisionPolicy()
    bits = [pol.bits_for(n, 1.7, 2.0) for n in range(0, 2000, 37)]
    assert bits == sorted(bits)


@pytest.mark.parametrize("kw", [dict(alpha=0, beta=2), dict(alpha=1, beta=1),
                                dict(alpha=1, beta="0.5"), dict(alpha=1, beta=2, g=(1, -1))])
def test_expbeta_spec_validation(kw):
    with pytest.raises(ValueError):
        ExpBetaSpec(**kw)


def test_growth_certificates():
    assert check_growth_condition(alternating_sequence(), lam=2, n_max=500).c_bound == 1.0
    assert check_growth_condition(alternating_sequence(), lam=7.5, n_max=500).c_bound == 1.0
    cert = check_growth_condition(mobius_sequence(10 ** 6), 2, 10 ** 6)
    assert cert.c_bound <= 1 and not cert.diverging
    assert check_growth_condition(linear_sequence(), 2, 1000).diverging
    with pytest.raises(ValueError):
        check_growth_condition(alternating_sequence(), lam=1)


def test_load_pairs(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("1,0\n-1,0\n1,0\n-1,0\n")
    seq = load_sequence(p)
    assert seq.unimodular
    assert list(seq.values(4).real) == [1, -1, 1, -1]


def test_load_phase_with_header(tmp_path):
    p = tmp_path / "s.txt"
    p.write_text("# n0=0\nphase:0.5\nphase:0.25\n")
    seq = load_sequence(p)
    assert seq.block(0, 2) == pytest.approx([-1, 1j])


def test_load_errors(tmp_path):
    empty = tmp_path / "e.txt"
    empty.write_text("")
    with pytest.raises(SequenceFormatError):
        load_sequence(empty)
    bad = tmp_path / "b.txt"
    bad.write_text("1,0\nNaN,0\n")
    with pytest.raises(SequenceFormatError) as info:
        load_sequence(bad)
    assert info.value.lineno == 2


def test_parse_sequence_spec():
    assert parse_sequence_spec("mobius", 10).values(6)[5] == 1
    assert parse_sequence_spec("alternating", 10).values(2).tolist() == [-1, 1]
    rot = parse_sequence_spec("rotation:1/4", 10)
    assert rot.values(1)[0] == pytest.approx(1j)
    eb = parse_sequence_spec("expbeta:1:3/2:1,1", 10)
    assert eb.meta["spec"].g == (1, 1)
    with pytest.raises(ValueError):
        parse_sequence_spec("liouville", 10)
