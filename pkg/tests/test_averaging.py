from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.averaging import (ChowlaPattern, arithmetic_oscillation_test, cesaro_disjointness,
                              chain_binomial_phase, chowla_patterns, chowla_test,
                              mean_attraction_estimate, oscillation_order_test,
                              quasi_eigen_crosscheck, sample_phase_polynomials, weyl_average,
                              weyl_series)
from osclab.polynomial import Poly
from osclab.seqgen import (alternating_sequence, constant_sequence, from_array, mobius_sequence,
                           phase_sequence)
from osclab.torus import (AffineMap, DimensionError, SimplePolySkew, TorusPoint, TrigPolynomial)

F = Fraction


@pytest.fixture(scope="module")
def mu():
    return mobius_sequence(10 ** 6)


def test_weyl_trivial_cases():
    assert weyl_average(constant_sequence(), [0], 1000) == 1
    assert weyl_average(alternating_sequence(), [0, F(1, 2)], 1001) == pytest.approx(1, abs=1e-12)


def test_weyl_mobius_linear_phase(mu):
    assert abs(weyl_average(mu, [0, 0.7071067811865476], 10 ** 6)) < 0.02


def test_sampler_shape():
    samples = sample_phase_polynomials(3, 16, seed=0)
    assert len(samples) == 20
    assert all(s.poly.degree <= 3 for s in samples)
    assert [s.label for s in samples[:4]] == ["zero", "half_lead", "golden", "small_rational"]
    assert samples[1].poly == Poly([0, 0, 0, F(1, 2)])


def test_oscillation_constant_sequence_fails():
    rep = oscillation_order_test(constant_sequence(), 1, [10 ** 4], 0.02)
    assert not rep.passed
    assert abs(rep.series[0].final) == 1
    assert rep.verdicts[0] is False


def test_oscillation_quadratic_resonance():
    theta = "sqrt(2) - 1"
    seq = phase_sequence(["0", "0", theta])
    neg = Poly([0, 0, -seq_theta_fraction(theta)])
    rep = oscillation_order_test(seq, 2, [1000, 10 ** 4], 0.02, extra=[neg])
    assert abs(rep.series[-1].final) == pytest.approx(1, abs=1e-9)
    assert not rep.passed


def seq_theta_fraction(text):
    from osclab.reals import parse_real
    return parse_real(text).fraction()


def test_mobius_order_three_battery(mu):
    rep = oscillation_order_test(mu, 3, [10 ** 4, 10 ** 5, 10 ** 6], 0.02)
    assert rep.passed
    assert all(s.poly.degree <= 3 for s in rep.samples)


def test_inconclusive_trend_flag():
    rep = oscillation_order_test(constant_sequence(), 1, [10, 100], 0.02, n_random=0)
    assert rep.inconclusive[0]  # |S_N| = 1 at both checkpoints


def test_arith_half_of_indices():
    rep = arithmetic_oscillation_test(constant_sequence(), 1, 2, [1000], 0.02, n_random=0)
    zero = rep.values[0]
    assert zero[(2, 0)][-1] == pytest.approx(0.5)
    assert zero[(1, 0)][-1] == 1


def test_arith_partition_and_k1_reduction(mu):
    rep = arithmetic_oscillation_test(mu, 2, 4, [10 ** 4, 10 ** 5], 0.02, n_random=4)
    osc = oscillation_order_test(mu, 2, [10 ** 4, 10 ** 5], 0.02, n_random=4)
    for per, ser in zip(rep.values, osc.series):
        assert np.array_equal(per[(1, 0)], ser.values)
        for k in range(2, 5):
            total = sum(per[(k, l)] for l in range(k))
            assert np.allclose(total, per[(1, 0)], rtol=0, atol=1e-15)


def test_chowla_alternating():
    seq = alternating_sequence()
    r1, r2, sq = chowla_test(seq, [ChowlaPattern((0,), (1,)), ChowlaPattern((0, 1), (1, 1)),
                                   ChowlaPattern((0,), (2,))], 1000)
    assert r1.value == 0
    assert r2.value == -1
    assert sq.excluded


def test_chowla_single_equals_weyl_zero(mu):
    (res,) = chowla_test(mu, [ChowlaPattern((0,), (1,))], 10 ** 5)
    assert res.value == weyl_average(mu, [0], 10 ** 5)


def test_chowla_pattern_validation_and_count():
    with pytest.raises(ValueError):
        ChowlaPattern((1, 1), (1, 1))
    with pytest.raises(ValueError):
        ChowlaPattern((0,), (0,))
    assert len(chowla_patterns(2, 3, 2)) == 32


def test_disjointness_rotation_control():
    alpha = "sqrt(2) - 1"
    s = cesaro_disjointness(phase_sequence(["0", alpha]), AffineMap.rotation(alpha), (-1,),
                            TorusPoint.of(0), [1, 10, 1000, 10 ** 5])
    assert np.allclose(s.values, 1, atol=1e-10)
    assert np.array_equal(s.magnitude, np.abs(s.values))


def test_disjointness_zero_observable(mu):
    flow = SimplePolySkew(2, 2, F(1, 4), (Poly([0, 0, 1]),))
    s = cesaro_disjointness(mu, flow, TrigPolynomial({}, 2), TorusPoint.zero(2), [100, 1000])
    assert np.all(s.values == 0)


def test_disjointness_routes_agree(mu):
    flow = SimplePolySkew(2, 2, F(1, 4) + F(1, 2 ** 30), (Poly([0, 1, 1]),))
    obs = TrigPolynomial({(1, 1): 1.0, (2, -1): 0.5j})
    x = TorusPoint.of("1/3", "1/7")
    a = cesaro_disjointness(mu, flow, obs, x, [500, 3000], method="phase")
    b = cesaro_disjointness(mu, flow, obs, x, [500, 3000], method="orbit")
    assert np.allclose(a.values, b.values, atol=1e-12)


def test_disjointness_linear(mu):
    flow = SimplePolySkew(2, 2, F(1, 4) + F(1, 2 ** 20), (Poly([0, 0, 1]),))
    x = TorusPoint.zero(2)
    phi, psi = TrigPolynomial({(1, 1): 1}), TrigPolynomial({(0, 1): 1, (3, 0): -2})
    a, b = 0.3 - 2j, 1.7
    cps = [10 ** 3, 10 ** 5]
    lhs = cesaro_disjointness(mu, flow, phi.scale(a) + psi.scale(b), x, cps).values
    rhs = a * cesaro_disjointness(mu, flow, phi, x, cps).values + \
        b * cesaro_disjointness(mu, flow, psi, x, cps).values
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-12)


def test_disjointness_dimension_checks(mu):
    flow = SimplePolySkew(2, 2, F(1, 4), (Poly([0, 0, 1]),))
    with pytest.raises(DimensionError):
        cesaro_disjointness(mu, flow, (1, 1, 1), TorusPoint.zero(2), [10])
    with pytest.raises(DimensionError):
        cesaro_disjointness(mu, flow, (1, 1), TorusPoint.zero(3), [10])


def test_mma_examples():
    rot = AffineMap.rotation("sqrt(3)")
    x, z = TorusPoint.of("1/10"), TorusPoint.of("3/4")
    s = mean_attraction_estimate(rot, x, z, [1, 10, 100])
    assert np.allclose(s.values.real, 0.35)
    assert np.all(mean_attraction_estimate(rot, x, x, [5, 50]).values == 0)
    anzai = AffineMap(((1, 0), (1, 1)), ("sqrt(2)-1", 0))
    s = mean_attraction_estimate(anzai, TorusPoint.of(0, "0.9"), TorusPoint.of(0, 0), [10, 1000])
    assert np.allclose(s.values.real, 0.1)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.fractions(0, 1, max_denominator=30), min_size=2, max_size=2),
       st.lists(st.fractions(0, 1, max_denominator=30), min_size=2, max_size=2))
def test_mma_symmetric(x, z):
    flow = SimplePolySkew(2, 2, F(1, 5), (Poly([0, 1, 1]),))
    a = mean_attraction_estimate(flow, TorusPoint(tuple(x)), TorusPoint(tuple(z)), [5, 40])
    b = mean_attraction_estimate(flow, TorusPoint(tuple(z)), TorusPoint(tuple(x)), [5, 40])
    assert np.array_equal(a.values, b.values)
    assert (a.values[-1] == 0) == (x == z)


def test_qds_rotation_and_anzai():
    z1 = TorusPoint.of("1/3")
    rot = AffineMap.chain(1, "sqrt(2)-1")
    th = chain_binomial_phase(rot, z1)
    assert th.thetas == (F(1, 3), rot.a[0])
    assert quasi_eigen_crosscheck(th, rot, z1, 1000) < 1e-12
    anzai = AffineMap.chain(2, "(sqrt(5)-1)/2")
    z = TorusPoint.of("1/5", "2/7")
    th = chain_binomial_phase(anzai, z)
    assert th.thetas == (F(2, 7), F(1, 5), anzai.a[0])
    assert quasi_eigen_crosscheck(th, anzai, z, 10 ** 4) < 1e-9


def test_qds_trivial_and_rejection():
    flow = AffineMap.chain(3, 0)
    assert quasi_eigen_crosscheck([0, 0, 0, 0], flow, TorusPoint.zero(3), 100) == 0
    with pytest.raises(ValueError):
        quasi_eigen_crosscheck([0, 0], AffineMap(((1, 0), (2, 1)), (0, 0)), TorusPoint.zero(2), 10)


def test_checkpoint_validation():
    with pytest.raises(ValueError):
        weyl_series(constant_sequence(), [0], [10, 10])
    with pytest.raises(ValueError):
        weyl_series(constant_sequence(), [0], [0])


def test_thread_count_does_not_change_results(mu):
    a = oscillation_order_test(mu, 2, [10 ** 4, 10 ** 5], 0.02, threads=1)
    b = oscillation_order_test(mu, 2, [10 ** 4, 10 ** 5], 0.02, threads=4)
    assert [r.as_list() for r in a.rows()] == [r.as_list() for r in b.rows()]
