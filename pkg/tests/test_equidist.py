from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from osclab.equidist import (KoksmaConfig, PointSample1D, frac_parts, koksma_experiment,
                             pattern_phases, sample_betas, star_discrepancy,
                             star_discrepancy_bruteforce, weyl_criterion_battery)
from osclab.averaging import ChowlaPattern
from osclab.seqgen import ExpBetaSpec

unit = st.floats(0, 1, exclude_max=True, allow_nan=False)


def test_single_point():
    s = PointSample1D([0.5])
    assert star_discrepancy(s) == 0.5 == star_discrepancy_bruteforce(s)


@pytest.mark.parametrize("N", [1, 7, 100, 1000])
def test_centered_grid(N):
    assert star_discrepancy(PointSample1D.centered_grid(N)) == pytest.approx(1 / (2 * N), abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(unit, min_size=1, max_size=300))
def test_fast_equals_bruteforce(xs):
    s = PointSample1D(xs)
    assert star_discrepancy(s) == star_discrepancy_bruteforce(s)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-9, 1 - 1e-9), min_size=1, max_size=200),
       st.randoms(use_true_random=False))
def test_permutation_and_reflection(xs, rnd):
    d = star_discrepancy(PointSample1D(xs))
    ys = xs[:]
    rnd.shuffle(ys)
    assert star_discrepancy(PointSample1D(ys)) == d
    refl = [1 - x for x in xs]
    assert abs(star_discrepancy(PointSample1D(refl)) - d) <= 1 / len(xs) + 1e-15


def test_bruteforce_guard_and_empty():
    with pytest.raises(ValueError):
        star_discrepancy_bruteforce(PointSample1D(np.zeros(5001)))
    with pytest.raises(ValueError):
        star_discrepancy(PointSample1D([]))
    with pytest.raises(ValueError):
        PointSample1D([1.0])


def test_weyl_battery_examples():
    half = PointSample1D((np.arange(1, 101) * 0.5) % 1.0)
    assert weyl_criterion_battery(half, 2).magnitudes[1] == pytest.approx(1)
    N = 64
    grid = PointSample1D(np.arange(N) / N)
    assert weyl_criterion_battery(grid, N - 1).max < 1e-12
    golden = PointSample1D((np.arange(1, 10 ** 4 + 1) * 0.6180339887498949) % 1.0)
    assert weyl_criterion_battery(golden, 3).max < 1e-3


def test_weyl_battery_uses_exact_phases():
    ph = np.array([2 ** 62, 2 ** 63, 3 * 2 ** 62, 0], dtype=np.uint64)
    b = weyl_criterion_battery(PointSample1D.from_phases(ph), 4)
    assert b.magnitudes == pytest.approx([0, 0, 0, 1], abs=1e-15)


def test_frac_parts_examples():
    assert np.all(frac_parts(ExpBetaSpec(1, 2), 20).values == 0)
    assert frac_parts(ExpBetaSpec(1, "3/2"), 4).values.tolist() == [0.5, 0.25, 0.375, 0.0625]


def test_koksma_exceptional_betas():
    cfg = KoksmaConfig(betas=["2", "(1+sqrt(5))/2"], N=500)
    rep = koksma_experiment(cfg)
    two, phi = rep.betas
    assert two.rows[0].discrepancy == 1.0 and not two.passed
    assert phi.rows[0].discrepancy > 0.3 and not phi.passed


def test_koksma_pattern_combination():
    base = np.array([1, 2, 3, 4, 5], dtype=np.uint64) << np.uint64(60)
    got = pattern_phases(base, ChowlaPattern((0, 2), (1, 3)), 3)
    want = [(int(base[i]) + 3 * int(base[i + 2])) % 2 ** 64 for i in range(3)]
    assert got.tolist() == want


def test_sample_betas_dyadic_in_range():
    bs = sample_betas(Fraction(11, 10), Fraction(3), 100, seed=5)
    assert all(Fraction(11, 10) <= b < 3 for b in bs)
    assert all(b.denominator <= 2 ** 64 for b in bs)
    assert bs == sample_betas(Fraction(11, 10), Fraction(3), 100, seed=5)


def test_koksma_deterministic_across_threads():
    cfg = KoksmaConfig(samples=12, N=600, patterns=[((0,), (1,)), ((0, 1), (1, 2))])
    a = koksma_experiment(cfg, seed=3, threads=1)
    b = koksma_experiment(cfg, seed=3, threads=3)
    assert [r.as_list() for r in a.rows] == [r.as_list() for r in b.rows]
    assert a.summary() == b.summary()


def test_koksma_skips_over_budget():
    rep = koksma_experiment(KoksmaConfig(betas=["2.9"], N=3000, precision_ceiling=1000))
    assert rep.skipped == 1 and rep.pass_fraction == 0
    assert rep.rows[0].as_list()[-1] == "skipped"


def test_koksma_config_validation():
    with pytest.raises(ValueError):
        KoksmaConfig(beta_interval=("0.9", "2"))
    with pytest.raises(ValueError):
        KoksmaConfig(samples=0)
