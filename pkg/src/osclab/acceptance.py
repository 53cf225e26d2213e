"""Acceptance battery: twelve pinned checks with fixed seeds and tolerances.

Each check returns a :class:`CriterionResult` whose ``rows`` are the
deterministic part of its report; timings are kept out of the rows so that
reruns can be compared byte for byte.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import phasor
from .averaging import (arithmetic_oscillation_test, cesaro_disjointness, chain_binomial_phase,
                        chowla_patterns, chowla_test, oscillation_order_test,
                        quasi_eigen_crosscheck)
from .equidist import (KoksmaConfig, PointSample1D, koksma_experiment, star_discrepancy,
                       star_discrepancy_bruteforce)
from .orbitpoly import expand_orbit_general, expand_orbit_simple, lifted_orbit
from .polynomial import MultiPoly, Poly
from .reals import frac_str, parse_real
from .reports import csv_text
from .seqgen import ExpBetaSpec, from_array, frac_kernel, mobius_sequence, phase_sequence
from .torus import (AffineMap, GeneralPolySkew, SimplePolySkew, TorusPoint, det,
                    integer_inverse, is_lower_unitriangular, mat_mul, unipotent_triangularize)

MOBIUS_N = 10 ** 6
SCHEDULE = (10 ** 4, 10 ** 5, 10 ** 6)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    limit: float | None = None
    rows: list = field(default_factory=list)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        lim = f" limit {self.limit:.0f} s" if self.limit else ""
        return f"criterion {self.number:2d} [{tag}] {self.title}: {self.detail} ({self.elapsed:.1f} s{lim})"

    def report(self) -> str:
        return csv_text(["criterion", "item", "value", "ok"], self.rows)


def _rand_frac(rng, lim=9, den=7) -> Fraction:
    return Fraction(int(rng.integers(-lim, lim + 1)), int(rng.integers(1, den + 1)))


def _rand_point(rng, d) -> TorusPoint:
    return TorusPoint(tuple(_rand_frac(rng) for _ in range(d)))


def _matches(expansion, flow, x, n_max) -> bool:
    lifts = lifted_orbit(flow, x, n_max)
    return all(tuple(P(Fraction(n)) for P in expansion.polys) == lifts[n] for n in range(n_max + 1))


def random_simple_skew(rng) -> SimplePolySkew:
    d = int(rng.choice([2, 3, 4]))
    k = int(rng.choice([2, 3]))
    h = []
    for _ in range(2, d + 1):
        cs = [_rand_frac(rng) for _ in range(k + 1)]
        if cs[-1] == 0:
            cs[-1] = Fraction(1)
        h.append(Poly(cs))
    b = {}
    for i in range(3, d + 1):
        for j in range(2, i):
            if rng.random() < 0.5:
                b[(i, j)] = Fraction(int(rng.integers(-3, 4)))
    return SimplePolySkew(d, k, _rand_frac(rng), tuple(h), b)


def random_general_skew(rng, k: int = 2) -> GeneralPolySkew:
    d = int(rng.choice([2, 3, 4]))
    hs = []
    for i in range(2, d + 1):
        m = i - 1
        terms = {}
        for exps in itertools.product(range(k + 1), repeat=m):
            if sum(exps) <= k and rng.random() < 0.5:
                terms[exps] = _rand_frac(rng)
        top = [0] * m
        top[int(rng.integers(0, m))] = k
        if terms.get(tuple(top), 0) == 0:
            terms[tuple(top)] = Fraction(1)
        hs.append(MultiPoly.from_dict(m, terms))
    return GeneralPolySkew(d, k, _rand_frac(rng), tuple(hs))


def criterion_1(seed: int = 0, threads: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok_all = [], True
    for idx in range(100):
        flow = random_simple_skew(rng)
        x = _rand_point(rng, flow.d)
        try:
            exp = expand_orbit_simple(flow, x)
            ok = _matches(exp, flow, x, 50) and exp.within_bounds
            item = f"d={flow.d} k={flow.k} deg={list(exp.attained)} bound={list(exp.bounds)}"
        except AssertionError as err:
            ok, item = False, str(err)
        ok_all &= ok
        rows.append(["1", str(idx), item, str(ok)])
    return CriterionResult(1, "simple skew orbit degree law", ok_all,
                           f"{sum(r[3] == 'True' for r in rows)}/100 flows exact and within i+k-1",
                           limit=60, rows=rows)


def criterion_2(seed: int = 0, threads: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, matched, bounded = [], 0, 0
    for idx in range(50):
        flow = random_general_skew(rng)
        x = _rand_point(rng, flow.d)
        exp = expand_orbit_general(flow, x)
        m = _matches(exp, flow, x, 60)
        matched += m
        bounded += exp.within_bounds
        rows.append(["2", str(idx),
                     f"d={flow.d} deg={list(exp.attained)} bound={list(exp.bounds)}",
                     str(m and exp.within_bounds)])
    return CriterionResult(2, "general skew orbit degree bound", matched == 50 and bounded == 50,
                           f"exact match {matched}/50, within k^(i-1)+1 {bounded}/50",
                           limit=120, rows=rows)


def _weyl_rows(report, test):
    return [[test] + r.as_list() for r in report.rows()]


def criterion_3(seed: int = 0, threads: int = 1) -> CriterionResult:
    mu = mobius_sequence(MOBIUS_N)
    rep = oscillation_order_test(mu, 3, SCHEDULE, 0.02, seed=seed, threads=threads)
    mx = rep.max_by_checkpoint()
    mono = bool(np.all(np.diff(mx) <= 0))
    rows = [["3", r.param, f"N={r.N} abs={abs(r.value):.17g}", r.verdict] for r in rep.rows()]
    rows.append(["3", "max_by_N", ";".join(f"{v:.17g}" for v in mx), str(mono)])
    return CriterionResult(3, "Mobius oscillation of order 3", rep.passed and mono,
                           f"max|S_N| by N = {', '.join(f'{v:.2e}' for v in mx)}; "
                           f"all < 0.02: {rep.passed}; non-increasing: {mono}",
                           limit=300, rows=rows)


def criterion_4(seed: int = 0, threads: int = 1) -> CriterionResult:
    mu = mobius_sequence(MOBIUS_N)
    rep = arithmetic_oscillation_test(mu, 3, 4, [MOBIUS_N], 0.02, seed=seed, threads=threads)
    rows = [["4", f"{r.param} k={r.k} l={r.l}", f"abs={abs(r.value):.17g}", r.verdict]
            for r in rep.rows()]
    return CriterionResult(4, "Mobius oscillation along progressions", rep.passed,
                           f"max|S_N| = {rep.max_final():.2e} over k <= 4", limit=600, rows=rows)


def disjointness_demo_flow() -> SimplePolySkew:
    a = parse_real("1/4 + 2**-20*sqrt(2)")
    return SimplePolySkew(2, 2, a.fraction(), (Poly([0, 0, 1]),), exact=False)


def criterion_5(seed: int = 0, threads: int = 1) -> CriterionResult:
    mu = mobius_sequence(MOBIUS_N)
    s = cesaro_disjointness(mu, disjointness_demo_flow(), (1, 1), TorusPoint.of(0, 0), SCHEDULE)
    final = abs(s.final)
    rows = [["5", f"N={N}", f"{v.real:.17g},{v.imag:.17g}", ""] for N, v in zip(s.checkpoints, s.values)]
    rows[-1][3] = str(final < 0.02)
    return CriterionResult(5, "Mobius against a skew product", final < 0.02,
                           f"|S_N| = {', '.join(f'{m:.2e}' for m in s.magnitude)}", rows=rows)


def criterion_6(seed: int = 0, threads: int = 1) -> CriterionResult:
    alpha = "sqrt(2) - 1"
    seq = phase_sequence(["0", alpha])
    cps = (1, 10, 100, 1000, 10 ** 4, 10 ** 5, 10 ** 6)
    s = cesaro_disjointness(seq, AffineMap.rotation(alpha), (-1,), TorusPoint.of(0), cps)
    dev = float(np.max(np.abs(s.values - 1)))
    rows = [["6", f"N={N}", f"{v.real:.17g},{v.imag:.17g}", ""] for N, v in zip(s.checkpoints, s.values)]
    return CriterionResult(6, "rotation negative control", dev < 1e-10,
                           f"max |S_N - 1| = {dev:.1e}", rows=rows)


def criterion_7(seed: int = 0, threads: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok_all = [], True
    for idx in range(50):
        N = int(rng.integers(1, 2001))
        vals = rng.random(N)
        if idx % 5 == 0:
            vals = np.round(vals * 64) / 64 % 1.0  # ties
        s = PointSample1D(vals)
        fast, slow = star_discrepancy(s), star_discrepancy_bruteforce(s)
        ok = fast == slow
        ok_all &= ok
        rows.append(["7", f"N={N}", f"{fast:.17g}", str(ok)])
    return CriterionResult(7, "discrepancy formula vs brute force", ok_all,
                           f"{sum(r[3] == 'True' for r in rows)}/50 exactly equal", limit=30, rows=rows)


def lucas_frac(n: int, bits: int = 256) -> Fraction:
    """``frac(phi**n)`` from ``phi**n + psi**n = L_n``, to ``2**-bits``."""
    # |psi| = (sqrt5 - 1) / 2 in fixed point; error ~ n ulps
    one = 1 << bits
    s5 = math.isqrt(5 << (2 * bits))
    apsi = (s5 - one) // 2
    p = one
    for _ in range(n):
        p = p * apsi >> bits
    v = Fraction(p, one)
    return v if n % 2 else (1 - v) % 1


def criterion_8(seed: int = 0, threads: int = 1) -> CriterionResult:
    spec = ExpBetaSpec(1, "(1 + sqrt(5))/2")
    fr = frac_kernel(spec, 500).as_fractions()
    tol = Fraction(1, 1 << 64)
    worst = Fraction(0)
    for n in range(1, 501):
        dv = (fr[n - 1] - lucas_frac(n)) % 1
        worst = max(worst, min(dv, 1 - dv))
    rows = [["8", "max_circle_error", f"{float(worst):.6e}", str(worst <= tol)]]
    return CriterionResult(8, "golden ratio powers vs Lucas numbers", worst <= tol,
                           f"max error {float(worst):.1e} (tol 2^-64)", rows=rows)


def criterion_9(seed: int = 0, threads: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, worst = [], 0.0
    for d in range(1, 5):
        for alpha in ("sqrt(2) - 1", "1/7", "(sqrt(5)-1)/2"):
            flow = AffineMap.chain(d, alpha)
            z = _rand_point(rng, d)
            theta = chain_binomial_phase(flow, z)
            dev = quasi_eigen_crosscheck(theta, flow, z, 10 ** 4)
            worst = max(worst, dev)
            rows.append(["9", f"d={d} alpha={alpha}", f"{dev:.3e}", str(dev < 1e-9)])
    return CriterionResult(9, "quasi-eigenfunction binomial phases", worst < 1e-9,
                           f"max deviation {worst:.1e} up to n = 10^4", rows=rows)


def random_unimodular(rng, d: int, bound: int = 5, steps: int | None = None):
    Q = [[int(i == j) for j in range(d)] for i in range(d)]
    for _ in range(steps or 4 * d):
        i, j = rng.choice(d, size=2, replace=False)
        c = int(rng.choice([-2, -1, 1, 2]))
        cand = [row[:] for row in Q]
        cand[i] = [a + c * b for a, b in zip(cand[i], cand[j])]
        if max(abs(v) for row in cand for v in row) <= bound:
            Q = cand
    perm = rng.permutation(d)
    return tuple(tuple(Q[int(p)]) for p in perm)


def criterion_10(seed: int = 0, threads: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok_all = [], True
    for idx in range(50):
        d = int(rng.integers(2, 6))
        L = tuple(tuple(1 if i == j else (int(rng.integers(-5, 6)) if j < i else 0)
                        for j in range(d)) for i in range(d))
        Q = random_unimodular(rng, d)
        A = mat_mul(mat_mul(Q, L), integer_inverse(Q))
        P = unipotent_triangularize(A)
        B = mat_mul(mat_mul(integer_inverse(P), A), P)
        ok = det(P) == 1 and is_lower_unitriangular(B)
        ok_all &= ok
        rows.append(["10", f"d={d}", repr(P), str(ok)])
    return CriterionResult(10, "unipotent triangularization", ok_all,
                           f"{sum(r[3] == 'True' for r in rows)}/50 exact", limit=10, rows=rows)


def criterion_11(seed: int = 0, threads: int = 1) -> CriterionResult:
    cfg = KoksmaConfig(alpha=1, g=(1,), beta_interval=("1.1", "3"), samples=200, N=4000)
    rep = koksma_experiment(cfg, seed=seed, threads=threads, keep_phases=True, tail=3)
    pats = chowla_patterns(2, 3, 2)
    rows = [["11", f"beta={r.beta}", f"D={r.discrepancy:.17g}", str(r.passed)] for r in rep.rows]
    bad, worst = 0, 0.0
    for b in rep.betas:
        if not b.base_discrepancy_passed:
            continue
        seq = from_array(phasor.phases_to_unit(b.phases))
        for res in chowla_test(seq, pats, cfg.N, threads=threads):
            if res.excluded:
                continue
            m = abs(res.value)
            worst = max(worst, m)
            if m >= 0.05:
                bad += 1
                rows.append(["11", f"beta={float(b.beta):.17g} {res.pattern.label()}", f"{m:.17g}", "False"])
    frac = rep.discrepancy_pass_fraction
    ok = frac >= 0.9 and bad == 0
    rows.append(["11", "discrepancy_pass_fraction", f"{frac:.6f}", str(frac >= 0.9)])
    rows.append(["11", "chowla_max", f"{worst:.17g}", str(bad == 0)])
    return CriterionResult(11, "Koksma sampling and Chowla correlations", ok,
                           f"D* pass fraction {frac:.3f}; Chowla max |avg| {worst:.4f}, "
                           f"{bad} above 0.05", limit=600, rows=rows)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}


def run_criterion(number: int, seed: int = 0, threads: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    res = CRITERIA[number](seed=seed, threads=threads)
    res.elapsed = time.perf_counter() - t0
    if res.limit is not None and res.elapsed >= res.limit:
        res.passed = False
        res.detail += f"; runtime {res.elapsed:.1f} s over {res.limit:.0f} s"
    return res


def criterion_12(first: dict[int, CriterionResult], seed: int = 0, threads: int = 4) -> CriterionResult:
    """Rerun the given criteria with another thread count and compare reports byte for byte."""
    t0 = time.perf_counter()
    rows, same = [], True
    for number in sorted(first):
        again = CRITERIA[number](seed=seed, threads=threads)
        eq = again.report() == first[number].report()
        same &= eq
        rows.append(["12", str(number), str(len(first[number].report())), str(eq)])
    res = CriterionResult(12, "determinism across reruns and thread counts", same,
                          f"{sum(r[3] == 'True' for r in rows)}/{len(rows)} reports identical "
                          f"(threads {threads} vs first run)", rows=rows)
    res.elapsed = time.perf_counter() - t0
    return res


def run_all(numbers=None, seed: int = 0, threads: int = 1, echo=print) -> list[CriterionResult]:
    numbers = sorted(numbers or list(CRITERIA) + [12])
    results: dict[int, CriterionResult] = {}
    out = []
    for n in numbers:
        if n == 12:
            base = results or {m: run_criterion(m, seed, threads) for m in CRITERIA}
            res = criterion_12(base, seed, threads=4 if threads == 1 else 1)
        else:
            res = run_criterion(n, seed, threads)
            results[n] = res
        if echo:
            echo(res.line())
        out.append(res)
    return out
