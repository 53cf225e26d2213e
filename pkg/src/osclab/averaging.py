"""Cesàro averages: disjointness, Weyl sums, progressions, Chowla, mean attraction."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from . import phasor
from .orbitpoly import BinomialPhase, compose_phase, expand_orbit
from .polynomial import Poly
from .reals import Number, parse_real
from .seqgen import ComplexSequence
from .torus import (AffineMap, DimensionError, Flow, GeneralPolySkew, SimplePolySkew,
                    TorusPoint, TrigPolynomial, as_trigpoly, is_unipotent, step,
                    torus_distance, trigpoly_eval)

BLOCK = phasor.RESYNC


def _fmt(x: float) -> str:
    return f"{x:.17g}"


@dataclass
class ReportRow:
    test: str
    sequence: str
    flow: str = ""
    observable: str = ""
    param: str = ""
    k: int | str = ""
    l: int | str = ""
    N: int = 0
    value: complex = 0j
    threshold: float | None = None
    verdict: str = ""

    COLUMNS = ("test", "sequence", "flow", "observable", "param", "k", "l", "N",
               "re", "im", "abs", "threshold", "verdict")

    def as_list(self) -> list[str]:
        thr = "" if self.threshold is None else _fmt(self.threshold)
        return [self.test, self.sequence, self.flow, self.observable, self.param,
                str(self.k), str(self.l), str(self.N), _fmt(self.value.real),
                _fmt(self.value.imag), _fmt(abs(self.value)), thr, self.verdict]


def _verdict(value: complex, threshold: float | None) -> str:
    if threshold is None:
        return ""
    return "pass" if abs(value) < threshold else "fail"


class _Neumaier:
    """Compensated complex accumulator."""

    __slots__ = ("re", "im", "cre", "cim")

    def __init__(self):
        self.re = self.im = self.cre = self.cim = 0.0

    def add(self, z: complex):
        self.re, self.cre = self._step(self.re, self.cre, z.real)
        self.im, self.cim = self._step(self.im, self.cim, z.imag)

    @staticmethod
    def _step(s, c, x):
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        return t, c

    @property
    def value(self) -> complex:
        return complex(self.re + self.cre, self.im + self.cim)


def _checkpoints(checkpoints) -> tuple[int, ...]:
    cps = tuple(int(c) for c in (checkpoints if isinstance(checkpoints, Iterable) else [checkpoints]))
    if not cps or any(c < 1 for c in cps) or any(b <= a for a, b in zip(cps, cps[1:])):
        raise ValueError("checkpoints must be positive and strictly increasing")
    return cps


def _stream(term_fn: Callable[[int, int], np.ndarray], checkpoints: Sequence[int],
            residues: Sequence[tuple[int, int]] = ((1, 0),)) -> dict[tuple[int, int], list[complex]]:
    """Running sums of ``term_fn`` over ``n = 1..N`` emitted at each checkpoint.

    ``residues`` lists ``(k, l)`` progressions ``n = l mod k`` to sum
    separately; ``(1, 0)`` is the full sum.  Returns raw (unnormalized) sums.
    """
    accs = {r: _Neumaier() for r in residues}
    out: dict[tuple[int, int], list[complex]] = {r: [] for r in residues}
    pos = 1
    for cp in checkpoints:
        while pos <= cp:
            stop = min(pos + BLOCK, cp + 1)
            terms = term_fn(pos, stop)
            for (k, l), acc in accs.items():
                first = (l - pos) % k
                acc.add(complex(terms[first::k].sum()))
            pos = stop
        for r, acc in accs.items():
            out[r].append(acc.value)
    return out


@dataclass
class CesaroSeries:
    """Averages ``S_N`` at increasing checkpoints."""

    checkpoints: tuple[int, ...]
    values: np.ndarray
    label: str = ""

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def final(self) -> complex:
        return complex(self.values[-1])

    def at(self, N: int) -> complex:
        return complex(self.values[self.checkpoints.index(N)])


def _series(sums: list[complex], cps: Sequence[int], label="") -> CesaroSeries:
    return CesaroSeries(tuple(cps), np.array([s / n for s, n in zip(sums, cps)], dtype=np.complex128),
                        label)


def _phase_terms(seq: ComplexSequence, P: Poly):
    coeffs = list(P.coeffs) or [Fraction(0)]
    if len(coeffs) == 1 and coeffs[0] == 0:
        return lambda a, b: seq.block(a, b)
    return lambda a, b: seq.block(a, b) * phasor.unit_block(coeffs, a, b)


def _as_poly(P) -> Poly:
    if isinstance(P, Poly):
        return P
    return Poly(parse_real(c).fraction() for c in P)


def weyl_series(seq: ComplexSequence, P, checkpoints) -> CesaroSeries:
    """``(1/N) sum_{n<=N} c_n e(P(n))`` at each checkpoint."""
    P = _as_poly(P)
    cps = _checkpoints(checkpoints)
    sums = _stream(_phase_terms(seq, P), cps)[(1, 0)]
    return _series(sums, cps, str(P))


def weyl_average(seq: ComplexSequence, P, N: int) -> complex:
    """``(1/N) sum_{n=1}^N c_n exp(2 pi i P(n))``.

    ``exp(2 pi i P(n))`` is generated by a finite-difference phasor chain
    re-seeded from exact evaluation every 4096 terms.
    """
    return weyl_series(seq, P, [N]).final


# --- polynomial samples ---------------------------------------------------

@dataclass(frozen=True)
class PhaseSample:
    label: str
    poly: Poly


def _golden_grid(j: int) -> Fraction:
    # frac((j+1) * phi) on the 2**-64 grid
    phi = parse_real("(1+sqrt(5))/2").fraction(128)
    v = (j + 1) * phi
    v -= math.floor(v)
    return Fraction(math.floor(v * (1 << 64)), 1 << 64)


def sample_phase_polynomials(d: int, n_random: int = 16, seed: int = 0) -> list[PhaseSample]:
    """Random and structured real polynomials of degree ``<= d``.

    Four structured cases (zero, ``n^d / 2``, golden-ratio coefficients,
    small rationals) followed by ``n_random`` polynomials with uniform
    coefficients in ``[0, 1)``.
    """
    out = [
        PhaseSample("zero", Poly()),
        PhaseSample("half_lead", Poly.monomial(d, Fraction(1, 2))),
        PhaseSample("golden", Poly(_golden_grid(j) for j in range(d + 1))),
        PhaseSample("small_rational", Poly(Fraction(1, j + 2) for j in range(d + 1))),
    ]
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        out.append(PhaseSample(f"random{i}", Poly(Fraction(float(c)) for c in rng.random(d + 1))))
    return out


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


@dataclass
class OscillationReport:
    """Weyl averages of one sequence against sampled phase polynomials."""

    sequence: str
    order_tested: int
    samples: list[PhaseSample]
    series: list[CesaroSeries]
    threshold: float
    progressions: dict = field(default_factory=dict)

    @property
    def final_N(self) -> int:
        return self.series[0].checkpoints[-1]

    @property
    def verdicts(self) -> list[bool]:
        return [abs(s.final) < self.threshold for s in self.series]

    @property
    def passed(self) -> bool:
        return all(self.verdicts)

    @property
    def inconclusive(self) -> list[bool]:
        """Samples whose magnitude does not decrease between checkpoints."""
        return [len(s.magnitude) > 1 and bool(np.all(np.diff(s.magnitude) >= 0)) for s in self.series]

    def max_by_checkpoint(self) -> np.ndarray:
        return np.max(np.array([s.magnitude for s in self.series]), axis=0)

    def rows(self, test: str = "weyl") -> list[ReportRow]:
        rows = []
        for smp, ser in zip(self.samples, self.series):
            for N, v in zip(ser.checkpoints, ser.values):
                last = N == ser.checkpoints[-1]
                rows.append(ReportRow(test, self.sequence, param=f"{smp.label}:{smp.poly.to_json()}",
                                      k=1, l=0, N=N, value=complex(v),
                                      threshold=self.threshold,
                                      verdict=_verdict(v, self.threshold) if last else ""))
        return rows


def oscillation_order_test(seq: ComplexSequence, d: int, checkpoints, threshold: float = 0.02,
                           n_random: int = 16, seed: int = 0, extra: Sequence = (),
                           threads: int = 1) -> OscillationReport:
    """Weyl averages against sampled polynomials of degree ``<= d``.

    Passes iff every sample's ``|S_N|`` at the last checkpoint is below
    ``threshold``.  ``extra`` adds polynomials (``Poly`` or coefficient
    lists) to the sample.
    """
    if d < 1:
        raise ValueError("order must be >= 1")
    cps = _checkpoints(checkpoints)
    samples = sample_phase_polynomials(d, n_random, seed)
    for i, P in enumerate(extra):
        P = _as_poly(P)
        if P.degree > d:
            raise ValueError(f"extra polynomial of degree {P.degree} > {d}")
        samples.append(PhaseSample(f"extra{i}", P))
    series = _map(lambda s: weyl_series(seq, s.poly, cps), samples, threads)
    return OscillationReport(seq.name, d, samples, series, threshold)


@dataclass
class ArithmeticReport:
    """Progression-restricted Weyl averages, normalized by the full ``N``."""

    sequence: str
    order_tested: int
    k_max: int
    samples: list[PhaseSample]
    checkpoints: tuple[int, ...]
    values: list[dict[tuple[int, int], np.ndarray]]
    threshold: float

    @property
    def passed(self) -> bool:
        return all(abs(v[-1]) < self.threshold for per in self.values for v in per.values())

    def max_final(self) -> float:
        return max(abs(v[-1]) for per in self.values for v in per.values())

    def rows(self, test: str = "arith") -> list[ReportRow]:
        rows = []
        for smp, per in zip(self.samples, self.values):
            for (k, l), vals in sorted(per.items()):
                for N, v in zip(self.checkpoints, vals):
                    last = N == self.checkpoints[-1]
                    rows.append(ReportRow(test, self.sequence, param=f"{smp.label}:{smp.poly.to_json()}",
                                          k=k, l=l, N=N, value=complex(v), threshold=self.threshold,
                                          verdict=_verdict(v, self.threshold) if last else ""))
        return rows


def arithmetic_oscillation_test(seq: ComplexSequence, d: int, k_max: int, checkpoints,
                                threshold: float = 0.02, n_random: int = 16, seed: int = 0,
                                extra: Sequence = (), threads: int = 1) -> ArithmeticReport:
    """``(1/N) sum_{n <= N, n = l mod k} c_n e(P(n))`` for ``1 <= k <= k_max``, ``0 <= l < k``.

    The normalization is by ``N``, not by the number of terms in the
    progression.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    cps = _checkpoints(checkpoints)
    samples = sample_phase_polynomials(d, n_random, seed)
    samples += [PhaseSample(f"extra{i}", _as_poly(P)) for i, P in enumerate(extra)]
    residues = [(k, l) for k in range(1, k_max + 1) for l in range(k)]

    def cell(smp):
        sums = _stream(_phase_terms(seq, smp.poly), cps, residues)
        return {r: np.array([s / n for s, n in zip(sums[r], cps)]) for r in residues}

    values = _map(cell, samples, threads)
    return ArithmeticReport(seq.name, d, k_max, samples, cps, values, threshold)


# --- Chowla ---------------------------------------------------------------

@dataclass(frozen=True)
class ChowlaPattern:
    """Shifts ``l_1 < ... < l_r`` with positive exponents ``k_1..k_r``."""

    shifts: tuple[int, ...]
    exponents: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "shifts", tuple(int(v) for v in self.shifts))
        object.__setattr__(self, "exponents", tuple(int(v) for v in self.exponents))
        if not self.shifts or len(self.shifts) != len(self.exponents):
            raise ValueError("need r >= 1 shifts and as many exponents")
        if self.shifts[0] < 0 or any(b <= a for a, b in zip(self.shifts, self.shifts[1:])):
            raise ValueError("shifts must be nonnegative and strictly increasing")
        if any(k < 1 for k in self.exponents):
            raise ValueError("exponents must be positive")

    @property
    def r(self) -> int:
        return len(self.shifts)

    def label(self) -> str:
        return "l=" + ";".join(map(str, self.shifts)) + "|k=" + ";".join(map(str, self.exponents))


def chowla_patterns(r_max: int, shift_max: int, exp_max: int) -> list[ChowlaPattern]:
    """All patterns with ``r <= r_max``, ``l_r <= shift_max``, ``k_i <= exp_max``."""
    from itertools import combinations, product
    out = []
    for r in range(1, r_max + 1):
        for shifts in combinations(range(shift_max + 1), r):
            for exps in product(range(1, exp_max + 1), repeat=r):
                out.append(ChowlaPattern(shifts, exps))
    return out


@dataclass(frozen=True)
class ChowlaResult:
    pattern: ChowlaPattern
    value: complex
    excluded: bool
    N: int


def _chowla_excluded(seq: ComplexSequence, pat: ChowlaPattern, N: int, tol: float = 1e-12) -> bool:
    # excluded only if c^{k_i} == |c| at every shift and every n
    for l, k in zip(pat.shifts, pat.exponents):
        c = seq.block(1 + l, N + 1 + l)
        if not np.all(np.abs(c ** k - np.abs(c)) <= tol):
            return False
    return True


def chowla_test(seq: ComplexSequence, patterns: Sequence[ChowlaPattern], N: int,
                threads: int = 1) -> list[ChowlaResult]:
    """``(1/N) sum_{n=1}^N prod_i c_{n+l_i}^{k_i}`` per pattern.

    Patterns where ``c_{n+l_i}^{k_i} = |c_{n+l_i}|`` for every ``i`` and
    every ``n <= N`` are marked excluded and not evaluated.
    """
    def cell(pat: ChowlaPattern) -> ChowlaResult:
        if _chowla_excluded(seq, pat, N):
            return ChowlaResult(pat, complex("nan"), True, N)

        def terms(a, b):
            out = None
            for l, k in zip(pat.shifts, pat.exponents):
                c = seq.block(a + l, b + l)
                c = c if k == 1 else c ** k
                out = c if out is None else out * c
            return out

        return ChowlaResult(pat, _stream(terms, [N])[(1, 0)][0] / N, False, N)

    return _map(cell, patterns, threads)


def chowla_rows(seq_name: str, results: Sequence[ChowlaResult], threshold: float | None) -> list[ReportRow]:
    rows = []
    for res in results:
        verdict = "excluded" if res.excluded else _verdict(res.value, threshold)
        value = 0j if res.excluded else res.value
        rows.append(ReportRow("chowla", seq_name, param=res.pattern.label(), k=res.pattern.r,
                              N=res.N, value=value, threshold=threshold, verdict=verdict))
    return rows


# --- disjointness ---------------------------------------------------------

def _phase_route_available(flow: Flow) -> bool:
    if isinstance(flow, (SimplePolySkew, GeneralPolySkew)):
        return True
    return isinstance(flow, AffineMap) and is_unipotent(flow.A)


def cesaro_disjointness(seq: ComplexSequence, flow: Flow, observable, x: TorusPoint,
                        checkpoints, method: str = "auto") -> CesaroSeries:
    """``S_N = (1/N) sum_{n<=N} c_n phi(f^n x)`` at each checkpoint.

    ``method="phase"`` expands the orbit into polynomials and evaluates each
    character as a phasor chain; ``method="orbit"`` iterates the flow
    exactly.  ``"auto"`` picks the phase route whenever the orbit is
    polynomial.
    """
    obs = as_trigpoly(observable)
    if obs.terms and obs.d != flow.d:
        raise DimensionError("observable and flow dimensions differ")
    if flow.d != x.d:
        raise DimensionError("flow and point dimensions differ")
    cps = _checkpoints(checkpoints)
    if method == "auto":
        method = "phase" if _phase_route_available(flow) else "orbit"
    if method == "phase":
        expansion = expand_orbit(flow, x, exact=False)
        composed = compose_phase(obs, expansion.polys)
        chains = [(c, list(P.coeffs) or [Fraction(0)]) for c, _, P in composed.terms]

        def terms(a, b):
            phi = np.full(b - a, composed.constant, dtype=np.complex128)
            for c, coeffs in chains:
                phi += c * phasor.unit_block(coeffs, a, b)
            return seq.block(a, b) * phi

        sums = _stream(terms, cps)[(1, 0)]
    elif method == "orbit":
        sums = _orbit_sums(seq, flow, obs, x, cps)
    else:
        raise ValueError(f"unknown method {method!r}")
    return _series(sums, cps, repr(obs))


def _orbit_sums(seq, flow, obs, x, cps):
    N = cps[-1]
    c = seq.values(N)
    acc = _Neumaier()
    out = []
    reduce_lift = isinstance(flow, AffineMap)
    pos = x
    idx = 0
    for n in range(1, N + 1):
        pos = step(flow, pos)
        if reduce_lift:
            pos = pos.reduced()
        acc.add(c[n - 1] * trigpoly_eval(obs, pos))
        if n == cps[idx]:
            out.append(acc.value)
            idx += 1
    return out


# --- mean attraction ------------------------------------------------------

def mean_attraction_estimate(flow: Flow, x: TorusPoint, z: TorusPoint, checkpoints) -> CesaroSeries:
    """``(1/N) sum_{n=1}^N d(f^n x, f^n z)`` with the sup-of-circle-distances metric."""
    if x.d != z.d or x.d != flow.d:
        raise DimensionError("points and flow must share a torus")
    cps = _checkpoints(checkpoints)
    reduce_lift = isinstance(flow, AffineMap)
    acc = _Neumaier()
    out = []
    idx = 0
    for n in range(1, cps[-1] + 1):
        x, z = step(flow, x), step(flow, z)
        if reduce_lift:
            x, z = x.reduced(), z.reduced()
        acc.add(torus_distance(x, z))
        if n == cps[idx]:
            out.append(acc.value.real)
            idx += 1
    return CesaroSeries(cps, np.array([v / n for v, n in zip(out, cps)], dtype=np.complex128),
                        "mean_distance")


# --- quasi-eigenfunctions -------------------------------------------------

def chain_binomial_phase(flow: AffineMap, z: TorusPoint) -> BinomialPhase:
    """``theta`` with ``x_d^n = sum_j theta_j C(n, j)`` along the orbit of ``z``.

    Obtained from the symbolic orbit expansion by Newton forward differences
    at ``n = 0``.
    """
    if not isinstance(flow, AffineMap) or not flow.is_chain():
        raise ValueError("flow must be the chain skew product x1+alpha, x_i + x_{i-1}")
    P = expand_orbit(flow, z, exact=False).polys[-1]
    vals = [P(Fraction(n)) for n in range(flow.d + 1)]
    thetas = []
    for j in range(flow.d + 1):
        thetas.append(sum((-1) ** (j - i) * math.comb(j, i) * vals[i] for i in range(j + 1)))
    return BinomialPhase(thetas)


def quasi_eigen_crosscheck(theta, flow: AffineMap, z: TorusPoint, N: int) -> float:
    """``max_{n<=N} |g(f^n z) - e(sum_j theta_j C(n, j))|`` with ``g = e(x_d)``."""
    if not isinstance(flow, AffineMap) or not flow.is_chain():
        raise ValueError("flow must be the chain skew product x1+alpha, x_i + x_{i-1}")
    if flow.d != z.d:
        raise DimensionError("flow and point dimensions differ")
    th = theta if isinstance(theta, BinomialPhase) else BinomialPhase(theta)
    thetas = th.thetas
    worst = 0.0
    pt = z
    binoms = [1] + [0] * th.d  # C(n, j) for current n
    for n in range(N + 1):
        if n:
            pt = step(flow, pt).reduced()
            for j in range(th.d, 0, -1):
                binoms[j] += binoms[j - 1]
        lhs = np.exp(2j * np.pi * float(pt.coords[-1]))
        phase = sum(t * b for t, b in zip(thetas, binoms))
        phase -= math.floor(phase)
        rhs = np.exp(2j * np.pi * float(phase))
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def cesaro_rows(test: str, seq_name: str, flow_name: str, obs_name: str,
                series: CesaroSeries, threshold: float | None, param: str = "") -> list[ReportRow]:
    rows = []
    for N, v in zip(series.checkpoints, series.values):
        last = N == series.checkpoints[-1]
        rows.append(ReportRow(test, seq_name, flow_name, obs_name, param, 1, 0, N, complex(v),
                              threshold, _verdict(v, threshold) if last else ""))
    return rows
