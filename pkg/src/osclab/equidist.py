"""Fractional parts, star discrepancy, Weyl sums and the Koksma sampling experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import phasor
from .averaging import ChowlaPattern, _map
from .reals import PrecisionBudgetError, Number, frac_str, parse_real
from .seqgen import DEFAULT_PRECISION_CEILING, ExpBetaSpec, PrecisionPolicy, frac_kernel

BRUTEFORCE_MAX = 5000


@dataclass
class PointSample1D:
    """Points in ``[0, 1)``.

    ``phases`` optionally keeps the exact 64-bit fixed-point values the
    floats were rounded from; the Weyl battery uses them when present.
    """

    values: np.ndarray
    phases: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size and not (np.all(self.values >= 0) and np.all(self.values < 1)):
            raise ValueError("sample values must lie in [0, 1)")
        if self.phases is not None:
            self.phases = np.asarray(self.phases, dtype=np.uint64).ravel()
            if self.phases.shape != self.values.shape:
                raise ValueError("phases and values differ in length")

    @property
    def n(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_phases(cls, phases: np.ndarray) -> "PointSample1D":
        phases = np.asarray(phases, dtype=np.uint64)
        return cls(phasor.phases_to_float(phases), phases)

    @classmethod
    def centered_grid(cls, N: int) -> "PointSample1D":
        return cls((np.arange(N) + 0.5) / N)


def star_discrepancy(sample: PointSample1D) -> float:
    """``D*_N = max_i max(i/N - u_(i), u_(i) - (i-1)/N)`` over sorted points.

    >>> star_discrepancy(PointSample1D([0.5]))
    0.5
    """
    N = sample.n
    if N == 0:
        raise ValueError("empty sample")
    u = np.sort(sample.values)
    i = np.arange(1, N + 1, dtype=np.float64)
    upper = i / N - u
    lower = u - (i - 1) / N
    return float(max(upper.max(), lower.max()))


def star_discrepancy_bruteforce(sample: PointSample1D) -> float:
    """Supremum of ``|#{x in I}/N - |I||`` over anchored ``I = [0, t)`` and ``[0, t]``.

    Only ``t`` at sample points matters (plus the endpoints, which
    contribute 0); counts are taken by direct comparison with every point.
    """
    N = sample.n
    if N == 0:
        raise ValueError("empty sample")
    if N > BRUTEFORCE_MAX:
        raise ValueError(f"brute force limited to {BRUTEFORCE_MAX} points")
    x = sample.values
    best = 0.0
    for t in x:
        le = float(np.count_nonzero(x <= t))
        lt = float(np.count_nonzero(x < t))
        best = max(best, le / N - t, t - lt / N)
    return float(best)


@dataclass
class WeylBattery:
    magnitudes: np.ndarray  # index h-1 for h = 1..h_max

    @property
    def max(self) -> float:
        return float(self.magnitudes.max())


def weyl_criterion_battery(sample: PointSample1D, h_max: int) -> WeylBattery:
    """``|(1/N) sum_n e(h x_n)|`` for ``h = 1..h_max``.

    Negative ``h`` give the conjugate sums and the same magnitudes, so they
    are not evaluated.
    """
    if h_max < 1:
        raise ValueError("h_max must be >= 1")
    if sample.n == 0:
        raise ValueError("empty sample")
    mags = np.empty(h_max)
    for h in range(1, h_max + 1):
        if sample.phases is not None:
            with np.errstate(over="ignore"):
                z = phasor.phases_to_unit(sample.phases * np.uint64(h))
        else:
            z = np.exp(2j * np.pi * h * sample.values)
        mags[h - 1] = abs(z.sum() / sample.n)
    return WeylBattery(mags)


def frac_parts(spec: ExpBetaSpec, N: int) -> PointSample1D:
    """``frac(alpha beta^n g(beta))`` for ``n = 1..N`` from the certified kernel."""
    return PointSample1D.from_phases(frac_kernel(spec, N).as_uint64())


# --- Koksma experiment ----------------------------------------------------

@dataclass
class KoksmaConfig:
    """Sampling experiment over ``beta`` for ``alpha G(beta) beta^n mod 1``.

    For a pattern with shifts ``l_i`` and weights ``k_i`` the sequence is
    ``sum_i k_i alpha beta^(n + l_i) g(beta)``.
    """

    alpha: Number = 1
    g: tuple = (1,)
    beta_interval: tuple = ("1.1", "3")
    samples: int = 200
    patterns: list = field(default_factory=lambda: [ChowlaPattern((0,), (1,))])
    N: int = 4000
    discrepancy_factor: float = 3.0
    weyl_factor: float = 4.0
    h_max: int = 8
    precision_ceiling: int = DEFAULT_PRECISION_CEILING
    betas: list | None = None

    def __post_init__(self):
        self.alpha = parse_real(self.alpha)
        self.g = tuple(parse_real(c).fraction() for c in self.g)
        lo, hi = (parse_real(v).fraction() for v in self.beta_interval)
        if not 1 < lo < hi:
            raise ValueError("beta interval must satisfy 1 < lo < hi")
        self.beta_interval = (lo, hi)
        if self.samples < 1 or self.N < 1:
            raise ValueError("samples and N must be positive")
        self.patterns = [p if isinstance(p, ChowlaPattern) else ChowlaPattern(*p) for p in self.patterns]
        if not self.patterns:
            raise ValueError("need at least one pattern")
        if self.betas is not None:
            self.betas = [parse_real(b) for b in self.betas]

    @property
    def discrepancy_threshold(self) -> float:
        return self.discrepancy_factor / math.sqrt(self.N)

    @property
    def weyl_threshold(self) -> float:
        return self.weyl_factor / math.sqrt(self.N)

    @property
    def max_shift(self) -> int:
        return max(p.shifts[-1] for p in self.patterns)

    def echo(self) -> dict:
        return {
            "alpha": str(self.alpha),
            "g": [frac_str(c) for c in self.g],
            "beta_interval": [frac_str(v) for v in self.beta_interval],
            "samples": self.samples,
            "patterns": [p.label() for p in self.patterns],
            "N": self.N,
            "discrepancy_threshold": self.discrepancy_threshold,
            "weyl_threshold": self.weyl_threshold,
            "h_max": self.h_max,
            "precision_ceiling": self.precision_ceiling,
        }


def sample_betas(lo: Fraction, hi: Fraction, count: int, seed: int) -> list[Fraction]:
    """``count`` dyadic rationals (denominator ``2**64``) uniform in ``[lo, hi)``."""
    rng = np.random.default_rng(seed)
    u = rng.integers(0, 1 << 64, size=count, dtype=np.uint64, endpoint=False)
    out = []
    for v in u:
        b = lo + (hi - lo) * Fraction(int(v), 1 << 64)
        b = Fraction(math.ceil(b * (1 << 64)), 1 << 64)
        out.append(min(b, hi - Fraction(1, 1 << 64)))
    return out


@dataclass
class KoksmaRow:
    beta: str
    pattern: str
    N: int
    discrepancy: float
    weyl_max: float
    passed: bool | None  # None when the beta was skipped

    COLUMNS = ("beta", "pattern", "N", "discrepancy", "weyl_max", "pass")

    def as_list(self) -> list[str]:
        if self.passed is None:
            return [self.beta, self.pattern, str(self.N), "", "", "skipped"]
        return [self.beta, self.pattern, str(self.N), f"{self.discrepancy:.17g}",
                f"{self.weyl_max:.17g}", "true" if self.passed else "false"]


@dataclass
class KoksmaBeta:
    index: int
    beta: Fraction
    rows: list[KoksmaRow]
    d_threshold: float
    phases: np.ndarray | None = None  # base fractional parts, n = 1..N + max_shift
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(r.passed for r in self.rows)

    @property
    def base_discrepancy_passed(self) -> bool:
        return self.error is None and self.rows[0].discrepancy < self.d_threshold


@dataclass
class KoksmaReport:
    config: KoksmaConfig
    seed: int
    betas: list[KoksmaBeta]

    @property
    def rows(self) -> list[KoksmaRow]:
        return [r for b in self.betas for r in b.rows]

    @property
    def pass_fraction(self) -> float:
        return sum(b.passed for b in self.betas) / len(self.betas)

    @property
    def discrepancy_pass_fraction(self) -> float:
        return sum(b.base_discrepancy_passed for b in self.betas) / len(self.betas)

    @property
    def skipped(self) -> int:
        return sum(b.error is not None for b in self.betas)

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "config": self.config.echo(),
            "betas": len(self.betas),
            "skipped": self.skipped,
            "pass_fraction": self.pass_fraction,
            "discrepancy_pass_fraction": self.discrepancy_pass_fraction,
        }


def pattern_phases(base: np.ndarray, pattern: ChowlaPattern, N: int) -> np.ndarray:
    """``sum_i k_i x_{n + l_i} mod 1`` on the 64-bit grid, ``n = 1..N``.

    ``base[n-1]`` holds ``x_n``.
    """
    acc = np.zeros(N, dtype=np.uint64)
    with np.errstate(over="ignore"):
        for l, k in zip(pattern.shifts, pattern.exponents):
            acc += base[l:l + N] * np.uint64(k)
    return acc


def _run_beta(cfg: KoksmaConfig, index: int, beta: Fraction, keep: bool, tail: int) -> KoksmaBeta:
    label = f"{float(beta):.17g}"
    n_total = cfg.N + max(cfg.max_shift, tail)
    d_thr, w_thr = cfg.discrepancy_threshold, cfg.weyl_threshold
    spec = ExpBetaSpec(cfg.alpha, beta, cfg.g, PrecisionPolicy(ceiling=cfg.precision_ceiling))
    try:
        base = frac_kernel(spec, n_total).as_uint64()
    except PrecisionBudgetError as exc:
        rows = [KoksmaRow(label, p.label(), cfg.N, math.nan, math.nan, None) for p in cfg.patterns]
        return KoksmaBeta(index, beta, rows, d_thr, None, str(exc))
    rows = []
    for pat in cfg.patterns:
        sample = PointSample1D.from_phases(pattern_phases(base, pat, cfg.N))
        D = star_discrepancy(sample)
        W = weyl_criterion_battery(sample, cfg.h_max).max
        rows.append(KoksmaRow(label, pat.label(), cfg.N, D, W, bool(D < d_thr and W < w_thr)))
    return KoksmaBeta(index, beta, rows, d_thr, base if keep else None)


def koksma_experiment(cfg: KoksmaConfig, seed: int = 0, threads: int = 1,
                      keep_phases: bool = False, tail: int = 0) -> KoksmaReport:
    """Discrepancy and Weyl sums of ``alpha G(beta) beta^n mod 1`` for sampled ``beta``.

    ``beta`` values come from :func:`sample_betas` unless ``cfg.betas`` is
    given.  A ``beta`` whose precision exceeds the ceiling is recorded as
    skipped and counts as not passing.  With ``keep_phases`` the base
    fractional parts for ``n = 1..N + max(max_shift, tail)`` are retained.
    """
    if cfg.betas is not None:
        betas = [b.fraction() for b in cfg.betas]
    else:
        betas = sample_betas(*cfg.beta_interval, cfg.samples, seed)
    results = _map(lambda ib: _run_beta(cfg, ib[0], ib[1], keep_phases, tail), list(enumerate(betas)), threads)
    return KoksmaReport(cfg, seed, results)
