"""Sequence generators: Möbius, ``exp(2 pi i alpha beta^n g(beta))``, files.

All sequences are indexed from ``n = 1`` unless a file header says
otherwise.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import phasor
from .reals import Ball, Number, PrecisionBudgetError, Real, parse_real

DEFAULT_PRECISION_CEILING = 1 << 17
UNIMODULAR_TOL = 1e-12


class ResourceError(MemoryError):
    pass


class SequenceExhausted(IndexError):
    pass


class SequenceFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


class Kind(str, enum.Enum):
    MOBIUS = "Mobius"
    EXP_BETA = "ExpBeta"
    FROM_FILE = "FromFile"
    SYNTHETIC = "Synthetic"


class ComplexSequence:
    """A complex sequence ``(c_n)`` with lazily generated blocks.

    Parameters
    ----------
    kind : Kind
    name : str
        Label used in reports.
    block_fn : callable
        ``block_fn(start, stop)`` returns ``c_n`` for ``start <= n < stop``
        as a complex array.
    length_hint : int or None
        Number of available terms (``None`` for unbounded generators).
    unimodular : bool
    claimed_order : int or None
    n0 : int
        First available index.
    """

    def __init__(self, kind, name, block_fn, length_hint=None, unimodular=False,
                 claimed_order=None, n0=1, meta=None):
        self.kind = Kind(kind)
        self.name = name
        self._block_fn = block_fn
        self.length_hint = length_hint
        self.unimodular = unimodular
        self.claimed_order = claimed_order
        self.n0 = n0
        self.meta = dict(meta or {})

    @property
    def last_index(self) -> float:
        if self.length_hint is None:
            return math.inf
        return self.n0 + self.length_hint - 1

    def block(self, start: int, stop: int) -> np.ndarray:
        """Terms ``c_n`` for ``start <= n < stop``."""
        if start < self.n0 or stop - 1 > self.last_index:
            raise SequenceExhausted(
                f"{self.name}: requested n in [{start}, {stop - 1}], "
                f"available [{self.n0}, {self.last_index}]")
        return np.asarray(self._block_fn(start, stop), dtype=np.complex128)

    def values(self, n_max: int) -> np.ndarray:
        """``c_1, ..., c_{n_max}``."""
        return self.block(1, n_max + 1)

    def __repr__(self) -> str:
        return (f"ComplexSequence(kind={self.kind.value}, name={self.name!r}, "
                f"length_hint={self.length_hint}, unimodular={self.unimodular})")


def from_array(values, name="array", n0=1, kind=Kind.SYNTHETIC, unimodular=None,
               claimed_order=None, meta=None) -> ComplexSequence:
    arr = np.asarray(values, dtype=np.complex128)
    if unimodular is None:
        unimodular = bool(arr.size) and bool(np.all(np.abs(np.abs(arr) - 1) <= UNIMODULAR_TOL))

    def block(start, stop):
        return arr[start - n0:stop - n0]

    return ComplexSequence(kind, name, block, length_hint=arr.size, unimodular=unimodular,
                           claimed_order=claimed_order, n0=n0, meta=meta)


def constant_sequence(value: complex = 1.0, length: int | None = None) -> ComplexSequence:
    unimod = abs(abs(value) - 1) <= UNIMODULAR_TOL
    return ComplexSequence(Kind.SYNTHETIC, f"const({value})",
                           lambda a, b: np.full(b - a, value, dtype=np.complex128),
                           length_hint=length, unimodular=unimod)


def alternating_sequence(length: int | None = None) -> ComplexSequence:
    """``c_n = (-1)**n``."""
    return ComplexSequence(Kind.SYNTHETIC, "alternating",
                           lambda a, b: np.where(np.arange(a, b) % 2 == 0, 1.0, -1.0) + 0j,
                           length_hint=length, unimodular=True)


def linear_sequence(length: int | None = None) -> ComplexSequence:
    """``c_n = n``; violates every growth bound."""
    return ComplexSequence(Kind.SYNTHETIC, "identity",
                           lambda a, b: np.arange(a, b, dtype=np.float64) + 0j,
                           length_hint=length, unimodular=False)


def phase_sequence(coeffs: Sequence[Number], name: str | None = None,
                   length: int | None = None) -> ComplexSequence:
    """``c_n = exp(2 pi i Q(n))`` for a polynomial ``Q`` given constant term first."""
    qs = [parse_real(c).fraction() for c in coeffs]
    label = name or "phase(" + ",".join(str(c) for c in coeffs) + ")"
    return ComplexSequence(Kind.SYNTHETIC, label,
                           lambda a, b: phasor.unit_block(qs, a, b),
                           length_hint=length, unimodular=True, meta={"coeffs": qs})


# --- Möbius ---------------------------------------------------------------

_MAX_SIEVE = 1 << 36


def mobius_sieve(n_max: int) -> np.ndarray:
    """Möbius function on ``0..n_max``.

    Returns an ``int8`` array ``mu`` of length ``n_max + 1`` with
    ``mu[n] == μ(n)`` for ``n >= 1``; ``mu[0]`` is 0 and carries no meaning.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max > _MAX_SIEVE:
        raise ResourceError(f"refusing to sieve to {n_max}")
    try:
        mu = np.ones(n_max + 1, dtype=np.int8)
        dtype = np.int32 if n_max < 2**31 else np.int64
        radical = np.ones(n_max + 1, dtype=dtype)
    except MemoryError as exc:
        raise ResourceError(f"cannot allocate sieve of size {n_max}") from exc
    root = math.isqrt(n_max)
    small = np.ones(root + 1, dtype=bool)
    small[:2] = False
    for p in range(2, math.isqrt(root) + 1):
        if small[p]:
            small[p * p::p] = False
    for p in np.flatnonzero(small):
        p = int(p)
        mu[::p] *= -1
        radical[::p] *= p
        mu[::p * p] = 0
    # one prime factor above sqrt(n_max) remains wherever the radical falls short
    idx = np.arange(n_max + 1, dtype=dtype)
    mu[(radical != idx) & (mu != 0)] *= -1
    mu[0] = 0
    return mu


def mobius_sequence(n_max: int) -> ComplexSequence:
    mu = mobius_sieve(n_max)
    return ComplexSequence(Kind.MOBIUS, "mobius", lambda a, b: mu[a:b].astype(np.complex128),
                           length_hint=n_max, unimodular=False, meta={"mu": mu})


# --- exp(2 pi i alpha beta^n g(beta)) -------------------------------------

@dataclass(frozen=True)
class PrecisionPolicy:
    """Bits needed to keep ``guard_bits`` correct bits in ``frac(alpha beta^n g(beta))``."""

    guard_bits: int = 64
    ceiling: int = DEFAULT_PRECISION_CEILING
    resync: int = 1024

    def bits_for(self, n: int, beta: float, scale: float) -> int:
        return (math.ceil(n * math.log2(beta)) + math.ceil(math.log2(abs(scale) + 1))
                + self.guard_bits)


@dataclass(frozen=True)
class ExpBetaSpec:
    """Parameters of ``c_n = exp(2 pi i alpha beta^n g(beta))``.

    ``g`` is a polynomial in ``beta`` with nonnegative rational
    coefficients, constant term first.
    """

    alpha: Real
    beta: Real
    g: tuple[Fraction, ...] = (Fraction(1),)
    precision: PrecisionPolicy = field(default_factory=PrecisionPolicy)

    def __post_init__(self):
        object.__setattr__(self, "alpha", parse_real(self.alpha))
        object.__setattr__(self, "beta", parse_real(self.beta))
        object.__setattr__(self, "g", tuple(Fraction(c) for c in self.g))
        if float(self.alpha) == 0 and (not self.alpha.is_exact or self.alpha.exact == 0):
            raise ValueError("alpha must be nonzero")
        if not float(self.beta) > 1 or (self.beta.is_exact and self.beta.exact <= 1):
            raise ValueError("beta must exceed 1")
        if not self.g or any(c < 0 for c in self.g):
            raise ValueError("g needs nonnegative coefficients")
        if self.g_value() <= 0:
            raise ValueError("g(beta) must be positive")

    def g_value(self) -> float:
        b = float(self.beta)
        return float(sum(float(c) * b ** j for j, c in enumerate(self.g)))

    def scale_value(self) -> float:
        return float(self.alpha) * self.g_value()

    def with_g(self, g: Sequence[Fraction]) -> "ExpBetaSpec":
        return ExpBetaSpec(self.alpha, self.beta, tuple(g), self.precision)

    def label(self) -> str:
        g = "+".join(f"{c}*b^{j}" for j, c in enumerate(self.g) if c)
        return f"expbeta(alpha={self.alpha},beta={self.beta},g={g})"


@dataclass
class FracParts:
    """Certified fractional parts ``frac(alpha beta^n g(beta))``, ``n = 1..n_max``.

    ``numerators[n-1] / 2**store_bits`` approximates the fractional part to
    within ``error_ulps / 2**store_bits`` (distance on the circle).
    """

    numerators: list[int]
    store_bits: int
    error_ulps: int
    working_bits: int

    @property
    def error(self) -> float:
        return self.error_ulps / 2.0 ** self.store_bits

    def as_uint64(self) -> np.ndarray:
        s = self.store_bits - 64
        return np.array([v >> s for v in self.numerators], dtype=np.uint64)

    def as_float(self) -> np.ndarray:
        return phasor.phases_to_float(self.as_uint64())

    def as_fractions(self) -> list[Fraction]:
        den = 1 << self.store_bits
        return [Fraction(v, den) for v in self.numerators]


def _scale_ball(spec: ExpBetaSpec, bits: int) -> Ball:
    beta = Ball.from_real(spec.beta, bits)
    total = None
    power = Ball.from_int(1)
    for j, c in enumerate(spec.g):
        if j:
            power = (power * beta).rescale(bits) if (power * beta).exp > bits else power * beta
        if c:
            term = Ball.from_real(parse_real(c), bits) * power
            total = term if total is None else total + term
    g_ball = total.rescale(bits) if total.exp > bits else total
    out = Ball.from_real(spec.alpha, bits) * g_ball
    return out.rescale(bits) if out.exp > bits else out


def frac_kernel(spec: ExpBetaSpec, n_max: int, extra_bits: int = 0) -> FracParts:
    """Fractional parts of ``alpha beta^n g(beta)`` for ``n = 1..n_max``.

    The working precision follows :meth:`PrecisionPolicy.bits_for` plus a
    small slack for the growth of the interval radius; the result is
    certified to ``guard_bits`` bits or a larger precision is tried.

    Raises
    ------
    PrecisionBudgetError
        If the needed precision exceeds ``spec.precision.ceiling``.
    """
    pol = spec.precision
    store = pol.guard_bits + 64
    beta_f = float(spec.beta)
    slack = n_max.bit_length() + 8 + extra_bits
    while True:
        bits = max(pol.bits_for(n_max, beta_f, spec.scale_value()) + slack, store)
        if bits > pol.ceiling:
            raise PrecisionBudgetError(
                f"precision budget: {bits} bits needed for n_max={n_max}, "
                f"beta={spec.beta}; ceiling is {pol.ceiling}")
        result = _frac_run(spec, n_max, bits, store)
        if result.error_ulps <= 1 << (store - pol.guard_bits):
            return result
        slack *= 2


def _frac_run(spec: ExpBetaSpec, n_max: int, bits: int, store: int) -> FracParts:
    beta = Ball.from_real(spec.beta, bits)
    scale = _scale_ball(spec, bits)
    mask = (1 << bits) - 1
    drop = bits - store
    resync = spec.precision.resync
    nums = []
    worst = 0
    cur = None
    for n in range(1, n_max + 1):
        if cur is None or (n - 1) % resync == 0:
            cur = beta.power(n, bits)
        else:
            cur = cur * beta
            if cur.exp > bits:
                cur = cur.rescale(bits)
        y = scale * cur
        if y.exp != bits:
            y = y.rescale(bits)
        nums.append((y.mid & mask) >> drop)
        err = -((-y.rad) >> drop) + 1
        if err > worst:
            worst = err
    return FracParts(nums, store, worst, bits)


def exp_beta_sequence(spec: ExpBetaSpec, n_max: int, extra_bits: int = 0) -> ComplexSequence:
    """``c_n = exp(2 pi i frac(alpha beta^n g(beta)))`` for ``n = 1..n_max``."""
    fp = frac_kernel(spec, n_max, extra_bits)
    vals = phasor.phases_to_unit(fp.as_uint64())
    seq = from_array(vals, name=spec.label(), kind=Kind.EXP_BETA, unimodular=True,
                     meta={"fracs": fp, "spec": spec})
    return seq


# --- growth condition -----------------------------------------------------

@dataclass(frozen=True)
class GrowthCertificate:
    lam: float
    c_bound: float
    n_max: int
    diverging: bool = False


def check_growth_condition(seq: ComplexSequence, lam: float = 2.0, n_max: int = 1000,
                           window: int = 64) -> GrowthCertificate:
    """Running maximum of ``(1/N) sum_{n<=N} |c_n|**lam`` for ``N <= n_max``.

    ``diverging`` is set when the running average increases strictly over
    each of the last ``window`` steps.
    """
    if lam <= 1:
        raise ValueError("lambda must exceed 1")
    vals = seq.values(n_max)
    if seq.unimodular:
        mags = np.ones(n_max)
    else:
        mags = np.abs(vals) ** lam
    avgs = np.cumsum(mags) / np.arange(1, n_max + 1)
    tail = avgs[-(window + 1):]
    diverging = tail.size > 1 and bool(np.all(np.diff(tail) > 0))
    return GrowthCertificate(lam, float(avgs.max()), n_max, diverging)


# --- files ----------------------------------------------------------------

_HEADER = re.compile(r"#\s*n0\s*=\s*(-?\d+)\s*$")


def load_sequence(path, format: str = "auto") -> ComplexSequence:
    """Read a sequence file.

    One term per line, either ``re,im`` or ``phase:<decimal>`` (meaning
    ``exp(2 pi i phase)``).  An optional first line ``# n0=<index>`` sets
    the first index (default 1).  ``format`` is ``"auto"``, ``"pairs"`` or
    ``"phase"``.
    """
    if format not in ("auto", "pairs", "phase"):
        raise ValueError(f"unknown sequence format {format!r}")
    text = Path(path).read_text(encoding="utf-8")
    n0 = 1
    vals: list[complex] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m and not vals:
                n0 = int(m.group(1))
            continue
        vals.append(_parse_term(line, format, lineno))
    if not vals:
        raise SequenceFormatError(f"{path}: no terms")
    return from_array(vals, name=f"file:{Path(path).name}", n0=n0, kind=Kind.FROM_FILE)


def _parse_term(line: str, format: str, lineno: int) -> complex:
    if line.startswith("phase:"):
        if format == "pairs":
            raise SequenceFormatError("phase term in a pairs file", lineno)
        body = line[len("phase:"):].strip()
        try:
            ph = Fraction(body)
        except (ValueError, ZeroDivisionError):
            raise SequenceFormatError(f"bad phase {body!r}", lineno) from None
        ph -= math.floor(ph)
        return complex(np.exp(2j * np.pi * float(ph)))
    if format == "phase":
        raise SequenceFormatError("expected 'phase:<decimal>'", lineno)
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != 2:
        raise SequenceFormatError(f"expected 're,im', got {line!r}", lineno)
    try:
        re_, im_ = float(parts[0]), float(parts[1])
    except ValueError:
        raise SequenceFormatError(f"bad number in {line!r}", lineno) from None
    if not (math.isfinite(re_) and math.isfinite(im_)):
        raise SequenceFormatError(f"non-finite value in {line!r}", lineno)
    return complex(re_, im_)


def parse_sequence_spec(text: str, n_max: int, precision: PrecisionPolicy | None = None
                        ) -> ComplexSequence:
    """Build a sequence from a short spec string.

    ``mobius``, ``const``, ``alternating``, ``rotation:<alpha>``,
    ``expbeta:<alpha>:<beta>[:<g0>,<g1>,...]``, ``file:<path>``.
    """
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    if head == "mobius":
        return mobius_sequence(n_max)
    if head == "const":
        return constant_sequence(1.0)
    if head == "alternating":
        return alternating_sequence()
    if head == "rotation":
        return phase_sequence(["0", rest], name=f"rotation({rest})")
    if head == "expbeta":
        bits = rest.split(":")
        if len(bits) not in (2, 3):
            raise ValueError("expbeta needs alpha:beta[:g-coefficients]")
        g = tuple(parse_real(c).exact for c in bits[2].split(",")) if len(bits) == 3 else (Fraction(1),)
        if any(c is None for c in g):
            raise ValueError("g coefficients must be rational")
        spec = ExpBetaSpec(bits[0], bits[1], g, precision or PrecisionPolicy())
        return exp_beta_sequence(spec, n_max)
    if head == "file":
        return load_sequence(rest)
    raise ValueError(f"unknown sequence spec {text!r}")


SequenceFactory = Callable[[int], ComplexSequence]
