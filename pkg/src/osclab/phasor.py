"""Incremental evaluation of ``exp(2*pi*i*P(n))`` over long index ranges.

Phases are carried as unsigned 64-bit integers, i.e. as multiples of
``2**-64`` reduced mod 1.  Along a block the finite-difference chain
``Delta^j P`` is advanced with wrapping integer additions, so the chain
itself never drifts; the only error source is rounding the initial
differences onto the ``2**-64`` grid, which is zero for coefficients with
power-of-two denominators up to ``2**64`` (every float qualifies).  Each
block is re-seeded from exact rational evaluation of ``P``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

PHASE_BITS = 64
PHASE_ONE = 1 << PHASE_BITS
RESYNC = 4096
# per-term phase error budget, in units of 2**-64, for coefficients that are
# not exactly representable on the phase grid
_INEXACT_BUDGET = 1 << 24


def horner_mod1(coeffs: Sequence[Fraction], n: int) -> Fraction:
    """Exact ``P(n) mod 1`` for rational coefficients (constant term first)."""
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * n + c
        acc -= math.floor(acc)
    return acc


def _grid_exact(coeffs: Sequence[Fraction]) -> bool:
    for c in coeffs:
        d = c.denominator
        if d & (d - 1) or d > PHASE_ONE:
            return False
    return True


def block_length(coeffs: Sequence[Fraction], resync: int = RESYNC) -> int:
    """Block length between re-seeds.

    ``resync`` when the differences land exactly on the phase grid;
    otherwise the longest block whose accumulated rounding stays within
    ``2**-40`` per term.
    """
    deg = len(coeffs) - 1
    if deg <= 0 or _grid_exact(coeffs):
        return resync
    length = resync
    while length > 1 and sum(comb(length, j) for j in range(deg + 1)) > _INEXACT_BUDGET:
        length //= 2
    return max(length, 1)


def _seed(coeffs: Sequence[Fraction], n0: int) -> list[int]:
    deg = len(coeffs) - 1
    vals = [horner_mod1(coeffs, n0 + i) for i in range(deg + 1)]
    seeds = []
    for j in range(deg + 1):
        dj = sum((-1) ** (j - i) * comb(j, i) * vals[i] for i in range(j + 1))
        dj -= math.floor(dj)
        seeds.append(math.floor(dj * PHASE_ONE) % PHASE_ONE)
    return seeds


def phase_block(coeffs: Sequence[Fraction], start: int, stop: int,
                resync: int = RESYNC) -> np.ndarray:
    """Phases of ``P(n)`` for ``start <= n < stop`` as uint64 multiples of ``2**-64``."""
    coeffs = [Fraction(c) for c in coeffs] or [Fraction(0)]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    out = np.empty(max(stop - start, 0), dtype=np.uint64)
    step = block_length(coeffs, resync)
    pos = start
    while pos < stop:
        length = min(step, stop - pos)
        seeds = _seed(coeffs, pos)
        arr = np.full(length, seeds[-1], dtype=np.uint64)
        for s in reversed(seeds[:-1]):
            nxt = np.empty(length, dtype=np.uint64)
            nxt[0] = 0
            if length > 1:
                np.cumsum(arr[:-1], out=nxt[1:])
            nxt += np.uint64(s)
            arr = nxt
        out[pos - start:pos - start + length] = arr
        pos += length
    return out


def phases_to_unit(phases: np.ndarray) -> np.ndarray:
    """``exp(2*pi*i*phase)`` for uint64 phases (top 53 bits used)."""
    x = (phases >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return np.exp(2j * np.pi * x)


def phases_to_float(phases: np.ndarray) -> np.ndarray:
    """uint64 phases as floats in ``[0, 1)``."""
    return (phases >> np.uint64(11)).astype(np.float64) * 2.0 ** -53


def unit_block(coeffs: Sequence[Fraction], start: int, stop: int,
               resync: int = RESYNC) -> np.ndarray:
    return phases_to_unit(phase_block(coeffs, start, stop, resync))
