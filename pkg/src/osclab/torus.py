"""Flows on the d-torus: affine maps and polynomial skew products.

Points carry an exact rational *lift* in ``R^d``; the torus coordinates are
the lift reduced mod 1.  Polynomial skew products act on the lift (the
polynomials ``h_i`` are not 1-periodic in general), which is what makes
the orbit coordinates polynomials in ``n``.
"""

from __future__ import annotations

import cmath
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .polynomial import MultiPoly, Poly
from .reals import DEFAULT_BITS, Number, Real, parse_real

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

Matrix = tuple[tuple[int, ...], ...]


class DimensionError(ValueError):
    pass


def _frac(x, bits=DEFAULT_BITS) -> tuple[Fraction, bool]:
    r = parse_real(x)
    return r.fraction(bits), r.is_exact


def _mod1(x: Fraction) -> Fraction:
    return x - math.floor(x)


@dataclass(frozen=True)
class TorusPoint:
    """A point of ``T^d`` with its exact lift."""

    lift: tuple[Fraction, ...]

    @classmethod
    def of(cls, *values: Number, bits: int = DEFAULT_BITS) -> "TorusPoint":
        if len(values) == 1 and isinstance(values[0], (list, tuple, np.ndarray)):
            values = tuple(values[0])
        return cls(tuple(_frac(v, bits)[0] for v in values))

    @classmethod
    def zero(cls, d: int) -> "TorusPoint":
        return cls((Fraction(0),) * d)

    @property
    def d(self) -> int:
        return len(self.lift)

    @property
    def coords(self) -> tuple[Fraction, ...]:
        return tuple(_mod1(v) for v in self.lift)

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coords])

    def reduced(self) -> "TorusPoint":
        return TorusPoint(self.coords)

    def __repr__(self) -> str:
        return "TorusPoint(" + ", ".join(str(c) for c in self.lift) + ")"


# --- integer matrices -----------------------------------------------------

def as_matrix(A) -> Matrix:
    rows = tuple(tuple(int(v) for v in row) for row in A)
    if any(len(r) != len(rows) for r in rows):
        raise DimensionError("matrix must be square")
    return rows


def identity(d: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(d)) for i in range(d))


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    cols = list(zip(*B))
    return tuple(tuple(sum(a * b for a, b in zip(row, col)) for col in cols) for row in A)


def mat_vec(A, v):
    return tuple(sum(a * x for a, x in zip(row, v)) for row in A)


def mat_sub(A: Matrix, B: Matrix) -> Matrix:
    return tuple(tuple(a - b for a, b in zip(ra, rb)) for ra, rb in zip(A, B))


def mat_pow(A: Matrix, q: int) -> Matrix:
    result, base = identity(len(A)), A
    while q:
        if q & 1:
            result = mat_mul(result, base)
        q >>= 1
        if q:
            base = mat_mul(base, base)
    return result


def det(A: Matrix) -> int:
    """Exact determinant (Bareiss fraction-free elimination)."""
    M = [list(r) for r in A]
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if M[i][k] != 0), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def inverse(A: Matrix) -> tuple[tuple[Fraction, ...], ...]:
    """Exact rational inverse via Gauss-Jordan."""
    n = len(A)
    M = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(A)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        M[c], M[piv] = M[piv], M[c]
        pv = M[c][c]
        M[c] = [v / pv for v in M[c]]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return tuple(tuple(row[n:]) for row in M)


def integer_inverse(A: Matrix) -> Matrix:
    inv = inverse(A)
    if any(v.denominator != 1 for row in inv for v in row):
        raise ValueError("matrix is not unimodular")
    return tuple(tuple(int(v) for v in row) for row in inv)


# --- flows ----------------------------------------------------------------

@dataclass(frozen=True)
class AffineMap:
    """``x -> A x + a`` with ``A`` in ``GL(d, Z)``."""

    A: Matrix
    a: tuple[Fraction, ...]
    exact: bool = True

    def __post_init__(self):
        A = as_matrix(self.A)
        object.__setattr__(self, "A", A)
        pairs = [_frac(v) for v in self.a]
        object.__setattr__(self, "a", tuple(f for f, _ in pairs))
        object.__setattr__(self, "exact", self.exact and all(ex for _, ex in pairs))
        if len(self.a) != len(A):
            raise DimensionError("translation length does not match matrix size")
        if abs(det(A)) != 1:
            raise ValueError(f"det(A) = {det(A)}, expected +-1")

    @property
    def d(self) -> int:
        return len(self.A)

    @classmethod
    def rotation(cls, alpha: Number) -> "AffineMap":
        a, exact = _frac(alpha)
        return cls(((1,),), (a,), exact)

    @classmethod
    def chain(cls, d: int, alpha: Number) -> "AffineMap":
        """``x_1 -> x_1 + alpha``, ``x_i -> x_i + x_{i-1}``."""
        a, exact = _frac(alpha)
        A = tuple(tuple(int(i == j or i == j + 1) for j in range(d)) for i in range(d))
        return cls(A, (a,) + (Fraction(0),) * (d - 1), exact)

    def is_chain(self) -> bool:
        d = self.d
        want = tuple(tuple(int(i == j or i == j + 1) for j in range(d)) for i in range(d))
        return self.A == want and all(v == 0 for v in self.a[1:])


@dataclass(frozen=True)
class SimplePolySkew:
    """``x_1 -> x_1 + a``; ``x_i -> x_i + sum_{2<=j<i} b_ij x_j + h_i(x_1)``.

    ``h`` holds ``h_2..h_d``; ``b`` maps ``(i, j)`` (1-based) to ``b_ij``.
    """

    d: int
    k: int
    a: Fraction
    h: tuple[Poly, ...]
    b: Mapping[tuple[int, int], Fraction] = field(default_factory=dict)
    exact: bool = True

    def __post_init__(self):
        if self.d < 2 or self.k < 1:
            raise ValueError("need d >= 2 and k >= 1")
        object.__setattr__(self, "a", Fraction(self.a))
        h = tuple(p if isinstance(p, Poly) else Poly(p) for p in self.h)
        if len(h) != self.d - 1:
            raise DimensionError(f"expected {self.d - 1} polynomials h_2..h_d")
        for i, p in enumerate(h, start=2):
            if p.degree > self.k:
                raise ValueError(f"deg h_{i} = {p.degree} exceeds k = {self.k}")
        object.__setattr__(self, "h", h)
        b = {}
        for (i, j), v in dict(self.b).items():
            if not (3 <= i <= self.d and 2 <= j <= i - 1):
                raise ValueError(f"b[{i}][{j}] outside 3<=i<=d, 2<=j<=i-1")
            if Fraction(v) != 0:
                b[(int(i), int(j))] = Fraction(v)
        object.__setattr__(self, "b", dict(sorted(b.items())))

    def __hash__(self):
        return hash((self.d, self.k, self.a, self.h, tuple(self.b.items())))

    def as_general(self) -> "GeneralPolySkew":
        """The same map written as a general skew product (degree max(k, 1))."""
        hs = []
        for i in range(2, self.d + 1):
            terms = {}
            for j, c in enumerate(self.h[i - 2].coeffs):
                e = [0] * (i - 1)
                e[0] = j
                terms[tuple(e)] = terms.get(tuple(e), 0) + c
            for (ii, jj), v in self.b.items():
                if ii == i:
                    e = [0] * (i - 1)
                    e[jj - 1] = 1
                    terms[tuple(e)] = terms.get(tuple(e), 0) + v
            hs.append(MultiPoly.from_dict(i - 1, terms))
        return GeneralPolySkew(self.d, max(self.k, 1), self.a, tuple(hs), self.exact)


@dataclass(frozen=True)
class GeneralPolySkew:
    """``x_1 -> x_1 + a``; ``x_i -> x_i + h_i(x_1, ..., x_{i-1})``."""

    d: int
    k: int
    a: Fraction
    h: tuple[MultiPoly, ...]
    exact: bool = True

    def __post_init__(self):
        if self.d < 2 or self.k < 1:
            raise ValueError("need d >= 2 and k >= 1")
        object.__setattr__(self, "a", Fraction(self.a))
        if len(self.h) != self.d - 1:
            raise DimensionError(f"expected {self.d - 1} polynomials h_2..h_d")
        for i, p in enumerate(self.h, start=2):
            if p.nvars != i - 1:
                raise DimensionError(f"h_{i} must take {i - 1} variables")
            if p.degree > self.k:
                raise ValueError(f"deg h_{i} = {p.degree} exceeds k = {self.k}")


Flow = Union[AffineMap, SimplePolySkew, GeneralPolySkew]


def flow_dim(flow: Flow) -> int:
    return flow.d


def step(flow: Flow, x: TorusPoint) -> TorusPoint:
    """One application of the flow to the lift of ``x``."""
    if flow.d != x.d:
        raise DimensionError(f"flow has d={flow.d}, point has d={x.d}")
    v = x.lift
    if isinstance(flow, AffineMap):
        return TorusPoint(tuple(s + a for s, a in zip(mat_vec(flow.A, v), flow.a)))
    if isinstance(flow, SimplePolySkew):
        out = [v[0] + flow.a]
        for i in range(2, flow.d + 1):
            acc = v[i - 1] + flow.h[i - 2](v[0])
            for j in range(2, i):
                bij = flow.b.get((i, j))
                if bij:
                    acc += bij * v[j - 1]
            out.append(acc)
        return TorusPoint(tuple(out))
    if isinstance(flow, GeneralPolySkew):
        out = [v[0] + flow.a]
        for i in range(2, flow.d + 1):
            out.append(v[i - 1] + flow.h[i - 2](*v[:i - 1]))
        return TorusPoint(tuple(out))
    raise TypeError(f"unsupported flow {type(flow).__name__}")


def orbit(flow: Flow, x: TorusPoint, n: int) -> Iterator[TorusPoint]:
    """Yield ``x, f x, ..., f^n x``."""
    if flow.d != x.d:
        raise DimensionError(f"flow has d={flow.d}, point has d={x.d}")
    yield x
    for _ in range(n):
        x = step(flow, x)
        yield x


def power_affine(flow: AffineMap, q: int) -> AffineMap:
    """``f^q = (A^q, sum_{j<q} A^j a mod 1)``."""
    if q < 1:
        raise ValueError("q must be >= 1")
    P, S = identity(flow.d), (Fraction(0),) * flow.d  # f^0
    base_A, base_S = flow.A, flow.a  # f^(2^i)
    while q:
        if q & 1:
            # f^m o f^(2^i): translation S + A^m * base_S
            S = tuple(s + t for s, t in zip(S, mat_vec(P, base_S)))
            P = mat_mul(P, base_A)
        q >>= 1
        if q:
            base_S = tuple(s + t for s, t in zip(base_S, mat_vec(base_A, base_S)))
            base_A = mat_mul(base_A, base_A)
    return AffineMap(P, tuple(_mod1(s) for s in S), flow.exact)


def is_unipotent(A) -> bool:
    """True iff ``(A - I)^d == 0`` over the integers."""
    A = as_matrix(A)
    d = len(A)
    N = mat_sub(A, identity(d))
    return all(v == 0 for row in mat_pow(N, d) for v in row)


def least_unipotent_power(A, m_max: int) -> int | None:
    """Smallest ``1 <= m <= m_max`` with ``A^m`` unipotent, if any."""
    A = as_matrix(A)
    Am = A
    for m in range(1, m_max + 1):
        if is_unipotent(Am):
            return m
        Am = mat_mul(Am, A)
    return None


def _column_reduce(M: list[list[int]]) -> tuple[list[list[int]], int]:
    """Unimodular column operations bringing ``M`` to column echelon form.

    Returns ``(U, rank)``: ``M U`` has nonzero pivot columns ``0..rank-1``
    and zero columns after them, so ``U[:, rank:]`` is a basis of the
    integer kernel.
    """
    m = len(M)
    n = len(M[0]) if M else 0
    M = [row[:] for row in M]
    U = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(dst, src, q):
        for row in M:
            row[dst] -= q * row[src]
        for row in U:
            row[dst] -= q * row[src]

    def swap(i, j):
        for row in M:
            row[i], row[j] = row[j], row[i]
        for row in U:
            row[i], row[j] = row[j], row[i]

    c = 0
    for r in range(m):
        if c >= n:
            break
        while True:
            nz = [j for j in range(c, n) if M[r][j] != 0]
            if len(nz) <= 1:
                break
            p = min(nz, key=lambda j: (abs(M[r][j]), j))
            for j in nz:
                if j != p:
                    colop(j, p, M[r][j] // M[r][p])
        if not nz:
            continue
        swap(c, nz[0])
        if M[r][c] < 0:
            for row in M:
                row[c] = -row[c]
            for row in U:
                row[c] = -row[c]
        c += 1
    return U, c


def kernel_basis(M) -> list[tuple[int, ...]]:
    """Basis of ``{v in Z^n : M v = 0}`` (saturated, columns of a unimodular matrix)."""
    U, rank = _column_reduce([list(r) for r in M])
    n = len(U)
    return [tuple(U[i][j] for i in range(n)) for j in range(rank, n)]


def unipotent_triangularize(A) -> Matrix:
    """``P`` in ``SL(d, Z)`` with ``P^-1 A P`` lower triangular, unit diagonal.

    Peels off one primitive fixed vector at a time: the kernel of ``A - I``
    is read off a unimodular column reduction, the fixed vector is moved to
    the last column of that unimodular matrix, and the complementary block
    is handled recursively.
    """
    A = as_matrix(A)
    if not is_unipotent(A):
        raise ValueError("matrix is not unipotent")
    P = _triangularize(A)
    if det(P) < 0:
        P = tuple((-row[0],) + row[1:] for row in P)
    L = mat_mul(mat_mul(integer_inverse(P), A), P)
    if not is_lower_unitriangular(L):
        raise ArithmeticError("triangularization failed")  # unreachable for unipotent A
    return P


def _triangularize(A: Matrix) -> Matrix:
    d = len(A)
    if d == 1:
        return ((1,),)
    N = mat_sub(A, identity(d))
    U, rank = _column_reduce([list(r) for r in N])
    if rank == d:
        raise ValueError("matrix is not unipotent")
    # move the last kernel column to the end (it already is) -> Q unimodular
    Q = tuple(tuple(row) for row in U)
    B = mat_mul(mat_mul(integer_inverse(Q), A), Q)
    A_top = tuple(row[:d - 1] for row in B[:d - 1])
    P_top = _triangularize(A_top)
    ext = tuple(tuple(P_top[i]) + (0,) for i in range(d - 1)) + ((0,) * (d - 1) + (1,),)
    return mat_mul(Q, ext)


def is_lower_unitriangular(L) -> bool:
    return all(L[i][i] == 1 and all(L[i][j] == 0 for j in range(i + 1, len(L)))
               for i in range(len(L)))


# --- observables ----------------------------------------------------------

@dataclass(frozen=True)
class CharacterIndex:
    k_vec: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "k_vec", tuple(int(k) for k in self.k_vec))

    @property
    def d(self) -> int:
        return len(self.k_vec)

    def is_zero(self) -> bool:
        return not any(self.k_vec)


def _as_index(k) -> CharacterIndex:
    return k if isinstance(k, CharacterIndex) else CharacterIndex(tuple(k))


def _coords(x) -> tuple:
    if isinstance(x, TorusPoint):
        return x.coords
    return tuple(x)


def character_eval(k, x) -> complex:
    """``exp(2 pi i k.x)``."""
    k = _as_index(k)
    xs = _coords(x)
    if len(xs) != k.d:
        raise DimensionError("character and point dimensions differ")
    dot = sum(kk * v for kk, v in zip(k.k_vec, xs))
    if isinstance(dot, Fraction) or isinstance(dot, int):
        dot = float(_mod1(Fraction(dot)))
    else:
        dot = float(dot) % 1.0
    return cmath.exp(2j * math.pi * dot)


class TrigPolynomial:
    """Finite sum ``sum_k a_k e(k.x)``."""

    def __init__(self, terms: Mapping, d: int | None = None):
        acc: dict[CharacterIndex, complex] = {}
        for k, c in dict(terms).items():
            k = _as_index(k)
            acc[k] = acc.get(k, 0j) + complex(c)
        dims = {k.d for k in acc}
        if d is not None:
            dims.add(d)
        if len(dims) > 1:
            raise DimensionError("character indices of different lengths")
        self.d = dims.pop() if dims else 0
        self.terms: dict[CharacterIndex, complex] = {
            k: acc[k] for k in sorted(acc, key=lambda c: c.k_vec) if acc[k] != 0}

    @classmethod
    def character(cls, k) -> "TrigPolynomial":
        return cls({_as_index(k): 1.0})

    @classmethod
    def constant(cls, c: complex, d: int) -> "TrigPolynomial":
        return cls({(0,) * d: c}, d)

    @property
    def box(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Componentwise bounds ``(m, s)`` with ``m_j <= k_j <= s_j``."""
        if not self.terms:
            return ((0,) * self.d, (0,) * self.d)
        ks = np.array([k.k_vec for k in self.terms])
        return tuple(int(v) for v in ks.min(axis=0)), tuple(int(v) for v in ks.max(axis=0))

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        merged = dict(self.terms)
        for k, c in other.terms.items():
            merged[k] = merged.get(k, 0j) + c
        return TrigPolynomial(merged, self.d or other.d)

    def scale(self, c: complex) -> "TrigPolynomial":
        return TrigPolynomial({k: c * v for k, v in self.terms.items()}, self.d)

    def __repr__(self) -> str:
        return "TrigPolynomial(" + " + ".join(f"{c}*e{k.k_vec}" for k, c in self.terms.items()) + ")"


def as_trigpoly(obs, d: int | None = None) -> TrigPolynomial:
    if isinstance(obs, TrigPolynomial):
        return obs
    return TrigPolynomial.character(obs)


def trigpoly_eval(p: TrigPolynomial, x) -> complex:
    return sum((c * character_eval(k, x) for k, c in p.terms.items()), 0j)


def torus_distance(x, y) -> float:
    """``max_i min(|dx_i|, 1 - |dx_i|)`` with ``dx = x - y mod 1``."""
    xs, ys = _coords(x), _coords(y)
    if len(xs) != len(ys):
        raise DimensionError("points of different dimension")
    best = 0.0
    for a, b in zip(xs, ys):
        if isinstance(a, (Fraction, int)) and isinstance(b, (Fraction, int)):
            diff = _mod1(Fraction(a) - Fraction(b))
            v = float(min(diff, 1 - diff))
        else:
            diff = (float(a) - float(b)) % 1.0
            v = min(diff, 1.0 - diff)
        best = max(best, v)
    return best


# --- flow files -----------------------------------------------------------

_FLOW_KEYS = {"type", "d", "k", "a", "A", "b", "precision_bits"}


def flow_from_dict(doc: Mapping) -> Flow:
    """Build a flow from a parsed flow document.

    Keys: ``type`` (``affine``, ``simple_skew``, ``general_skew``), ``d``,
    ``k``, ``a``, ``A`` (row-major integers, flat or nested), ``b`` (table
    ``b[i][j]``), ``h_i`` (coefficient list in ``x_1``, constant first, or
    a table ``"e1,e2,..." = coeff`` for multivariate terms).
    """
    doc = dict(doc)
    unknown = {k for k in doc if k not in _FLOW_KEYS and not k.startswith("h_")}
    if unknown:
        raise ValueError(f"unknown flow keys: {sorted(unknown)}")
    kind = doc.get("type")
    bits = int(doc.get("precision_bits", DEFAULT_BITS))
    exact = True

    def real(v):
        nonlocal exact
        f, ex = _frac(v, bits)
        exact = exact and ex
        return f

    if kind == "affine":
        flat = doc["A"]
        if flat and isinstance(flat[0], list):
            rows = [list(r) for r in flat]
        else:
            d = int(doc.get("d") or math.isqrt(len(flat)))
            if d * d != len(flat):
                raise DimensionError("A must have d*d entries")
            rows = [flat[i * d:(i + 1) * d] for i in range(d)]
        A = tuple(tuple(int(v) for v in r) for r in rows)
        if "d" in doc and int(doc["d"]) != len(A):
            raise DimensionError("d does not match A")
        a = doc.get("a", ["0"] * len(A))
        if not isinstance(a, list):
            a = [a] + ["0"] * (len(A) - 1)
        return AffineMap(A, tuple(real(v) for v in a), exact)
    d, k = int(doc["d"]), int(doc["k"])
    a = real(doc["a"])
    if kind == "simple_skew":
        h = tuple(Poly(real(c) for c in doc.get(f"h_{i}", [])) for i in range(2, d + 1))
        b = {}
        for i, row in dict(doc.get("b", {})).items():
            for j, v in dict(row).items():
                b[(int(i), int(j))] = real(v)
        return SimplePolySkew(d, k, a, h, b, exact)
    if kind == "general_skew":
        hs = []
        for i in range(2, d + 1):
            raw = doc.get(f"h_{i}", [])
            if isinstance(raw, list):
                hs.append(MultiPoly.univariate(i - 1, [real(c) for c in raw]))
            else:
                terms = {tuple(int(e) for e in key.split(",")): real(v) for key, v in raw.items()}
                hs.append(MultiPoly.from_dict(i - 1, terms))
        return GeneralPolySkew(d, k, a, tuple(hs), exact)
    raise ValueError(f"unknown flow type {kind!r}")


def load_flow(path) -> Flow:
    with open(Path(path), "rb") as fh:
        return flow_from_dict(tomllib.load(fh))


def flow_label(flow: Flow) -> str:
    if isinstance(flow, AffineMap):
        return f"affine(d={flow.d})"
    kind = "simple" if isinstance(flow, SimplePolySkew) else "general"
    return f"{kind}_skew(d={flow.d},k={flow.k})"
