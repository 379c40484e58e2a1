"""Exact arithmetic helpers.

Two things live here: numbers of the form ``p + q*sqrt(d)`` with rational
``p, q`` (enough to handle critical tilts whose coordinates are square roots
of rationals), and small Gaussian-elimination routines over any exact field
(``Fraction`` or :class:`QuadraticNumber`).
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from numbers import Rational


def squarefree_decomposition(n: int) -> tuple[int, int]:
    """Return ``(s, d)`` with ``n == s*s*d`` and ``d`` squarefree."""
    if n <= 0:
        raise ValueError("n must be positive")
    s, d = 1, 1
    k = 2
    while k * k <= n:
        while n % (k * k) == 0:
            n //= k * k
            s *= k
        if n % k == 0:
            n //= k
            d *= k
        k += 1
    return s, d * n


class QuadraticNumber:
    """An element ``p + q*sqrt(d)`` of the real quadratic field Q(sqrt(d)).

    ``d`` is a squarefree integer > 1. Mixed arithmetic with ``int`` and
    ``Fraction`` is supported; mixing two different ``d`` raises.

    >>> r2 = QuadraticNumber.sqrt(2)
    >>> r2 * r2 == 2
    True
    >>> 1 / (1 + r2)
    QuadraticNumber(-1, 1, 2)
    """

    __slots__ = ("p", "q", "d")

    def __init__(self, p, q=0, d: int = 2):
        self.p = Fraction(p)
        self.q = Fraction(q)
        if d < 2:
            raise ValueError("d must be a squarefree integer > 1")
        self.d = int(d)

    @classmethod
    def sqrt(cls, x) -> "QuadraticNumber | Fraction":
        """Exact square root of a nonnegative rational."""
        x = Fraction(x)
        if x < 0:
            raise ValueError("negative radicand")
        if x == 0:
            return Fraction(0)
        s1, d1 = squarefree_decomposition(x.numerator * x.denominator)
        coeff = Fraction(s1, x.denominator)
        if d1 == 1:
            return coeff
        return cls(0, coeff, d1)

    def _coerce(self, other):
        if isinstance(other, QuadraticNumber):
            if other.d != self.d and other.q != 0 and self.q != 0:
                raise ValueError(f"cannot mix Q(sqrt({self.d})) and Q(sqrt({other.d}))")
            return other
        if isinstance(other, (int, Rational)):
            return QuadraticNumber(other, 0, self.d)
        return NotImplemented

    def _join(self, other: "QuadraticNumber") -> int:
        if self.q == 0:
            return other.d
        return self.d

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return QuadraticNumber(self.p + o.p, self.q + o.q, self._join(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.p, -self.q, self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        d = self._join(o)
        return QuadraticNumber(self.p * o.p + d * self.q * o.q, self.p * o.q + self.q * o.p, d)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadraticNumber":
        return QuadraticNumber(self.p, -self.q, self.d)

    def norm(self) -> Fraction:
        return self.p * self.p - self.d * self.q * self.q

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in quadratic field")
        num = self * o.conjugate()
        return QuadraticNumber(num.p / n, num.q / n, num.d)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return o / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return 1 / (self ** (-k))
        result = QuadraticNumber(1, 0, self.d)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def sign(self) -> int:
        ps = (self.p > 0) - (self.p < 0)
        qs = (self.q > 0) - (self.q < 0)
        if qs == 0:
            return ps
        if ps == 0 or ps == qs:
            return qs
        # opposite signs: compare p^2 with d q^2
        if self.p * self.p > self.d * self.q * self.q:
            return ps
        return qs

    def __eq__(self, other):
        o = self._coerce(other) if not isinstance(other, float) else NotImplemented
        if o is NotImplemented:
            return NotImplemented
        return self.p == o.p and (self.q == o.q) and (self.q == 0 or self.d == o.d)

    def __hash__(self):
        if self.q == 0:
            return hash(self.p)
        return hash((self.p, self.q, self.d))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __bool__(self):
        return self.p != 0 or self.q != 0

    def __float__(self):
        return float(self.p) + float(self.q) * math.sqrt(self.d)

    def __repr__(self):
        return f"QuadraticNumber({self.p}, {self.q}, {self.d})"

    def __str__(self):
        if self.q == 0:
            return str(self.p)
        return f"{self.p} + {self.q}*sqrt({self.d})"


def is_exact(x) -> bool:
    return isinstance(x, (int, Rational, QuadraticNumber)) and not isinstance(x, bool)


def recognize_sqrt_rational(x: float, max_denominator: int = 10_000, tol: float = 1e-9):
    """Guess an exact value ``r*sqrt(d)`` (``r`` rational) for the float ``x > 0``.

    Returns a ``Fraction``, a :class:`QuadraticNumber` or ``None``. The guess is
    only a candidate; callers must verify it exactly.
    """
    if not x > 0 or not math.isfinite(x):
        return None
    sq = Fraction(x * x).limit_denominator(max_denominator)
    if sq <= 0 or abs(float(sq) - x * x) > tol * max(1.0, x * x):
        return None
    return QuadraticNumber.sqrt(sq)


def rref(rows):
    """Reduced row echelon form over an exact field. Returns ``(matrix, pivots)``."""
    m = [list(r) for r in rows]
    if not m:
        return m, []
    n_rows, n_cols = len(m), len(m[0])
    pivots = []
    r = 0
    for c in range(n_cols):
        piv = next((i for i in range(r, n_rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        lead = m[r][c]
        m[r] = [v / lead for v in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == n_rows:
            break
    return m, pivots


def rank(rows) -> int:
    return len(rref(rows)[1])


def in_row_space(rows, v) -> bool:
    rows = [list(map(Fraction, r)) for r in rows]
    return rank(rows + [list(map(Fraction, v))]) == rank(rows)


def det(matrix):
    """Determinant over an exact field by fraction-producing elimination."""
    m = [list(r) for r in matrix]
    n = len(m)
    if n == 0:
        return Fraction(1)
    result = Fraction(1)
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            result = -result
        lead = m[c][c]
        result = result * lead
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] / lead
                m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return result


def find_condition_vector(gamma_matrix, search_max: int = 10):
    """Find an integer vector with entries >= 1, some entry equal to 1, in the
    row space of ``gamma_matrix`` (the orthogonal complement of its kernel).

    Rank one is solved directly; higher ranks fall back to a bounded search
    over ``{1..search_max}^K``. Returns a tuple of ints or ``None``.
    """
    rows = [list(map(Fraction, r)) for r in gamma_matrix]
    basis, _ = rref(rows)
    basis = [r for r in basis if any(v != 0 for v in r)]
    if not basis:
        return None
    k = len(basis[0])
    if len(basis) == 1:
        v = basis[0]
        if all(x > 0 for x in v) or all(x < 0 for x in v):
            lo = min(v, key=abs)
            g = [x / lo for x in v]
            if all(x.denominator == 1 for x in g):
                return tuple(int(x) for x in g)
        return None
    if len(basis) == k:
        return (1,) * k
    # search in order of increasing max entry so the smallest witness comes first
    for top in range(1, search_max + 1):
        for cand in itertools.product(range(1, top + 1), repeat=k):
            if max(cand) != top or 1 not in cand:
                continue
            if in_row_space(basis, cand):
                return cand
    return None
