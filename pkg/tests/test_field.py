import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from bgwtilt.field import (
    QuadraticNumber,
    det,
    find_condition_vector,
    in_row_space,
    rank,
    recognize_sqrt_rational,
    rref,
    squarefree_decomposition,
)

fractions = st.fractions(min_value=-50, max_value=50, max_denominator=30)
radicands = st.sampled_from([2, 3, 5, 6, 7])


@st.composite
def quadratics(draw, d=None):
    return QuadraticNumber(draw(fractions), draw(fractions), d if d is not None else draw(radicands))


@given(st.integers(1, 10**6))
def test_squarefree_decomposition(n):
    s, d = squarefree_decomposition(n)
    assert s * s * d == n
    assert all(d % (p * p) for p in range(2, math.isqrt(d) + 1))


def test_sqrt_of_rationals():
    assert QuadraticNumber.sqrt(2) == QuadraticNumber(0, 1, 2)
    assert QuadraticNumber.sqrt(Fraction(9, 4)) == Fraction(3, 2)
    assert QuadraticNumber.sqrt(Fraction(1, 2)) == QuadraticNumber(0, Fraction(1, 2), 2)
    assert QuadraticNumber.sqrt(0) == 0
    with pytest.raises(ValueError):
        QuadraticNumber.sqrt(-1)


@given(radicands.flatmap(lambda d: st.tuples(quadratics(d), quadratics(d), quadratics(d))))
def test_field_axioms(triple):
    x, y, z = triple
    assert x + y == y + x
    assert x * (y + z) == x * y + x * z
    assert (x - y) + y == x
    if y != 0:
        assert (x / y) * y == x
        assert y * y.conjugate() == y.norm()


@given(quadratics(), quadratics())
def test_order_agrees_with_floats(x, y):
    if x.d != y.d and x.q != 0 and y.q != 0:
        return
    fx, fy = float(x), float(y)
    if abs(fx - fy) > 1e-9:
        assert (x < y) == (fx < fy)
    assert x.sign() == (0 if x == 0 else (1 if fx > 0 else -1))


def test_mixing_fields_raises():
    with pytest.raises(ValueError):
        QuadraticNumber.sqrt(2) + QuadraticNumber.sqrt(3)


def test_integer_powers():
    r2 = QuadraticNumber.sqrt(2)
    assert r2**2 == 2
    assert r2**-2 == Fraction(1, 2)
    assert (1 + r2) ** 0 == 1


def test_recognize_sqrt_rational():
    assert recognize_sqrt_rational(math.sqrt(2)) == QuadraticNumber.sqrt(2)
    assert recognize_sqrt_rational(0.75) == Fraction(3, 4)
    assert recognize_sqrt_rational(math.pi) is None or float(recognize_sqrt_rational(math.pi)) != math.pi
    assert recognize_sqrt_rational(-1.0) is None


def test_rref_rank_and_row_space():
    rows = [[1, 2, 3], [2, 4, 6], [0, 1, 1]]
    m, piv = rref([list(map(Fraction, r)) for r in rows])
    assert piv == [0, 1]
    assert rank(rows) == 2
    assert in_row_space(rows, [1, 3, 4])
    assert not in_row_space(rows, [0, 0, 1])


@given(st.lists(st.lists(fractions, min_size=3, max_size=3), min_size=3, max_size=3))
def test_det_matches_float(rows):
    import numpy as np

    exact = det(rows)
    assert abs(float(exact) - np.linalg.det(np.array(rows, dtype=float))) <= 1e-6 * max(1.0, abs(float(exact)))
    assert (exact == 0) == (rank(rows) < 3)


def test_det_over_quadratic_field():
    r2 = QuadraticNumber.sqrt(2)
    assert det([[r2, 1], [1, r2]]) == 1


def test_condition_vector():
    assert find_condition_vector([[2, 4]]) == (1, 2)
    assert find_condition_vector([[1, 0], [0, 1]]) == (1, 1)
    assert find_condition_vector([[1, -1]]) is None
    # rank two in three types: (1,1,0) and (0,1,1) span (1,2,1)
    v = find_condition_vector([[1, 1, 0], [0, 1, 1]])
    assert v is not None and 1 in v and in_row_space([[1, 1, 0], [0, 1, 1]], v)
