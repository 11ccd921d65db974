from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verifloat.intervals import (
    DivisionByZeroRange,
    Interval,
    NegativeSqrtRange,
    interval_arith,
)
from verifloat.rationals import rat


def iv(lo, hi) -> Interval:
    return Interval(rat(lo.numerator, lo.denominator) if isinstance(lo, Fraction) else rat(lo),
                    rat(hi.numerator, hi.denominator) if isinstance(hi, Fraction) else rat(hi))


small_fraction = st.fractions(min_value=Fraction(-100), max_value=Fraction(100),
                              max_denominator=50)


@st.composite
def intervals(draw):
    a = draw(small_fraction)
    b = draw(small_fraction)
    return iv(min(a, b), max(a, b))


def sample_points(interval: Interval):
    lo, hi = interval.lo, interval.hi
    mid = (lo + hi) / 2
    return [lo, mid, hi, (lo + mid) / 2, (mid + hi) / 2]


def test_bounds_order_checked():
    with pytest.raises(ValueError):
        Interval(rat(2), rat(1))


def test_basic_arith_values():
    a = iv(1, 2)
    b = iv(4, 8)
    assert a + b == iv(5, 10)
    assert a - b == iv(-7, -2)
    # all four corner products of [-2,3] x [-5,7]: 10, -14, -15, 21
    assert iv(-2, 3) * iv(-5, 7) == iv(-15, 21)
    assert a / b == iv(Fraction(1, 8), Fraction(1, 2))
    assert -a == iv(-2, -1)


def test_sqrt_perfect_squares_exact():
    assert iv(4, 9).sqrt() == iv(2, 3)
    assert iv(0, Fraction(1, 4)).sqrt() == iv(0, Fraction(1, 2))


def test_sqrt_outward():
    s = iv(2, 3).sqrt()
    assert s.lo * s.lo <= 2 and 3 <= s.hi * s.hi
    assert s.hi - s.lo < rat(1)  # sanity: nowhere near degenerate


def test_domain_failures():
    with pytest.raises(DivisionByZeroRange):
        iv(1, 2) / iv(-1, 1)
    with pytest.raises(NegativeSqrtRange):
        iv(-1, 4).sqrt()
    with pytest.raises(ValueError):
        interval_arith("pow", iv(1, 2), iv(1, 2))


def test_queries():
    a = iv(-3, 5)
    assert a.width() == 8
    assert a.mid() == 1
    assert a.max_abs() == 5
    assert a.min_abs() == 0
    assert iv(2, 5).min_abs() == 2
    assert iv(-5, -2).min_abs() == 2
    assert a.contains(rat(0)) and not a.contains(rat(6))
    assert a.encloses(iv(0, 5)) and not a.encloses(iv(0, 6))


def test_lattice_ops():
    assert iv(0, 2).hull(iv(5, 6)) == iv(0, 6)
    assert iv(0, 4).intersect(iv(2, 9)) == iv(2, 4)
    assert iv(0, 1).intersect(iv(2, 3)) is None
    assert iv(1, 3).widen(rat(1, 2)) == iv(Fraction(1, 2), Fraction(7, 2))


@given(intervals(), intervals())
@settings(max_examples=200)
def test_add_sub_mul_enclose_pointwise_results(a, b):
    for op, fn in (("add", lambda x, y: x + y),
                   ("sub", lambda x, y: x - y),
                   ("mul", lambda x, y: x * y)):
        result = interval_arith(op, a, b)
        for x in sample_points(a):
            for y in sample_points(b):
                assert result.contains(fn(x, y)), (op, a, b, x, y)


@given(intervals(), intervals())
@settings(max_examples=200)
def test_div_encloses_pointwise_results(a, b):
    if b.contains(rat(0)):
        with pytest.raises(DivisionByZeroRange):
            a / b
        return
    result = a / b
    for x in sample_points(a):
        for y in sample_points(b):
            assert result.contains(x / y)


@given(intervals())
def test_scale_matches_pointwise(a):
    for k in (rat(-3), rat(0), rat(7, 2)):
        scaled = a.scale(k)
        for x in sample_points(a):
            assert scaled.contains(x * k)
