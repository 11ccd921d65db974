"""Closed intervals with exact rational endpoints.

These are the base enclosures for every range the analysis manipulates.  All
operations are exact except sqrt, whose irrational endpoints are rounded
*outward* with dyadic enclosures (exact for perfect squares), so the computed
interval always contains the true image.

Division by an interval containing zero and sqrt of an interval reaching
below zero are not representable; they raise DivisionByZeroRange /
NegativeSqrtRange, which the engines catch and convert into analysis issues.
"""

from __future__ import annotations

from .rationals import ONE, ZERO, rat, sqrt_down, sqrt_up


class RangeFailure(ArithmeticError):
    """An interval operation left the domain where a sound result exists."""


class DivisionByZeroRange(RangeFailure):
    def __init__(self, divisor):
        super().__init__("divisor range %s contains zero" % (divisor,))
        self.divisor = divisor


class NegativeSqrtRange(RangeFailure):
    def __init__(self, arg):
        super().__init__("sqrt argument range %s reaches below zero" % (arg,))
        self.arg = arg


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = rat(lo) if not hasattr(lo, "denominator") else lo
        hi = lo if hi is None else (rat(hi) if not hasattr(hi, "denominator") else hi)
        if lo > hi:
            raise ValueError("interval bounds out of order: [%s, %s]" % (lo, hi))
        self.lo = lo
        self.hi = hi

    @classmethod
    def point(cls, v):
        return cls(v, v)

    def __repr__(self):
        return "Interval(%s, %s)" % (self.lo, self.hi)

    def __eq__(self, other):
        return isinstance(other, Interval) and self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    # -- queries ---------------------------------------------------------

    def width(self):
        return self.hi - self.lo

    def mid(self):
        return (self.lo + self.hi) / 2

    def max_abs(self):
        return max(abs(self.lo), abs(self.hi))

    def min_abs(self):
        if self.contains(ZERO):
            return ZERO
        return min(abs(self.lo), abs(self.hi))

    def contains(self, q) -> bool:
        return self.lo <= q <= self.hi

    def encloses(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def is_point(self) -> bool:
        return self.lo == self.hi

    # -- lattice ---------------------------------------------------------

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def intersect(self, other: "Interval"):
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            return None
        return Interval(lo, hi)

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other):
        other = _coerce(other)
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        other = _coerce(other)
        products = (
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        )
        return Interval(min(products), max(products))

    def __truediv__(self, other):
        other = _coerce(other)
        if other.contains(ZERO):
            raise DivisionByZeroRange(other)
        inverse = Interval(ONE / other.hi, ONE / other.lo)
        return self * inverse

    def scale(self, q):
        if q >= 0:
            return Interval(self.lo * q, self.hi * q)
        return Interval(self.hi * q, self.lo * q)

    def shift(self, q):
        return Interval(self.lo + q, self.hi + q)

    def sqrt(self) -> "Interval":
        if self.lo < 0:
            raise NegativeSqrtRange(self)
        return Interval(sqrt_down(self.lo), sqrt_up(self.hi))

    def widen(self, q):
        """Enlarge symmetrically by q >= 0 (used for error padding)."""
        if q < 0:
            raise ValueError("widen by negative amount")
        return Interval(self.lo - q, self.hi + q)


def _coerce(x):
    if isinstance(x, Interval):
        return x
    return Interval.point(rat(x) if isinstance(x, int) else x)


def interval_arith(op: str, a: Interval, b: Interval | None = None) -> Interval:
    """Dispatch a single sound interval step by operation name."""
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    if op == "neg":
        return -a
    if op == "sqrt":
        return a.sqrt()
    raise ValueError("unknown interval operation %r" % op)
