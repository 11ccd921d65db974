"""Exact rational arithmetic helpers.

Everything the analysis computes — interval endpoints, affine coefficients,
error magnitudes — lives in exact rationals so that no internal rounding can
compromise soundness.  The backing type is gmpy2.mpq when available (much
faster on the long mul/div chains the engines produce) and fractions.Fraction
otherwise; both normalize to lowest terms with a positive denominator, which
callers rely on.
"""

from __future__ import annotations

from fractions import Fraction

try:
    from gmpy2 import mpq as _mpq

    Rat = type(_mpq(1, 2))

    def rat(num, den=1):
        return _mpq(num, den)

except ImportError:  # pragma: no cover - exercised only without gmpy2
    Rat = Fraction

    def rat(num, den=1):
        return Fraction(num, den)


ZERO = rat(0)
ONE = rat(1)
TWO = rat(2)


def num(q):
    return int(q.numerator)


def den(q):
    return int(q.denominator)


def is_rat(x) -> bool:
    return isinstance(x, (Rat, Fraction, int))


def from_decimal(text: str):
    """Parse a decimal literal (optionally signed, with exponent) exactly.

    "1.25e-3" -> 1/800.  Raises ValueError on anything that is not a plain
    decimal number; hex floats and inf/nan are deliberately not accepted.
    """
    s = text.strip().lower()
    if not s:
        raise ValueError("empty numeric literal")
    sign = 1
    if s[0] in "+-":
        if s[0] == "-":
            sign = -1
        s = s[1:]
    mant, _, exp_s = s.partition("e")
    exp = int(exp_s) if exp_s else 0
    if _ == "e" and not exp_s:
        raise ValueError("missing exponent in %r" % text)
    intpart, dot, fracpart = mant.partition(".")
    digits = (intpart + fracpart) or ""
    if not digits.isdigit():
        raise ValueError("bad numeric literal %r" % text)
    shift = exp - len(fracpart)
    value = rat(int(digits))
    if shift >= 0:
        value = value * rat(10) ** shift
    else:
        value = value / rat(10) ** (-shift)
    return sign * value


def from_float(x: float):
    """Exact rational value of a finite float."""
    return rat(Fraction(x))


def to_float(q) -> float:
    """Nearest double (correctly rounded by the int/int true division)."""
    return num(q) / den(q)


def floor_log2_abs(q) -> int:
    """Largest e with 2**e <= |q|.  q must be nonzero."""
    n, d = abs(num(q)), den(q)
    if n == 0:
        raise ValueError("floor_log2_abs(0)")
    e = n.bit_length() - d.bit_length()
    # bit_length only brackets the ratio; fix up by exact comparison
    if e >= 0:
        if (d << e) > n:
            e -= 1
        elif (d << (e + 1)) <= n:
            e += 1
    else:
        if d > (n << -e):
            e -= 1
        elif d <= (n << (-e - 1)):
            e += 1
    return e


def floor_log10_abs(q) -> int:
    """Largest e with 10**e <= |q|.  q must be nonzero."""
    n, d = abs(num(q)), den(q)
    if n == 0:
        raise ValueError("floor_log10_abs(0)")
    e = len(str(n)) - len(str(d))
    while 10 ** max(e, 0) * d > n * 10 ** max(-e, 0):
        e -= 1
    while 10 ** max(e + 1, 0) * d <= n * 10 ** max(-(e + 1), 0):
        e += 1
    return e


def _isqrt(n: int) -> int:
    import math

    return math.isqrt(n)


def sqrt_enclosure(q, rel_bits: int = 120):
    """Outward enclosure (lo, hi) of sqrt(q) with lo == hi for exact squares.

    lo and hi are rationals with lo <= sqrt(q) <= hi and, for inexact roots,
    hi - lo about 2**-rel_bits relative to the root.
    """
    if q < 0:
        raise ValueError("sqrt of negative rational")
    if q == 0:
        return ZERO, ZERO
    n, d = num(q), den(q)
    m = n * d  # sqrt(n/d) = sqrt(n*d)/d
    k = rel_bits
    while True:
        s = _isqrt(m << (2 * k))
        if s * s == m << (2 * k):
            r = rat(s, d << k)
            return r, r
        if s.bit_length() > rel_bits:
            break
        k *= 2
    lo = rat(s, d << k)
    hi = rat(s + 1, d << k)
    return lo, hi


def sqrt_down(q, rel_bits: int = 120):
    return sqrt_enclosure(q, rel_bits)[0]


def sqrt_up(q, rel_bits: int = 120):
    return sqrt_enclosure(q, rel_bits)[1]


def round_to_binary(q, prec_bits: int, min_normal_exp: int | None = None):
    """Round q to the nearest (ties-to-even) binary float value, exactly.

    prec_bits is the significand width (24 for single, 53 for double);
    min_normal_exp, when given, turns on gradual underflow below 2**min_normal_exp.
    The result is returned as an exact rational; exponent overflow is the
    caller's concern (compare against the format's threshold).
    """
    if q == 0:
        return ZERO
    n, d = num(q), den(q)
    sign = 1
    if n < 0:
        sign, n = -1, -n
    e = floor_log2_abs(rat(n, d))
    lsb = e - (prec_bits - 1)
    if min_normal_exp is not None and e < min_normal_exp:
        lsb = min_normal_exp - (prec_bits - 1)
    # m = round(n/d / 2**lsb) with ties to even
    if lsb <= 0:
        big_n, big_d = n << (-lsb), d
    else:
        big_n, big_d = n, d << lsb
    m, r = divmod(big_n, big_d)
    if 2 * r > big_d or (2 * r == big_d and m % 2 == 1):
        m += 1
    if lsb <= 0:
        return rat(sign * m, 1 << (-lsb))
    return rat(sign * (m << lsb))


def dyadic(q):
    """(m, e) with q == m * 2**e and m odd (or zero), or None if q is not dyadic."""
    d = den(q)
    if d & (d - 1):
        return None
    n = num(q)
    if n == 0:
        return (0, 0)
    e = -(d.bit_length() - 1)
    while n % 2 == 0:
        n //= 2
        e += 1
    return (n, e)


def _decimal_exact(q, max_digits: int):
    """Exact decimal digit string for q if it terminates quickly, else None.

    Returns (digits, exponent) so that q == ±0.d1d2... * 10**exponent style
    rendering can be assembled by the caller; digits has no trailing zeros.
    """
    n, d = abs(num(q)), den(q)
    if n == 0:
        return ("0", 0)
    # strip factors of 2 and 5 from the denominator
    k2 = 0
    while d % 2 == 0:
        d //= 2
        k2 += 1
    k5 = 0
    while d % 5 == 0:
        d //= 5
        k5 += 1
    if d != 1:
        return None
    shift = max(k2, k5)
    digits = str(n * 2 ** (shift - k2) * 5 ** (shift - k5))
    if len(digits.rstrip("0")) > max_digits:
        return None
    e = len(digits) - 1 - shift
    digits = digits.rstrip("0") or "0"
    return (digits, e)


def _render(digits: str, e: int, negative: bool) -> str:
    sign = "-" if negative else ""
    if -4 <= e <= 16:
        if e >= len(digits) - 1:
            body = digits + "0" * (e - (len(digits) - 1)) + ".0"
        elif e >= 0:
            body = digits[: e + 1] + "." + digits[e + 1 :]
        else:
            body = "0." + "0" * (-e - 1) + digits
        return sign + body
    frac = digits[1:].rstrip("0")
    return "%s%s.%se%+03d" % (sign, digits[0], frac or "0", e)


def format_outward(q, sig: int = 17, direction: str = "nearest") -> str:
    """Decimal rendering of q with >= sig significant digits.

    direction "down"/"up" rounds the last digit outward so the printed value
    is a sound lower/upper bound for q; "nearest" rounds to the closest
    sig-digit decimal (ties to even), so 17 digits round-trip any double.
    """
    if q == 0:
        return "0.0"
    exact = _decimal_exact(q, sig)
    if exact is not None:
        digits, e = exact
        return _render(digits, e, q < 0)
    n = abs(q)
    e = floor_log10_abs(n)
    scale = sig - 1 - e
    if scale >= 0:
        scaled = n * 10 ** scale
    else:
        scaled = n / 10 ** (-scale)
    m_floor = num(scaled) // den(scaled)
    exact_hit = m_floor * den(scaled) == num(scaled)
    if direction == "down":
        m = m_floor if q > 0 else (m_floor if exact_hit else m_floor + 1)
    elif direction == "up":
        m = (m_floor if exact_hit else m_floor + 1) if q > 0 else m_floor
    else:
        frac2 = 2 * (num(scaled) - m_floor * den(scaled))
        if frac2 > den(scaled) or (frac2 == den(scaled) and m_floor % 2 == 1):
            m = m_floor + 1
        else:
            m = m_floor
    digits = str(m)
    if len(digits) > sig:  # rounding bumped 999... over
        e += len(digits) - sig
        digits = digits[:sig]
    digits = digits.rstrip("0") or "0"
    return _render(digits, e, q < 0)


def decimal_exact_str(q, max_digits: int = 500):
    """Exact decimal string when q terminates within max_digits, else None."""
    exact = _decimal_exact(q, max_digits)
    if exact is None:
        return None
    digits, e = exact
    return _render(digits, e, q < 0)


def rat_str(q) -> str:
    """Exact num/den string, stable across backends."""
    d = den(q)
    return "%d" % num(q) if d == 1 else "%d/%d" % (num(q), d)
