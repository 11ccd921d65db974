"""Finite-precision format models.

Each supported format is abstracted by the standard rounding model
fl(x op y) = (x op y)(1 + delta) with |delta| <= eps, plus an overflow
threshold.  The double-double and quad-double formats are software
extensions built from hardware doubles, so they inherit the double exponent
range but carry a far smaller unit roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rationals import Rat, dyadic, rat, round_to_binary

_F64_MAX = (2 - rat(1, 2 ** 52)) * rat(2) ** 1023
_F32_MAX = (2 - rat(1, 2 ** 23)) * rat(2) ** 127


@dataclass(frozen=True)
class PrecisionSpec:
    name: str
    eps: Rat              # unit roundoff: |delta| <= eps per operation
    mantissa_bits: int    # significand width used for exact-literal checks
    min_normal_exp: int   # smallest normal binary exponent
    max_value: Rat        # overflow threshold (largest finite magnitude)
    c_type: str           # how emitted code spells this format

    def __str__(self):
        return self.name


FLOAT32 = PrecisionSpec("float32", rat(1, 2 ** 24), 24, -126, _F32_MAX, "float")
FLOAT64 = PrecisionSpec("float64", rat(1, 2 ** 53), 53, -1022, _F64_MAX, "double")
# Bailey-style compensated formats: unevaluated sums of 2 resp. 4 doubles.
DOUBLE_DOUBLE = PrecisionSpec(
    "doubledouble", rat(1, 2 ** 105), 53, -1022, _F64_MAX, "dd_real")
QUAD_DOUBLE = PrecisionSpec(
    "quaddouble", rat(1, 2 ** 211), 53, -1022, _F64_MAX, "qd_real")

# Ordered least precise first: verification reports the cheapest format that
# meets the postcondition.
PRECISIONS = (FLOAT32, FLOAT64, DOUBLE_DOUBLE, QUAD_DOUBLE)
_BY_NAME = {p.name: p for p in PRECISIONS}
_ALIASES = {
    "float": FLOAT32,
    "single": FLOAT32,
    "double": FLOAT64,
    "dd": DOUBLE_DOUBLE,
    "dd_real": DOUBLE_DOUBLE,
    "qd": QUAD_DOUBLE,
    "qd_real": QUAD_DOUBLE,
}


def precision_by_name(name: str) -> PrecisionSpec:
    p = _BY_NAME.get(name) or _ALIASES.get(name)
    if p is None:
        raise KeyError("unknown precision %r (known: %s)" %
                       (name, ", ".join(sorted(_BY_NAME))))
    return p


def representable(q: Rat, spec: PrecisionSpec) -> bool:
    """True when q is stored exactly, so the literal carries no roundoff.

    For the compensated formats this checks plain double representability;
    a double-exact value is exact in dd/qd as well (the converse also holds
    for many values, but claiming only this direction keeps it sound).
    """
    if q == 0:
        return True
    d = dyadic(q)
    if d is None:
        return False
    m, e = d
    bits = abs(m).bit_length()
    if bits > spec.mantissa_bits:
        return False
    # normalized exponent of the value (position of the leading bit)
    top = e + bits - 1
    if top < spec.min_normal_exp - spec.mantissa_bits + 1:
        return False
    return abs(q) <= spec.max_value


def nearest(q: Rat, spec: PrecisionSpec) -> Rat:
    """Exact value of q rounded to this format (ties to even)."""
    return round_to_binary(q, spec.mantissa_bits, spec.min_normal_exp)


def literal_roundoff(q: Rat, spec: PrecisionSpec) -> Rat:
    """Bound on |fl(q) - q| for storing a literal/constant."""
    if representable(q, spec):
        return rat(0)
    if spec.eps == rat(1, 2 ** spec.mantissa_bits):
        # Hardware format: the rounding grid is fully described, so the
        # exact distance to the nearest representable is available.
        return abs(nearest(q, spec) - q)
    # Compensated formats store literals as short sums of doubles; use the
    # relative bound instead of the 53-bit grid, which is only the
    # exactness check above.
    return spec.eps * abs(q)
