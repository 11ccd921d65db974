"""Affine arithmetic over exact rationals.

An affine form x0 + sum(xi * eps_i) represents a quantity within
[x0 - rad, x0 + rad] where rad = sum |xi| and each eps_i ranges over [-1, 1].
Shared noise ids track first-order correlations between quantities, which is
what makes cancellation (x - x = 0) exact and keeps error accumulation linear
instead of exponential.

Nonlinear steps (mul, sqrt, inverse) are linearized with a sound residual
folded into one fresh noise term.  sqrt and inverse use min-range
linearization: the slope is the derivative at the endpoint where it is
flattest, which keeps the result inside the true image band.  All
coefficients stay rational; sqrt endpoints are enclosed outward.

Noise ids come from a NoiseSource so every term can carry a provenance label
(where the uncertainty entered the computation).
"""

from __future__ import annotations

from .intervals import Interval, NegativeSqrtRange
from .rationals import ONE, ZERO, rat, sqrt_down, sqrt_up

# Terms whose coefficient is below this fraction of the total radius carry no
# usable information; they get folded together to bound form growth.
CONDENSE_REL = rat(1, 2 ** 200)


class NoiseSource:
    """Allocates fresh noise-term ids and remembers why each one exists."""

    def __init__(self):
        self._next = 0
        self.tags: dict[int, str] = {}

    def fresh(self, tag: str = "") -> int:
        i = self._next
        self._next = i + 1
        self.tags[i] = tag
        return i


class AffineForm:
    __slots__ = ("x0", "terms")

    def __init__(self, x0, terms=None):
        self.x0 = rat(x0) if isinstance(x0, int) else x0
        self.terms: dict[int, object] = {} if terms is None else terms

    @classmethod
    def constant(cls, v):
        return cls(v, {})

    @classmethod
    def from_interval(cls, iv: Interval, noise: NoiseSource, tag: str = ""):
        mid = iv.mid()
        radius = iv.hi - mid
        if radius == 0:
            return cls(mid, {})
        return cls(mid, {noise.fresh(tag): radius})

    def radius(self):
        total = ZERO
        for c in self.terms.values():
            total += abs(c)
        return total

    def to_interval(self) -> Interval:
        r = self.radius()
        return Interval(self.x0 - r, self.x0 + r)

    def max_abs(self):
        return self.to_interval().max_abs()

    def is_zero(self) -> bool:
        return self.x0 == 0 and not self.terms

    def __repr__(self):
        parts = ["%s" % self.x0]
        for i in sorted(self.terms):
            parts.append("%s*e%d" % (self.terms[i], i))
        return "AffineForm(" + " + ".join(parts) + ")"

    # -- exact linear operations ------------------------------------------

    def __neg__(self):
        return AffineForm(-self.x0, {i: -c for i, c in self.terms.items()})

    def __add__(self, other):
        return affine_linear(ONE, self, ONE, other, ZERO)

    def __sub__(self, other):
        return affine_linear(ONE, self, -ONE, other, ZERO)

    def scale(self, alpha):
        if alpha == 0:
            return AffineForm.constant(ZERO)
        return AffineForm(self.x0 * alpha, {i: c * alpha for i, c in self.terms.items()})

    def shift(self, beta):
        return AffineForm(self.x0 + beta, dict(self.terms))

    def add_noise(self, magnitude, noise: NoiseSource, tag: str = ""):
        """Return self +- magnitude via one fresh term (no-op when zero)."""
        if magnitude == 0:
            return self
        if magnitude < 0:
            raise ValueError("noise magnitude must be nonnegative")
        terms = dict(self.terms)
        terms[noise.fresh(tag)] = magnitude
        return AffineForm(self.x0, terms)


def affine_linear(alpha, x: AffineForm, beta, y: AffineForm, zeta) -> AffineForm:
    """alpha*x + beta*y + zeta, exact (no fresh noise)."""
    terms: dict[int, object] = {}
    if alpha != 0:
        for i, c in x.terms.items():
            terms[i] = c * alpha
    if beta != 0:
        for i, c in y.terms.items():
            prev = terms.get(i)
            v = c * beta if prev is None else prev + c * beta
            if v == 0:
                terms.pop(i, None)
            else:
                terms[i] = v
    return AffineForm(alpha * x.x0 + beta * y.x0 + zeta, terms)


def affine_mul(x: AffineForm, y: AffineForm, noise: NoiseSource, tag: str = "") -> AffineForm:
    """Product with the quadratic part bounded by rad(x)*rad(y) in one fresh term."""
    x0, y0 = x.x0, y.x0
    terms: dict[int, object] = {}
    for i, c in x.terms.items():
        terms[i] = c * y0
    for i, c in y.terms.items():
        prev = terms.get(i)
        v = c * x0 if prev is None else prev + c * x0
        if v == 0:
            terms.pop(i, None)
        else:
            terms[i] = v
    residue = x.radius() * y.radius()
    if residue != 0:
        terms[noise.fresh(tag)] = residue
    return AffineForm(x0 * y0, terms)


def _band_combine(x: AffineForm, alpha, band_lo, band_hi, noise: NoiseSource, tag: str):
    """alpha*x + [band_lo, band_hi]; the band spread becomes one fresh term."""
    zeta = (band_lo + band_hi) / 2
    theta = (band_hi - band_lo) / 2
    out = x.scale(alpha).shift(zeta)
    return out.add_noise(theta, noise, tag)


def affine_sqrt(x: AffineForm, noise: NoiseSource, tag: str = "") -> AffineForm:
    """Min-range sqrt: slope is d/dx sqrt at the high endpoint (flattest)."""
    iv = x.to_interval()
    if iv.lo < 0:
        raise NegativeSqrtRange(iv)
    a, b = iv.lo, iv.hi
    lo_a, hi_a = sqrt_down(a), sqrt_up(a)
    lo_b, hi_b = sqrt_down(b), sqrt_up(b)
    if a == b:
        return AffineForm.constant((lo_a + hi_a) / 2).add_noise((hi_a - lo_a) / 2, noise, tag)
    # alpha <= 1/(2 sqrt(b)) = min of the derivative on [a, b], so
    # g(x) = sqrt(x) - alpha*x is nondecreasing and its range on [a, b]
    # is pinned by the endpoint enclosures.
    alpha = ONE / (2 * hi_b) if hi_b > 0 else ZERO
    band_lo = lo_a - alpha * a
    band_hi = hi_b - alpha * b
    return _band_combine(x, alpha, band_lo, band_hi, noise, tag)


def affine_inv(x: AffineForm, noise: NoiseSource, tag: str = "") -> AffineForm:
    """Min-range 1/x; the argument range must not contain zero."""
    iv = x.to_interval()
    if iv.contains(ZERO):
        from .intervals import DivisionByZeroRange

        raise DivisionByZeroRange(iv)
    if iv.lo > 0:
        a, b = iv.lo, iv.hi
        if a == b:
            return AffineForm.constant(ONE / a)
        # slope -1/b**2 is the flattest derivative; g(x) = 1/x - alpha*x is
        # nonincreasing on [a, b], so the band endpoints are exact.
        alpha = -ONE / (b * b)
        band_hi = ONE / a - alpha * a
        band_lo = ONE / b - alpha * b
        return _band_combine(x, alpha, band_lo, band_hi, noise, tag)
    # mirror through the origin: 1/x = -(1/(-x))
    return -affine_inv(-x, noise, tag)


def affine_div(x: AffineForm, y: AffineForm, noise: NoiseSource, tag: str = "") -> AffineForm:
    return affine_mul(x, affine_inv(y, noise, tag), noise, tag)


def condense(x: AffineForm, noise: NoiseSource, tag: str = "condensed",
             rel=CONDENSE_REL) -> AffineForm:
    """Fold terms below rel*radius into one fresh term (radius unchanged)."""
    r = x.radius()
    if r == 0:
        return x
    cutoff = r * rel
    keep: dict[int, object] = {}
    dropped = ZERO
    for i, c in x.terms.items():
        if abs(c) < cutoff:
            dropped += abs(c)
        else:
            keep[i] = c
    if dropped == 0:
        return x
    keep[noise.fresh(tag)] = dropped
    return AffineForm(x.x0, keep)
