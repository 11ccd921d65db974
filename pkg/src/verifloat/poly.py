"""Canonical-form equality of expressions as real functions.

Two branch bodies that compute the same real function contribute no
divergence error, however differently they are written.  Deciding that
numerically is hopeless at tight tolerances, but for the +,-,*,/ and sqrt
fragment we can decide *identical equality* exactly: expand both sides into
multivariate rational functions (sqrt subterms become opaque atoms keyed by
the canonical form of their argument) and cross-multiply.

This is one-sided: True means provably the same function wherever both are
defined; False just means "not syntactically-algebraically identical".
"""

from __future__ import annotations

from .rationals import ONE, ZERO, rat, rat_str
from .syntax import (
    Add,
    Call,
    Div,
    If,
    Let,
    Lit,
    Mul,
    Sqrt,
    Sub,
    Variable,
    substitute,
)


class NotRational(Exception):
    """Raised for expressions outside the canonicalizable fragment."""


# A monomial maps atom-key -> positive integer exponent; stored as a sorted
# tuple of (atom, exp) pairs.  Atom keys are strings, so ordering is total.
_EMPTY = ()


class Poly:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        self.coeffs: dict[tuple, object] = coeffs or {}

    @classmethod
    def const(cls, c):
        if c == 0:
            return cls({})
        return cls({_EMPTY: c})

    @classmethod
    def atom(cls, key: str):
        return cls({((key, 1),): ONE})

    def is_zero(self) -> bool:
        return not self.coeffs

    def const_value(self):
        """The constant c when the poly is exactly c, else None."""
        if not self.coeffs:
            return ZERO
        if len(self.coeffs) == 1 and _EMPTY in self.coeffs:
            return self.coeffs[_EMPTY]
        return None

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            v = out.get(m)
            v = c if v is None else v + c
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.coeffs.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[tuple, object] = {}
        for m1, c1 in self.coeffs.items():
            for m2, c2 in other.coeffs.items():
                m = _merge_monomials(m1, m2)
                c = c1 * c2
                v = out.get(m)
                v = c if v is None else v + c
                if v == 0:
                    out.pop(m, None)
                else:
                    out[m] = v
        return Poly(out)

    def scale(self, c) -> "Poly":
        if c == 0:
            return Poly({})
        return Poly({m: v * c for m, v in self.coeffs.items()})

    def key(self) -> str:
        """Deterministic canonical rendering, unique per polynomial."""
        parts = []
        for m in sorted(self.coeffs):
            mono = ".".join("%s^%d" % (a, e) for a, e in m) or "1"
            parts.append("%s*%s" % (rat_str(self.coeffs[m]), mono))
        return "+".join(parts) or "0"


def _merge_monomials(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    merged = dict(m1)
    for a, e in m2:
        merged[a] = merged.get(a, 0) + e
    return tuple(sorted(merged.items()))


class RatFunc:
    """num/den pair of polynomials; den is scaled so its first canonical
    coefficient is 1, giving sqrt-argument keys a unique spelling."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly, den: Poly):
        if den.is_zero():
            raise NotRational("division by the zero polynomial")
        dc = den.const_value()
        if dc is not None:
            num = num.scale(ONE / dc)
            den = Poly.const(ONE)
        else:
            lead = den.coeffs[sorted(den.coeffs)[0]]
            num = num.scale(ONE / lead)
            den = den.scale(ONE / lead)
        self.num = num
        self.den = den

    @classmethod
    def const(cls, c):
        return cls(Poly.const(c), Poly.const(ONE))

    @classmethod
    def var(cls, name: str):
        return cls(Poly.atom("v:" + name), Poly.const(ONE))

    def __add__(self, o):
        return RatFunc(self.num * o.den + o.num * self.den, self.den * o.den)

    def __sub__(self, o):
        return RatFunc(self.num * o.den - o.num * self.den, self.den * o.den)

    def __mul__(self, o):
        return RatFunc(self.num * o.num, self.den * o.den)

    def __truediv__(self, o):
        return RatFunc(self.num * o.den, self.den * o.num)

    def key(self) -> str:
        return "[%s]/[%s]" % (self.num.key(), self.den.key())

    def same_function(self, o: "RatFunc") -> bool:
        return (self.num * o.den - o.num * self.den).is_zero()


def to_ratfunc(e, env=None, program=None, _depth: int = 0) -> RatFunc:
    if _depth > 64:
        raise NotRational("expression too deeply nested to canonicalize")
    env = env or {}
    if isinstance(e, Variable):
        got = env.get(e.name)
        return got if got is not None else RatFunc.var(e.name)
    if isinstance(e, Lit):
        return RatFunc.const(e.value)
    if isinstance(e, Add):
        return to_ratfunc(e.left, env, program, _depth + 1) + to_ratfunc(
            e.right, env, program, _depth + 1)
    if isinstance(e, Sub):
        return to_ratfunc(e.left, env, program, _depth + 1) - to_ratfunc(
            e.right, env, program, _depth + 1)
    if isinstance(e, Mul):
        return to_ratfunc(e.left, env, program, _depth + 1) * to_ratfunc(
            e.right, env, program, _depth + 1)
    if isinstance(e, Div):
        return to_ratfunc(e.left, env, program, _depth + 1) / to_ratfunc(
            e.right, env, program, _depth + 1)
    if isinstance(e, Sqrt):
        arg = to_ratfunc(e.arg, env, program, _depth + 1)
        return RatFunc(Poly.atom("s:" + arg.key()), Poly.const(ONE))
    if isinstance(e, Let):
        inner = dict(env)
        inner[e.name] = to_ratfunc(e.bound, env, program, _depth + 1)
        return to_ratfunc(e.body, inner, program, _depth + 1)
    if isinstance(e, Call) and program is not None:
        callee = program.function(e.func)
        sub = {p: a for p, a in zip(callee.params, e.args)}
        return to_ratfunc(substitute(callee.body, sub), env, program, _depth + 1)
    if isinstance(e, If):
        raise NotRational("conditional expression has no single canonical form")
    raise NotRational("cannot canonicalize %r" % (e,))


def equal_real_functions(e1, e2, program=None) -> bool:
    """Provably the same real function (where both are defined)?  One-sided."""
    try:
        f1 = to_ratfunc(e1, program=program)
        f2 = to_ratfunc(e2, program=program)
    except NotRational:
        return False
    return f1.same_function(f2)
