"""Constraint problems for the satisfiability backends.

A Problem is a box of variable bounds plus a list of asserted boolean
constraints (comparisons composed with and/or/not) over the expression
language, extended with Abs — needed internally for error-magnitude
constraints, never produced by the parser.

Everything here is immutable and has a deterministic canonical key, which
the session layer uses for memoization and the SMT emitter for stable
output.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..intervals import Interval
from ..rationals import rat_str
from ..syntax import (
    Add,
    BoolAnd,
    BoolNot,
    BoolOr,
    Call,
    Comparison,
    Div,
    If,
    Let,
    Lit,
    Mul,
    Sqrt,
    Sub,
    Variable,
)


@dataclass(frozen=True)
class Abs:
    arg: object


@dataclass(frozen=True)
class Problem:
    bounds: tuple  # tuple of (name, Interval), in declaration order
    assertions: tuple  # tuple of BoolExpr

    @classmethod
    def build(cls, bounds: dict, assertions) -> "Problem":
        return cls(tuple(bounds.items()), tuple(assertions))

    def bound_map(self) -> dict:
        return dict(self.bounds)

    def conjoin(self, extra_assertions, extra_bounds: dict | None = None) -> "Problem":
        bounds = self.bounds
        if extra_bounds:
            bounds = bounds + tuple(extra_bounds.items())
        return Problem(bounds, self.assertions + tuple(extra_assertions))


# -- verdicts ----------------------------------------------------------------


@dataclass(frozen=True)
class Sat:
    model: tuple  # tuple of (name, Rat)

    def model_map(self) -> dict:
        return dict(self.model)


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str = "incomplete"  # "timeout" | "incomplete"


# -- normalization -----------------------------------------------------------


def nnf(cond, negate: bool = False):
    """Push negations down to comparisons (flipping them exactly)."""
    if isinstance(cond, Comparison):
        return cond.negated() if negate else cond
    if isinstance(cond, BoolNot):
        return nnf(cond.arg, not negate)
    if isinstance(cond, BoolAnd):
        a, b = nnf(cond.left, negate), nnf(cond.right, negate)
        return BoolOr(a, b) if negate else BoolAnd(a, b)
    if isinstance(cond, BoolOr):
        a, b = nnf(cond.left, negate), nnf(cond.right, negate)
        return BoolAnd(a, b) if negate else BoolOr(a, b)
    raise TypeError("not a boolean constraint: %r" % (cond,))


def conjuncts(cond):
    """Top-level conjuncts of an NNF constraint."""
    if isinstance(cond, BoolAnd):
        yield from conjuncts(cond.left)
        yield from conjuncts(cond.right)
    else:
        yield cond


# -- canonical keys ----------------------------------------------------------


def expr_key(e) -> str:
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Lit):
        return rat_str(e.value)
    if isinstance(e, Add):
        return "(+ %s %s)" % (expr_key(e.left), expr_key(e.right))
    if isinstance(e, Sub):
        return "(- %s %s)" % (expr_key(e.left), expr_key(e.right))
    if isinstance(e, Mul):
        return "(* %s %s)" % (expr_key(e.left), expr_key(e.right))
    if isinstance(e, Div):
        return "(/ %s %s)" % (expr_key(e.left), expr_key(e.right))
    if isinstance(e, Sqrt):
        return "(sqrt %s)" % expr_key(e.arg)
    if isinstance(e, Abs):
        return "(abs %s)" % expr_key(e.arg)
    if isinstance(e, If):
        return "(ite %s %s %s)" % (cond_key(e.cond), expr_key(e.then),
                                   expr_key(e.orelse))
    if isinstance(e, Let):
        return "(let %s %s %s)" % (e.name, expr_key(e.bound), expr_key(e.body))
    if isinstance(e, Call):
        return "(%s %s)" % (e.func, " ".join(expr_key(a) for a in e.args))
    raise TypeError("no key for %r" % (e,))


def cond_key(c) -> str:
    if isinstance(c, Comparison):
        return "(%s %s %s)" % (c.op, expr_key(c.left), expr_key(c.right))
    if isinstance(c, BoolAnd):
        return "(and %s %s)" % (cond_key(c.left), cond_key(c.right))
    if isinstance(c, BoolOr):
        return "(or %s %s)" % (cond_key(c.left), cond_key(c.right))
    if isinstance(c, BoolNot):
        return "(not %s)" % cond_key(c.arg)
    raise TypeError("no key for %r" % (c,))


def problem_key(p: Problem) -> str:
    bounds = ";".join("%s:[%s,%s]" % (v, rat_str(iv.lo), rat_str(iv.hi))
                      for v, iv in p.bounds)
    asserts = ";".join(cond_key(a) for a in p.assertions)
    return bounds + "|" + asserts
