"""Sound range computation for real expressions under preconditions.

Plain interval arithmetic gives the initial enclosure; a binary search
against the constraint solver then tightens each side.  Only solver answers
of the certifying direction move a bound (Unsat tightens, Sat stops), so
every returned interval still encloses the true range; Unknown answers
leave the current sound bound in place.

When interval arithmetic itself fails midway (a divisor straddling zero, a
square-root argument dipping negative), the per-node fallback tightens the
offending subexpression with the solver before retrying, so that e.g. a
denominator of the shape x*x + 1 is recognized as positive even though raw
interval multiplication of x*x straddles zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .intervals import DivisionByZeroRange, Interval, NegativeSqrtRange, RangeFailure
from .rationals import rat
from .solver import BackendConfig, Problem, Sat, Session, Unknown, Unsat
from .solver.constraints import Abs
from .syntax import (
    Add,
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
    substitute,
)


class InfeasibleRegion(RangeFailure):
    """The precondition (plus extra constraints) admits no points at all."""


@dataclass(frozen=True)
class RangeConfig:
    precision: object = rat(1, 10**10)
    max_iter: int = 50
    backend: BackendConfig = field(default_factory=BackendConfig)
    # With tighten off, get_range returns the plain enclosure untouched;
    # downstream error bounds then rest on interval arithmetic alone, which
    # is the honest baseline to compare the solver-assisted bounds against.
    tighten: bool = True


def interval_eval(e, env: dict):
    """Plain interval arithmetic over an environment of Intervals."""
    if isinstance(e, Variable):
        iv = env.get(e.name)
        if iv is None:
            raise RangeFailure("unbounded variable %s" % e.name)
        return iv
    if isinstance(e, Lit):
        return Interval.point(e.value)
    if isinstance(e, Add):
        return interval_eval(e.left, env) + interval_eval(e.right, env)
    if isinstance(e, Sub):
        return interval_eval(e.left, env) - interval_eval(e.right, env)
    if isinstance(e, Mul):
        return interval_eval(e.left, env) * interval_eval(e.right, env)
    if isinstance(e, Div):
        return interval_eval(e.left, env) / interval_eval(e.right, env)
    if isinstance(e, Sqrt):
        return interval_eval(e.arg, env).sqrt()
    if isinstance(e, Abs):
        iv = interval_eval(e.arg, env)
        return Interval(iv.min_abs(), iv.max_abs())
    if isinstance(e, Let):
        inner = dict(env)
        inner[e.name] = interval_eval(e.bound, env)
        return interval_eval(e.body, inner)
    if isinstance(e, If):
        diff, strict = e.cond.normalized()
        g = interval_eval(diff, env)
        if (g.hi < 0) if strict else (g.hi <= 0):
            return interval_eval(e.then, env)
        if (g.lo >= 0) if strict else (g.lo > 0):
            return interval_eval(e.orelse, env)
        return interval_eval(e.then, env).hull(interval_eval(e.orelse, env))
    if isinstance(e, Call):
        raise RangeFailure("cannot bound uninterpreted call %s" % e.func)
    raise TypeError("cannot evaluate %r" % (e,))


class RangeEngine:
    """Ranges of expressions over one fixed precondition."""

    def __init__(self, bounds: dict, assertions=(), config: RangeConfig | None = None):
        self.config = config or RangeConfig()
        self.bounds = dict(bounds)
        self.assertions = tuple(assertions)
        self.session = Session(Problem.build(self.bounds, self.assertions),
                               self.config.backend)
        self._feasible = None
        self._subs: dict = {}

    # -- feasibility -------------------------------------------------------

    def feasible_verdict(self):
        if self._feasible is None:
            self._feasible = self.session.check()
        return self._feasible

    def refined(self, cond) -> "RangeEngine":
        """This engine with one more assertion (cached per condition)."""
        key = repr(cond)
        got = self._subs.get(key)
        if got is None:
            got = RangeEngine(self.bounds, self.assertions + (cond,),
                              self.config)
            self._subs[key] = got
        return got

    def work(self) -> dict:
        """Deterministic solver-effort counters, refinements included."""
        out = dict(self.session.stats)
        for sub in self._subs.values():
            for k, v in sub.work().items():
                out[k] = out.get(k, 0) + v
        return out

    # -- initial enclosures -------------------------------------------------

    def ia_eval(self, e, env: dict | None = None) -> Interval:
        return interval_eval(e, self.bounds if env is None else env)

    def _init_range(self, e, env: dict) -> Interval:
        """Interval arithmetic, tightening offending subterms on failure."""
        try:
            return interval_eval(e, env)
        except RangeFailure:
            pass
        return self._tightened(e, env)

    def _tightened(self, e, env: dict) -> Interval:
        if isinstance(e, Variable) or isinstance(e, Lit):
            return interval_eval(e, env)
        if isinstance(e, (Add, Sub, Mul)):
            a = self._init_range(e.left, env)
            b = self._init_range(e.right, env)
            return {Add: a.__add__, Sub: a.__sub__, Mul: a.__mul__}[type(e)](b)
        if isinstance(e, Div):
            a = self._init_range(e.left, env)
            b = self._init_range(e.right, env)
            if b.contains(rat(0)) and env is self.bounds:
                b = self.get_range(e.right)
            if b.contains(rat(0)):
                raise DivisionByZeroRange(e.right)
            return a / b
        if isinstance(e, Sqrt):
            a = self._init_range(e.arg, env)
            if a.lo < 0 and env is self.bounds:
                a = self.get_range(e.arg)
            return a.sqrt()
        if isinstance(e, Abs):
            a = self._init_range(e.arg, env)
            return Interval(a.min_abs(), a.max_abs())
        if isinstance(e, Let):
            # substitute the binding so nested solver queries stay closed
            # over the declared bounds
            return self._init_range(substitute(e.body, {e.name: e.bound}), env)
        if isinstance(e, If):
            diff, strict = e.cond.normalized()
            g = self._init_range(diff, env)
            if (g.hi < 0) if strict else (g.hi <= 0):
                return self._init_range(e.then, env)
            if (g.lo >= 0) if strict else (g.lo > 0):
                return self._init_range(e.orelse, env)
            if env is self.bounds and self.config.tighten:
                return self._branch_hull(e, diff, strict)
            return self._init_range(e.then, env).hull(self._init_range(e.orelse, env))
        raise RangeFailure("cannot bound %r" % (e,))

    def _branch_hull(self, e: If, diff, strict) -> Interval:
        """Range an undecided conditional arm by arm, each under its own
        guard, so e.g. a divisor that is only safe inside one branch is
        ranged over that branch's region alone."""
        take_then = Comparison(diff, "<" if strict else "<=", Lit(rat(0)))
        take_else = Comparison(diff, ">=" if strict else ">", Lit(rat(0)))
        parts = []
        for cond, arm in ((take_then, e.then), (take_else, e.orelse)):
            sub = self.refined(cond)
            if isinstance(sub.feasible_verdict(), Unsat):
                continue
            try:
                parts.append(sub.get_range(arm))
            except InfeasibleRegion:
                continue
        if not parts:
            raise InfeasibleRegion("no input reaches this conditional")
        out = parts[0]
        for p in parts[1:]:
            out = out.hull(p)
        return out

    # -- solver-assisted tightening ------------------------------------------

    def get_range(self, e, init: Interval | None = None) -> Interval:
        if init is None:
            init = self._init_range(e, self.bounds)
        if init.is_point() or not self.config.tighten:
            return init
        prec = rat(self.config.precision)
        lo = self._search_lower(e, init.lo, init.hi, prec)
        hi = self._search_upper(e, init.lo, init.hi, prec)
        if lo > hi:
            # both sides are certified, so crossing proves emptiness
            if isinstance(self.feasible_verdict(), Unsat):
                raise InfeasibleRegion("no points satisfy the precondition")
            return init  # undecided feasibility: keep the plain enclosure
        return Interval(lo, hi)

    def _search_lower(self, e, a, b, prec):
        v = self.session.query_below(e, a + prec)
        if isinstance(v, (Sat, Unknown)):
            return a
        a = a + prec
        for _ in range(self.config.max_iter):
            if (b - a) <= prec:
                break
            mid = (a + b) / 2
            v = self.session.query_below(e, mid)
            if isinstance(v, Sat):
                b = mid
            elif isinstance(v, Unsat):
                a = mid
            else:
                break
        return a

    def _search_upper(self, e, a, b, prec):
        v = self.session.query_above(e, b - prec)
        if isinstance(v, (Sat, Unknown)):
            return b
        b = b - prec
        for _ in range(self.config.max_iter):
            if (b - a) <= prec:
                break
            mid = (a + b) / 2
            v = self.session.query_above(e, mid)
            if isinstance(v, Sat):
                a = mid
            elif isinstance(v, Unsat):
                b = mid
            else:
                break
        return b


def get_range(e, bounds: dict, assertions=(), config: RangeConfig | None = None) -> Interval:
    """One-shot range query over rational variable bounds."""
    return RangeEngine(bounds, assertions, config).get_range(e)
