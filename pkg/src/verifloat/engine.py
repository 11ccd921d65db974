"""Sound deviation bounds between ideal real-valued functions and their
finite-precision implementations.

Every intermediate value is tracked as a pair: an enclosure of the value the
expression takes over exact reals, and an affine deviation form recording
how far the computed value can drift from that ideal value.  Each noise term
of the deviation form is tagged with where it entered (input uncertainty,
operation roundoff, nonlinear propagation, or control-flow divergence), so a
final bound can be split by cause.

Roundoff for one operation follows the standard model fl(z) = z(1 + d) with
|d| <= eps, applied to the computed (already deviated) value, plus a tiny
absolute term covering gradual underflow whenever the result can fall below
the smallest normal magnitude.  Nonlinear operations propagate an incoming
deviation through an interval enclosure of the derivative taken over the
whole perturbed range (a mean-value argument), which stays sound even for
operands that already carry large uncertainty.

Ideal-value enclosures are kept cheap - intervals intersected with affine
forms over the input box - and the exact range engine is consulted only
where cheap enclosures are inconclusive or the result matters most: divisors
that straddle zero, square-root arguments that dip negative, branch
feasibility, and the final result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .affine import AffineForm, NoiseSource, affine_div, affine_mul, affine_sqrt
from .frontend import expr_str, initial_uncertainty, inline_calls, param_interval
from .intervals import DivisionByZeroRange, Interval, NegativeSqrtRange
from .paths import divergence_bound
from .precision import PrecisionSpec, literal_roundoff
from .ranges import InfeasibleRegion, RangeConfig, RangeEngine
from .rationals import Rat, ZERO, rat
from .solver import Unsat
from .syntax import (
    Add,
    Call,
    Comparison,
    Div,
    FunctionDef,
    If,
    Let,
    Lit,
    Mul,
    PredClause,
    Program,
    Sqrt,
    Sub,
    Variable,
    substitute,
)

# Provenance tags for deviation noise terms.
INPUT = "input"
ROUND = "round"
PROP = "prop"
PATH = "path"
TAGS = (INPUT, ROUND, PROP, PATH)

_ONE_IV = Interval.point(rat(1))


@dataclass(frozen=True)
class AnalysisConfig:
    ranges: RangeConfig = field(default_factory=RangeConfig)


@dataclass(frozen=True)
class AnalysisIssue:
    kind: str     # "overflow" | "division-by-zero" | "negative-sqrt"
    where: str    # offending subexpression, rendered back to source
    detail: str = ""

    def __str__(self):
        s = "%s at %s" % (self.kind, self.where)
        return "%s (%s)" % (s, self.detail) if self.detail else s


class AnalysisFailure(Exception):
    """Raised when an expression cannot be proven safe to execute."""

    def __init__(self, issue: AnalysisIssue):
        super().__init__(str(issue))
        self.issue = issue


def _where(e) -> str:
    s = expr_str(e)
    return s if len(s) <= 80 else s[:77] + "..."


class UncertainValue:
    """An ideal-value enclosure plus a sound deviation form.

    ``iv`` encloses the ideal value over the region under analysis; ``aff``
    is an optional affine enclosure of the same ideal value over the input
    box (its range is folded into ``iv`` on construction); ``err`` bounds
    computed-minus-ideal; ``expr`` is the ideal value as a closed expression
    over the function parameters, suitable for exact range queries.
    """

    __slots__ = ("iv", "aff", "err", "expr")

    def __init__(self, iv: Interval, aff, err: AffineForm, expr):
        if aff is not None:
            tighter = iv.intersect(aff.to_interval())
            if tighter is not None:
                iv = tighter
        self.iv = iv
        self.aff = aff
        self.err = err
        self.expr = expr

    def enclosure(self) -> Interval:
        return self.iv

    def deviation(self) -> Interval:
        return self.err.to_interval()

    def total(self) -> Interval:
        """Everything the computed value can be."""
        return self.iv + self.deviation()

    def __repr__(self):
        return "UncertainValue(%r, +-%s)" % (self.iv, self.err.max_abs())


@dataclass
class AnalysisResult:
    function: str
    precision: PrecisionSpec
    issues: list
    ideal: Interval | None = None        # certified range of the ideal result
    total: Interval | None = None        # ideal widened by the deviation
    max_error: Rat | None = None         # sound bound on |computed - ideal|
    path_error: Rat = ZERO               # largest branch-divergence bound
    contributions: dict = field(default_factory=dict)  # tag -> share of bound

    @property
    def ok(self) -> bool:
        return not self.issues


class ErrorAnalysis:
    """Per-function analysis state, reusable across precision formats.

    Ideal-value ranges do not depend on the target format, so one instance
    keeps a single exact-range session (with its refinement caches) alive
    while the caller sweeps precisions from cheapest to most exact.
    """

    def __init__(self, fnc: FunctionDef, program: Program | None = None,
                 config: AnalysisConfig | None = None):
        self.fnc = fnc
        self.config = config or AnalysisConfig()
        body = fnc.body
        if program is not None:
            body = inline_calls(body, program)
        self.body = body
        self.bounds = {p: param_interval(fnc, p) for p in fnc.params}
        self.assertions = tuple(c.cond for c in fnc.pre
                                if isinstance(c, PredClause))
        self._engines: dict = {}
        self.rng = self.engine_for(self.assertions)
        self._result_range: Interval | None = None

    def engine_for(self, assertions) -> RangeEngine:
        """Range engines keyed by their assertion set; branch regions recur
        for every precision, so their solver state is worth keeping."""
        key = tuple(repr(a) for a in assertions)
        eng = self._engines.get(key)
        if eng is None:
            eng = RangeEngine(self.bounds, assertions, self.config.ranges)
            self._engines[key] = eng
        return eng

    def run(self, prec: PrecisionSpec) -> AnalysisResult:
        out = AnalysisResult(self.fnc.name, prec, [])
        ev = _Eval(self, prec, self.rng)
        try:
            v = ev.run()
            ideal = self._final_range(v, ev)
        except AnalysisFailure as f:
            out.issues.append(f.issue)
            out.path_error = _max_of(ev.path_errors)
            return out
        dev = v.deviation()
        total = ideal + dev
        out.ideal = ideal
        out.total = total
        out.max_error = v.err.max_abs()
        out.path_error = _max_of(ev.path_errors)
        out.contributions = ev.contributions(v.err)
        if total.max_abs() > prec.max_value:
            out.issues.append(AnalysisIssue(
                "overflow", _where(self.body), "function result"))
        return out

    def _final_range(self, v: UncertainValue, ev: "_Eval") -> Interval:
        if self._result_range is None:
            cert = ev.certified(v.expr, self.body)
            tight = cert.intersect(v.enclosure())
            self._result_range = cert if tight is None else tight
        return self._result_range

    def deviation_of(self, expr, prec: PrecisionSpec,
                     extra_assertions=()) -> UncertainValue:
        """Value-and-deviation analysis of one call-free expression over
        this function's inputs, optionally under extra path conditions
        (e.g. the guards that dominate a call site)."""
        ev = _Eval(self, prec,
                   self.engine_for(self.assertions + tuple(extra_assertions)))
        return ev.eval(expr, ev.inputs())

    def solver_work(self) -> dict:
        """Aggregated effort counters over every range engine in use."""
        out: dict = {}
        for eng in self._engines.values():
            for k, v in eng.work().items():
                out[k] = out.get(k, 0) + v
        return out


def analyze(fnc: FunctionDef, prec: PrecisionSpec,
            program: Program | None = None,
            config: AnalysisConfig | None = None) -> AnalysisResult:
    """One-shot deviation analysis of a function at one precision."""
    return ErrorAnalysis(fnc, program, config).run(prec)


def _max_of(values) -> Rat:
    out = ZERO
    for v in values:
        if v > out:
            out = v
    return out


class _Eval:
    """One bottom-up pass for a fixed precision over a fixed region."""

    def __init__(self, owner: ErrorAnalysis, prec: PrecisionSpec,
                 rng: RangeEngine, en: NoiseSource | None = None,
                 inoise: NoiseSource | None = None, sink: list | None = None):
        self.owner = owner
        self.prec = prec
        self.rng = rng
        self.en = en if en is not None else NoiseSource()
        self.inoise = inoise if inoise is not None else NoiseSource()
        self.path_errors = sink if sink is not None else []
        self._normal = rat(2) ** prec.min_normal_exp
        self._eta = rat(2) ** (prec.min_normal_exp - prec.mantissa_bits)

    def _fork(self, rng: RangeEngine) -> "_Eval":
        return _Eval(self.owner, self.prec, rng, self.en, self.inoise,
                     self.path_errors)

    # -- entry ------------------------------------------------------------

    def run(self) -> UncertainValue:
        return self.eval(self.owner.body, self.inputs())

    def inputs(self) -> dict:
        fnc = self.owner.fnc
        env: dict = {}
        for p in fnc.params:
            iv = self.owner.bounds[p]
            u = initial_uncertainty(fnc, p, self.prec)
            err = AffineForm.constant(ZERO).add_noise(rat(u), self.en, INPUT)
            aff = AffineForm.from_interval(iv, self.inoise, p)
            uv = UncertainValue(iv, aff, err, Variable(p))
            self._check_overflow(uv, Variable(p))
            env[p] = uv
        return env

    def contributions(self, err: AffineForm) -> dict:
        out = {t: ZERO for t in TAGS}
        for i, c in err.terms.items():
            tag = self.en.tags.get(i, PROP)
            if tag not in out:
                tag = PROP
            out[tag] = out[tag] + abs(c)
        if err.x0 != 0:
            out[PATH] = out[PATH] + abs(err.x0)
        return out

    # -- shared helpers ----------------------------------------------------

    def _clearance(self) -> Rat:
        """Domain checks (divisor away from zero, sqrt argument positive)
        must hold with margin beyond the range-search resolution: a
        certified bound that clears the boundary by less than the search
        step is too fragile to build a derivative bound on."""
        return rat(self.rng.config.precision)

    def certified(self, closed, site) -> Interval:
        """Exact-range query with domain failures turned into issues."""
        try:
            return self.rng.get_range(closed)
        except DivisionByZeroRange:
            raise AnalysisFailure(AnalysisIssue(
                "division-by-zero", _where(site),
                "cannot bound an inner divisor away from zero"))
        except NegativeSqrtRange:
            raise AnalysisFailure(AnalysisIssue(
                "negative-sqrt", _where(site),
                "cannot prove an inner argument nonnegative"))

    def _check_overflow(self, uv: UncertainValue, site):
        if uv.total().max_abs() > self.prec.max_value:
            raise AnalysisFailure(AnalysisIssue("overflow", _where(site)))

    def _round(self, uv: UncertainValue, site) -> UncertainValue:
        """Charge one operation's rounding against the computed range."""
        t = uv.total()
        rho = self.prec.eps * t.max_abs()
        # Gradual underflow: the relative model breaks below the smallest
        # normal magnitude, so add half a subnormal ulp whenever a nonzero
        # result under that threshold is reachable (exact zero rounds
        # exactly and needs nothing).
        if (t.hi > 0 and t.lo < self._normal) or \
                (t.lo < 0 and t.hi > -self._normal):
            rho = rho + self._eta
        err = uv.err.add_noise(rho, self.en, ROUND)
        out = UncertainValue(uv.iv, uv.aff, err, uv.expr)
        self._check_overflow(out, site)
        return out

    def _scale_by(self, form: AffineForm, iv: Interval,
                  tag: str = PROP) -> AffineForm:
        """Product of a deviation form with a value from ``iv``; the center
        scales exactly, the spread becomes one fresh term."""
        m = iv.mid()
        out = form.scale(m)
        r = iv.hi - m
        if r != 0:
            out = out.add_noise(r * form.max_abs(), self.en, tag)
        return out

    # -- evaluation --------------------------------------------------------

    def eval(self, e, env: dict) -> UncertainValue:
        if isinstance(e, Variable):
            return env[e.name]
        if isinstance(e, Lit):
            return self._lit(e)
        if isinstance(e, (Add, Sub)):
            return self._linear(e, env)
        if isinstance(e, Mul):
            return self._mul(e, env)
        if isinstance(e, Div):
            return self._div(e, env)
        if isinstance(e, Sqrt):
            return self._sqrt(e, env)
        if isinstance(e, Let):
            bound = self.eval(e.bound, env)
            inner = dict(env)
            inner[e.name] = bound
            return self.eval(e.body, inner)
        if isinstance(e, If):
            return self._if(e, env)
        if isinstance(e, Call):
            raise TypeError("calls must be inlined before deviation analysis")
        raise TypeError("cannot analyze %r" % (e,))

    def _lit(self, e: Lit) -> UncertainValue:
        u = literal_roundoff(e.value, self.prec)
        err = AffineForm.constant(ZERO).add_noise(u, self.en, ROUND)
        uv = UncertainValue(Interval.point(e.value),
                            AffineForm.constant(e.value), err, e)
        self._check_overflow(uv, e)
        return uv

    def _linear(self, e, env) -> UncertainValue:
        a = self.eval(e.left, env)
        b = self.eval(e.right, env)
        if isinstance(e, Add):
            iv = a.enclosure() + b.enclosure()
            aff = a.aff + b.aff if a.aff is not None and b.aff is not None else None
            err = a.err + b.err
            expr = Add(a.expr, b.expr)
        else:
            iv = a.enclosure() - b.enclosure()
            aff = a.aff - b.aff if a.aff is not None and b.aff is not None else None
            err = a.err - b.err
            expr = Sub(a.expr, b.expr)
        return self._round(UncertainValue(iv, aff, err, expr), e)

    def _mul(self, e: Mul, env) -> UncertainValue:
        a = self.eval(e.left, env)
        b = self.eval(e.right, env)
        ix, iy = a.enclosure(), b.enclosure()
        err = self._scale_by(b.err, ix) + self._scale_by(a.err, iy) \
            + affine_mul(a.err, b.err, self.en, PROP)
        aff = None
        if a.aff is not None and b.aff is not None:
            aff = affine_mul(a.aff, b.aff, self.inoise, "ideal")
        uv = UncertainValue(ix * iy, aff, err, Mul(a.expr, b.expr))
        return self._round(uv, e)

    def _div(self, e: Div, env) -> UncertainValue:
        a = self.eval(e.left, env)
        b = self.eval(e.right, env)
        clear = self._clearance()
        iy = b.enclosure()
        certified = iy.contains(ZERO)
        if certified:
            iy = self._certified_divisor(b, e.right, iy)
        d = iy + b.deviation()
        if d.lo <= clear and d.hi >= -clear and not certified:
            iy = self._certified_divisor(b, e.right, iy)
            d = iy + b.deviation()
        if d.lo <= clear and d.hi >= -clear:
            raise AnalysisFailure(AnalysisIssue(
                "division-by-zero", _where(e.right),
                "divisor can come within the range-search resolution of zero"
                " in finite precision"))
        # Mean value: 1/(y+d) - 1/y lands in -1/D^2 times d over the
        # perturbed divisor range D.
        slope = -(_ONE_IV / (d * d))
        einv = self._scale_by(b.err, slope)
        rinv = _ONE_IV / iy
        ix = a.enclosure()
        err = self._scale_by(einv, ix) + self._scale_by(a.err, rinv) \
            + affine_mul(a.err, einv, self.en, PROP)
        aff = None
        if a.aff is not None and b.aff is not None:
            try:
                aff = affine_div(a.aff, b.aff, self.inoise, "ideal")
            except ArithmeticError:
                aff = None
        uv = UncertainValue(a.enclosure() / iy, aff, err,
                            Div(a.expr, b.expr))
        return self._round(uv, e)

    def _certified_divisor(self, b: UncertainValue, site,
                           iy: Interval) -> Interval:
        cert = self.certified(b.expr, site)
        tight = cert.intersect(iy)
        iy = cert if tight is None else tight
        if iy.contains(ZERO):
            raise AnalysisFailure(AnalysisIssue(
                "division-by-zero", _where(site),
                "cannot bound the divisor away from zero"))
        return iy

    def _sqrt(self, e: Sqrt, env) -> UncertainValue:
        a = self.eval(e.arg, env)
        ix = a.enclosure()
        certified = False

        def tighten():
            nonlocal ix, certified
            cert = self.certified(a.expr, e.arg)
            tight = cert.intersect(ix)
            ix = cert if tight is None else tight
            certified = True
            if ix.lo < 0:
                raise AnalysisFailure(AnalysisIssue(
                    "negative-sqrt", _where(e.arg),
                    "cannot prove the argument nonnegative"))

        if ix.lo < 0:
            tighten()
        if a.err.is_zero():
            err = AffineForm.constant(ZERO)
        else:
            d = ix + a.deviation()
            if d.lo <= self._clearance() and not certified:
                tighten()
                d = ix + a.deviation()
            if d.lo <= self._clearance():
                raise AnalysisFailure(AnalysisIssue(
                    "negative-sqrt", _where(e.arg),
                    "argument can come within the range-search resolution of"
                    " zero in finite precision"))
            # Mean value: sqrt(x+d) - sqrt(x) lands in 1/(2 sqrt(D)) times d.
            slope = _ONE_IV / d.sqrt().scale(rat(2))
            err = self._scale_by(a.err, slope)
        aff = None
        if a.aff is not None:
            try:
                aff = affine_sqrt(a.aff, self.inoise, "ideal")
            except (ArithmeticError, NegativeSqrtRange):
                aff = None
        uv = UncertainValue(ix.sqrt(), aff, err, Sqrt(a.expr))
        return self._round(uv, e)

    # -- conditionals --------------------------------------------------------

    def _if(self, e: If, env) -> UncertainValue:
        gl = self.eval(e.cond.left, env)
        gr = self.eval(e.cond.right, env)
        guard_err = (gl.err - gr.err).max_abs()
        closed_cond = Comparison(gl.expr, e.cond.op, gr.expr)
        diff, strict = closed_cond.normalized()
        take_then = Comparison(diff, "<" if strict else "<=", Lit(ZERO))
        take_else = Comparison(diff, ">=" if strict else ">", Lit(ZERO))

        base = self.rng
        then_rng = self.owner.engine_for(base.assertions + (take_then,))
        else_rng = self.owner.engine_for(base.assertions + (take_else,))
        then_ok = not isinstance(then_rng.feasible_verdict(), Unsat)
        else_ok = not isinstance(else_rng.feasible_verdict(), Unsat)
        if not then_ok and not else_ok:
            raise InfeasibleRegion("no input reaches this conditional")

        tv = self._fork(then_rng).eval(e.then, env) if then_ok else None
        ev = self._fork(else_rng).eval(e.orelse, env) if else_ok else None

        closed = {n: uv.expr for n, uv in env.items()}
        then_closed = substitute(e.then, closed)
        else_closed = substitute(e.orelse, closed)

        def branch_errors(band):
            sub = RangeEngine(base.bounds, base.assertions + band,
                              base.config)
            et = self._fork(sub).eval(e.then, env).err.max_abs()
            ee = self._fork(sub).eval(e.orelse, env).err.max_abs()
            return et, ee

        bound = divergence_bound(diff, then_closed, else_closed, base.bounds,
                                 base.assertions, guard_err, branch_errors,
                                 base.config)
        if bound.feasible:
            self.path_errors.append(bound.error)

        parts = [x for x in (tv, ev) if x is not None]
        ideal = parts[0].enclosure()
        dev = parts[0].deviation()
        for x in parts[1:]:
            ideal = ideal.hull(x.enclosure())
            dev = dev.hull(x.deviation())
        dev = dev.hull(Interval(-bound.error, bound.error))
        err = AffineForm.constant(ZERO).add_noise(dev.max_abs(), self.en, PATH)
        expr = If(closed_cond, then_closed, else_closed)
        return UncertainValue(ideal, None, err, expr)
