"""Verification conditions and the staged proving pipeline.

Each annotated function yields one postcondition obligation plus one
precondition obligation per call site.  An obligation relates two programs:
the ideal one over exact reals, and its finite-precision twin in which every
input carries its declared (or default) representation error and every
operation multiplies by a fresh (1 + d) with |d| bounded by the format's
unit roundoff.  Proving means showing the negated postcondition unsatisfiable
together with the precondition and both program encodings.

The full twin constraint is only tractable for small arithmetic, so failing
obligations walk a fixed stream of sound approximations: inline callee
postconditions, then callee bodies, then replace the finite-precision twin
by the deviation bound computed by the error engine, and finally replace the
ideal side by its certified range as well.  A satisfying assignment found
along the way only counts as a disproof when exact rational re-evaluation
confirms it breaks the ideal (error-free) part of the specification;
anything else is noise from the over-approximation and the stream continues.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import AnalysisConfig, AnalysisResult, ErrorAnalysis
from .frontend import (
    bool_str,
    clause_str,
    expr_str,
    initial_uncertainty,
    inline_calls,
    order_functions,
    param_interval,
)
from .intervals import Interval
from .precision import PRECISIONS, PrecisionSpec, representable
from .ranges import InfeasibleRegion
from .rationals import Rat, ZERO, format_outward, rat
from .solver import Abs, Problem, Sat, Unsat, check_sat, nnf
from .solver.icp import eval_exact_enclosure, exact_feasibility
from .syntax import (
    AbsUncertainty,
    ActualRef,
    Add,
    BoolAnd,
    BoolNot,
    BoolOr,
    Call,
    Comparison,
    Div,
    ErrorRef,
    ErrorRefUncertainty,
    FunctionDef,
    If,
    Let,
    Lit,
    Mul,
    PredClause,
    Program,
    RangeBound,
    RelUncertainty,
    RESULT,
    Sqrt,
    Sub,
    Variable,
    children,
    contains_call,
    contains_if,
    substitute,
)

PENDING = "pending"
PROVEN = "proven"
DISPROVEN = "disproven"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class ApproximationStep:
    """One rung of the refinement ladder."""

    calls: str        # none | uninterpreted | postcondition-inlining | body-inlining
    arithmetic: str   # exact | error-approximation | full-approximation
    paths: str = "merged"  # merged | path-by-path

    @property
    def name(self) -> str:
        if self.arithmetic == "exact":
            base = ("full-constraint" if self.calls in ("none", "uninterpreted")
                    else self.calls)
        else:
            base = self.arithmetic
        if self.paths != "merged":
            base += " / " + self.paths
        return base


@dataclass(frozen=True)
class Counterexample:
    point: tuple          # ((name, Rat), ...) restricted to function inputs
    clause: str           # the obligation it refutes, rendered
    valid: bool           # exact re-evaluation confirms the ideal part fails

    def point_map(self) -> dict:
        return dict(self.point)


@dataclass
class VerificationCondition:
    kind: str                     # "postcondition" | "call-precondition"
    function: str
    description: str
    fnc: FunctionDef = field(repr=False, compare=False, default=None)
    callee: FunctionDef = field(repr=False, compare=False, default=None)
    args: tuple = field(repr=False, compare=False, default=())
    guards: tuple = field(repr=False, compare=False, default=())
    status: str = PENDING
    approximation: ApproximationStep | None = None
    counterexample: Counterexample | None = None


@dataclass(frozen=True)
class Constraint:
    """Concrete constraint pieces for one precision.

    ``bounds`` boxes the program inputs; ``noise`` boxes the per-input error
    variables and the per-operation deltas, which are the only parts that
    change when the constraint is regenerated at a different precision.
    """

    bounds: tuple        # ((name, Interval), ...)
    noise: tuple         # ((name, Interval), ...)
    assertions: tuple    # precondition predicates (+ inlining constraints)
    ideal: object        # result of the ideal program
    actual: object       # result of the finite-precision twin


@dataclass(frozen=True)
class GeneratedSpec:
    function: str
    precision: PrecisionSpec
    range: Interval | None
    error: Rat | None
    issues: tuple = ()

    def clauses(self) -> list:
        out = []
        if self.range is not None:
            out.append(RangeBound(RESULT, self.range.lo, self.range.hi,
                                  strict_lo=False, strict_hi=False))
        if self.error is not None:
            out.append(AbsUncertainty(RESULT, self.error))
        return out

    def render(self, sig: int = 17) -> str:
        """Human-readable form with sound outward-rounded decimals."""
        if self.range is None and self.error is None:
            return "could not be computed: " + "; ".join(self.issues)
        parts = []
        if self.range is not None:
            parts.append("res in [%s, %s]" % (
                format_outward(self.range.lo, sig, "down"),
                format_outward(self.range.hi, sig, "up")))
        if self.error is not None:
            parts.append("res +/- %s" % format_outward(self.error, sig, "up"))
        return " && ".join(parts)


@dataclass(frozen=True)
class PipelineConfig:
    precisions: tuple = PRECISIONS
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    paths: str = "merged"          # try path-by-path splits when "explicit"


@dataclass
class FunctionOutcome:
    function: str
    vcs: list
    result: AnalysisResult | None
    spec: GeneratedSpec
    fnc: FunctionDef = field(repr=False, compare=False, default=None)

    @property
    def proven(self) -> bool:
        return all(vc.status == PROVEN for vc in self.vcs)

    @property
    def verdict(self) -> str:
        if any(vc.status == DISPROVEN for vc in self.vcs):
            return DISPROVEN
        if any(vc.status != PROVEN for vc in self.vcs):
            return UNKNOWN
        return PROVEN if self.vcs else "no obligations"


@dataclass
class PrecisionAttempt:
    precision: PrecisionSpec
    functions: list

    @property
    def proven(self) -> bool:
        return all(f.proven for f in self.functions)

    @property
    def disproven(self) -> bool:
        return any(vc.status == DISPROVEN
                   for f in self.functions for vc in f.vcs)

    def outcome(self, name: str) -> FunctionOutcome:
        for f in self.functions:
            if f.function == name:
                return f
        raise KeyError(name)


@dataclass
class Verdict:
    proven: bool
    precision: PrecisionSpec | None   # least sufficient format, if any
    attempts: list
    program: Program | None = field(repr=False, compare=False, default=None)
    config: "PipelineConfig | None" = field(repr=False, compare=False,
                                            default=None)
    work: dict = field(default_factory=dict)

    @property
    def final(self) -> PrecisionAttempt:
        return self.attempts[-1]


# --------------------------------------------------------------------------
# VC generation


def generate_vcs(program: Program, fnc: FunctionDef | None = None) -> list:
    """Postcondition and call-precondition obligations, callees first."""
    out = []
    functions = [fnc] if fnc is not None else program.functions
    for f in functions:
        if f.post:
            out.append(VerificationCondition(
                "postcondition", f.name,
                " && ".join(clause_str(c) for c in f.post), fnc=f))
        for callee_name, args, guards in _call_sites(f.body):
            callee = program.function(callee_name)
            out.append(VerificationCondition(
                "call-precondition", f.name,
                "%s(%s) respects %s's precondition" % (
                    callee_name, ", ".join(expr_str(a) for a in args),
                    callee_name),
                fnc=f, callee=callee, args=tuple(args), guards=tuple(guards)))
    return out


def _call_sites(body):
    """(callee, closed argument exprs, guard conditions) per call site."""
    sites = []

    def walk(e, env, guards):
        if isinstance(e, Call):
            closed = tuple(substitute(a, env) for a in e.args)
            for a in e.args:
                walk(a, env, guards)
            sites.append((e.func, closed, tuple(guards)))
            return
        if isinstance(e, Let):
            walk(e.bound, env, guards)
            inner = dict(env)
            inner[e.name] = substitute(e.bound, env)
            walk(e.body, inner, guards)
            return
        if isinstance(e, If):
            cond = Comparison(substitute(e.cond.left, env), e.cond.op,
                              substitute(e.cond.right, env))
            walk(e.cond.left, env, guards)
            walk(e.cond.right, env, guards)
            walk(e.then, env, guards + [cond])
            walk(e.orelse, env, guards + [cond.negated()])
            return
        if isinstance(e, (Add, Sub, Mul, Div)):
            walk(e.left, env, guards)
            walk(e.right, env, guards)
        elif isinstance(e, Sqrt):
            walk(e.arg, env, guards)

    walk(body, {}, [])
    return sites


# --------------------------------------------------------------------------
# the finite-precision twin


class _Twin:
    """Builds the finite-precision encoding of an expression.

    Every arithmetic operation and every inexactly-stored literal is wrapped
    in (1 + d_i) with a fresh bounded delta; local bindings are duplicated
    under fresh names so the ideal and the twin never share intermediates.
    """

    def __init__(self, prec: PrecisionSpec):
        self.prec = prec
        self.noise: dict = {}
        self.count = 0

    def _delta(self) -> str:
        self.count += 1
        name = "d$%d" % self.count
        self.noise[name] = Interval(-self.prec.eps, self.prec.eps)
        return name

    def _rounded(self, e):
        return Mul(e, Add(Lit(rat(1)), Variable(self._delta())))

    def input_error(self, fnc: FunctionDef, p: str) -> str | None:
        u = rat(initial_uncertainty(fnc, p, self.prec))
        if u == 0:
            return None
        name = "err$" + p
        self.noise[name] = Interval(-u, u)
        return name

    def build(self, e, env: dict):
        if isinstance(e, Variable):
            return env[e.name]
        if isinstance(e, Lit):
            if representable(e.value, self.prec):
                return e
            return self._rounded(e)
        if isinstance(e, (Add, Sub, Mul, Div)):
            out = type(e)(self.build(e.left, env), self.build(e.right, env))
            return self._rounded(out)
        if isinstance(e, Sqrt):
            return self._rounded(Sqrt(self.build(e.arg, env)))
        if isinstance(e, Let):
            self.count += 1
            fresh = "%s$o%d" % (e.name, self.count)
            bound = self.build(e.bound, env)
            inner = dict(env)
            inner[e.name] = Variable(fresh)
            return Let(fresh, bound, self.build(e.body, inner))
        if isinstance(e, If):
            cond = Comparison(self.build(e.cond.left, env), e.cond.op,
                              self.build(e.cond.right, env))
            return If(cond, self.build(e.then, env),
                      self.build(e.orelse, env))
        if isinstance(e, Call):
            return Call(e.func + "$o",
                        tuple(self.build(a, env) for a in e.args))
        raise TypeError("cannot build a twin for %r" % (e,))


def _close_lets(e):
    """Substitute local bindings away, leaving params as the only names."""
    if isinstance(e, Let):
        return substitute(_close_lets(e.body), {e.name: _close_lets(e.bound)})
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(_close_lets(e.left), _close_lets(e.right))
    if isinstance(e, Sqrt):
        return Sqrt(_close_lets(e.arg))
    if isinstance(e, If):
        c = Comparison(_close_lets(e.cond.left), e.cond.op,
                       _close_lets(e.cond.right))
        return If(c, _close_lets(e.then), _close_lets(e.orelse))
    if isinstance(e, Call):
        return Call(e.func, tuple(_close_lets(a) for a in e.args))
    return e


def vc_constraint(vc: VerificationCondition, prec: PrecisionSpec,
                  program: Program | None = None) -> Constraint:
    """The step-one (full) constraint of a postcondition VC, concretized.

    The pieces are parametric in the unit roundoff: regenerating at another
    precision keeps bounds and assertion structure identical and changes
    only the noise boxes.
    """
    fnc = vc.fnc
    bounds = {p: param_interval(fnc, p) for p in fnc.params}
    twin = _Twin(prec)
    env = {}
    for p in fnc.params:
        err = twin.input_error(fnc, p)
        env[p] = Add(Variable(p), Variable(err)) if err else Variable(p)
    actual = twin.build(fnc.body, env)
    assertions = tuple(c.cond for c in fnc.pre if isinstance(c, PredClause))
    return Constraint(tuple(bounds.items()), tuple(twin.noise.items()),
                      assertions, fnc.body, actual)


# --------------------------------------------------------------------------
# specification generation


def generate_spec(fnc: FunctionDef, prec: PrecisionSpec,
                  program: Program | None = None,
                  config: AnalysisConfig | None = None) -> GeneratedSpec:
    """Sound `res in [a, b] && res +/- u` postcondition for a function."""
    analysis = ErrorAnalysis(fnc, program, config)
    return spec_from_result(fnc.name, analysis.run(prec))


def spec_from_result(name: str, r: AnalysisResult) -> GeneratedSpec:
    if r.ok:
        return GeneratedSpec(name, r.precision, r.ideal, r.max_error)
    return GeneratedSpec(name, r.precision, r.ideal, None,
                         tuple(str(i) for i in r.issues))


# --------------------------------------------------------------------------
# pipeline context


class _Context:
    """Shared per-program state: analyses, generated specs, solver config."""

    def __init__(self, program: Program, config: PipelineConfig):
        self.program = program
        self.config = config
        self.analyses: dict = {}
        self.results: dict = {}
        self.infeasible: set = set()
        self.stats = {"queries": 0}

    def backend(self):
        return self.config.analysis.ranges.backend

    def analysis(self, fnc: FunctionDef) -> ErrorAnalysis:
        a = self.analyses.get(fnc.name)
        if a is None:
            a = ErrorAnalysis(fnc, self.program, self.config.analysis)
            self.analyses[fnc.name] = a
        return a

    def result(self, fnc: FunctionDef, prec: PrecisionSpec):
        key = (fnc.name, prec.name)
        if key not in self.results:
            if fnc.name in self.infeasible:
                self.results[key] = None
            else:
                try:
                    self.results[key] = self.analysis(fnc).run(prec)
                except InfeasibleRegion:
                    self.infeasible.add(fnc.name)
                    self.results[key] = None
        return self.results[key]

    def spec(self, fnc: FunctionDef, prec: PrecisionSpec) -> GeneratedSpec:
        r = self.result(fnc, prec)
        if r is None:
            return GeneratedSpec(fnc.name, prec, None, None,
                                 ("precondition admits no inputs",))
        return spec_from_result(fnc.name, r)

    def check(self, bounds: dict, assertions) -> object:
        self.stats["queries"] += 1
        return check_sat(Problem.build(bounds, tuple(assertions)),
                         self.backend())


# --------------------------------------------------------------------------
# the approximation stream


def approximation_steps(vc: VerificationCondition,
                        paths: str = "merged") -> list:
    """Refinement ladder for one VC, coarsest first."""
    if vc.kind == "call-precondition":
        return [ApproximationStep("none", "exact"),
                ApproximationStep("none", "error-approximation")]
    body = vc.fnc.body
    if contains_call(body):
        seq = [("uninterpreted", "exact"),
               ("postcondition-inlining", "exact"),
               ("body-inlining", "exact"),
               ("body-inlining", "error-approximation"),
               ("body-inlining", "full-approximation")]
    else:
        seq = [("none", "exact"),
               ("none", "error-approximation"),
               ("none", "full-approximation")]
    out = []
    split = paths == "explicit" and contains_if(body)
    for calls, arith in seq:
        out.append(ApproximationStep(calls, arith))
        if split and arith == "exact":
            out.append(ApproximationStep(calls, arith, "path-by-path"))
    return out


def next_approximation(vc: VerificationCondition,
                       paths: str = "merged") -> ApproximationStep | None:
    """First untried rung, or None when the ladder is exhausted."""
    steps = approximation_steps(vc, paths)
    if vc.approximation is None or vc.approximation not in steps:
        return steps[0] if steps else None
    idx = steps.index(vc.approximation)
    return steps[idx + 1] if idx + 1 < len(steps) else None


# --------------------------------------------------------------------------
# obligation queries


def _subst_spec_expr(e, ideal_env: dict, actual_env: dict, err_bounds):
    """Instantiate res/~x/!x references inside a specification expression."""
    if isinstance(e, Variable):
        return ideal_env.get(e.name, e)
    if isinstance(e, ActualRef):
        got = actual_env.get(e.name)
        if got is None:
            raise _StepUnavailable("no finite-precision value for ~%s" % e.name)
        return got
    if isinstance(e, ErrorRef):
        return Lit(rat(err_bounds(e.name)))
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(_subst_spec_expr(e.left, ideal_env, actual_env, err_bounds),
                       _subst_spec_expr(e.right, ideal_env, actual_env, err_bounds))
    if isinstance(e, Sqrt):
        return Sqrt(_subst_spec_expr(e.arg, ideal_env, actual_env, err_bounds))
    return e


def _subst_spec_bool(cond, ideal_env, actual_env, err_bounds):
    if isinstance(cond, Comparison):
        return Comparison(
            _subst_spec_expr(cond.left, ideal_env, actual_env, err_bounds),
            cond.op,
            _subst_spec_expr(cond.right, ideal_env, actual_env, err_bounds))
    if isinstance(cond, BoolAnd):
        return BoolAnd(_subst_spec_bool(cond.left, ideal_env, actual_env, err_bounds),
                       _subst_spec_bool(cond.right, ideal_env, actual_env, err_bounds))
    if isinstance(cond, BoolOr):
        return BoolOr(_subst_spec_bool(cond.left, ideal_env, actual_env, err_bounds),
                      _subst_spec_bool(cond.right, ideal_env, actual_env, err_bounds))
    if isinstance(cond, BoolNot):
        return BoolNot(_subst_spec_bool(cond.arg, ideal_env, actual_env, err_bounds))
    raise TypeError("not a condition: %r" % (cond,))


class _StepUnavailable(Exception):
    """This approximation step cannot be constructed for this VC."""


def _range_negations(var_expr, rb: RangeBound) -> list:
    """Negations of lo <(=) e and e <(=) hi, one query each."""
    lo_neg = Comparison(var_expr, "<" if not rb.strict_lo else "<=", Lit(rb.lo))
    hi_neg = Comparison(var_expr, ">" if not rb.strict_hi else ">=", Lit(rb.hi))
    return [lo_neg, hi_neg]


def _clause_negations(clause, fnc, prec, ideal_res, actual_res, uncertainty):
    """Queries (each to be shown Unsat) for one postcondition clause.

    ``uncertainty`` is either an expression for res_actual - res_ideal or a
    callable numeric check used when the twin was replaced by a bound.
    """
    ideal_env = {RESULT: ideal_res}
    actual_env = {RESULT: actual_res} if actual_res is not None else {}

    def err_of(name):
        return initial_uncertainty(fnc, name, prec)

    if isinstance(clause, RangeBound):
        if clause.var != RESULT:
            return []  # input ranges restate the precondition
        return _range_negations(ideal_res, clause)
    if isinstance(clause, PredClause):
        cond = _subst_spec_bool(clause.cond, ideal_env, actual_env, err_of)
        return [nnf(BoolNot(cond))]
    if isinstance(clause, (AbsUncertainty, RelUncertainty, ErrorRefUncertainty)):
        if actual_res is None:
            raise _StepUnavailable("no finite-precision twin at this step")
        who = clause.var
        ideal = ideal_res if who == RESULT else Variable(who)
        actual = actual_res if who == RESULT else actual_env.get(who)
        if actual is None:
            raise _StepUnavailable("no finite-precision value for %s" % who)
        gap = Abs(Sub(actual, ideal))
        if isinstance(clause, AbsUncertainty):
            return [Comparison(gap, ">", Lit(clause.magnitude))]
        if isinstance(clause, RelUncertainty):
            return [Comparison(gap, ">",
                               Mul(Lit(abs(clause.factor)), Abs(ideal)))]
        return [Comparison(gap, ">",
                           Lit(abs(clause.coeff) * rat(err_of(clause.ref))))]
    raise TypeError("cannot verify clause %r" % (clause,))


# --------------------------------------------------------------------------
# counterexample classification


def ideal_obligations(fnc: FunctionDef) -> list:
    """Postcondition conditions that mention only ideal values."""
    out = []
    for clause in fnc.post:
        if isinstance(clause, RangeBound) and clause.var == RESULT:
            lo_op = "<" if clause.strict_lo else "<="
            hi_op = "<" if clause.strict_hi else "<="
            out.append(Comparison(Lit(clause.lo), lo_op, Variable(RESULT)))
            out.append(Comparison(Variable(RESULT), hi_op, Lit(clause.hi)))
        elif isinstance(clause, PredClause) and not _mentions_actual(clause.cond):
            out.append(clause.cond)
    return out


def _mentions_actual(cond) -> bool:
    def scan(e):
        if isinstance(e, (ActualRef, ErrorRef)):
            return True
        return any(scan(c) for c in children(e))

    stack = [cond]
    while stack:
        c = stack.pop()
        if isinstance(c, Comparison):
            if scan(c.left) or scan(c.right):
                return True
        elif isinstance(c, (BoolAnd, BoolOr)):
            stack.extend((c.left, c.right))
        elif isinstance(c, BoolNot):
            stack.append(c.arg)
    return False


def classify_counterexample(vc: VerificationCondition, model: dict,
                            program: Program, clause_text: str = "") -> Counterexample:
    """Valid only when the point provably breaks the ideal specification."""
    fnc = vc.fnc
    point = {p: model[p] for p in fnc.params if p in model}
    cex = Counterexample(tuple(sorted(point.items())), clause_text, False)
    if len(point) != len(fnc.params):
        return cex
    for p in fnc.params:
        if not param_interval(fnc, p).contains(point[p]):
            return cex
    pre = [c.cond for c in fnc.pre if isinstance(c, PredClause)]
    if pre and exact_feasibility(pre, point) is not True:
        return cex
    if vc.kind == "call-precondition":
        if vc.guards and exact_feasibility(list(vc.guards), point) is not True:
            return cex  # the point may never reach this call site
        return _classify_call(vc, point, program, cex)
    closed = _close_lets(inline_calls(fnc.body, program))
    for cond in ideal_obligations(fnc):
        inst = _subst_spec_bool(cond, {RESULT: closed}, {}, lambda n: ZERO)
        if exact_feasibility([inst], point) is False:
            return Counterexample(cex.point, clause_text or bool_str(cond), True)
    return cex


def _classify_call(vc, point, program, cex: Counterexample):
    for i, p in enumerate(vc.callee.params):
        rb = vc.callee.param_range(p)
        if rb is None:
            continue
        arg = _close_lets(inline_calls(vc.args[i], program))
        enc = eval_exact_enclosure(arg, point)
        if enc is None:
            continue
        below = enc.hi <= rb.lo if rb.strict_lo else enc.hi < rb.lo
        above = enc.lo >= rb.hi if rb.strict_hi else enc.lo > rb.hi
        if below or above:
            return Counterexample(cex.point, vc.description, True)
    return cex


# --------------------------------------------------------------------------
# step attempts


def _postcondition_attempt(vc, step, prec, ctx: _Context):
    fnc = vc.fnc
    bounds = {p: param_interval(fnc, p) for p in fnc.params}
    assertions = [c.cond for c in fnc.pre if isinstance(c, PredClause)]
    body = fnc.body

    if step.calls == "body-inlining":
        body = inline_calls(body, ctx.program)
    elif step.calls == "postcondition-inlining":
        body, extra = _inline_postconditions(fnc.body, fnc, prec, ctx)
        bounds.update(extra[0])
        assertions.extend(extra[1])

    if step.arithmetic == "exact":
        twin = _Twin(prec)
        env = {}
        for p in fnc.params:
            err = twin.input_error(fnc, p)
            env[p] = Add(Variable(p), Variable(err)) if err else Variable(p)
        for name in list(bounds):
            if name.startswith("call$"):
                err = name.replace("call$", "callerr$")
                env[name] = (Add(Variable(name), Variable(err))
                             if err in bounds else Variable(name))
        actual = twin.build(body, env)
        bounds.update(twin.noise)
        ideal = body
        err_expr = None
    else:
        r = ctx.result(fnc, prec)
        if r is None or not r.ok or r.max_error is None:
            raise _StepUnavailable("no computed deviation bound")
        if step.arithmetic == "error-approximation":
            ideal = inline_calls(fnc.body, ctx.program)
        else:
            ideal = Variable(RESULT)
            bounds[RESULT] = r.ideal
        bounds["err$res"] = Interval(-r.max_error, r.max_error)
        actual = Add(ideal, Variable("err$res"))
        err_expr = r.max_error

    if step.paths == "path-by-path":
        return _per_path_queries(vc, prec, ctx, bounds, assertions,
                                 ideal, actual)
    queries = []
    for clause in fnc.post:
        for neg in _clause_negations(clause, fnc, prec, ideal, actual, err_expr):
            queries.append((clause_str(clause), neg))
    return _run_queries(vc, prec, ctx, bounds, assertions, queries)


def _inline_postconditions(body, fnc, prec, ctx: _Context):
    """Replace calls by fresh result variables constrained by callee posts."""
    body = _close_lets(body)  # predicate clauses must not capture let names
    new_bounds: dict = {}
    new_asserts: list = []
    counter = [0]

    def post_of(callee: FunctionDef):
        if callee.post:
            return callee.post
        spec = ctx.spec(callee, prec)
        clauses = spec.clauses()
        if not clauses:
            raise _StepUnavailable(
                "no usable postcondition for %s" % callee.name)
        return clauses

    def go(e):
        if isinstance(e, Call):
            callee = ctx.program.function(e.func)
            # The callee's +/- was established assuming its inputs deviate
            # by at most their declared (or default) uncertainty; reusing it
            # is sound only if the supplied arguments stay inside that.
            analysis = ctx.analysis(fnc)
            for i, p in enumerate(callee.params):
                supplied = analysis.deviation_of(
                    inline_calls(e.args[i], ctx.program), prec)
                allowed = rat(initial_uncertainty(callee, p, prec))
                if supplied.err.max_abs() > allowed:
                    raise _StepUnavailable(
                        "argument %s of %s carries more deviation than its "
                        "analysis assumed" % (p, callee.name))
            args = [go(a) for a in e.args]
            counter[0] += 1
            var = "call$%d" % counter[0]
            rng = None
            err = None
            arg_env = dict(zip(callee.params, args))
            for clause in post_of(callee):
                if isinstance(clause, RangeBound) and clause.var == RESULT:
                    rng = Interval(clause.lo, clause.hi)
                elif isinstance(clause, AbsUncertainty) and clause.var == RESULT:
                    err = rat(clause.magnitude)
                elif isinstance(clause, RelUncertainty) and clause.var == RESULT:
                    if rng is not None:
                        err = abs(clause.factor) * rng.max_abs()
                elif isinstance(clause, ErrorRefUncertainty) and clause.var == RESULT:
                    err = abs(clause.coeff) * rat(
                        initial_uncertainty(callee, clause.ref, prec))
                elif isinstance(clause, PredClause) and not _mentions_actual(clause.cond):
                    env = dict(arg_env)
                    env[RESULT] = Variable(var)
                    new_asserts.append(
                        _subst_spec_bool(clause.cond, env, {}, lambda n: ZERO))
            if rng is None:
                raise _StepUnavailable(
                    "postcondition of %s has no result range" % callee.name)
            if err is None:
                raise _StepUnavailable(
                    "postcondition of %s has no deviation bound" % callee.name)
            new_bounds[var] = rng
            if err > 0:
                new_bounds["callerr$%d" % counter[0]] = Interval(-err, err)
            return Variable(var)
        if isinstance(e, (Add, Sub, Mul, Div)):
            return type(e)(go(e.left), go(e.right))
        if isinstance(e, Sqrt):
            return Sqrt(go(e.arg))
        if isinstance(e, Let):
            return Let(e.name, go(e.bound), go(e.body))
        if isinstance(e, If):
            c = Comparison(go(e.cond.left), e.cond.op, go(e.cond.right))
            return If(c, go(e.then), go(e.orelse))
        return e

    return go(body), (new_bounds, new_asserts)


def _per_path_queries(vc, prec, ctx, bounds, assertions, ideal, actual):
    """Split conditionals: prove every clause on every ideal/twin path."""
    fnc = vc.fnc
    outcome = "proven"
    for ideal_path, ideal_guards in _paths_of(ideal):
        for actual_path, actual_guards in _paths_of(actual):
            queries = []
            for clause in fnc.post:
                for neg in _clause_negations(clause, fnc, prec,
                                             ideal_path, actual_path, None):
                    queries.append((clause_str(clause), neg))
            got = _run_queries(vc, prec, ctx, bounds,
                               assertions + ideal_guards + actual_guards,
                               queries)
            if isinstance(got, Counterexample):
                return got
            if got != "proven":
                outcome = got
    return outcome


def _paths_of(e, limit: int = 64):
    """All conditional resolutions of an expression with their guards."""
    found = []

    def first_if(x):
        if isinstance(x, If):
            return x
        if isinstance(x, (Add, Sub, Mul, Div)):
            return first_if(x.left) or first_if(x.right)
        if isinstance(x, Sqrt):
            return first_if(x.arg)
        if isinstance(x, Let):
            return first_if(x.bound) or first_if(x.body)
        if isinstance(x, Call):
            for a in x.args:
                got = first_if(a)
                if got:
                    return got
        return None

    def resolve(x, guard: If, arm: bool):
        if x is guard:
            return x.then if arm else x.orelse
        if isinstance(x, (Add, Sub, Mul, Div)):
            return type(x)(resolve(x.left, guard, arm),
                           resolve(x.right, guard, arm))
        if isinstance(x, Sqrt):
            return Sqrt(resolve(x.arg, guard, arm))
        if isinstance(x, Let):
            return Let(x.name, resolve(x.bound, guard, arm),
                       resolve(x.body, guard, arm))
        if isinstance(x, If):
            c = Comparison(resolve(x.cond.left, guard, arm), x.cond.op,
                           resolve(x.cond.right, guard, arm))
            return If(c, resolve(x.then, guard, arm),
                      resolve(x.orelse, guard, arm))
        if isinstance(x, Call):
            return Call(x.func,
                        tuple(resolve(a, guard, arm) for a in x.args))
        return x

    def go(x, guards):
        if len(found) > limit:
            raise _StepUnavailable("too many paths to split")
        node = first_if(x)
        if node is None:
            found.append((x, guards))
            return
        go(resolve(x, node, True), guards + [node.cond])
        go(resolve(x, node, False), guards + [node.cond.negated()])

    go(e, [])
    return found


def _run_queries(vc, prec, ctx: _Context, bounds, assertions, queries):
    """Show every negated obligation unsatisfiable.

    Returns "proven", "unknown", or a Counterexample (valid or not).
    """
    outcome = "proven"
    for clause_text, neg in queries:
        verdict = ctx.check(bounds, list(assertions) + [neg])
        if isinstance(verdict, Unsat):
            continue
        if isinstance(verdict, Sat):
            cex = classify_counterexample(vc, verdict.model_map(),
                                          ctx.program, clause_text)
            if cex.valid:
                return cex
            vc.counterexample = vc.counterexample or cex
            outcome = "unknown"
        else:
            outcome = "unknown"
    return outcome


def _call_precondition_attempt(vc, step, prec, ctx: _Context):
    """The callee's declared precondition must hold for the arguments.

    Range clauses are always an obligation.  Deviation clauses are one only
    when the callee declares them: the default representation-roundoff
    assumption is an analysis artifact, enforced where it is relied upon
    (when a caller reuses the callee's postcondition), not a contract on
    every call site.
    """
    fnc = vc.fnc
    callee = vc.callee
    declared = [p for p in callee.params if callee.uncertainty(p) is not None]

    if step.arithmetic == "exact":
        bounds = {p: param_interval(fnc, p) for p in fnc.params}
        assertions = [c.cond for c in fnc.pre if isinstance(c, PredClause)]
        assertions += list(vc.guards)
        queries = []
        for i, p in enumerate(callee.params):
            rb = callee.param_range(p)
            arg = inline_calls(vc.args[i], ctx.program)
            for neg in _range_negations(arg, rb):
                queries.append(("%s in [%s, %s]" % (p, rb.lo, rb.hi), neg))
        got = _run_queries(vc, prec, ctx, bounds, assertions, queries)
        if got != "proven" or declared:
            if isinstance(got, Counterexample):
                return got
            raise _StepUnavailable("needs the error engine")
        return "proven"

    analysis = ctx.analysis(fnc)
    for i, p in enumerate(callee.params):
        rb = callee.param_range(p)
        arg = inline_calls(vc.args[i], ctx.program)
        uv = analysis.deviation_of(arg, prec, vc.guards)
        rng = uv.enclosure()
        if not (rb.lo <= rng.lo and rng.hi <= rb.hi):
            rng = analysis.engine_for(
                analysis.assertions + tuple(vc.guards)).get_range(
                    _close_lets(arg), rng)
        if not (rb.lo <= rng.lo and rng.hi <= rb.hi):
            return "unknown"
        if p in declared:
            allowed = rat(initial_uncertainty(callee, p, prec))
            if uv.err.max_abs() > allowed:
                return "unknown"
    return "proven"


# --------------------------------------------------------------------------
# drivers


def verify_vc(vc: VerificationCondition, prec: PrecisionSpec,
              ctx: _Context) -> VerificationCondition:
    for step in approximation_steps(vc, ctx.config.paths):
        vc.approximation = step
        try:
            if vc.kind == "postcondition":
                got = _postcondition_attempt(vc, step, prec, ctx)
            else:
                got = _call_precondition_attempt(vc, step, prec, ctx)
        except _StepUnavailable:
            continue
        except InfeasibleRegion:
            got = "proven"  # no inputs at all: obligations hold vacuously
        if got == "proven":
            vc.status = PROVEN
            return vc
        if isinstance(got, Counterexample):
            vc.status = DISPROVEN
            vc.counterexample = got
            return vc
    vc.status = UNKNOWN
    return vc


def verify_function(fnc: FunctionDef, prec: PrecisionSpec,
                    ctx: _Context) -> FunctionOutcome:
    vcs = generate_vcs(ctx.program, fnc)
    for vc in vcs:
        verify_vc(vc, prec, ctx)
    return FunctionOutcome(fnc.name, vcs, ctx.result(fnc, prec),
                           ctx.spec(fnc, prec), fnc=fnc)


def verify_program(program: Program,
                   config: PipelineConfig | None = None) -> Verdict:
    """Try each candidate format, coarsest first, until everything proves.

    A valid counterexample refutes the ideal specification, which no amount
    of precision can repair, so the sweep stops there.  Otherwise the last
    attempt's outcomes (analysis results, generated specs, VC statuses) are
    what code emission reports.
    """
    config = config or PipelineConfig()
    program = order_functions(program)
    ctx = _Context(program, config)
    attempts = []
    chosen = None
    for prec in config.precisions:
        attempt = PrecisionAttempt(
            prec, [verify_function(f, prec, ctx) for f in program.functions])
        attempts.append(attempt)
        if attempt.disproven:
            break
        if attempt.proven:
            chosen = prec
            break
    work = {"vc_queries": ctx.stats["queries"]}
    for a in ctx.analyses.values():
        for key, n in a.solver_work().items():
            work[key] = work.get(key, 0) + n
    return Verdict(chosen is not None, chosen, attempts,
                   program=program, config=config, work=work)
