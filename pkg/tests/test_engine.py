from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from verifloat.engine import INPUT, PATH, PROP, ROUND, ErrorAnalysis, analyze
from verifloat.frontend import validate
from verifloat.parser import parse
from verifloat.precision import DOUBLE_DOUBLE, FLOAT32, FLOAT64, QUAD_DOUBLE
from verifloat.ranges import InfeasibleRegion
from verifloat.rationals import rat
from verifloat.solver.icp import eval_exact_enclosure
from verifloat.syntax import (
    Add,
    Comparison,
    Div,
    FunctionDef,
    If,
    Lit,
    Mul,
    RangeBound,
    Sqrt,
    Sub,
    Variable,
)

EPS64 = Fraction(1, 2 ** 53)
EPS32 = Fraction(1, 2 ** 24)


def fn(src):
    return validate(parse(src)).functions[0]


def run(src, prec=FLOAT64):
    return analyze(fn(src), prec)


# ---------------------------------------------------------------------------
# single operations against hand-derived exact bounds


def test_add_exact_inputs():
    # x in [1,2], y in [3,4], no input noise: the only deviation is one
    # rounding of a value of magnitude at most 6.
    r = run("""
def f(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && x +/- 0.0 && y.in(3.0, 4.0) && y +/- 0.0)
  x + y
}""")
    assert r.ok
    assert r.max_error == 6 * EPS64
    assert r.contributions[ROUND] == 6 * EPS64
    assert r.contributions[INPUT] == 0
    assert r.contributions[PATH] == 0


def test_add_default_input_noise():
    # Default input noise is eps*max|range| per input: 2eps and 4eps here.
    # One addition then rounds a value of magnitude up to 6 + 6eps.
    r = run("""
def f(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && y.in(3.0, 4.0))
  x + y
}""")
    assert r.max_error == 12 * EPS64 + 6 * EPS64 * EPS64
    assert r.contributions[INPUT] == 6 * EPS64


def test_subtraction_cancels_shared_input_noise():
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0) && x +/- 0.0)
  x - x
}""")
    assert r.max_error == 0
    assert r.ideal.lo == 0 and r.ideal.hi == 0
    assert r.total.lo == 0 and r.total.hi == 0


def test_mul_with_explicit_noise():
    # x in [1,2] +- 1/100, y in [3,4] +- 1/50.  Deviation before rounding is
    # max|x|*uy + max|y|*ux + ux*uy, then one rounding of magnitude
    # max|xy| + that deviation.
    ux, uy = Fraction(1, 100), Fraction(1, 50)
    pre = 2 * uy + 4 * ux + ux * uy
    expected = pre + EPS64 * (8 + pre)
    r = run("""
def f(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && x +/- 0.01 && y.in(3.0, 4.0) && y +/- 0.02)
  x * y
}""")
    assert r.max_error == expected


def test_division_mean_value_bound():
    # 1/y with y in [2,4] +- 1/2: perturbed divisor D = [3/2, 9/2],
    # slope -1/D^2 has |.| at most 4/9, so the inverse deviates by at most
    # (1/2)(4/9) = 2/9, then one rounding of magnitude 1/2 + 2/9.
    r = run("""
def f(y: Real): Real = {
  require(y.in(2.0, 4.0) && y +/- 0.5)
  1.0 / y
}""")
    expected = Fraction(2, 9) + EPS64 * Fraction(13, 18)
    assert r.max_error == expected


def test_sqrt_mean_value_bound():
    # sqrt(x), x in [4,9] +- 1/10: slope 1/(2 sqrt(D)) over D = [3.9, 9.1]
    # peaks at 1/(2 sqrt(3.9)) ~= 0.2531847; the deviation bound is that
    # times 1/10 plus one rounding of a value of magnitude about 3.
    r = run("""
def f(x: Real): Real = {
  require(x.in(4.0, 9.0) && x +/- 0.1)
  sqrt(x)
}""")
    assert Fraction(25318, 10 ** 6) < r.max_error < Fraction(25320, 10 ** 6)
    assert float(r.ideal.lo) == pytest.approx(2.0)
    assert float(r.ideal.hi) == pytest.approx(3.0)


def test_unrepresentable_literal_charged():
    lit = Fraction(1, 10)
    stored = Fraction(3602879701896397, 2 ** 55)  # nearest double to 0.1
    lit_err = abs(stored - lit)
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0) && x +/- 0.0)
  x + 0.1
}""")
    assert r.max_error == lit_err + EPS64 * (Fraction(11, 10) + lit_err)


def test_representable_literal_free():
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0) && x +/- 0.0)
  x + 0.5
}""")
    assert r.max_error == Fraction(3, 2) * EPS64


def test_relative_input_noise():
    r = run("""
def f(x: Real): Real = {
  require(x.in(1.0, 2.0) && x +/- 0.01 * x)
  x
}""")
    assert r.max_error == Fraction(2, 100)
    assert r.contributions[INPUT] == Fraction(2, 100)


# ---------------------------------------------------------------------------
# ranges the cheap enclosures cannot see


def test_sqrt_needs_certified_argument_range():
    # x*x - x + 1 >= 3/4 everywhere, but plain interval or affine forms over
    # [0,2] cannot show it; only the certified range query saves the sqrt.
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 2.0))
  sqrt(x*x - x + 1.0)
}""")
    assert r.ok
    assert 0.86 < float(r.ideal.lo) < 0.8661
    assert 1.73 < float(r.ideal.hi) < 1.7331
    assert r.max_error < Fraction(1, 10 ** 13)


def test_result_range_certified_tight():
    # x(1-x) on [0,1] has true range [0, 1/4]; dependency-blind evaluation
    # would report an upper end of 1.
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0))
  x * (1.0 - x)
}""")
    assert r.ideal.lo <= 0
    assert Fraction(1, 4) <= r.ideal.hi < Fraction(1, 4) + Fraction(1, 10 ** 9)
    assert r.total.hi - r.ideal.hi == r.max_error


def test_total_is_ideal_widened_by_error():
    r = run("""
def f(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && y.in(3.0, 4.0))
  x*y + y
}""")
    assert r.total.lo == r.ideal.lo - r.max_error
    assert r.total.hi == r.ideal.hi + r.max_error
    assert r.total.encloses(r.ideal)


# ---------------------------------------------------------------------------
# failure reporting


def test_negative_sqrt_reported():
    r = run("""
def f(x: Real): Real = {
  require(x.in(-1.0, 1.0))
  sqrt(x)
}""")
    assert not r.ok
    assert r.issues[0].kind == "negative-sqrt"
    assert r.max_error is None


def test_division_by_zero_reported():
    r = run("""
def f(x: Real): Real = {
  require(x.in(-1.0, 1.0))
  1.0 / x
}""")
    assert not r.ok
    assert r.issues[0].kind == "division-by-zero"


def test_divisor_with_deviation_across_zero_reported():
    # Ideal divisor stays in [1e-12, 1], but input noise 1e-6 drags the
    # computed one across zero.
    r = run("""
def f(x: Real): Real = {
  require(x.in(1e-12, 1.0) && x +/- 1e-6)
  1.0 / x
}""")
    assert not r.ok
    assert r.issues[0].kind == "division-by-zero"
    assert "finite precision" in r.issues[0].detail


def test_overflow_reported_float64():
    r = run("""
def f(x: Real): Real = {
  require(x.in(1e200, 2e200))
  x * x
}""")
    assert not r.ok
    assert r.issues[0].kind == "overflow"


def test_overflow_reported_float32_input():
    r = run("""
def f(x: Real): Real = {
  require(x.in(1e200, 2e200))
  x * x
}""", FLOAT32)
    assert not r.ok
    assert r.issues[0].kind == "overflow"


def test_infeasible_precondition_raises():
    # x*x >= 9 cannot be folded into the declared box, so infeasibility is
    # only discovered by the range engine.
    f = fn("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0) && x * x >= 9.0)
  x + 1.0
}""")
    with pytest.raises(InfeasibleRegion):
        analyze(f, FLOAT64)


# ---------------------------------------------------------------------------
# precision sweep


TRI = """
def tri(a: Real, b: Real, c: Real): Real = {
  require(1.0 <= a && a <= 9.0 && 1.0 <= b && b <= 9.0 && 1.0 <= c && c <= 9.0 &&
    a + b > c + 0.1 && a + c > b + 0.1 && b + c > a + 0.1)
  val s = (a + b + c) / 2.0
  sqrt(s * (s - a) * (s - b) * (s - c))
}
"""


def test_error_strictly_decreases_with_precision():
    an = ErrorAnalysis(fn(TRI))
    errs = [an.run(p).max_error
            for p in (FLOAT32, FLOAT64, DOUBLE_DOUBLE, QUAD_DOUBLE)]
    assert all(e is not None for e in errs)
    assert errs[0] > errs[1] > errs[2] > errs[3]


def test_ideal_range_shared_across_precisions():
    an = ErrorAnalysis(fn(TRI))
    r64 = an.run(FLOAT64)
    runs_before = an.rng.session.stats["solver_runs"]
    r32 = an.run(FLOAT32)
    assert r32.ideal == r64.ideal
    # the second sweep answers every range question from caches
    assert an.rng.session.stats["solver_runs"] == runs_before


def test_triangle_float64_bound_plausible():
    r = ErrorAnalysis(fn(TRI)).run(FLOAT64)
    assert Fraction(1, 10 ** 12) < r.max_error < Fraction(1, 10 ** 9)
    assert float(r.ideal.lo) == pytest.approx(0.29663740, rel=1e-5)
    assert float(r.ideal.hi) == pytest.approx(35.0740288, rel=1e-5)


# ---------------------------------------------------------------------------
# conditionals


def test_step_function_error_is_jump_height():
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0))
  if (x < 0.5) 1.0 else 0.0
}""")
    assert r.max_error == 1
    assert r.path_error == 1
    assert r.contributions[PATH] == 1
    assert r.contributions[ROUND] == 0


def test_identical_branches_cost_no_more_than_straight_line():
    cond = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0))
  if (x < 0.5) (x + 1.0) else (1.0 + x)
}""")
    straight = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0))
  x + 1.0
}""")
    assert cond.ok
    assert cond.max_error == straight.max_error
    assert cond.path_error <= straight.max_error


def test_dead_branch_is_skipped():
    # else branch would divide by zero, but no input can reach it and the
    # guard cannot misfire far enough to get there either.
    r = run("""
def f(x: Real): Real = {
  require(x.in(0.0, 1.0))
  if (x < 2.0) (x + 1.0) else (1.0 / (x - x))
}""")
    assert r.ok
    assert r.path_error == 0
    assert float(r.ideal.lo) == pytest.approx(1.0)
    assert float(r.ideal.hi) == pytest.approx(2.0)


def test_branch_regions_tighten_analysis():
    # Inside the else branch x >= 1/2, so the divisor x is provably nonzero
    # even though over the whole input box it straddles zero.
    r = run("""
def f(x: Real): Real = {
  require(x.in(-1.0, 1.0))
  if (x < 0.5) 1.0 else (1.0 / x)
}""")
    assert r.ok


def test_divergence_at_boundary_stays_within_bound():
    # Branches meet at the guard boundary with different slopes; runs that
    # pick the wrong branch must still land within the reported deviation.
    body = If(Comparison(Variable("x"), "<", Lit(rat(1, 2))),
              Mul(Variable("x"), Sub(Lit(rat(1)), Variable("x"))),
              Mul(Variable("x"), Variable("x")))
    f = FunctionDef("f", ("x",), [RangeBound("x", rat(0), rat(1))], body)
    r = analyze(f, FLOAT64)
    assert r.ok
    half = 0.5
    for nudge in (0.0, 2 ** -53, -(2 ** -53), 2 ** -52, 1e-12, -1e-12):
        x = half + nudge
        ideal = (Fraction(x) * (1 - Fraction(x)) if Fraction(x) < Fraction(1, 2)
                 else Fraction(x) * Fraction(x))
        actual = x * (1.0 - x) if x < 0.5 else x * x
        assert abs(Fraction(actual) - ideal) <= r.max_error


# ---------------------------------------------------------------------------
# call inlining


def test_calls_are_inlined_for_analysis():
    prog = validate(parse("""
def sq(x: Real): Real = {
  require(x.in(0.0, 3.0))
  x * x
}

def f(y: Real): Real = {
  require(y.in(1.0, 2.0))
  sq(y) + 1.0
}"""))
    inlined = fn("""
def g(y: Real): Real = {
  require(y.in(1.0, 2.0))
  y * y + 1.0
}""")
    r_call = analyze(prog.function("f"), FLOAT64, prog)
    r_flat = analyze(inlined, FLOAT64)
    assert r_call.max_error == r_flat.max_error
    assert r_call.ideal == r_flat.ideal


# ---------------------------------------------------------------------------
# provenance bookkeeping


def test_contributions_partition_the_bound():
    for src in ("""
def f(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && y.in(3.0, 4.0) && x +/- 1e-7)
  (x*y + y) / (y + 0.5)
}""", """
def f(x: Real): Real = {
  require(x.in(0.0, 1.0))
  if (x < 0.5) (x * x) else x
}"""):
        r = run(src)
        assert r.ok
        assert sum(r.contributions.values()) == r.max_error
        assert set(r.contributions) == {INPUT, ROUND, PROP, PATH}


def test_input_only_function():
    r = run("""
def f(x: Real): Real = {
  require(x.in(1.0, 2.0) && x +/- 1e-9)
  x
}""")
    assert r.max_error == Fraction(1, 10 ** 9)
    assert r.contributions[INPUT] == r.max_error
    assert r.contributions[ROUND] == 0


# ---------------------------------------------------------------------------
# soundness against actual machine arithmetic


def _f64(e, env):
    if isinstance(e, Variable):
        return env[e.name]
    if isinstance(e, Lit):
        return float(e.value)
    if isinstance(e, Add):
        return _f64(e.left, env) + _f64(e.right, env)
    if isinstance(e, Sub):
        return _f64(e.left, env) - _f64(e.right, env)
    if isinstance(e, Mul):
        return _f64(e.left, env) * _f64(e.right, env)
    if isinstance(e, Div):
        return _f64(e.left, env) / _f64(e.right, env)
    if isinstance(e, Sqrt):
        return math.sqrt(_f64(e.arg, env))
    raise TypeError(e)


def _f32(e, env):
    if isinstance(e, Variable):
        return env[e.name]
    if isinstance(e, Lit):
        return np.float32(float(e.value))
    if isinstance(e, Add):
        return np.float32(_f32(e.left, env) + _f32(e.right, env))
    if isinstance(e, Sub):
        return np.float32(_f32(e.left, env) - _f32(e.right, env))
    if isinstance(e, Mul):
        return np.float32(_f32(e.left, env) * _f32(e.right, env))
    if isinstance(e, Div):
        return np.float32(_f32(e.left, env) / _f32(e.right, env))
    if isinstance(e, Sqrt):
        return np.sqrt(_f32(e.arg, env))
    raise TypeError(e)


_X = (rat(-2), rat(2))
_Y = (rat(1, 2), rat(3))


def _leaf():
    dyadics = st.builds(lambda n, k: Lit(rat(n, 2 ** k)),
                        st.integers(-48, 48), st.integers(0, 5))
    return st.one_of(st.sampled_from([Variable("x"), Variable("y")]), dyadics)


def _exprs():
    def extend(children):
        def binop(op):
            return st.builds(op, children, children)

        safe_div = st.builds(
            lambda a, v, k: Div(a, Add(Mul(v, v), Lit(rat(k)))),
            children, st.sampled_from([Variable("x"), Variable("y")]),
            st.integers(1, 4))
        safe_sqrt = st.builds(
            lambda v, k: Sqrt(Add(Mul(v, v), Lit(rat(k)))),
            st.sampled_from([Variable("x"), Variable("y")]),
            st.integers(1, 4))
        return st.one_of(binop(Add), binop(Sub), binop(Mul),
                         safe_div, safe_sqrt)

    return st.recursive(_leaf(), extend, max_leaves=6)


def _grid_point(lo, hi, k):
    # dyadic grid so float conversion (even to float32) is exact
    return lo + (hi - lo) * rat(k, 256)


@settings(max_examples=20, deadline=None,
          suppress_health_check=[HealthCheck.too_slow])
@given(_exprs(), st.integers(0, 256), st.integers(0, 256))
def test_machine_runs_stay_within_bound(body, kx, ky):
    f = FunctionDef("f", ("x", "y"),
                    [RangeBound("x", *_X), RangeBound("y", *_Y)], body)
    px = _grid_point(_X[0], _X[1], kx)
    py = _grid_point(_Y[0], _Y[1], ky)
    point = {"x": px, "y": py}
    an = ErrorAnalysis(f)
    enc = eval_exact_enclosure(body, point, bits=240)

    r64 = an.run(FLOAT64)
    assert r64.ok
    act = Fraction(_f64(body, {"x": float(px), "y": float(py)}))
    dist = max(abs(act - enc.lo), abs(act - enc.hi))
    assert dist <= r64.max_error
    assert enc.lo >= r64.ideal.lo
    assert enc.hi <= r64.ideal.hi

    r32 = an.run(FLOAT32)
    act32 = Fraction(float(_f32(body, {"x": np.float32(float(px)),
                                       "y": np.float32(float(py))})))
    dist32 = max(abs(act32 - enc.lo), abs(act32 - enc.hi))
    assert dist32 <= r32.max_error
