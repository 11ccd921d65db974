import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verifloat.intervals import DivisionByZeroRange, Interval, NegativeSqrtRange
from verifloat.rationals import rat
from verifloat.ranges import InfeasibleRegion, RangeConfig, RangeEngine, get_range, interval_eval
from verifloat.solver import BackendConfig
from verifloat.solver.icp import eval_exact_enclosure
from verifloat.syntax import (
    Add,
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

X = Variable("x")
Y = Variable("y")

FAST = RangeConfig(backend=BackendConfig(timeout=0.25))


def box(lo, hi):
    return {"x": Interval(rat(lo), rat(hi))}


def parabola():
    return Mul(X, Sub(Lit(rat(1)), X))


def test_parabola_range_tightens_to_quarter():
    r = get_range(parabola(), box(0, 1), config=FAST)
    assert r.lo == rat(0)  # the minimum is attained, quick check keeps it
    assert rat(1, 4) <= r.hi <= rat(1, 4) + rat(1, 10**9)


def test_square_range_drops_spurious_negative_part():
    # interval arithmetic for x*x on [-2, 2] gives [-4, 4]
    e = Mul(X, X)
    ia = interval_eval(e, box(-2, 2))
    assert ia == Interval(rat(-4), rat(4))
    r = get_range(e, box(-2, 2), config=FAST)
    assert -rat(1, 10**9) <= r.lo <= rat(0)
    assert r.hi == rat(4)  # attained at the endpoints, quick check keeps it
    assert ia.encloses(r)


def test_assertions_participate_in_the_range():
    r = get_range(X, box(0, 1), (Comparison(X, "<=", Lit(rat(3, 10))),),
                  config=FAST)
    assert r.lo == rat(0)
    assert rat(3, 10) <= r.hi <= rat(3, 10) + rat(1, 10**9)


def test_divisor_straddling_zero_is_tightened_before_dividing():
    e = Div(X, Add(Mul(X, X), Lit(rat(1))))
    with pytest.raises(DivisionByZeroRange):
        interval_eval(e, box(-5, 5))
    r = get_range(e, box(-5, 5), config=FAST)
    half = rat(1, 2)
    slack = rat(1, 10**8)
    assert -half - slack <= r.lo <= -half
    assert half <= r.hi <= half + slack


def test_true_division_by_zero_still_raises():
    with pytest.raises(DivisionByZeroRange):
        get_range(Div(Lit(rat(1)), X), box(-1, 1), config=FAST)


def test_fully_negative_sqrt_raises():
    with pytest.raises(NegativeSqrtRange):
        get_range(Sqrt(Sub(X, Lit(rat(2)))), box(0, 1), config=FAST)


def test_marginally_negative_sqrt_raises():
    eps = rat(1, 10**12)
    with pytest.raises(NegativeSqrtRange):
        get_range(Sqrt(Sub(X, Lit(eps))), box(0, 1), config=FAST)


def test_infeasible_precondition_is_reported():
    eng = RangeEngine(box(0, 1), (Comparison(X, ">", Lit(rat(2))),), FAST)
    with pytest.raises(InfeasibleRegion):
        eng.get_range(parabola())


def test_let_bound_divisions_use_substituted_queries():
    e = Let("t", Mul(X, X), Div(Lit(rat(1)), Add(Variable("t"), Lit(rat(1)))))
    r = get_range(e, box(-5, 5), config=FAST)
    # 1/(x^2+1) on [-5, 5] has range [1/26, 1]
    assert rat(1, 27) <= r.lo <= rat(1, 26)
    assert rat(1) <= r.hi <= rat(1) + rat(1, 10**9)


def test_decided_conditional_takes_one_branch():
    e = If(Comparison(X, "<", Lit(rat(5))), X, Sub(Lit(rat(100)), X))
    r = get_range(e, box(0, 1), config=FAST)
    assert r.lo == rat(0) and r.hi == rat(1)


def test_undecided_conditional_covers_both_branches():
    e = If(Comparison(X, "<", Lit(rat(1, 2))), X, Add(X, Lit(rat(1))))
    r = get_range(e, box(0, 1), config=FAST)
    assert r.lo <= rat(0) and r.hi >= rat(2)


def test_results_are_deterministic():
    eng1 = RangeEngine(box(-5, 5), config=FAST)
    eng2 = RangeEngine(box(-5, 5), config=FAST)
    e = Div(X, Add(Mul(X, X), Lit(rat(1))))
    r1, r2 = eng1.get_range(e), eng2.get_range(e)
    assert r1.lo == r2.lo and r1.hi == r2.hi


def test_engine_reuses_its_session_across_queries():
    eng = RangeEngine(box(0, 1), config=FAST)
    eng.get_range(parabola())
    runs = eng.session.stats["solver_runs"]
    eng.get_range(parabola())
    assert eng.session.stats["solver_runs"] == runs


# -- randomized soundness ----------------------------------------------------

small_rat = st.fractions(min_value=-3, max_value=3, max_denominator=4).map(
    lambda f: rat(f.numerator, f.denominator))


@st.composite
def total_exprs(draw, depth=0):
    """Expressions that are defined everywhere (divisors bounded away
    from zero by construction)."""
    if depth >= 2 or draw(st.booleans()):
        return draw(st.sampled_from([X, Y, Lit(rat(1, 3)), Lit(rat(-2))]))
    kind = draw(st.sampled_from(["add", "sub", "mul", "div"]))
    a = draw(total_exprs(depth=depth + 1))
    if kind == "div":
        b = draw(total_exprs(depth=depth + 1))
        return Div(a, Add(Mul(b, b), Lit(rat(1))))
    b = draw(total_exprs(depth=depth + 1))
    return {"add": Add, "sub": Sub, "mul": Mul}[kind](a, b)


@settings(max_examples=30, deadline=None)
@given(
    e=total_exprs(),
    xlo=small_rat, ylo=small_rat,
    w=st.integers(min_value=1, max_value=3),
    sx=st.integers(min_value=0, max_value=8),
    sy=st.integers(min_value=0, max_value=8),
)
def test_sampled_points_always_fall_inside_computed_range(e, xlo, ylo, w, sx, sy):
    bounds = {"x": Interval(xlo, xlo + w), "y": Interval(ylo, ylo + w)}
    r = get_range(e, bounds, config=FAST)
    ia = interval_eval(e, bounds)
    assert ia.encloses(r)
    point = {"x": xlo + rat(sx * w, 8), "y": ylo + rat(sy * w, 8)}
    enc = eval_exact_enclosure(e, point)
    assert enc is not None and enc.is_point()
    assert r.contains(enc.lo)
