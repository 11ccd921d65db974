from __future__ import annotations

import graphlib

import pytest

from verifloat.frontend import (
    CycleError,
    FrontendError,
    add_default_roundoff,
    initial_uncertainty,
    order_functions,
    pretty,
    validate,
)
from verifloat.parser import ParseError, parse
from verifloat.precision import FLOAT64
from verifloat.rationals import rat
from verifloat.syntax import (
    AbsUncertainty,
    Add,
    Div,
    ErrorRefUncertainty,
    If,
    Let,
    Lit,
    Mul,
    PredClause,
    RangeBound,
    Sqrt,
    Sub,
    Variable,
    called_functions,
)

SIMPLE = """
def f(x: Real): Real = {
  require(x.in(1.0, 2.0))
  x * x
} ensuring(res => res <= 4.0)
"""

TRIANGLE_STYLE = """
def tri(a: Real, b: Real, c: Real): Real = {
  require(1.0 < a && a < 9.0 && 1.0 < b && b < 9.0 && 1.0 < c && c < 9.0 &&
    a + b > c + 0.1 && a + c > b + 0.1 && b + c > a + 0.1)
  val s = (a + b + c) / 2.0
  sqrt(s * (s - a) * (s - b) * (s - c))
}
"""


def test_in_sugar_becomes_range_bound():
    f = parse(SIMPLE).functions[0]
    # declared ranges are closed: the endpoints are admissible inputs
    assert f.pre == [RangeBound("x", rat(1), rat(2),
                                strict_lo=False, strict_hi=False)]
    assert f.body == Mul(Variable("x"), Variable("x"))


def test_comparison_bounds_fold():
    f = parse(TRIANGLE_STYLE).functions[0]
    bounds = [c for c in f.pre if isinstance(c, RangeBound)]
    assert bounds == [
        RangeBound("a", rat(1), rat(9)),
        RangeBound("b", rat(1), rat(9)),
        RangeBound("c", rat(1), rat(9)),
    ]
    others = [c for c in f.pre if isinstance(c, PredClause)]
    assert len(others) == 3  # the three slack constraints survive as-is


def test_literals_are_exact_decimals():
    src = """
def g(x: Real): Real = {
  require(x.in(0.0, 1.0))
  x * 1.0e-11 + 331.4
}
"""
    body = parse(src).functions[0].body
    assert body == Add(Mul(Variable("x"), Lit(rat(1, 10 ** 11))),
                       Lit(rat(3314, 10)))


def test_let_if_sqrt_parse():
    src = """
def h(x: Real): Real = {
  require(x.in(0.5, 4.0))
  val t = x + 1.0
  if (t < 2.0) sqrt(t) else t / 2.0
}
"""
    body = parse(src).functions[0].body
    assert isinstance(body, Let)
    assert isinstance(body.body, If)
    assert isinstance(body.body.then, Sqrt)
    assert isinstance(body.body.orelse, Div)


def test_unary_minus():
    src = """
def neg(x: Real): Real = {
  require(x.in(-2.0, -1.0))
  -x * 3.0
}
"""
    f = parse(src).functions[0]
    assert f.pre == [RangeBound("x", rat(-2), rat(-1),
                                strict_lo=False, strict_hi=False)]
    assert f.body == Mul(Sub(Lit(rat(0)), Variable("x")), Lit(rat(3)))


def test_uncertainty_clauses():
    src = """
def u(x: Real, y: Real): Real = {
  require(x.in(1.0, 2.0) && x +/- 1e-6 && y.in(0.0, 1.0) && y +/- 0.01 * y)
  x + y
} ensuring(res => res +/- 3.5 * !x)
"""
    f = parse(src).functions[0]
    assert f.uncertainty("x") == AbsUncertainty("x", rat(1, 10 ** 6))
    assert f.uncertainty("y").factor == rat(1, 100)
    assert f.post == [ErrorRefUncertainty("res", rat(7, 2), "x")]


def test_equality_condition_rejected():
    src = """
def bad(x: Real): Real = {
  require(x.in(0.0, 1.0))
  if (x == 0.0) 1.0 else x
}
"""
    with pytest.raises(ParseError) as err:
        parse(src)
    assert "equality" in str(err.value)


def test_parse_error_has_location():
    with pytest.raises(ParseError) as err:
        parse("def f(x: Real): Real = {\n  require(x.in(0.0, 1.0))\n  x +\n}")
    assert err.value.line == 4


def test_missing_bounds_rejected():
    src = """
def f(x: Real, y: Real): Real = {
  require(x.in(0.0, 1.0) && y > 0.0)
  x + y
}
"""
    with pytest.raises(FrontendError) as err:
        validate(parse(src))
    assert "y" in str(err.value)


def test_spec_atoms_rejected_in_body_and_pre():
    with pytest.raises(ParseError):
        parse("def f(x: Real): Real = { require(x.in(0.0, 1.0)) ~x }")
    src = "def f(x: Real): Real = { require(x.in(0.0,1.0) && x +/- 2.0 * !x) x }"
    with pytest.raises(FrontendError):
        validate(parse(src))


def test_validate_unknown_things():
    with pytest.raises(FrontendError):
        validate(parse("def f(x: Real): Real = { require(x.in(0.0,1.0)) x + y }"))
    with pytest.raises(FrontendError):
        validate(parse("def f(x: Real): Real = { require(x.in(0.0,1.0)) g(x) }"))
    with pytest.raises(FrontendError):
        validate(parse(SIMPLE + SIMPLE))  # duplicate definition


def test_self_call_is_a_cycle():
    src = "def f(x: Real): Real = { require(x.in(0.0,1.0)) f(x) }"
    with pytest.raises(CycleError):
        validate(parse(src))


CALLS = """
def comparison(x: Real): Real = {
  require(x.in(0.0, 1.0))
  sineTaylor(x) - sineOrder3(x)
}

def sineTaylor(x: Real): Real = {
  require(x.in(0.0, 1.0))
  x - x * x * x / 6.0
}

def sineOrder3(x: Real): Real = {
  require(x.in(0.0, 1.0))
  0.9549 * x
}
"""


def test_order_functions_callees_first():
    prog = order_functions(parse(CALLS))
    assert prog.names() == ["sineTaylor", "sineOrder3", "comparison"]


def test_order_functions_is_a_topological_order():
    prog = parse(CALLS)
    ordered = order_functions(prog)
    # reference oracle: stdlib topological sorter accepts the ordering
    deps = {f.name: called_functions(f.body) for f in prog.functions}
    seen = set()
    for f in ordered.functions:
        assert deps[f.name] <= seen
        seen.add(f.name)
    # and graphlib agrees the graph is acyclic
    graphlib.TopologicalSorter(deps).static_order()


def test_order_functions_stable_for_independent():
    src = SIMPLE + "\n" + SIMPLE.replace("def f", "def g")
    prog = order_functions(validate(parse(src)))
    assert prog.names() == ["f", "g"]


def test_indirect_cycle():
    src = """
def a(x: Real): Real = { require(x.in(0.0,1.0)) b(x) }
def b(x: Real): Real = { require(x.in(0.0,1.0)) a(x) }
"""
    with pytest.raises(CycleError):
        order_functions(parse(src))


def test_default_roundoff():
    f = parse(SIMPLE).functions[0]
    # eps * maxAbs([1,2]) = 2^-53 * 2 = 2^-52
    assert initial_uncertainty(f, "x", FLOAT64) == rat(1, 2 ** 52)
    g = add_default_roundoff(f, FLOAT64)
    assert g.uncertainty("x") == AbsUncertainty("x", rat(1, 2 ** 52))


def test_default_roundoff_uses_max_abs():
    src = "def f(x: Real): Real = { require(x.in(-3.0, 2.0)) x }"
    f = parse(src).functions[0]
    assert initial_uncertainty(f, "x", FLOAT64) == 3 * FLOAT64.eps


def test_explicit_noise_wins():
    src = "def f(x: Real): Real = { require(x.in(1.0, 2.0) && x +/- 1e-6) x }"
    f = parse(src).functions[0]
    assert initial_uncertainty(f, "x", FLOAT64) == rat(1, 10 ** 6)
    assert add_default_roundoff(f, FLOAT64).pre == f.pre


ROUND_TRIP_SOURCES = [SIMPLE, TRIANGLE_STYLE, CALLS, """
def mixed(x: Real, y: Real): Real = {
  require(0.1 <= x && x <= 0.3 && y.in(-2.0, 2.0) && x +/- 1e-7 &&
          (x + y > 0.5 || y > 1.5))
  val a = x * (y + 1.0);
  val b = a / (x - 4.0)
  if (b < 0.0) { val c = b * b; sqrt(c) } else b + 1.0
} ensuring(res => res <= 100.0 && res +/- 1e-9 && ~res >= -100.0)
"""]


@pytest.mark.parametrize("src", ROUND_TRIP_SOURCES)
def test_parse_pretty_parse_identity(src):
    ast1 = parse(src)
    ast2 = parse(pretty(ast1))
    assert ast1 == ast2
