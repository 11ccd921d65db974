import os
import stat

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from verifloat.intervals import Interval
from verifloat.rationals import rat
from verifloat.solver import (
    BackendConfig,
    Problem,
    Sat,
    Session,
    Unknown,
    Unsat,
    check_sat,
    emit_smtlib,
)
from verifloat.solver.external import BackendUnavailable, check_external, parse_model
from verifloat.solver.icp import builtin_icp_check, verify_model
from verifloat.syntax import Add, Call, Comparison, Div, Lit, Mul, Sqrt, Sub, Variable

X = Variable("x")
Y = Variable("y")

FAST = BackendConfig(timeout=0.25)


def unit_box():
    return {"x": Interval(rat(0), rat(1))}


def parabola():
    # x*(1-x) on [0,1]: by calculus the maximum is 1/4 at x = 1/2,
    # the minimum 0 at the endpoints
    return Mul(X, Sub(Lit(rat(1)), X))


def test_threshold_above_max_is_unsat():
    p = Problem.build(unit_box(), (Comparison(parabola(), ">", Lit(rat(26, 100))),))
    assert check_sat(p, FAST) == Unsat()


def test_threshold_below_max_is_sat_with_verified_model():
    p = Problem.build(unit_box(), (Comparison(parabola(), ">", Lit(rat(24, 100))),))
    v = check_sat(p, FAST)
    assert isinstance(v, Sat)
    xv = v.model_map()["x"]
    assert rat(0) <= xv <= rat(1)
    assert xv * (1 - xv) > rat(24, 100)


def test_contradictory_bound_is_unsat():
    p = Problem.build(unit_box(), (Comparison(X, ">", Lit(rat(2))),))
    assert check_sat(p, FAST) == Unsat()


def test_builtin_check_ignores_backend_choice():
    cfg = BackendConfig(timeout=0.25, backend="external",
                        external_cmd=("no-such-solver-binary",))
    p = Problem.build(unit_box(), (Comparison(X, ">", Lit(rat(2))),))
    assert builtin_icp_check(p, cfg) == Unsat()


def test_uninterpreted_call_degrades_to_unknown():
    f = Call("f", (X,))
    p = Problem.build(unit_box(), (Comparison(f, ">", Lit(rat(0))),))
    v = check_sat(p, FAST)
    assert isinstance(v, Unknown)


def test_verdict_and_model_are_deterministic():
    p = Problem.build(unit_box(), (Comparison(parabola(), ">", Lit(rat(24, 100))),))
    assert check_sat(p, FAST) == check_sat(p, FAST)


def test_sqrt_constraints_are_decided_exactly():
    # sqrt(x) <= 3/2 over x in [2, 2]: sqrt(2) = 1.414... <= 1.5
    p = Problem.build({"x": Interval(rat(2), rat(2))},
                      (Comparison(Sqrt(X), "<=", Lit(rat(3, 2))),))
    v = check_sat(p, FAST)
    assert isinstance(v, Sat)
    p2 = Problem.build({"x": Interval(rat(2), rat(2))},
                       (Comparison(Sqrt(X), ">", Lit(rat(3, 2))),))
    assert check_sat(p2, FAST) == Unsat()


def test_division_pole_never_yields_model_on_it():
    # 1/x > 10^6 is satisfiable only in a sliver just right of zero
    p = Problem.build({"x": Interval(rat(0), rat(1))},
                      (Comparison(Div(Lit(rat(1)), X), ">", Lit(rat(10) ** 6)),))
    v = check_sat(p, FAST)
    assert isinstance(v, Sat)
    xv = v.model_map()["x"]
    assert xv != 0 and rat(1) / xv > rat(10) ** 6
    # with the pole interior to the box the engine may fail to decide,
    # but it must never claim Unsat (the sliver is still there)
    p2 = Problem.build({"x": Interval(rat(-1), rat(1))},
                       (Comparison(Div(Lit(rat(1)), X), ">", Lit(rat(10) ** 6)),))
    v2 = check_sat(p2, FAST)
    assert not isinstance(v2, Unsat)
    if isinstance(v2, Sat):
        xv = v2.model_map()["x"]
        assert xv != 0 and rat(1) / xv > rat(10) ** 6


# -- session threshold queries ----------------------------------------------


def test_session_threshold_queries_bracket_the_minimum():
    s = Session(Problem.build(unit_box(), ()), FAST)
    e = parabola()
    assert s.query_below(e, rat(-1, 100)) == Unsat()
    assert isinstance(s.query_below(e, rat(1, 100)), Sat)
    assert s.query_above(e, rat(26, 100)) == Unsat()
    assert isinstance(s.query_above(e, rat(24, 100)), Sat)


def test_session_caches_resolved_thresholds():
    s = Session(Problem.build(unit_box(), ()), FAST)
    e = parabola()
    s.query_above(e, rat(26, 100))
    runs = s.stats["solver_runs"]
    # a weaker threshold on the same side is answered from the tree
    assert s.query_above(e, rat(27, 100)) == Unsat()
    assert s.stats["solver_runs"] == runs


def test_certified_range_encloses_true_range():
    s = Session(Problem.build(unit_box(), ()), FAST)
    e = parabola()
    s.query_above(e, rat(26, 100))
    s.query_below(e, rat(-1, 100))
    lo, hi = s.certified_range(e)
    assert lo is not None and hi is not None
    assert lo <= rat(0) and hi >= rat(1, 4)


def test_with_assertions_scopes_nest_and_restore():
    s = Session(Problem.build(unit_box(), ()), FAST)
    e = parabola()
    assert isinstance(s.query_above(e, rat(24, 100)), Sat)
    with s.with_assertions((Comparison(X, ">=", Lit(rat(6, 10))),)):
        # on [0.6, 1] the parabola is decreasing: max = 0.6*0.4 = 0.24
        assert s.query_above(e, rat(24, 100)) == Unsat()
        assert isinstance(s.query_above(e, rat(23, 100)), Sat)
    assert isinstance(s.query_above(e, rat(24, 100)), Sat)


def test_scope_exit_restores_after_exception():
    s = Session(Problem.build(unit_box(), ()), FAST)
    with pytest.raises(RuntimeError):
        with s.with_assertions((Comparison(X, ">", Lit(rat(2))),)):
            raise RuntimeError("boom")
    assert isinstance(s.check(), Sat)


# -- never-wrong properties ---------------------------------------------------

small_rat = st.fractions(min_value=-4, max_value=4,
                         max_denominator=8).map(lambda f: rat(f.numerator, f.denominator))


@settings(max_examples=40, deadline=None)
@given(
    px=small_rat, py=small_rat,
    w=st.integers(min_value=1, max_value=5),
    c1=st.sampled_from(["<", "<=", ">", ">="]),
    use_product=st.booleans(),
)
def test_planted_point_is_never_refuted(px, py, w, c1, use_product):
    bounds = {"x": Interval(px - w, px + w), "y": Interval(py - w, py + w)}
    e = Mul(X, Y) if use_product else Add(X, Mul(Lit(rat(2)), Y))
    val = px * py if use_product else px + 2 * py
    # build an assertion that provably holds at the planted point
    if c1 in ("<", "<="):
        a = Comparison(e, c1, Lit(val + 1))
    else:
        a = Comparison(e, c1, Lit(val - 1))
    v = check_sat(Problem.build(bounds, (a,)), FAST)
    assert not isinstance(v, Unsat)
    if isinstance(v, Sat):
        assert verify_model((a,), bounds, v.model_map())


@settings(max_examples=40, deadline=None)
@given(
    lo=small_rat,
    w=st.integers(min_value=1, max_value=4),
    shift=st.integers(min_value=1, max_value=3),
)
def test_values_above_interval_bound_are_never_satisfiable(lo, w, shift):
    bounds = {"x": Interval(lo, lo + w)}
    e = Add(Mul(X, X), X)
    hi_x = Interval(lo, lo + w)
    ia_upper = (hi_x * hi_x + hi_x).hi  # sound upper bound of x^2 + x
    a = Comparison(e, ">", Lit(ia_upper + shift))
    v = check_sat(Problem.build(bounds, (a,)), FAST)
    assert not isinstance(v, Sat)


# -- SMT-LIB emission and the external backend --------------------------------


def test_smtlib_output_is_deterministic_and_exact():
    p = Problem.build(
        {"x": Interval(rat(1), rat(3)), "y": Interval(rat(-1, 2), rat(5))},
        (Comparison(Sqrt(Add(X, Y)), "<", Lit(rat(7, 10))),),
    )
    s1 = emit_smtlib(p)
    s2 = emit_smtlib(p)
    assert s1 == s2
    assert "(set-logic QF_NRA)" in s1
    assert "(declare-fun x () Real)" in s1
    assert "(declare-fun _sqrt0 () Real)" in s1
    assert "(assert (= (* _sqrt0 _sqrt0) (+ x y)))" in s1
    assert "(/ 7.0 10.0)" in s1
    assert "(- (/ 1.0 2.0))" in s1
    assert s1.rstrip().endswith("(get-model)")


def test_smtlib_declares_uninterpreted_calls():
    p = Problem.build({"x": Interval(rat(0), rat(1))},
                      (Comparison(Call("g", (X, X)), "<", Lit(rat(1))),))
    s = emit_smtlib(p)
    assert "(declare-fun g (Real Real) Real)" in s
    assert "(g x x)" in s


def test_parse_model_reads_define_fun_values():
    out = """sat
(model
  (define-fun x () Real (/ 1.0 2.0))
  (define-fun y () Real (- 3.0))
  (define-fun z () Real 0.25)
)"""
    m = parse_model(out)
    assert m["x"] == rat(1, 2)
    assert m["y"] == rat(-3)
    assert m["z"] == rat(1, 4)


def _script(tmp_path, body: str) -> str:
    path = tmp_path / "fake_solver.sh"
    path.write_text("#!/bin/sh\n" + body + "\n")
    os.chmod(path, os.stat(path).st_mode | stat.S_IEXEC)
    return str(path)


def test_missing_external_binary_raises_unavailable(tmp_path):
    cfg = BackendConfig(backend="external",
                        external_cmd=(str(tmp_path / "nope"),))
    p = Problem.build(unit_box(), ())
    with pytest.raises(BackendUnavailable):
        check_external(p, cfg)


def test_check_sat_falls_back_to_builtin_when_external_missing():
    cfg = BackendConfig(timeout=0.25, backend="external",
                        external_cmd=("definitely-not-a-real-solver",))
    p = Problem.build(unit_box(), (Comparison(X, ">", Lit(rat(2))),))
    assert check_sat(p, cfg) == Unsat()


def test_external_sat_model_is_verified_before_acceptance(tmp_path):
    good = _script(tmp_path, 'echo sat; echo "((define-fun x () Real (/ 3.0 4.0)))"')
    cfg = BackendConfig(backend="external", external_cmd=(good,))
    p = Problem.build(unit_box(), (Comparison(X, ">", Lit(rat(1, 2))),))
    v = check_external(p, cfg)
    assert isinstance(v, Sat)
    assert v.model_map()["x"] == rat(3, 4)


def test_external_bogus_model_degrades_to_unknown(tmp_path):
    bad = _script(tmp_path, 'echo sat; echo "((define-fun x () Real (/ 1.0 4.0)))"')
    cfg = BackendConfig(backend="external", external_cmd=(bad,))
    p = Problem.build(unit_box(), (Comparison(X, ">", Lit(rat(1, 2))),))
    v = check_external(p, cfg)
    assert isinstance(v, Unknown)


def test_external_unsat_is_passed_through(tmp_path):
    s = _script(tmp_path, "echo unsat")
    cfg = BackendConfig(backend="external", external_cmd=(s,))
    p = Problem.build(unit_box(), (Comparison(X, ">", Lit(rat(2))),))
    assert check_external(p, cfg) == Unsat()


def test_external_garbage_degrades_to_unknown(tmp_path):
    s = _script(tmp_path, "echo flurble")
    cfg = BackendConfig(backend="external", external_cmd=(s,))
    p = Problem.build(unit_box(), ())
    assert isinstance(check_external(p, cfg), Unknown)
