"""Divergence bounds for conditionals decided in finite precision.

A guard compares two computed values, so close to the decision boundary the
implementation may take the opposite branch from the ideal real-valued
program.  Such a run stays sound to report as long as we bound how far the
two branch functions can drift apart over the sliver of inputs whose guard
value lies within the guard's own evaluation error, plus the roundoff of
the branch actually executed.  Away from that sliver both programs agree on
the branch and the ordinary per-branch deviation applies.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .poly import equal_real_functions
from .ranges import InfeasibleRegion, RangeConfig, RangeEngine
from .rationals import Rat, ZERO, rat
from .solver import Unsat
from .syntax import Comparison, Lit, Sub


@dataclass(frozen=True)
class PathBound:
    """Sound bound on |ideal - actual| for runs that switch branches."""

    error: Rat        # divergence bound (zero when the band is unreachable)
    feasible: bool    # could any input actually sit on the boundary band?
    guard_error: Rat  # finite-precision slack around the boundary
    separation: Rat   # max |then - else| over the band


def band_condition(diff, width) -> tuple:
    """|diff| <= width, as two ordinary comparisons."""
    w = rat(width)
    return (Comparison(Lit(-w), "<=", diff), Comparison(diff, "<=", Lit(w)))


def path_config(base: RangeConfig) -> RangeConfig:
    """Range queries restricted to a boundary band must resolve sets far
    thinner than ordinary input boxes, so sharpen the search accordingly."""
    prec = min(rat(base.precision), rat(1, 10 ** 12))
    return replace(base, precision=prec, max_iter=2 * base.max_iter)


def divergence_bound(diff, then_closed, else_closed, bounds, assertions,
                     guard_error, branch_errors,
                     config: RangeConfig | None = None) -> PathBound:
    """Bound the deviation of runs whose branch choice flips.

    ``diff`` is the guard reduced to "diff < 0 takes the then branch",
    closed over the function parameters, as are both branch expressions.
    ``guard_error`` bounds how far the computed guard value can sit from the
    ideal one.  ``branch_errors`` is a callback mapping extra assertions
    (the boundary band) to a pair of finite-precision error bounds for the
    two branches evaluated over that restricted region.

    A run that flips takes, say, the else code on a then input x, so its
    result differs from the ideal one by at most
    |then(x) - else(x)| + |else(x) - computed_else(x)|, and symmetrically
    for the other direction.  Both share the separation term.
    """
    guard_error = rat(guard_error)
    band = band_condition(diff, guard_error)
    cfg = path_config(config or RangeConfig())
    engine = RangeEngine(bounds, tuple(assertions) + band, cfg)
    if isinstance(engine.feasible_verdict(), Unsat):
        return PathBound(ZERO, False, guard_error, ZERO)
    if equal_real_functions(then_closed, else_closed):
        separation = ZERO
    else:
        try:
            gap = engine.get_range(Sub(then_closed, else_closed))
        except InfeasibleRegion:
            return PathBound(ZERO, False, guard_error, ZERO)
        separation = gap.max_abs()
    err_then, err_else = branch_errors(band)
    worst = err_then if err_then >= err_else else err_else
    return PathBound(separation + worst, True, guard_error, separation)
