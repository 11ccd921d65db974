"""Finite-precision code emission and machine-readable analysis reports.

Code is rendered in a minimal C-like syntax using the chosen format's
numeric type.  Every function carries a structured comment block with its
verification outcome and the generated postcondition; code is emitted even
when verification failed, with the failure spelled out in the block.

The report is a single JSON document, one entry per function, with stable
key names and all numeric values rendered as outward-rounded decimal
strings (lower bounds down, upper bounds and error magnitudes up), so the
printed figures are sound and two runs over the same input produce
byte-identical bytes.  Wall-clock timing is opt-in; the default "timings"
section contains only deterministic work counters.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

from .engine import AnalysisConfig, AnalysisResult, ErrorAnalysis
from .frontend import clause_str, inline_calls
from .intervals import Interval, RangeFailure
from .precision import PrecisionSpec
from .ranges import InfeasibleRegion, interval_eval
from .rationals import format_outward, rat
from .syntax import (
    Add,
    Call,
    Div,
    FunctionDef,
    If,
    Let,
    Lit,
    Mul,
    Program,
    Sqrt,
    Sub,
    Variable,
    substitute,
)
from .vcgen import (
    DISPROVEN,
    PROVEN,
    FunctionOutcome,
    GeneratedSpec,
    PrecisionAttempt,
    Verdict,
)

TOOL = "verifloat"


# --------------------------------------------------------------------------
# C-like expression and function rendering


_PREC_ADD = 10
_PREC_MUL = 20
_PREC_UNARY = 30

_SQRT_NAME = {"float": "sqrtf", "double": "sqrt",
              "dd_real": "sqrt", "qd_real": "sqrt"}


def _literal_digits(prec: PrecisionSpec) -> int:
    # enough decimal digits that a correctly-rounding conversion recovers
    # the intended value at this format's precision: ceil(bits*log10(2)) + 1
    bits = max(int(prec.eps.denominator).bit_length() - 1, 53)
    return max(17, -(-bits * 30103 // 100000) + 1)


def c_literal(q, prec: PrecisionSpec) -> str:
    text = format_outward(rat(q), _literal_digits(prec), "nearest")
    if prec.c_type == "float":
        return text + "f"
    if prec.c_type in ("dd_real", "qd_real"):
        # string constructor: the extended-precision library must parse the
        # decimal with correct rounding at its own precision
        return '%s("%s")' % (prec.c_type, text)
    return text


def c_expr(e, prec: PrecisionSpec, parent: int = 0) -> str:
    if isinstance(e, Variable):
        return e.name.replace("$", "_")
    if isinstance(e, Lit):
        return c_literal(e.value, prec)
    if isinstance(e, (Add, Sub)):
        mine = _PREC_ADD
        text = "%s %s %s" % (c_expr(e.left, prec, mine),
                             "+" if isinstance(e, Add) else "-",
                             c_expr(e.right, prec, mine + 1))
    elif isinstance(e, (Mul, Div)):
        mine = _PREC_MUL
        text = "%s %s %s" % (c_expr(e.left, prec, mine),
                             "*" if isinstance(e, Mul) else "/",
                             c_expr(e.right, prec, mine + 1))
    elif isinstance(e, Sqrt):
        return "%s(%s)" % (_SQRT_NAME[prec.c_type], c_expr(e.arg, prec))
    elif isinstance(e, Call):
        return "%s(%s)" % (e.func.replace("$", "_"),
                           ", ".join(c_expr(a, prec) for a in e.args))
    elif isinstance(e, If):
        # conditional in expression position: C's ternary operator
        mine = 1
        text = "%s ? %s : %s" % (_c_cond(e.cond, prec),
                                 c_expr(e.then, prec, mine),
                                 c_expr(e.orelse, prec, mine))
    elif isinstance(e, Let):
        # no let-expressions in C: substitute the binding through
        return c_expr(substitute(e.body, {e.name: e.bound}), prec, parent)
    else:
        raise TypeError("cannot render %r" % (e,))
    if mine < parent:
        return "(" + text + ")"
    return text


def _c_cond(cond, prec: PrecisionSpec) -> str:
    return "%s %s %s" % (c_expr(cond.left, prec, _PREC_ADD),
                         cond.op, c_expr(cond.right, prec, _PREC_ADD))


def _c_statements(e, prec: PrecisionSpec, depth: int) -> list:
    pad = "  " * depth
    if isinstance(e, Let):
        lines = ["%s%s %s = %s;" % (pad, prec.c_type,
                                    e.name.replace("$", "_"),
                                    c_expr(e.bound, prec))]
        return lines + _c_statements(e.body, prec, depth)
    if isinstance(e, If):
        lines = ["%sif (%s) {" % (pad, _c_cond(e.cond, prec))]
        lines += _c_statements(e.then, prec, depth + 1)
        lines.append("%s} else {" % pad)
        lines += _c_statements(e.orelse, prec, depth + 1)
        lines.append("%s}" % pad)
        return lines
    return ["%sreturn %s;" % (pad, c_expr(e, prec))]


def function_source(fnc: FunctionDef, prec: PrecisionSpec) -> str:
    params = ", ".join("%s %s" % (prec.c_type, p) for p in fnc.params)
    lines = ["%s %s(%s) {" % (prec.c_type, fnc.name, params)]
    lines += _c_statements(fnc.body, prec, 1)
    lines.append("}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# emitted unit


@dataclass(frozen=True)
class EmittedFunction:
    name: str
    source: str                  # comment block + definition
    spec: GeneratedSpec | None   # machine-readable generated postcondition
    verdict: str
    issues: tuple


@dataclass(frozen=True)
class EmittedUnit:
    precision: PrecisionSpec
    functions: tuple
    proven: bool

    def render(self) -> str:
        parts = [_file_header(self.precision, self.proven)]
        parts += [f.source for f in self.functions]
        return "\n\n".join(parts) + "\n"

    def file_name(self, stem: str) -> str:
        return "%s.%s.c-like" % (stem, self.precision.name)


def _file_header(prec: PrecisionSpec, proven: bool) -> str:
    lines = ["/*",
             " * generated by %s for %s (%s)" % (TOOL, prec.name, prec.c_type),
             " * arithmetic contract: each operation rounds to nearest with"
             " relative error <= %s" % format_outward(prec.eps, 4, "up")]
    if prec.c_type in ("dd_real", "qd_real"):
        lines.append(" * %s is a compensated multi-double type; the backing"
                     " library must provide" % prec.c_type)
        lines.append(" * +, -, *, /, sqrt at this unit roundoff and a"
                     " correctly-rounding string constructor")
    if not proven:
        lines.append(" * WARNING: verification did NOT succeed;"
                     " see the failure notes per function")
    lines.append(" */")
    return "\n".join(lines)


def _comment_block(fnc: FunctionDef, outcome: FunctionOutcome | None,
                   prec: PrecisionSpec) -> str:
    lines = ["/*", " * %s @ %s" % (fnc.name, prec.name)]
    if outcome is None:
        lines.append(" * verification: not attempted")
    else:
        step = None
        for vc in outcome.vcs:
            if vc.kind == "postcondition" and vc.approximation is not None:
                step = vc.approximation.name
        verdict = outcome.verdict
        lines.append(" * verification: %s%s" %
                     (verdict, " (at %s)" % step if step else ""))
        for vc in outcome.vcs:
            if vc.status == DISPROVEN and vc.counterexample is not None:
                point = ", ".join("%s = %s" % (n, format_outward(v, 17))
                                  for n, v in vc.counterexample.point)
                lines.append(" * refuted by: %s" % point)
    if fnc.pre:
        lines.append(" * precondition: %s" %
                     " && ".join(clause_str(c) for c in fnc.pre))
    if fnc.post:
        lines.append(" * declared postcondition: %s" %
                     " && ".join(clause_str(c) for c in fnc.post))
    if outcome is not None:
        lines.append(" * computed postcondition: %s" % outcome.spec.render())
        r = outcome.result
        if r is not None and r.path_error:
            lines.append(" * of which control-flow divergence: %s" %
                         format_outward(r.path_error, 17, "up"))
        for issue in (r.issues if r is not None else []):
            lines.append(" * issue: %s" % issue)
    lines.append(" */")
    return "\n".join(lines)


def emit_code(program: Program | None, verdict: Verdict,
              prec: PrecisionSpec | None = None) -> EmittedUnit:
    """Render every function at the chosen (or best-attempted) precision."""
    program = program if program is not None else verdict.program
    attempt = _attempt_for(verdict, prec)
    prec = attempt.precision if prec is None else prec
    out = []
    for fnc in program.functions:
        try:
            outcome = attempt.outcome(fnc.name)
        except KeyError:
            outcome = None
        block = _comment_block(fnc, outcome, prec)
        source = block + "\n" + function_source(fnc, prec)
        issues = ()
        if outcome is not None and outcome.result is not None:
            issues = tuple(str(i) for i in outcome.result.issues)
        out.append(EmittedFunction(
            fnc.name, source,
            outcome.spec if outcome is not None else None,
            outcome.verdict if outcome is not None else "not attempted",
            issues))
    return EmittedUnit(prec, tuple(out), verdict.proven)


def _attempt_for(verdict: Verdict, prec: PrecisionSpec | None) -> PrecisionAttempt:
    if prec is not None:
        for a in verdict.attempts:
            if a.precision is prec or a.precision.name == prec.name:
                return a
    return verdict.final


# --------------------------------------------------------------------------
# JSON report


def _dec(q, direction: str) -> str:
    return format_outward(rat(q), 17, direction)


def _interval_json(iv) -> list | None:
    if iv is None:
        return None
    return [_dec(iv.lo, "down"), _dec(iv.hi, "up")]


def _issues_json(issues) -> list:
    return [{"kind": i.kind, "where": str(i.where), "detail": i.detail}
            for i in issues]


def _step_json(step) -> dict | None:
    if step is None:
        return None
    return {"calls": step.calls, "arithmetic": step.arithmetic,
            "paths": step.paths, "name": step.name}


def _cex_json(cex) -> dict | None:
    if cex is None:
        return None
    return {"point": {n: str(v) for n, v in cex.point},
            "clause": cex.clause, "valid": cex.valid}


def _result_json(r: AnalysisResult | None) -> dict:
    if r is None:
        return {"range": None, "total_range": None, "error": None,
                "path_error": None, "error_split": None, "issues": []}
    split = None
    if r.contributions:
        split = {tag: _dec(v, "up")
                 for tag, v in sorted(r.contributions.items())}
    return {
        "range": _interval_json(r.ideal),
        "total_range": _interval_json(r.total),
        "error": _dec(r.max_error, "up") if r.max_error is not None else None,
        "path_error": _dec(r.path_error, "up")
                      if r.path_error is not None else None,
        "error_split": split,
        "issues": _issues_json(r.issues),
    }


def _ia_json(fnc: FunctionDef, program: Program | None,
             config, prec: PrecisionSpec) -> dict:
    """Baseline columns: what interval arithmetic alone can certify."""
    out: dict = {"range": None, "error": None, "issues": []}
    if program is None:
        return out
    bounds = {}
    for p in fnc.params:
        rb = fnc.param_range(p)
        if rb is None:
            return out
        bounds[p] = Interval(rb.lo, rb.hi)
    try:
        iv = interval_eval(inline_calls(fnc.body, program), bounds)
        out["range"] = _interval_json(iv)
    except RangeFailure as f:
        out["issues"].append({"kind": "range-failure", "where": "",
                              "detail": str(f)})
    base = config.analysis if config is not None else AnalysisConfig()
    ia_cfg = AnalysisConfig(ranges=replace(base.ranges, tighten=False))
    try:
        r = ErrorAnalysis(fnc, program, ia_cfg).run(prec)
    except InfeasibleRegion:
        return out
    if r.max_error is not None:
        out["error"] = _dec(r.max_error, "up")
    out["issues"] += _issues_json(r.issues)
    return out


def _function_json(outcome: FunctionOutcome, prec: PrecisionSpec,
                   program, config, ia_columns: bool) -> dict:
    step = None
    for vc in outcome.vcs:
        if vc.kind == "postcondition":
            step = vc.approximation
    entry = {
        "name": outcome.function,
        "verdict": outcome.verdict,
        "precision": prec.name,
        "generated_spec": outcome.spec.render(),
        "approximation": _step_json(step),
    }
    entry.update(_result_json(outcome.result))
    if ia_columns and outcome.fnc is not None:
        entry["interval_only"] = _ia_json(outcome.fnc, program, config, prec)
    entry["vcs"] = [{
        "kind": vc.kind,
        "description": vc.description,
        "status": vc.status,
        "approximation": _step_json(vc.approximation),
        "counterexample": _cex_json(vc.counterexample),
    } for vc in outcome.vcs]
    return entry


def _config_json(config) -> dict:
    if config is None:
        return {}
    ranges = config.analysis.ranges
    backend = ranges.backend
    return {
        "precisions": [p.name for p in config.precisions],
        "paths": config.paths,
        "range_precision": str(ranges.precision),
        "max_iter": ranges.max_iter,
        "solver": backend.backend,
        "solver_command": backend.external_cmd,
        "timeout": backend.timeout,
    }


def report_data(verdict: Verdict, wall_seconds: float | None = None,
                ia_columns: bool = True) -> dict:
    """The report as a plain dict (the JSON document's object form)."""
    final = verdict.final
    doc = {
        "tool": TOOL,
        "proven": verdict.proven,
        "precision": verdict.precision.name if verdict.precision else None,
        "config": _config_json(verdict.config),
        "attempts": [{
            "precision": a.precision.name,
            "proven": a.proven,
            "disproven": a.disproven,
            "verdicts": {f.function: f.verdict for f in a.functions},
        } for a in verdict.attempts],
        "functions": [
            _function_json(f, final.precision, verdict.program,
                           verdict.config, ia_columns)
            for f in final.functions],
        "timings": dict(sorted(verdict.work.items())),
    }
    if wall_seconds is not None:
        doc["timings"]["wall_seconds"] = round(wall_seconds, 3)
    return doc


def emit_report(verdict: Verdict, wall_seconds: float | None = None,
                ia_columns: bool = True) -> str:
    """One JSON document for the whole run; byte-stable unless wall-clock
    timing is explicitly supplied."""
    return json.dumps(report_data(verdict, wall_seconds, ia_columns),
                      indent=2) + "\n"
