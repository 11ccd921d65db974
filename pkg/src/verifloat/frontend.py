"""Semantic checks, function ordering and spec defaulting.

The parser produces raw ASTs; this module rejects programs the analysis
cannot treat soundly (unbounded parameters, recursion, specification atoms
in the wrong place), orders functions so callees are analyzed before their
callers, fills in the default input roundoff for a given precision, and can
render an AST back to source text.
"""

from __future__ import annotations

from .intervals import Interval
from .precision import PrecisionSpec
from .rationals import decimal_exact_str, num, den
from .syntax import (
    AbsUncertainty,
    ActualRef,
    Add,
    BoolAnd,
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
    called_functions,
    free_vars,
    substitute,
)


class FrontendError(Exception):
    def __init__(self, message: str, function: str = ""):
        if function:
            message = "in %r: %s" % (function, message)
        super().__init__(message)


class CycleError(FrontendError):
    pass


def validate(program: Program) -> Program:
    names = {}
    for f in program.functions:
        if f.name in names:
            raise FrontendError("duplicate definition of %r" % f.name)
        names[f.name] = f
    for f in program.functions:
        _validate_function(f, names)
    return program


def _validate_function(f: FunctionDef, defs: dict):
    if len(set(f.params)) != len(f.params):
        raise FrontendError("duplicate parameter", f.name)
    if RESULT in f.params:
        raise FrontendError("'res' cannot be a parameter", f.name)
    params = set(f.params)

    for clause in f.pre:
        if isinstance(clause, RangeBound):
            if clause.var not in params:
                raise FrontendError("bounds for unknown variable %r" % clause.var, f.name)
        elif isinstance(clause, (AbsUncertainty, RelUncertainty)):
            if clause.var not in params:
                raise FrontendError("uncertainty on unknown variable %r" % clause.var,
                                    f.name)
        elif isinstance(clause, ErrorRefUncertainty):
            raise FrontendError("'!' initial-error references belong in "
                                "postconditions", f.name)
        elif isinstance(clause, PredClause):
            for v in _pred_vars(clause.cond):
                if v not in params:
                    raise FrontendError("precondition uses unknown variable %r" % v,
                                        f.name)
            if _pred_has_spec_atoms(clause.cond):
                raise FrontendError("'~'/'!' references belong in postconditions",
                                    f.name)
    for p in f.params:
        rb = f.param_range(p)
        if rb is None:
            raise FrontendError(
                "parameter %r has no finite range in require(...)" % p, f.name)

    _validate_body(f, f.body, params, defs)

    post_vars = params | {RESULT}
    for clause in f.post:
        if isinstance(clause, (AbsUncertainty, RelUncertainty, ErrorRefUncertainty)):
            if clause.var != RESULT and clause.var not in params:
                raise FrontendError("postcondition uncertainty on unknown %r"
                                    % clause.var, f.name)
            if isinstance(clause, ErrorRefUncertainty) and clause.ref not in params:
                raise FrontendError("'!%s' does not name a parameter" % clause.ref,
                                    f.name)
        elif isinstance(clause, (PredClause, RangeBound)):
            vars_used = (_pred_vars(clause.cond) if isinstance(clause, PredClause)
                         else {clause.var})
            for v in vars_used:
                if v not in post_vars:
                    raise FrontendError("postcondition uses unknown variable %r" % v,
                                        f.name)


def _validate_body(f: FunctionDef, body, params: set, defs: dict):
    fv = free_vars(body)
    for v in fv - params:
        raise FrontendError("unbound variable %r in body" % v, f.name)
    for callee in called_functions(body):
        if callee == f.name:
            raise CycleError("function %r calls itself" % f.name, f.name)
        target = defs.get(callee)
        if target is None:
            raise FrontendError("call to undefined function %r" % callee, f.name)
    _reject_spec_atoms(f, body)


def _reject_spec_atoms(f: FunctionDef, e):
    if isinstance(e, (ActualRef, ErrorRef)):
        raise FrontendError("'~'/'!' cannot appear in a function body", f.name)
    from .syntax import children

    for c in children(e):
        _reject_spec_atoms(f, c)


def _pred_vars(cond) -> set:
    out: set = set()
    for cmp in _comparisons(cond):
        out |= {v for v in free_vars(cmp.left) | free_vars(cmp.right)}
    return out


def _pred_has_spec_atoms(cond) -> bool:
    def scan(e):
        if isinstance(e, (ActualRef, ErrorRef)):
            return True
        from .syntax import children

        return any(scan(c) for c in children(e))

    return any(scan(cmp.left) or scan(cmp.right) for cmp in _comparisons(cond))


def _comparisons(cond):
    from .syntax import bool_comparisons

    return bool_comparisons(cond)


def order_functions(program: Program) -> Program:
    """Topological order, callees first; source order breaks ties."""
    defs = {f.name: f for f in program.functions}
    deps = {f.name: {c for c in called_functions(f.body) if c in defs}
            for f in program.functions}
    placed: list = []
    done: set = set()
    remaining = list(program.functions)
    while remaining:
        progressed = False
        for f in list(remaining):
            if deps[f.name] <= done:
                placed.append(f)
                done.add(f.name)
                remaining.remove(f)
                progressed = True
        if not progressed:
            cycle = ", ".join(sorted(f.name for f in remaining))
            raise CycleError("recursive call cycle among: %s" % cycle)
    return Program(placed)


def inline_calls(e, program: Program):
    """Replace every call by the callee's body with arguments substituted.

    The compiled implementation executes the callee's operations in place,
    so value and deviation analysis must see them.  Local `let` names of the
    callee are renamed (with a character identifiers cannot contain) so that
    repeated or nested inlining never captures a caller variable; the
    renaming counter is local to one call of this function, which keeps the
    result deterministic for a given expression.
    """
    counter = [0]

    def freshen(body, mapping):
        if isinstance(body, Variable):
            new = mapping.get(body.name)
            return Variable(new) if new else body
        if isinstance(body, Let):
            counter[0] += 1
            fresh = "%s$%d" % (body.name, counter[0])
            inner = dict(mapping)
            inner[body.name] = fresh
            return Let(fresh, freshen(body.bound, mapping),
                       freshen(body.body, inner))
        if isinstance(body, (Add, Sub, Mul, Div)):
            return type(body)(freshen(body.left, mapping),
                              freshen(body.right, mapping))
        if isinstance(body, Sqrt):
            return Sqrt(freshen(body.arg, mapping))
        if isinstance(body, If):
            c = Comparison(freshen(body.cond.left, mapping), body.cond.op,
                           freshen(body.cond.right, mapping))
            return If(c, freshen(body.then, mapping),
                      freshen(body.orelse, mapping))
        if isinstance(body, Call):
            return Call(body.func, tuple(freshen(a, mapping)
                                         for a in body.args))
        return body

    def go(x, depth):
        if depth > 64:
            raise FrontendError("call nesting too deep to inline")
        if isinstance(x, Call):
            callee = program.function(x.func)
            args = [go(a, depth) for a in x.args]
            body = go(callee.body, depth + 1)
            body = freshen(body, {})
            return substitute(body, dict(zip(callee.params, args)))
        if isinstance(x, (Add, Sub, Mul, Div)):
            return type(x)(go(x.left, depth), go(x.right, depth))
        if isinstance(x, Sqrt):
            return Sqrt(go(x.arg, depth))
        if isinstance(x, Let):
            return Let(x.name, go(x.bound, depth), go(x.body, depth))
        if isinstance(x, If):
            c = Comparison(go(x.cond.left, depth), x.cond.op,
                           go(x.cond.right, depth))
            return If(c, go(x.then, depth), go(x.orelse, depth))
        return x

    return go(e, 0)


def param_interval(f: FunctionDef, var: str) -> Interval:
    rb = f.param_range(var)
    if rb is None:
        raise FrontendError("no range for %r" % var, f.name)
    return Interval(rb.lo, rb.hi)


def initial_uncertainty(f: FunctionDef, var: str, prec: PrecisionSpec):
    """Declared input deviation bound, or the default representation
    roundoff eps * max|range| when the spec is silent."""
    clause = f.uncertainty(var)
    iv = param_interval(f, var)
    if clause is None:
        return prec.eps * iv.max_abs()
    if isinstance(clause, AbsUncertainty):
        return clause.magnitude
    if isinstance(clause, RelUncertainty):
        return abs(clause.factor) * iv.max_abs()
    raise FrontendError("initial-error reference cannot bound an input", f.name)


def add_default_roundoff(f: FunctionDef, prec: PrecisionSpec) -> FunctionDef:
    """Materialize the default input noise as explicit clauses."""
    pre = list(f.pre)
    for p in f.params:
        if f.uncertainty(p) is None:
            pre.append(AbsUncertainty(p, prec.eps * param_interval(f, p).max_abs()))
    return FunctionDef(f.name, f.params, pre, f.body, list(f.post), f.line)


# --------------------------------------------------------------------------
# rendering back to source


def lit_str(value) -> str:
    text = decimal_exact_str(value)
    if text is not None:
        return text
    return "(%d / %d)" % (num(value), den(value))


_LEVEL = {"add": 1, "mul": 2, "unary": 3}


def expr_str(e, level: int = 0) -> str:
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, ActualRef):
        return "~" + e.name
    if isinstance(e, ErrorRef):
        return "!" + e.name
    if isinstance(e, Lit):
        if e.value < 0:
            text = "-" + lit_str(-e.value)
            return "(%s)" % text if level >= _LEVEL["unary"] else text
        return lit_str(e.value)
    if isinstance(e, Sub) and isinstance(e.left, Lit) and e.left.value == 0:
        inner = "-" + expr_str(e.right, _LEVEL["unary"])
        return "(%s)" % inner if level >= _LEVEL["unary"] else inner
    if isinstance(e, (Add, Sub)):
        op = " + " if isinstance(e, Add) else " - "
        text = expr_str(e.left, _LEVEL["add"]) + op + expr_str(e.right, _LEVEL["add"] + 1)
        return "(%s)" % text if level > _LEVEL["add"] else text
    if isinstance(e, (Mul, Div)):
        op = " * " if isinstance(e, Mul) else " / "
        text = expr_str(e.left, _LEVEL["mul"]) + op + expr_str(e.right, _LEVEL["mul"] + 1)
        return "(%s)" % text if level > _LEVEL["mul"] else text
    if isinstance(e, Sqrt):
        return "sqrt(%s)" % expr_str(e.arg)
    if isinstance(e, Call):
        return "%s(%s)" % (e.func, ", ".join(expr_str(a) for a in e.args))
    if isinstance(e, If):
        return "if (%s) {\n    %s\n  } else {\n    %s\n  }" % (
            comparison_str(e.cond), expr_str(e.then), expr_str(e.orelse))
    if isinstance(e, Let):
        return "val %s = %s;\n  %s" % (e.name, expr_str(e.bound), expr_str(e.body))
    raise TypeError("cannot render %r" % (e,))


def comparison_str(c: Comparison) -> str:
    return "%s %s %s" % (expr_str(c.left, 1), c.op, expr_str(c.right, 1))


def bool_str(cond, level: int = 0) -> str:
    if isinstance(cond, Comparison):
        return comparison_str(cond)
    if isinstance(cond, BoolAnd):
        text = bool_str(cond.left, 1) + " && " + bool_str(cond.right, 1)
        return "(%s)" % text if level > 1 else text
    if isinstance(cond, BoolOr):
        text = bool_str(cond.left, 0) + " || " + bool_str(cond.right, 0)
        return "(%s)" % text if level > 0 else text
    raise TypeError("no source syntax for %r" % (cond,))


def clause_str(clause) -> str:
    if isinstance(clause, RangeBound):
        lo_op = "<" if clause.strict_lo else "<="
        hi_op = "<" if clause.strict_hi else "<="
        return "%s %s %s && %s %s %s" % (
            lit_str(clause.lo), lo_op, clause.var,
            clause.var, hi_op, lit_str(clause.hi))
    if isinstance(clause, AbsUncertainty):
        return "%s +/- %s" % (clause.var, lit_str(clause.magnitude))
    if isinstance(clause, RelUncertainty):
        return "%s +/- %s * %s" % (clause.var, lit_str(clause.factor), clause.var)
    if isinstance(clause, ErrorRefUncertainty):
        if clause.coeff == 1:
            return "%s +/- !%s" % (clause.var, clause.ref)
        return "%s +/- %s * !%s" % (clause.var, lit_str(clause.coeff), clause.ref)
    if isinstance(clause, PredClause):
        return bool_str(clause.cond, 1)  # parenthesize a top-level '||'
    raise TypeError("cannot render clause %r" % (clause,))


def function_str(f: FunctionDef) -> str:
    params = ", ".join("%s: Real" % p for p in f.params)
    pre = " && ".join(clause_str(c) for c in f.pre)
    text = "def %s(%s): Real = {\n  require(%s)\n  %s\n}" % (
        f.name, params, pre, expr_str(f.body))
    if f.post:
        post = " && ".join(clause_str(c) for c in f.post)
        text += " ensuring(res => %s)" % post
    return text


def pretty(program: Program) -> str:
    return "\n\n".join(function_str(f) for f in program.functions) + "\n"
