"""Deterministic SMT-LIB 2 rendering of constraint problems (QF_NRA).

Square roots are not part of QF_NRA, so each distinct sqrt argument gets a
fresh auxiliary variable s with side constraints (= (* s s) arg), (>= s 0).
Let bindings are expanded textually before emission so the side constraints
only mention declared variables.  All rationals are emitted exactly.
"""

from __future__ import annotations

from ..rationals import den, num
from ..syntax import (
    Add,
    BoolAnd,
    BoolNot,
    BoolOr,
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
)
from .constraints import Abs, Problem, expr_key


def smt_rat(q) -> str:
    if q < 0:
        return "(- %s)" % smt_rat(-q)
    if den(q) == 1:
        return "%d.0" % num(q)
    return "(/ %d.0 %d.0)" % (num(q), den(q))


class _Emitter:
    def __init__(self):
        self.sqrt_names: dict = {}   # expr_key(arg) -> aux name
        self.side: list = []         # auxiliary assertions
        self.aux_decls: list = []
        self.funs: dict = {}         # name -> arity

    def expr(self, e, env) -> str:
        if isinstance(e, Variable):
            return env.get(e.name, e.name)
        if isinstance(e, Lit):
            return smt_rat(e.value)
        if isinstance(e, Add):
            return "(+ %s %s)" % (self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, Sub):
            return "(- %s %s)" % (self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, Mul):
            return "(* %s %s)" % (self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, Div):
            return "(/ %s %s)" % (self.expr(e.left, env), self.expr(e.right, env))
        if isinstance(e, Sqrt):
            rendered = self.expr(e.arg, env)
            key = expr_key(e.arg) + "|" + rendered
            name = self.sqrt_names.get(key)
            if name is None:
                name = "_sqrt%d" % len(self.sqrt_names)
                self.sqrt_names[key] = name
                self.aux_decls.append(name)
                self.side.append("(assert (= (* %s %s) %s))" % (name, name, rendered))
                self.side.append("(assert (>= %s 0.0))" % name)
            return name
        if isinstance(e, Abs):
            a = self.expr(e.arg, env)
            return "(ite (<= 0.0 %s) %s (- %s))" % (a, a, a)
        if isinstance(e, Let):
            inner = dict(env)
            inner[e.name] = self.expr(e.bound, env)
            return self.expr(e.body, inner)
        if isinstance(e, If):
            return "(ite %s %s %s)" % (self.cond(e.cond, env),
                                       self.expr(e.then, env),
                                       self.expr(e.orelse, env))
        if isinstance(e, Call):
            self.funs.setdefault(e.func, len(e.args))
            if not e.args:
                return e.func
            return "(%s %s)" % (e.func, " ".join(self.expr(a, env) for a in e.args))
        raise TypeError("cannot render %r" % (e,))

    def cond(self, c, env) -> str:
        if isinstance(c, Comparison):
            return "(%s %s %s)" % (c.op, self.expr(c.left, env), self.expr(c.right, env))
        if isinstance(c, BoolAnd):
            return "(and %s %s)" % (self.cond(c.left, env), self.cond(c.right, env))
        if isinstance(c, BoolOr):
            return "(or %s %s)" % (self.cond(c.left, env), self.cond(c.right, env))
        if isinstance(c, BoolNot):
            return "(not %s)" % self.cond(c.arg, env)
        raise TypeError("cannot render %r" % (c,))


def emit_smtlib(problem: Problem, logic: str = "QF_NRA") -> str:
    em = _Emitter()
    bound_lines = []
    for v, iv in problem.bounds:
        bound_lines.append("(assert (<= %s %s))" % (smt_rat(iv.lo), v))
        bound_lines.append("(assert (<= %s %s))" % (v, smt_rat(iv.hi)))
    assert_lines = ["(assert %s)" % em.cond(a, {}) for a in problem.assertions]

    lines = ["(set-logic %s)" % logic]
    for v, _ in problem.bounds:
        lines.append("(declare-fun %s () Real)" % v)
    for name in em.aux_decls:
        lines.append("(declare-fun %s () Real)" % name)
    for fname, arity in sorted(em.funs.items()):
        args = " ".join(["Real"] * arity)
        lines.append("(declare-fun %s (%s) Real)" % (fname, args))
    lines.extend(bound_lines)
    lines.extend(em.side)
    lines.extend(assert_lines)
    lines.append("(check-sat)")
    lines.append("(get-model)")
    return "\n".join(lines) + "\n"
