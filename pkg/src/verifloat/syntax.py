"""AST for the Real-typed source language.

Programs are written against ideal real semantics.  A function declares its
parameters' ranges (and optionally input uncertainties) in `require(...)`,
computes a pure expression over +, -, *, /, sqrt, local `val` bindings,
comparisons-guarded conditionals and calls, and may state a postcondition
over `res` in `ensuring(res => ...)`.

Specification predicates may additionally mention `~x` (the actual
finite-precision value of x) and `!x` (the initial error bound on x); those
atoms never appear in function bodies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .rationals import Rat

# --------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Lit:
    value: Rat


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sqrt:
    arg: "Expr"


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Comparison:
    left: "Expr"
    op: str  # one of <, <=, >, >=
    right: "Expr"

    def normalized(self) -> tuple["Expr", bool]:
        """Rewrite as (e, strict) meaning e < 0 (strict) or e <= 0."""
        if self.op == "<":
            return Sub(self.left, self.right), True
        if self.op == "<=":
            return Sub(self.left, self.right), False
        if self.op == ">":
            return Sub(self.right, self.left), True
        if self.op == ">=":
            return Sub(self.right, self.left), False
        raise ValueError("bad comparison op %r" % self.op)

    def negated(self) -> "Comparison":
        flip = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}
        return Comparison(self.left, flip[self.op], self.right)


@dataclass(frozen=True)
class If:
    cond: Comparison
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class ActualRef:
    """`~x`: the finite-precision value of x (spec predicates only)."""
    name: str


@dataclass(frozen=True)
class ErrorRef:
    """`!x`: the declared initial error bound of x (spec predicates only)."""
    name: str


Expr = Union[Variable, Lit, Add, Sub, Mul, Div, Sqrt, Let, If, Call,
             ActualRef, ErrorRef]

# --------------------------------------------------------------------------
# specification clauses


@dataclass(frozen=True)
class RangeBound:
    """lo <(=) var <(=) hi, from `x.in(lo, hi)` or folded comparisons."""
    var: str
    lo: Rat
    hi: Rat
    strict_lo: bool = True
    strict_hi: bool = True


@dataclass(frozen=True)
class AbsUncertainty:
    """`x +/- k`: the stored/actual x deviates from the ideal by at most k."""
    var: str
    magnitude: Rat


@dataclass(frozen=True)
class RelUncertainty:
    """`x +/- m*x`: deviation bounded by m times the variable's magnitude."""
    var: str
    factor: Rat


@dataclass(frozen=True)
class ErrorRefUncertainty:
    """`x +/- m * !y`: deviation bounded by m times y's initial error."""
    var: str
    coeff: Rat
    ref: str


@dataclass(frozen=True)
class PredClause:
    """A general boolean constraint kept for the solver (e.g. a + b > c)."""
    cond: "BoolExpr"


@dataclass(frozen=True)
class BoolAnd:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class BoolOr:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class BoolNot:
    arg: "BoolExpr"


BoolExpr = Union[Comparison, BoolAnd, BoolOr, BoolNot]

SpecClause = Union[RangeBound, AbsUncertainty, RelUncertainty,
                   ErrorRefUncertainty, PredClause]

RESULT = "res"

# --------------------------------------------------------------------------
# functions and programs


@dataclass
class FunctionDef:
    name: str
    params: tuple[str, ...]
    pre: list
    body: Expr
    post: list = field(default_factory=list)
    line: int = field(default=0, compare=False)

    def param_range(self, var: str) -> Optional[RangeBound]:
        for clause in self.pre:
            if isinstance(clause, RangeBound) and clause.var == var:
                return clause
        return None

    def uncertainty(self, var: str):
        for clause in self.pre:
            if isinstance(clause, (AbsUncertainty, RelUncertainty,
                                   ErrorRefUncertainty)) and clause.var == var:
                return clause
        return None


@dataclass
class Program:
    functions: list

    def function(self, name: str) -> FunctionDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError("no function named %r" % name)

    def names(self) -> list:
        return [f.name for f in self.functions]


# --------------------------------------------------------------------------
# traversal helpers


def children(e: Expr):
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.left, e.right)
    if isinstance(e, Sqrt):
        return (e.arg,)
    if isinstance(e, Let):
        return (e.bound, e.body)
    if isinstance(e, If):
        return (e.cond.left, e.cond.right, e.then, e.orelse)
    if isinstance(e, Call):
        return e.args
    return ()


def free_vars(e: Expr, bound=frozenset()) -> set:
    if isinstance(e, Variable):
        return set() if e.name in bound else {e.name}
    if isinstance(e, (ActualRef, ErrorRef)):
        return set() if e.name in bound else {e.name}
    if isinstance(e, Let):
        out = free_vars(e.bound, bound)
        out |= free_vars(e.body, bound | {e.name})
        return out
    out: set = set()
    for c in children(e):
        out |= free_vars(c, bound)
    return out


def called_functions(e: Expr) -> set:
    out: set = set()
    if isinstance(e, Call):
        out.add(e.func)
    for c in children(e):
        out |= called_functions(c)
    return out


def contains_if(e: Expr) -> bool:
    if isinstance(e, If):
        return True
    return any(contains_if(c) for c in children(e))


def contains_call(e: Expr) -> bool:
    if isinstance(e, Call):
        return True
    return any(contains_call(c) for c in children(e))


def substitute(e: Expr, env: dict) -> Expr:
    """Capture-avoiding only in the sense we need: env names are fresh."""
    if isinstance(e, Variable):
        return env.get(e.name, e)
    if isinstance(e, Lit):
        return e
    if isinstance(e, Add):
        return Add(substitute(e.left, env), substitute(e.right, env))
    if isinstance(e, Sub):
        return Sub(substitute(e.left, env), substitute(e.right, env))
    if isinstance(e, Mul):
        return Mul(substitute(e.left, env), substitute(e.right, env))
    if isinstance(e, Div):
        return Div(substitute(e.left, env), substitute(e.right, env))
    if isinstance(e, Sqrt):
        return Sqrt(substitute(e.arg, env))
    if isinstance(e, Let):
        inner = {k: v for k, v in env.items() if k != e.name}
        return Let(e.name, substitute(e.bound, env), substitute(e.body, inner))
    if isinstance(e, If):
        c = Comparison(substitute(e.cond.left, env), e.cond.op,
                       substitute(e.cond.right, env))
        return If(c, substitute(e.then, env), substitute(e.orelse, env))
    if isinstance(e, Call):
        return Call(e.func, tuple(substitute(a, env) for a in e.args))
    return e


def bool_comparisons(b: BoolExpr):
    if isinstance(b, Comparison):
        yield b
    elif isinstance(b, (BoolAnd, BoolOr)):
        yield from bool_comparisons(b.left)
        yield from bool_comparisons(b.right)
    elif isinstance(b, BoolNot):
        yield from bool_comparisons(b.arg)
