"""Recursive-descent parser for `.real` source files.

The surface syntax is a small functional language:

    def name(x: Real, y: Real): Real = {
      require(1.0 < x && x < 9.0 && y.in(0.0, 2.0) && x +/- 1e-6)
      val t = x * y
      if (t < 1.0) t else sqrt(t)
    } ensuring(res => res <= 20.0 && res +/- 1e-11)

Decimal literals are kept as exact rationals; nothing is rounded at parse
time.  `x.in(a, b)` is sugar for the pair of strict bounds a < x && x < b.
Predicates may use `~x` (actual value) and `!x` (initial error) in
postconditions.  `//` starts a line comment.
"""

from __future__ import annotations

from .rationals import Rat, from_decimal, rat
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
    Sqrt,
    Sub,
    Variable,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("%d:%d: %s" % (line, col, message))
        self.line = line
        self.col = col


KEYWORDS = {"def", "val", "if", "else", "require", "ensuring", "sqrt", "Real"}

_SYMBOLS = ("+/-", "&&", "||", "==", "!=", "<=", ">=", "=>",
            "(", ")", "{", "}", ",", ":", ";", ".",
            "+", "-", "*", "/", "<", ">", "=", "~", "!")


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind  # "num" | "id" | "sym" | "eof"
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return "Token(%s, %r)" % (self.kind, self.text)


def tokenize(src: str):
    tokens = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            elif j < n and src[j] == "." and not (j + 1 < n and (src[j + 1].isalpha() or src[j + 1] == "_")):
                # "7." style literal, but not "7.in(...)"
                j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    while k < n and src[k].isdigit():
                        k += 1
                    j = k
            tokens.append(Token("num", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            tokens.append(Token("id", src[i:j], line, col))
            col += j - i
            i = j
            continue
        for sym in _SYMBOLS:
            if src.startswith(sym, i):
                tokens.append(Token("sym", sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise ParseError("unexpected character %r" % c, line, col)
    tokens.append(Token("eof", "", line, col))
    return tokens


class Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.pos = 0

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("sym", "id")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.accept(text):
            raise ParseError("expected %r, found %r" % (text, t.text or "end of input"),
                             t.line, t.col)
        return t

    def expect_ident(self) -> str:
        t = self.peek()
        if t.kind != "id" or t.text in KEYWORDS:
            raise ParseError("expected identifier, found %r" % (t.text or "end of input"),
                             t.line, t.col)
        self.pos += 1
        return t.text

    def fail(self, message: str):
        t = self.peek()
        raise ParseError(message, t.line, t.col)

    # -- program structure ---------------------------------------------------

    def parse_program(self) -> Program:
        functions = []
        while not self.peek().kind == "eof":
            functions.append(self.parse_function())
        if not functions:
            self.fail("empty program: expected at least one 'def'")
        return Program(functions)

    def parse_function(self) -> FunctionDef:
        start = self.peek()
        self.expect("def")
        name = self.expect_ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                p = self.expect_ident()
                self.expect(":")
                self.expect("Real")
                params.append(p)
                if not self.accept(","):
                    break
        self.expect(")")
        self.expect(":")
        self.expect("Real")
        self.expect("=")
        self.expect("{")
        self.expect("require")
        self.expect("(")
        pre = self.parse_pred(post=False)
        self.expect(")")
        self.accept(";")
        body = self.parse_body()
        self.expect("}")
        post = []
        if self.accept("ensuring"):
            self.expect("(")
            self.expect("res")
            self.expect("=>")
            post = self.parse_pred(post=True)
            self.expect(")")
        return FunctionDef(name, tuple(params), pre, body, post, line=start.line)

    def parse_body(self):
        if self.accept("val"):
            t = self.peek()
            name = self.expect_ident()
            if name == "res":
                raise ParseError("'res' is reserved for the result", t.line, t.col)
            self.expect("=")
            bound = self.parse_expr()
            self.accept(";")
            body = self.parse_body()
            return Let(name, bound, body)
        return self.parse_expr()

    # -- predicates ----------------------------------------------------------

    def parse_pred(self, post: bool):
        """Returns the clause list: bounds, uncertainties and residual
        boolean constraints, in source order."""
        clauses = []
        tree = self.parse_bool_or(post, clauses)
        for conjunct in _split_conjuncts(tree):
            clauses.append(PredClause(conjunct))
        if not post:
            clauses = _fold_bounds(clauses, self)
        return clauses

    def parse_bool_or(self, post, clauses):
        mark = len(clauses)
        left = self.parse_bool_and(post, clauses)
        while self.at("||"):
            t = self.peek()
            self.expect("||")
            right = self.parse_bool_and(post, clauses)
            # range/uncertainty clauses are unconditional facts; letting them
            # float out of one disjunct would strengthen the precondition
            if left is None or right is None or len(clauses) != mark:
                raise ParseError("uncertainty/range clauses cannot appear under '||'",
                                 t.line, t.col)
            left = BoolOr(left, right)
        return left

    def parse_bool_and(self, post, clauses):
        left = self.parse_bool_unit(post, clauses)
        while self.at("&&"):
            self.expect("&&")
            right = self.parse_bool_unit(post, clauses)
            if left is None:
                left = right
            elif right is not None:
                left = BoolAnd(left, right)
        return left

    def parse_bool_unit(self, post, clauses):
        """One predicate atom.  Clause-shaped atoms (x.in, x +/- u) are pushed
        onto `clauses` and yield None; plain comparisons are returned."""
        if self.at("("):
            save = self.pos
            trial: list = []
            self.expect("(")
            try:
                inner = self.parse_bool_or(post, trial)
                self.expect(")")
                clauses.extend(trial)
                return inner
            except ParseError:
                self.pos = save  # arithmetic parenthesis: re-parse as expression
        t = self.peek()
        left = self.parse_expr(spec=True)
        if self.at(".") and self.peek(1).text == "in":
            self.expect(".")
            self.expect("in")
            self.expect("(")
            lo = self.parse_const()
            self.expect(",")
            hi = self.parse_const()
            self.expect(")")
            if not isinstance(left, Variable):
                raise ParseError(".in(..) bounds apply to a variable", t.line, t.col)
            if not lo < hi:
                raise ParseError("empty range in %s.in(..)" % left.name, t.line, t.col)
            clauses.append(RangeBound(left.name, lo, hi,
                                      strict_lo=False, strict_hi=False))
            return None
        if self.at("+/-"):
            self.expect("+/-")
            clauses.append(self.parse_uncertainty(left, t))
            return None
        for op in ("<=", ">=", "<", ">"):
            if self.accept(op):
                right = self.parse_expr(spec=True)
                return Comparison(left, op, right)
        if self.at("==") or self.at("!="):
            raise ParseError("equality constraints over reals are not supported",
                             t.line, t.col)
        self.fail("expected a comparison, '.in(..)' or '+/-' clause")

    def parse_uncertainty(self, target, t: Token):
        if not isinstance(target, Variable):
            raise ParseError("uncertainty '+/-' applies to a variable or res",
                             t.line, t.col)
        var = target.name
        u = self.parse_expr(spec=True)
        amount = _classify_uncertainty(u, var)
        if amount is None:
            raise ParseError(
                "uncertainty must be a constant, m * %s, or m * !var" % var,
                t.line, t.col)
        kind, value, ref = amount
        if kind == "abs":
            if value < 0:
                raise ParseError("negative uncertainty", t.line, t.col)
            return AbsUncertainty(var, value)
        if kind == "rel":
            return RelUncertainty(var, value)
        return ErrorRefUncertainty(var, value, ref)

    def parse_const(self) -> Rat:
        e = self.parse_expr()
        v = const_value(e)
        if v is None:
            self.fail("expected a constant")
        return v

    # -- expressions -----------------------------------------------------------

    def parse_expr(self, spec: bool = False):
        left = self.parse_term(spec)
        while True:
            if self.accept("+"):
                left = Add(left, self.parse_term(spec))
            elif self.accept("-"):
                left = Sub(left, self.parse_term(spec))
            else:
                return left

    def parse_term(self, spec: bool):
        left = self.parse_unary(spec)
        while True:
            if self.accept("*"):
                left = Mul(left, self.parse_unary(spec))
            elif self.accept("/"):
                left = Div(left, self.parse_unary(spec))
            else:
                return left

    def parse_unary(self, spec: bool):
        if self.accept("-"):
            inner = self.parse_unary(spec)
            if isinstance(inner, Lit):
                return Lit(-inner.value)
            return Sub(Lit(rat(0)), inner)
        return self.parse_atom(spec)

    def parse_atom(self, spec: bool):
        t = self.peek()
        if t.kind == "num":
            self.pos += 1
            try:
                return Lit(from_decimal(t.text))
            except ValueError as exc:
                raise ParseError(str(exc), t.line, t.col)
        if self.accept("("):
            e = self.parse_expr(spec)
            self.expect(")")
            return e
        if self.accept("~"):
            if not spec:
                raise ParseError("'~' is only allowed in specifications", t.line, t.col)
            return ActualRef(self.expect_ident_or_res())
        if self.accept("!"):
            if not spec:
                raise ParseError("'!' is only allowed in specifications", t.line, t.col)
            return ErrorRef(self.expect_ident())
        if self.accept("sqrt"):
            self.expect("(")
            e = self.parse_expr(spec)
            self.expect(")")
            return Sqrt(e)
        if self.at("if"):
            return self.parse_if(spec)
        if t.kind == "id" and t.text not in KEYWORDS:
            self.pos += 1
            if self.at("("):
                self.expect("(")
                args = [self.parse_expr(spec)]
                while self.accept(","):
                    args.append(self.parse_expr(spec))
                self.expect(")")
                return Call(t.text, tuple(args))
            return Variable(t.text)
        self.fail("expected an expression, found %r" % (t.text or "end of input"))

    def expect_ident_or_res(self) -> str:
        t = self.peek()
        if t.kind == "id" and (t.text == "res" or t.text not in KEYWORDS):
            self.pos += 1
            return t.text
        raise ParseError("expected identifier", t.line, t.col)

    def parse_if(self, spec: bool):
        t = self.expect("if")
        self.expect("(")
        cond = self.parse_comparison(spec)
        self.expect(")")
        then = self.parse_branch(spec)
        self.expect("else")
        orelse = self.parse_branch(spec)
        return If(cond, then, orelse)

    def parse_branch(self, spec: bool):
        if self.accept("{"):
            e = self.parse_body()
            self.expect("}")
            return e
        return self.parse_expr(spec)

    def parse_comparison(self, spec: bool) -> Comparison:
        t = self.peek()
        left = self.parse_expr(spec)
        for op in ("<=", ">=", "<", ">"):
            if self.accept(op):
                return Comparison(left, op, self.parse_expr(spec))
        if self.at("==") or self.at("!="):
            raise ParseError(
                "equality tests on computed reals are not meaningful under "
                "finite precision; use an interval check", t.line, t.col)
        self.fail("expected a comparison")


def _split_conjuncts(tree):
    if tree is None:
        return
    if isinstance(tree, BoolAnd):
        yield from _split_conjuncts(tree.left)
        yield from _split_conjuncts(tree.right)
    else:
        yield tree


def _classify_uncertainty(u, var: str):
    """Accepted shapes after '+/-': k | m * var | m * !x | !x."""
    v = const_value(u)
    if v is not None:
        return ("abs", v, None)
    if isinstance(u, ErrorRef):
        return ("err", rat(1), u.name)
    if isinstance(u, Mul):
        for a, b in ((u.left, u.right), (u.right, u.left)):
            m = const_value(a)
            if m is None:
                continue
            if isinstance(b, Variable) and b.name == var:
                return ("rel", m, None)
            if isinstance(b, ErrorRef):
                return ("err", m, b.name)
    return None


def const_value(e) -> Rat | None:
    """Fold an expression of literals to its exact value, else None."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Add):
        a, b = const_value(e.left), const_value(e.right)
        return None if a is None or b is None else a + b
    if isinstance(e, Sub):
        a, b = const_value(e.left), const_value(e.right)
        return None if a is None or b is None else a - b
    if isinstance(e, Mul):
        a, b = const_value(e.left), const_value(e.right)
        return None if a is None or b is None else a * b
    if isinstance(e, Div):
        a, b = const_value(e.left), const_value(e.right)
        if a is None or b is None or b == 0:
            return None
        return a / b
    return None


def _fold_bounds(clauses, parser: Parser):
    """Collapse variable-vs-constant comparisons in a precondition into
    RangeBound clauses (tightest bound wins); everything else is kept."""
    bounds: dict[str, list] = {}
    out = []
    order: list[str] = []

    def note(var, lo=None, hi=None, strict=False):
        entry = bounds.setdefault(var, [None, True, None, True])
        if var not in order:
            order.append(var)
        if lo is not None:
            if entry[0] is None or lo > entry[0] or (lo == entry[0] and strict):
                entry[0], entry[1] = lo, strict
        if hi is not None:
            if entry[2] is None or hi < entry[2] or (hi == entry[2] and strict):
                entry[2], entry[3] = hi, strict

    for clause in clauses:
        if isinstance(clause, RangeBound):
            note(clause.var, lo=clause.lo, strict=clause.strict_lo)
            note(clause.var, hi=clause.hi, strict=clause.strict_hi)
            continue
        if isinstance(clause, PredClause) and isinstance(clause.cond, Comparison):
            cmp = clause.cond
            folded = False
            if isinstance(cmp.left, Variable):
                c = const_value(cmp.right)
                if c is not None:
                    if cmp.op in ("<", "<="):
                        note(cmp.left.name, hi=c, strict=cmp.op == "<")
                    else:
                        note(cmp.left.name, lo=c, strict=cmp.op == ">")
                    folded = True
            elif isinstance(cmp.right, Variable):
                c = const_value(cmp.left)
                if c is not None:
                    if cmp.op in ("<", "<="):
                        note(cmp.right.name, lo=c, strict=cmp.op == "<")
                    else:
                        note(cmp.right.name, hi=c, strict=cmp.op == ">")
                    folded = True
            if folded:
                continue
        out.append(clause)

    folded_clauses = []
    for var in order:
        lo, slo, hi, shi = bounds[var]
        if lo is not None and hi is not None:
            if not lo < hi:
                parser.fail("empty range for %r: [%s, %s]" % (var, lo, hi))
            folded_clauses.append(RangeBound(var, lo, hi, slo, shi))
        elif lo is not None:
            folded_clauses.append(PredClause(
                Comparison(Lit(lo), "<" if slo else "<=", Variable(var))))
        else:
            folded_clauses.append(PredClause(
                Comparison(Variable(var), "<" if shi else "<=", Lit(hi))))
    return folded_clauses + out


def parse(source: str) -> Program:
    return Parser(source).parse_program()


def parse_file(path) -> Program:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())
