"""Built-in satisfiability backend: branch-and-bound over rational boxes.

Two cooperating searches live here.

`check` decides one-shot satisfiability of a conjunction over bounded
variables: boxes are contracted by the asserted comparisons (HC4-style
backward propagation through a hash-consed expression DAG), refuted by
exact rational interval evaluation — linear subexpressions additionally
get bounds with asserted linear constraints folded in — and box centers
are exactly verified as satisfying points.

`_RangeTree` answers families of threshold queries (expr < c, expr > c)
against a fixed assertion set.  It keeps a persistent partition of the
variable box into leaves, each with a certified enclosure of the tracked
expression over its feasible part; a query refines only the leaves that
block its threshold, so a binary search over thresholds costs about as
much as its finest step instead of restarting per step.

Sat is only reported with a model that re-verifies under exact rational
evaluation (square roots by adaptive enclosures; undecided comparisons
reject the candidate).  Unsat is only reported when the search region is
exhausted.  Budgets are counted in box expansions, so verdicts are
deterministic and independent of wall-clock time.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..affine import AffineForm, NoiseSource, affine_div, affine_mul, affine_sqrt
from ..intervals import Interval
from ..rationals import ONE, ZERO, rat, sqrt_enclosure
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
from .constraints import Abs, Problem, Sat, Unknown, Unsat, conjuncts, expr_key, nnf, problem_key


@dataclass(frozen=True)
class BackendConfig:
    timeout: float = 1.0          # seconds; mapped to a box budget
    backend: str = "builtin"      # "builtin" | "external"
    external_cmd: tuple = ()      # argv for the external SMT process
    boxes_per_second: int = 20000

    def budget(self) -> int:
        return max(16, int(self.timeout * self.boxes_per_second))


# --------------------------------------------------------------------------
# compiled expression DAG

(OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_SQRT, OP_ABS, OP_ITE,
 OP_OPAQUE) = range(10)


class _Prog:
    def __init__(self):
        self.ops: list = []
        self.args: list = []      # (a, b) child indices
        self.payload: list = []   # const value / var name / ite tuple
        self.linear: list = []    # (coeffs dict, const) or None
        self.occurs: list = []    # frozenset of var names
        self._memo: dict = {}

    def _push(self, op, a=-1, b=-1, payload=None, linear=None, occurs=frozenset()):
        key = (op, a, b, repr(payload) if op == OP_CONST else payload)
        got = self._memo.get(key)
        if got is not None:
            return got
        idx = len(self.ops)
        self.ops.append(op)
        self.args.append((a, b))
        self.payload.append(payload)
        self.linear.append(linear)
        self.occurs.append(occurs)
        self._memo[key] = idx
        return idx

    def add_expr(self, e, env=None) -> int:
        env = env or {}
        if isinstance(e, Variable):
            if e.name in env:
                return env[e.name]
            return self._push(OP_VAR, payload=e.name,
                              linear=({e.name: ONE}, ZERO),
                              occurs=frozenset((e.name,)))
        if isinstance(e, Lit):
            return self._push(OP_CONST, payload=e.value, linear=({}, e.value))
        if isinstance(e, (Add, Sub, Mul, Div)):
            a = self.add_expr(e.left, env)
            b = self.add_expr(e.right, env)
            op = {Add: OP_ADD, Sub: OP_SUB, Mul: OP_MUL, Div: OP_DIV}[type(e)]
            return self._push(op, a, b, linear=self._linear_of(op, a, b),
                              occurs=self.occurs[a] | self.occurs[b])
        if isinstance(e, Sqrt):
            a = self.add_expr(e.arg, env)
            return self._push(OP_SQRT, a, occurs=self.occurs[a])
        if isinstance(e, Abs):
            a = self.add_expr(e.arg, env)
            return self._push(OP_ABS, a, occurs=self.occurs[a])
        if isinstance(e, Let):
            inner = dict(env)
            inner[e.name] = self.add_expr(e.bound, env)
            return self.add_expr(e.body, inner)
        if isinstance(e, If):
            diff, strict = e.cond.normalized()
            g = self.add_expr(diff, env)
            t = self.add_expr(e.then, env)
            o = self.add_expr(e.orelse, env)
            occurs = self.occurs[g] | self.occurs[t] | self.occurs[o]
            return self._push(OP_ITE, payload=(g, strict, t, o), occurs=occurs)
        if isinstance(e, Call):
            # uninterpreted: evaluates to "no information"
            arg_ids = tuple(self.add_expr(a, env) for a in e.args)
            return self._push(OP_OPAQUE, payload=(e.func, arg_ids))
        raise TypeError("cannot compile %r" % (e,))

    def _linear_of(self, op, a, b):
        la, lb = self.linear[a], self.linear[b]
        if la is None or lb is None:
            return None
        ca, ka = la
        cb, kb = lb
        if op == OP_ADD:
            return (_merge(ca, cb, ONE), ka + kb)
        if op == OP_SUB:
            return (_merge(ca, cb, -ONE), ka - kb)
        if op == OP_MUL:
            if not ca:
                return ({v: c * ka for v, c in cb.items()}, kb * ka) if ka != 0 else ({}, ZERO)
            if not cb:
                return ({v: c * kb for v, c in ca.items()}, ka * kb) if kb != 0 else ({}, ZERO)
            return None
        if op == OP_DIV:
            if not cb and kb != 0:
                inv = ONE / kb
                return ({v: c * inv for v, c in ca.items()}, ka * inv)
            return None
        return None


def _merge(ca: dict, cb: dict, sign):
    out = dict(ca)
    for v, c in cb.items():
        s = out.get(v, ZERO) + c * sign
        if s == 0:
            out.pop(v, None)
        else:
            out[v] = s
    return out


# --------------------------------------------------------------------------
# forward interval evaluation with linear-constraint folding


def _linear_extreme(coeffs, const, box, folds, lower: bool):
    """Certified min (lower=True) or max of a linear function over the box
    intersected with {g >= 0}; each fold is tried alone, the best kept."""
    sgn = ONE if lower else -ONE
    c = {v: k * sgn for v, k in coeffs.items()}
    k0 = const * sgn

    def min_plain(cc, kk):
        total = kk
        for v, a in cc.items():
            iv = box.get(v)
            if iv is None:
                return None
            total += a * iv.lo if a > 0 else a * iv.hi
        return total

    best = min_plain(c, k0)
    if best is None:
        return None
    for gc, gk in folds:
        lams = []
        for v, a in c.items():
            g = gc.get(v)
            if g:
                lam = a / g
                if lam > 0:
                    lams.append(lam)
        for lam in lams:
            cc = {}
            for v in set(c) | set(gc):
                s = c.get(v, ZERO) - lam * gc.get(v, ZERO)
                if s != 0:
                    cc[v] = s
            val = min_plain(cc, k0 - lam * gk)
            if val is not None and val > best:
                best = val
    return best * sgn


class _BoxEval:
    """One forward pass over the DAG for a given box.

    Each node carries both a plain interval and (where the operations
    allow) an affine form over the box; the interval is intersected with
    the affine range, which keeps the excess quadratic in the box width
    near smooth extrema where plain interval arithmetic is only linear.
    """

    def __init__(self, prog: _Prog, folds):
        self.prog = prog
        self.folds = folds

    def run(self, box: dict) -> list:
        prog = self.prog
        noise = NoiseSource()
        vals: list = [None] * len(prog.ops)
        affs: list = [None] * len(prog.ops)
        for i, op in enumerate(prog.ops):
            af = None
            if op == OP_CONST:
                vals[i] = Interval.point(prog.payload[i])
                af = AffineForm.constant(prog.payload[i])
            elif op == OP_VAR:
                iv = box.get(prog.payload[i])
                vals[i] = iv
                if iv is not None:
                    af = AffineForm.from_interval(iv, noise)
            elif op == OP_OPAQUE:
                vals[i] = None
            elif op == OP_ITE:
                g, strict, t, o = prog.payload[i]
                gv = vals[g]
                if gv is not None and ((gv.hi < 0) if strict else (gv.hi <= 0)):
                    vals[i] = vals[t]
                    af = affs[t]
                elif gv is not None and ((gv.lo >= 0) if strict else (gv.lo > 0)):
                    vals[i] = vals[o]
                    af = affs[o]
                else:
                    tv, ov = vals[t], vals[o]
                    vals[i] = tv.hull(ov) if tv is not None and ov is not None else None
            else:
                a, b = prog.args[i]
                va = vals[a]
                if va is None:
                    vals[i] = None
                    continue
                fa = affs[a]
                if op == OP_SQRT:
                    if va.hi < 0:
                        vals[i] = None
                        continue
                    lo = va.lo if va.lo > 0 else ZERO
                    vals[i] = Interval(lo, va.hi).sqrt()
                    if fa is not None and va.lo >= 0:
                        try:
                            af = affine_sqrt(fa, noise)
                        except ArithmeticError:
                            af = None
                elif op == OP_ABS:
                    vals[i] = Interval(va.min_abs(), va.max_abs())
                else:
                    vb = vals[b]
                    if vb is None:
                        vals[i] = None
                        continue
                    fb = affs[b]
                    if op == OP_ADD:
                        vals[i] = va + vb
                        if fa is not None and fb is not None:
                            af = fa + fb
                    elif op == OP_SUB:
                        vals[i] = va - vb
                        if fa is not None and fb is not None:
                            af = fa - fb
                    elif op == OP_MUL:
                        vals[i] = va * vb
                        if fa is not None and fb is not None:
                            af = affine_mul(fa, fb, noise)
                    else:
                        if vb.contains(ZERO):
                            vals[i] = None
                            continue
                        vals[i] = va / vb
                        if fa is not None and fb is not None:
                            try:
                                af = affine_div(fa, fb, noise)
                            except ArithmeticError:
                                af = None
            if af is not None and vals[i] is not None:
                tight = vals[i].intersect(af.to_interval())
                if tight is not None:
                    vals[i] = tight
            affs[i] = af
            if self.folds and prog.linear[i] and prog.linear[i][0] and vals[i] is not None:
                coeffs, const = prog.linear[i]
                lo = _linear_extreme(coeffs, const, box, self.folds, lower=True)
                hi = _linear_extreme(coeffs, const, box, self.folds, lower=False)
                if lo is not None and hi is not None and lo <= hi:
                    tight = vals[i].intersect(Interval(lo, hi))
                    if tight is not None:
                        vals[i] = tight
        return vals


# --------------------------------------------------------------------------
# HC4 backward contraction


def _contract(prog: _Prog, box: dict, vals: list, atom_nodes) -> dict | None:
    """Contract box by requiring each atom node <= 0 (the closed form is a
    sound cover for strict atoms too).  Returns None when infeasible."""
    node_iv = list(vals)
    box = dict(box)
    for root in atom_nodes:
        if node_iv[root] is None:
            continue
        cur = node_iv[root]
        if cur.lo > 0:
            return None  # the atom cannot hold anywhere in this box
        target = Interval(cur.lo, min(cur.hi, ZERO))
        stack = [(root, target)]
        while stack:
            i, t = stack.pop()
            cur = node_iv[i]
            if cur is None:
                continue
            new = cur.intersect(t)
            if new is None:
                return None
            if new == cur:
                continue
            node_iv[i] = new
            op = prog.ops[i]
            if op == OP_VAR:
                box[prog.payload[i]] = new
                continue
            if op in (OP_CONST, OP_OPAQUE, OP_ITE):
                continue
            a, b = prog.args[i]
            va = node_iv[a]
            vb = node_iv[b] if b >= 0 else None
            if op == OP_ADD and va is not None and vb is not None:
                stack.append((a, new - vb))
                stack.append((b, new - va))
            elif op == OP_SUB and va is not None and vb is not None:
                stack.append((a, new + vb))
                stack.append((b, va - new))
            elif op == OP_MUL and va is not None and vb is not None:
                if not vb.contains(ZERO):
                    stack.append((a, new / vb))
                if not va.contains(ZERO):
                    stack.append((b, new / va))
            elif op == OP_DIV and va is not None and vb is not None:
                stack.append((a, new * vb))
                if not new.contains(ZERO):
                    stack.append((b, va / new))
            elif op == OP_SQRT and va is not None:
                lo = new.lo if new.lo > 0 else ZERO
                stack.append((a, Interval(lo * lo, new.hi * new.hi)))
            elif op == OP_ABS and va is not None:
                stack.append((a, Interval(-new.hi, new.hi)))
    return box


# --------------------------------------------------------------------------
# constraint status logic

TRUE, FALSE, MAYBE = 1, 0, -1


def _cmp_status(iv, strict: bool) -> int:
    """Status of 'value < 0' (strict) or 'value <= 0' over the enclosure."""
    if iv is None:
        return MAYBE
    if (iv.hi < 0) if strict else (iv.hi <= 0):
        return TRUE
    if (iv.lo >= 0) if strict else (iv.lo > 0):
        return FALSE
    return MAYBE


def _status(cond, atom_ids, vals) -> int:
    if isinstance(cond, Comparison):
        node, strict = atom_ids[id(cond)]
        return _cmp_status(vals[node], strict)
    if isinstance(cond, BoolAnd):
        a = _status(cond.left, atom_ids, vals)
        if a == FALSE:
            return FALSE
        b = _status(cond.right, atom_ids, vals)
        if b == FALSE:
            return FALSE
        return TRUE if a == TRUE and b == TRUE else MAYBE
    if isinstance(cond, BoolOr):
        a = _status(cond.left, atom_ids, vals)
        if a == TRUE:
            return TRUE
        b = _status(cond.right, atom_ids, vals)
        if b == TRUE:
            return TRUE
        return FALSE if a == FALSE and b == FALSE else MAYBE
    raise TypeError("unnormalized condition %r" % (cond,))


# --------------------------------------------------------------------------
# exact point evaluation


class _Undecided(Exception):
    pass


def _exact_eval(e, point: dict, bits: int):
    """Enclosure of e at an exact rational point; None when uninterpreted."""
    if isinstance(e, Variable):
        v = point.get(e.name)
        return None if v is None else Interval.point(v)
    if isinstance(e, Lit):
        return Interval.point(e.value)
    if isinstance(e, (Add, Sub, Mul, Div)):
        a = _exact_eval(e.left, point, bits)
        b = _exact_eval(e.right, point, bits)
        if a is None or b is None:
            return None
        if isinstance(e, Add):
            return a + b
        if isinstance(e, Sub):
            return a - b
        if isinstance(e, Mul):
            return a * b
        if b.contains(ZERO):
            raise _Undecided()  # at or too close to a pole
        return a / b
    if isinstance(e, Sqrt):
        a = _exact_eval(e.arg, point, bits)
        if a is None:
            return None
        if a.lo < 0:
            raise _Undecided()  # outside (or undecidably near) the domain
        lo, _ = sqrt_enclosure(a.lo, bits)
        _, hi = sqrt_enclosure(a.hi, bits)
        return Interval(lo, hi)
    if isinstance(e, Abs):
        a = _exact_eval(e.arg, point, bits)
        return None if a is None else Interval(a.min_abs(), a.max_abs())
    if isinstance(e, Let):
        bound = _exact_eval(e.bound, point, bits)
        if bound is None or not bound.is_point():
            raise _Undecided()
        inner = dict(point)
        inner[e.name] = bound.lo
        return _exact_eval(e.body, inner, bits)
    if isinstance(e, If):
        t = _exact_truth(e.cond, point, bits)
        if t is None:
            raise _Undecided()
        return _exact_eval(e.then if t else e.orelse, point, bits)
    if isinstance(e, Call):
        return None
    raise TypeError("cannot evaluate %r" % (e,))


def _exact_truth(cond, point, bits):
    """True/False when decidable at this precision, None when not."""
    if isinstance(cond, Comparison):
        diff, strict = cond.normalized()
        iv = _exact_eval(diff, point, bits)
        if iv is None:
            return None
        if (iv.hi < 0) if strict else (iv.hi <= 0):
            return True
        if (iv.lo >= 0) if strict else (iv.lo > 0):
            return False
        return None
    if isinstance(cond, BoolAnd):
        a = _exact_truth(cond.left, point, bits)
        if a is False:
            return False
        b = _exact_truth(cond.right, point, bits)
        if b is False:
            return False
        if a is True and b is True:
            return True
        return None
    if isinstance(cond, BoolOr):
        a = _exact_truth(cond.left, point, bits)
        if a is True:
            return True
        b = _exact_truth(cond.right, point, bits)
        if b is True:
            return True
        if a is False and b is False:
            return False
        return None
    if isinstance(cond, BoolNot):
        t = _exact_truth(cond.arg, point, bits)
        return None if t is None else (not t)
    raise TypeError("cannot decide %r" % (cond,))


_BIT_LADDER = (120, 480, 1920)


def exact_feasibility(assertions, point: dict):
    """True (all hold), False (one fails), or None (undecidable)."""
    undecided = False
    for a in assertions:
        result = None
        for bits in _BIT_LADDER:
            try:
                result = _exact_truth(a, point, bits)
            except _Undecided:
                result = None
            if result is not None:
                break
        if result is False:
            return False
        if result is None:
            undecided = True
    return None if undecided else True


def verify_model(assertions, bounds: dict, point: dict) -> bool:
    """Exact check that a point satisfies bounds and every assertion."""
    for v, iv in bounds.items():
        pv = point.get(v)
        if pv is None or not iv.contains(pv):
            return False
    return exact_feasibility(assertions, point) is True


def eval_exact_enclosure(e, point: dict, bits: int = 240):
    """Tight enclosure of e at a rational point (None when uninterpreted)."""
    try:
        return _exact_eval(e, point, bits)
    except _Undecided:
        return None


# --------------------------------------------------------------------------
# shared compile step


class _Compiled:
    def __init__(self, problem: Problem):
        self.problem = problem
        self.prog = _Prog()
        self.conds = [nnf(a) for a in problem.assertions]
        self.atom_ids: dict = {}
        self.atom_nodes: list = []   # conjunct comparisons, for contraction
        self.folds: list = []        # linear conjuncts, for folding
        for c in self.conds:
            for atom in _all_comparisons(c):
                diff, strict = atom.normalized()
                node = self.prog.add_expr(diff)
                self.atom_ids[id(atom)] = (node, strict)
        for c in self.conds:
            for atom in conjuncts(c):
                if isinstance(atom, Comparison):
                    node, _ = self.atom_ids[id(atom)]
                    self.atom_nodes.append(node)
                    lin = self.prog.linear[node]
                    if lin is not None and lin[0]:
                        # the atom asserts diff <= 0, i.e. -diff >= 0
                        self.folds.append(
                            ({v: -c0 for v, c0 in lin[0].items()}, -lin[1]))
        self.bounds = problem.bound_map()
        self.evaluator = _BoxEval(self.prog, self.folds)

    def occurring_vars(self, extra_node=None) -> list:
        occurring: set = set()
        for c in self.conds:
            for a in _all_comparisons(c):
                occurring |= self.prog.occurs[self.atom_ids[id(a)][0]]
        if extra_node is not None:
            occurring |= self.prog.occurs[extra_node]
        return [v for v, _ in self.problem.bounds if v in occurring]

    def refuted(self, vals) -> bool:
        return any(_status(c, self.atom_ids, vals) == FALSE for c in self.conds)

    def decided_true(self, vals) -> bool:
        return all(_status(c, self.atom_ids, vals) == TRUE for c in self.conds)


def _all_comparisons(cond):
    if isinstance(cond, Comparison):
        yield cond
    elif isinstance(cond, (BoolAnd, BoolOr)):
        yield from _all_comparisons(cond.left)
        yield from _all_comparisons(cond.right)
    elif isinstance(cond, BoolNot):
        yield from _all_comparisons(cond.arg)


# boxes thinner than this (relative to magnitude) are not split further:
# far below any representable rounding error, and exact endpoints would
# otherwise grow without bound chasing undecidable slivers
_WIDTH_FLOOR = rat(1, 2 ** 600)


def _split_box(box: dict, candidates):
    best, best_score = None, None
    for v in candidates:
        iv = box.get(v)
        if iv is None or iv.is_point():
            continue
        scale = iv.max_abs()
        score = iv.width() / (scale if scale > 1 else ONE)
        if score <= _WIDTH_FLOOR:
            continue
        if best_score is None or score > best_score:
            best, best_score = v, score
    if best is None:
        return None
    iv = box[best]
    mid = iv.mid()
    left = dict(box)
    left[best] = Interval(iv.lo, mid)
    right = dict(box)
    right[best] = Interval(mid, iv.hi)
    return left, right


# --------------------------------------------------------------------------
# one-shot satisfiability


@dataclass
class CheckResult:
    verdict: object
    expansions: int = 0


def check(problem: Problem, cfg: BackendConfig) -> CheckResult:
    comp = _Compiled(problem)
    candidates = comp.occurring_vars()
    assertions = problem.assertions
    stack = [comp.bounds]
    budget = cfg.budget()
    expansions = 0
    undecided = False

    while stack:
        if expansions >= budget:
            return CheckResult(Unknown("timeout"), expansions)
        box = stack.pop()
        expansions += 1

        vals = comp.evaluator.run(box)
        if comp.refuted(vals):
            continue
        cbox = _contract(comp.prog, box, vals, comp.atom_nodes)
        if cbox is None:
            continue
        if cbox != box:
            box = cbox
            vals = comp.evaluator.run(box)
            if comp.refuted(vals):
                continue

        point = {v: iv.mid() for v, iv in box.items()}
        if verify_model(assertions, comp.bounds, point):
            return CheckResult(Sat(tuple(sorted(point.items()))), expansions)

        halves = _split_box(box, candidates)
        if halves is None:
            # cannot shrink further and the center failed exact checking
            undecided = True
            continue
        stack.append(halves[1])
        stack.append(halves[0])

    if undecided:
        return CheckResult(Unknown("incomplete"), expansions)
    return CheckResult(Unsat(), expansions)


# --------------------------------------------------------------------------
# persistent threshold-query trees


class _Leaf:
    __slots__ = ("box", "enc", "seq", "alive")

    def __init__(self, box, enc, seq):
        self.box = box
        self.enc = enc
        self.seq = seq
        self.alive = True


class _RangeTree:
    """Adaptive partition certifying bounds of one expression over the
    feasible part of one problem."""

    def __init__(self, problem: Problem, expr):
        self.comp = _Compiled(problem)
        self.track = self.comp.prog.add_expr(expr)
        self.expr = expr
        self.candidates = self.comp.occurring_vars(self.track)
        self.leaves: dict = {}
        self.lo_heap: list = []   # (flag, lo, seq); flag 0 = unknown enclosure
        self.hi_heap: list = []   # (flag, -hi, seq)
        self.seq = 0
        self.best_below = None    # (certified value bound, model)
        self.best_above = None
        self._add_root()

    # -- leaf plumbing -----------------------------------------------------

    def _add_root(self):
        self._insert(self.comp.bounds)

    def _insert(self, box):
        vals = self.comp.evaluator.run(box)
        if self.comp.refuted(vals):
            return
        cbox = _contract(self.comp.prog, box, vals, self.comp.atom_nodes)
        if cbox is None:
            return
        if cbox != box:
            box = cbox
            vals = self.comp.evaluator.run(box)
            if self.comp.refuted(vals):
                return
        leaf = _Leaf(box, vals[self.track], self.seq)
        self.seq += 1
        self.leaves[leaf.seq] = leaf
        self._push_heaps(leaf)

    def _push_heaps(self, leaf):
        if leaf.enc is None:
            heapq.heappush(self.lo_heap, (0, ZERO, leaf.seq))
            heapq.heappush(self.hi_heap, (0, ZERO, leaf.seq))
        else:
            heapq.heappush(self.lo_heap, (1, leaf.enc.lo, leaf.seq))
            heapq.heappush(self.hi_heap, (1, -leaf.enc.hi, leaf.seq))

    def _peek(self, heap, side_lo: bool):
        while heap:
            flag, val, seq = heap[0]
            leaf = self.leaves.get(seq)
            if leaf is None or not leaf.alive:
                heapq.heappop(heap)
                continue
            if flag == 0:
                if leaf.enc is not None:
                    heapq.heappop(heap)
                    key = (1, leaf.enc.lo if side_lo else -leaf.enc.hi, seq)
                    heapq.heappush(heap, key)
                    continue
                return leaf, None
            cur = leaf.enc.lo if side_lo else -leaf.enc.hi
            if cur != val:
                heapq.heappop(heap)
                heapq.heappush(heap, (1, cur, seq))
                continue
            return leaf, (val if side_lo else -val)
        return None, None

    def _kill(self, leaf):
        leaf.alive = False
        del self.leaves[leaf.seq]

    def _split(self, leaf) -> bool:
        halves = _split_box(leaf.box, self.candidates)
        if halves is None:
            return False
        self._kill(leaf)
        self._insert(halves[0])
        self._insert(halves[1])
        return True

    # -- exact probes -------------------------------------------------------

    def _probe(self, point) -> bool:
        """Exactly evaluate the expression at a feasible point and remember
        it as a witness.  Returns True when the point checks out."""
        for v, iv in self.comp.bounds.items():
            pv = point.get(v)
            if pv is None or not iv.contains(pv):
                return False
        if exact_feasibility(self.comp.problem.assertions, point) is not True:
            return False
        enc = eval_exact_enclosure(self.expr, point)
        if enc is None:
            return False
        model = tuple(sorted(point.items()))
        if self.best_below is None or enc.hi < self.best_below[0]:
            self.best_below = (enc.hi, model)
        if self.best_above is None or enc.lo > self.best_above[0]:
            self.best_above = (enc.lo, model)
        return True

    def _resolve_point_leaf(self, leaf) -> bool:
        """Pin down an unsplittable leaf exactly; False when no progress."""
        point = {v: iv.mid() for v, iv in leaf.box.items()}
        in_bounds = all(iv.contains(point.get(v))
                        for v, iv in self.comp.bounds.items())
        feas = (exact_feasibility(self.comp.problem.assertions, point)
                if in_bounds else False)
        if feas is False:
            self._kill(leaf)
            return True
        if feas is None:
            return False
        enc = eval_exact_enclosure(self.expr, point)
        if enc is None:
            return False
        model = tuple(sorted(point.items()))
        if self.best_below is None or enc.hi < self.best_below[0]:
            self.best_below = (enc.hi, model)
        if self.best_above is None or enc.lo > self.best_above[0]:
            self.best_above = (enc.lo, model)
        tight = enc if leaf.enc is None else (leaf.enc.intersect(enc) or enc)
        if leaf.enc is None or tight != leaf.enc:
            leaf.enc = tight
            self._push_heaps(leaf)
            return True
        return False

    # -- queries -------------------------------------------------------------

    def query(self, c, strict: bool, below: bool, budget: int):
        """Verdict of 'exists feasible point with expr < c' (below, strict),
        'expr <= c', 'expr > c', or 'expr >= c'."""
        spent = 0
        while True:
            if below:
                wit = self.best_below
                if wit is not None and (wit[0] < c or (not strict and wit[0] <= c)):
                    return Sat(wit[1]), spent
                leaf, bound = self._peek(self.lo_heap, side_lo=True)
                if leaf is None:
                    return Unsat(), spent   # no feasible region remains
                if bound is not None and (bound >= c if strict else bound > c):
                    return Unsat(), spent   # certified: min above threshold
            else:
                wit = self.best_above
                if wit is not None and (wit[0] > c or (not strict and wit[0] >= c)):
                    return Sat(wit[1]), spent
                leaf, bound = self._peek(self.hi_heap, side_lo=False)
                if leaf is None:
                    return Unsat(), spent
                if bound is not None and (bound <= c if strict else bound < c):
                    return Unsat(), spent

            if spent >= budget:
                return Unknown("timeout"), spent
            spent += 1

            # witness hunt: if the whole leaf sits on the Sat side, only
            # feasibility of its center is in question
            if leaf.enc is not None:
                enc_ok = (leaf.enc.hi < c if below else leaf.enc.lo > c) if strict \
                    else (leaf.enc.hi <= c if below else leaf.enc.lo >= c)
                if enc_ok:
                    point = {v: iv.mid() for v, iv in leaf.box.items()}
                    if self._probe(point):
                        continue  # witness recorded; top of loop returns Sat

            if not self._split(leaf):
                if not self._resolve_point_leaf(leaf):
                    return Unknown("incomplete"), spent

    def certified_lower(self):
        """Current certified lower bound of expr over the feasible region
        (None while any leaf still lacks an enclosure)."""
        leaf, bound = self._peek(self.lo_heap, side_lo=True)
        if leaf is None:
            return None  # empty feasible region
        return bound

    def certified_upper(self):
        leaf, bound = self._peek(self.hi_heap, side_lo=False)
        if leaf is None:
            return None
        return bound

    @property
    def empty(self) -> bool:
        leaf, _ = self._peek(self.lo_heap, side_lo=True)
        return leaf is None


# --------------------------------------------------------------------------
# sessions: scoped assertions + memoized queries


class Session:
    """One solver scope: a base Problem plus memoized query machinery."""

    def __init__(self, base: Problem, cfg: BackendConfig | None = None):
        self.base = base
        self.cfg = cfg or BackendConfig()
        self._stack: list = []
        self._trees: dict = {}
        self._verdict_memo: dict = {}
        self.stats = {"queries": 0, "solver_runs": 0, "expansions": 0,
                      "cache_hits": 0}

    # -- scoping ---------------------------------------------------------

    def push(self, assertions=(), bounds: dict | None = None):
        self._stack.append(self.base)
        self.base = self.base.conjoin(tuple(assertions), bounds)

    def pop(self):
        self.base = self._stack.pop()

    def with_assertions(self, assertions=(), bounds: dict | None = None):
        session = self

        class _Scope:
            def __enter__(self):
                session.push(assertions, bounds)
                return session

            def __exit__(self, *exc):
                session.pop()
                return False

        return _Scope()

    # -- plain satisfiability ----------------------------------------------

    def check(self, extra=(), bounds: dict | None = None):
        self.stats["queries"] += 1
        problem = self.base.conjoin(tuple(extra), bounds)
        key = problem_key(problem)
        got = self._verdict_memo.get(key)
        if got is not None:
            self.stats["cache_hits"] += 1
            return got
        if self.cfg.backend == "external":
            verdict = self._check_external(problem)
        else:
            result = check(problem, self.cfg)
            self.stats["solver_runs"] += 1
            self.stats["expansions"] += result.expansions
            verdict = result.verdict
        if not isinstance(verdict, Unknown):
            self._verdict_memo[key] = verdict
        return verdict

    def _check_external(self, problem: Problem):
        from .external import BackendUnavailable, check_external

        try:
            return check_external(problem, self.cfg)
        except BackendUnavailable:
            result = check(problem, self.cfg)
            self.stats["solver_runs"] += 1
            self.stats["expansions"] += result.expansions
            return result.verdict

    # -- threshold queries ----------------------------------------------------

    def _tree_for(self, expr) -> _RangeTree:
        key = (problem_key(self.base), expr_key(expr))
        tree = self._trees.get(key)
        if tree is None:
            tree = _RangeTree(self.base, expr)
            self._trees[key] = tree
        return tree

    def query_below(self, expr, c, strict: bool = True):
        """Satisfiability of base ∧ expr < c (strict) or expr <= c."""
        return self._threshold(expr, c, strict, below=True)

    def query_above(self, expr, c, strict: bool = True):
        return self._threshold(expr, c, strict, below=False)

    def _threshold(self, expr, c, strict: bool, below: bool):
        self.stats["queries"] += 1
        if self.cfg.backend == "external":
            if below:
                query = Comparison(expr, "<" if strict else "<=", Lit(rat(c)))
            else:
                query = Comparison(expr, ">" if strict else ">=", Lit(rat(c)))
            return self._check_external(self.base.conjoin((query,)))
        tree = self._tree_for(expr)
        verdict, spent = tree.query(rat(c), strict, below, self.cfg.budget())
        if spent == 0:
            self.stats["cache_hits"] += 1
        else:
            self.stats["solver_runs"] += 1
            self.stats["expansions"] += spent
        return verdict

    def certified_range(self, expr):
        """(lo, hi) certified so far for expr (either side may be None)."""
        if self.cfg.backend == "external":
            return (None, None)
        tree = self._tree_for(expr)
        return tree.certified_lower(), tree.certified_upper()


def builtin_icp_check(problem: Problem, cfg: BackendConfig | None = None):
    """Interval-based satisfiability check, always using the builtin engine."""
    return check(problem, cfg or BackendConfig()).verdict


def check_sat(problem: Problem, cfg: BackendConfig | None = None):
    """One-shot satisfiability check honoring the configured backend."""
    cfg = cfg or BackendConfig()
    if cfg.backend == "external":
        from .external import BackendUnavailable, check_external

        try:
            return check_external(problem, cfg)
        except BackendUnavailable:
            pass
    return check(problem, cfg).verdict
