"""Discarding unsatisfiable rules, and merging atoms that share a primary key.

The consistency check is interval propagation over floats, with every
bound rounded outward.  It answers UNSAT only when it has proved that no
valuation makes every arithmetic literal of a rule body true *under the
evaluator's own semantics*: float rounding, 64-bit integer wraparound,
garbage values and the tolerant `=:=` are all over-approximated, never
idealised.  Anything it cannot model (EDB atoms, `=/=`, negation, `^`) is
skipped, which can only weaken the conclusion.

A body with no atoms for which a concrete witness valuation is found is
SATISFIABLE; otherwise the answer is UNKNOWN.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import interp
from .ast import (
    And,
    Atom,
    BinOp,
    Clause,
    Cmp,
    Const,
    Formula,
    Not,
    Or,
    Param,
    SchemaDecl,
    Sqrt,
    Term,
    Truth,
    Var,
    conj,
    formula_vars,
    term_vars,
)
from .errors import EvaluationError, PrivaLogError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
_TWO63 = 2.0**63
INF = math.inf

# one rounding step is at most 2**-53 relative; twice that is a safe margin
_REL = 2.0**-52
_ABS = 1e-300
# |a - b| <= tol*max(|a|,|b|) implies |a - b| <= tol/(1 - tol)*|b|
_EQ_REL = 1e-9 / (1 - 1e-9) * (1 + 1e-6)


class Verdict(enum.Enum):
    SATISFIABLE = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


# ----------------------------------------------------------------- intervals
#
# Bounds are floats rounded outward after every operation (one nextafter
# step covers the half-ulp error of a correctly rounded operation), so each
# interval contains the exact real result.  Infinite bounds are closed:
# an unbounded interval also contains the infinities.


def _down(x: float) -> float:
    return x if x == -INF else math.nextafter(x, -INF)


def _up(x: float) -> float:
    return x if x == INF else math.nextafter(x, INF)


@dataclass(frozen=True)
class Interval:
    lo: float = -INF
    hi: float = INF
    lo_open: bool = False
    hi_open: bool = False

    @classmethod
    def point(cls, v: int | float) -> "Interval":
        f = float(v)
        if isinstance(v, int) and int(f) != v:
            return cls(_down(f), _up(f))
        return cls(f, f)

    @property
    def empty(self) -> bool:
        if self.lo > self.hi:
            return True
        return self.lo == self.hi and (self.lo_open or self.hi_open)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi and not self.empty

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def magnitude(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    def meet(self, other: "Interval") -> "Interval":
        lo, lo_open = self.lo, self.lo_open
        if other.lo > lo or (other.lo == lo and other.lo_open):
            lo, lo_open = other.lo, other.lo_open
        hi, hi_open = self.hi, self.hi_open
        if other.hi < hi or (other.hi == hi and other.hi_open):
            hi, hi_open = other.hi, other.hi_open
        return Interval(lo, hi, lo_open, hi_open)

    def widen(self, rel: float = _REL, absolute: float = _ABS) -> "Interval":
        lo = self.lo if self.lo == -INF else _down(self.lo - abs(self.lo) * rel - absolute)
        hi = self.hi if self.hi == INF else _up(self.hi + abs(self.hi) * rel + absolute)
        return Interval(lo, hi, self.lo_open and math.isfinite(lo), self.hi_open and math.isfinite(hi))

    def fits_int64(self) -> bool:
        return -_TWO63 <= self.lo and self.hi < _TWO63

    def __str__(self) -> str:
        return f"{'(' if self.lo_open else '['}{self.lo}, {self.hi}{')' if self.hi_open else ']'}"


FULL = Interval()


def _safe(lo: float, hi: float, lo_open: bool = False, hi_open: bool = False) -> Interval:
    if math.isnan(lo) or math.isnan(hi):
        return FULL
    return Interval(_down(lo) if math.isfinite(lo) else lo, _up(hi) if math.isfinite(hi) else hi,
                    lo_open and math.isfinite(lo), hi_open and math.isfinite(hi))


def _add(a: Interval, b: Interval) -> Interval:
    return _safe(a.lo + b.lo, a.hi + b.hi, a.lo_open or b.lo_open, a.hi_open or b.hi_open)


def _neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo, a.hi_open, a.lo_open)


def _sub(a: Interval, b: Interval) -> Interval:
    return _add(a, _neg(b))


def _mul(a: Interval, b: Interval) -> Interval:
    if not (a.bounded and b.bounded):
        return FULL
    prods = [x * y for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    return _safe(min(prods), max(prods))


def _div(a: Interval, b: Interval) -> Interval:
    if not (a.bounded and b.bounded) or b.lo <= 0 <= b.hi:
        return FULL
    qs = [x / y for x in (a.lo, a.hi) for y in (b.lo, b.hi)]
    return _safe(min(qs), max(qs))


def _sqrt(a: Interval) -> Interval:
    if a.hi < 0:
        return Interval(0.0, INF)  # garbage; keep it harmless for assignments
    lo = _down(math.sqrt(a.lo)) if a.lo > 0 else 0.0
    hi = _up(math.sqrt(a.hi)) if math.isfinite(a.hi) else INF
    return Interval(max(lo, 0.0), hi)


# ------------------------------------------------------------- propagation


class _Inconsistent(Exception):
    pass


def _num(v) -> int | float | None:
    if isinstance(v, bool) or isinstance(v, str):
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class _Store:
    def __init__(self) -> None:
        self.box: dict[str, Interval] = {}
        self.strings: dict[str, str] = {}
        self.changed = False

    def get(self, v: str) -> Interval:
        return self.box.get(v, FULL)

    def narrow(self, v: str, iv: Interval) -> None:
        old = self.get(v)
        new = old.meet(iv)
        if new.empty:
            raise _Inconsistent(v)
        if new != old:
            self.box[v] = new
            # tiny creeping refinements do not count as progress
            if not (old.bounded and new.bounded
                    and (old.hi - old.lo) - (new.hi - new.lo) <= (old.hi - old.lo) * 1e-6
                    and new.lo_open == old.lo_open and new.hi_open == old.hi_open):
                self.changed = True

    def fix_string(self, v: str, s: str) -> None:
        old = self.strings.get(v)
        if old is not None and old != s:
            raise _Inconsistent(v)
        if old is None:
            self.strings[v] = s
            self.changed = True


def _is_string_term(t: Term) -> bool:
    return isinstance(t, Const) and isinstance(t.value, str)


def forward(t: Term, st: _Store) -> Interval:
    """Interval holding every non-garbage value the term can take."""
    if isinstance(t, Const):
        f = _num(t.value)
        return FULL if f is None else Interval.point(f)
    if isinstance(t, Var):
        return st.get(t.name)
    if isinstance(t, Param):
        return FULL
    if isinstance(t, Sqrt):
        return _sqrt(forward(t.arg, st))
    if isinstance(t, BinOp):
        a, b = forward(t.left, st), forward(t.right, st)
        if t.op == "^":
            return FULL
        if t.op == "/":
            return _div(a, b).widen()
        exact = {"+": _add, "-": _sub, "*": _mul}[t.op](a, b)
        # int operands wrap around outside the 64-bit range
        if not exact.fits_int64():
            return FULL
        return exact.widen()
    raise TypeError(t)


def backward(t: Term, iv: Interval, st: _Store) -> None:
    """Narrow the variables of `t` knowing its value lies in `iv`."""
    if isinstance(t, Var):
        st.narrow(t.name, iv)
        return
    if not isinstance(t, BinOp) or t.op not in "+-*":
        return
    a, b = forward(t.left, st), forward(t.right, st)
    exact = {"+": _add, "-": _sub, "*": _mul}[t.op](a, b)
    no_wrap = exact.fits_int64()
    target = iv.widen()

    def narrow(side: Term, pre: Interval) -> None:
        # For + and -, a wrapped solution sits 2**64 away from the plain
        # preimage; if the preimage lies inside the int64 range, the
        # shifted copies cannot, so no int operand can reach it by wrapping.
        if no_wrap or pre.fits_int64():
            backward(side, pre.widen(), st)

    if t.op == "+":
        narrow(t.left, _sub(target, b))
        narrow(t.right, _sub(target, a))
    elif t.op == "-":
        narrow(t.left, _add(target, b))
        narrow(t.right, _sub(a, target))
    elif no_wrap:
        for const_side, other in ((t.left, t.right), (t.right, t.left)):
            if isinstance(const_side, Const):
                c = _num(const_side.value)
                if c is not None and c != 0:
                    backward(other, _div(target, Interval.point(c)).widen(), st)


def _cmp_bounds(op: str, other: Interval) -> Interval:
    """Values x may take when `x op y` holds for some y in `other`."""
    o = other.widen()
    if op == "<":
        return Interval(-INF, o.hi, False, math.isfinite(o.hi))
    if op == "=<":
        return Interval(-INF, o.hi)
    if op == ">":
        return Interval(o.lo, INF, math.isfinite(o.lo), False)
    if op == ">=":
        return Interval(o.lo, INF)
    if op in ("=:=", "="):
        if not o.bounded:
            return o
        slack = _up(other.magnitude() * _EQ_REL)
        return _safe(o.lo - slack, o.hi + slack)
    return FULL


_FLIP = {"<": ">", "=<": ">=", ">": "<", ">=": "=<", "=:=": "=:=", "=": "="}


def _literal_constraints(lit: Formula) -> list[Cmp]:
    if isinstance(lit, Cmp) and lit.op in _FLIP:
        return [lit]
    return []


def _ground_value(f: Formula) -> bool | None:
    """Truth of a variable-free, atom-free literal, or None if not applicable."""
    if any(True for _ in formula_vars(f)) or isinstance(f, Atom):
        return None
    try:
        from .refeval import _holds

        return _holds(f, {})
    except (PrivaLogError, ZeroDivisionError, OverflowError):
        return None


def _propagate(lits: list[Formula], rounds: int = 64) -> _Store:
    st = _Store()
    cmps = [c for lit in lits for c in _literal_constraints(lit)]
    for lit in lits:
        if _ground_value(lit) is False:
            raise _Inconsistent("ground literal is false")
    for c in cmps:
        # string constants: equality between a variable and a string
        for a, b in ((c.left, c.right), (c.right, c.left)):
            if c.op in ("=:=", "=") and isinstance(a, Var) and _is_string_term(b):
                st.fix_string(a.name, b.value)  # type: ignore[union-attr]
    for _ in range(rounds):
        st.changed = False
        for c in cmps:
            if _is_string_term(c.left) or _is_string_term(c.right):
                continue
            if c.op in ("=:=", "=") and isinstance(c.left, Var) and isinstance(c.right, Var):
                s1, s2 = st.strings.get(c.left.name), st.strings.get(c.right.name)
                if s1 is not None:
                    st.fix_string(c.right.name, s1)
                if s2 is not None:
                    st.fix_string(c.left.name, s2)
            if c.op == "=":
                # an assignment copies the value exactly
                r = forward(c.right, st)
                backward(c.left, r, st)
                backward(c.right, forward(c.left, st), st)
                continue
            l_iv, r_iv = forward(c.left, st), forward(c.right, st)
            backward(c.left, _cmp_bounds(c.op, r_iv), st)
            backward(c.right, _cmp_bounds(_FLIP[c.op], l_iv), st)
            if forward(c.left, st).empty or forward(c.right, st).empty:
                raise _Inconsistent("empty")
        if not st.changed:
            break
    return st


def _flat(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return [x for i in f.items for x in _flat(i)]
    if f == Truth(True):
        return []
    return [f]


# ----------------------------------------------------------------- witness


def _candidates(iv: Interval) -> list:
    pts: list = []
    for b in (iv.lo, iv.hi):
        if math.isfinite(b):
            for v in (math.floor(b), math.ceil(b)):
                pts.append(int(v))
            pts.append(b)
    if iv.bounded:
        pts.append((iv.lo + iv.hi) / 2)
    pts.extend([0, 1, -1])
    out = []
    for p in pts:
        if p not in out and (not isinstance(p, int) or INT64_MIN <= p <= INT64_MAX):
            out.append(p)
    return out[:6]


def _witness(lits: list[Formula], st: _Store) -> bool:
    from .refeval import _holds, eval_term

    assigned = {c.left.name for c in lits
                if isinstance(c, Cmp) and c.op == "=" and isinstance(c.left, Var)}
    free = sorted({v for lit in lits for v in formula_vars(lit)} - assigned)
    choices = []
    for v in free:
        if v in st.strings:
            choices.append([st.strings[v]])
        else:
            choices.append(_candidates(st.get(v)))
    for n, combo in enumerate(itertools.product(*choices)):
        if n >= 256:
            break
        b = dict(zip(free, combo))
        ok = True
        try:
            for lit in lits:
                if isinstance(lit, Cmp) and lit.op == "=" and isinstance(lit.left, Var) \
                        and lit.left.name not in b:
                    b[lit.left.name] = eval_term(lit.right, b)
                elif not _holds(lit, b):
                    ok = False
                    break
        except PrivaLogError:
            ok = False
        if ok:
            return True
    return False


# -------------------------------------------------------------- public API

ExternalSolver = Callable[[str], str]


def check_consistent(body: Formula, solver: ExternalSolver | None = None) -> Verdict:
    """UNSAT if the arithmetic literals of `body` cannot all hold."""
    lits = _flat(body)
    if any(isinstance(x, Truth) and not x.value for x in lits):
        return Verdict.UNSAT
    try:
        st = _propagate(lits)
    except _Inconsistent:
        return Verdict.UNSAT
    if not any(isinstance(x, Atom) or (isinstance(x, Not) and isinstance(x.arg, Atom))
               for x in lits):
        if _witness(lits, st):
            return Verdict.SATISFIABLE
    if solver is not None:
        answer = solver(to_smtlib(body)).strip().lower()
        if answer == "unsat":
            return Verdict.UNSAT
    return Verdict.UNKNOWN


def prune_rules(rules: Iterable[Clause], solver: ExternalSolver | None = None
                ) -> tuple[list[Clause], list[Clause]]:
    """Split rules into (kept, pruned)."""
    kept, pruned = [], []
    for r in rules:
        (pruned if check_consistent(r.body, solver) is Verdict.UNSAT else kept).append(r)
    return kept, pruned


def prune_rulebase(rb, solver: ExternalSolver | None = None):
    """Drop the rules of a RuleBase judged UNSAT."""
    kept, pruned = prune_rules(rb.rules, solver)
    return rb.replace_rules(kept, pruned=len(pruned))


# ------------------------------------------------------------ primary keys


def merge_primary_keys(rule: Clause, schemas: Iterable[SchemaDecl],
                       head_bound: Iterable[str] = ()) -> Clause:
    """Replace a repeated keyed atom by equalities with its first occurrence."""
    from .adorn import resolve_clause

    keys = {s.pred: s.primary_key for s in schemas if s.primary_key is not None}
    lits = _flat(rule.body)
    changed = False
    i = 0
    while i < len(lits):
        a = lits[i]
        if isinstance(a, Atom) and a.pred in keys:
            k = keys[a.pred]
            j = i + 1
            while j < len(lits):
                b = lits[j]
                if isinstance(b, Atom) and b.pred == a.pred and b.args[k] == a.args[k]:
                    eqs = [Cmp("=", y, x) for n, (x, y) in enumerate(zip(a.args, b.args)) if n != k]
                    lits[j:j + 1] = eqs
                    changed = True
                    j += len(eqs)
                    continue
                j += 1
        i += 1
    if not changed:
        return rule
    merged = Clause(rule.head, conj(lits), rule.line)
    idb = frozenset()
    return resolve_clause(merged, head_bound, idb)[0]


# ------------------------------------------------------------------ SMT-LIB


def _smt_term(t: Term) -> str:
    if isinstance(t, Const):
        if isinstance(t.value, str):
            return f"|str:{t.value}|"
        v = Fraction(t.value)
        s = f"(/ {abs(v.numerator)}.0 {v.denominator}.0)" if v.denominator != 1 else f"{abs(v.numerator)}.0"
        return f"(- {s})" if v < 0 else s
    if isinstance(t, Var):
        return f"|{t.name}|"
    if isinstance(t, BinOp):
        if t.op == "^":
            return f"(^ {_smt_term(t.left)} {_smt_term(t.right)})"
        return f"({t.op} {_smt_term(t.left)} {_smt_term(t.right)})"
    if isinstance(t, Sqrt):
        return f"(^ {_smt_term(t.arg)} 0.5)"
    raise TypeError(t)


_SMT_OP = {"<": "<", "=<": "<=", ">": ">", ">=": ">=", "=:=": "=", "=": "=", "=/=": "distinct"}


def _smt_formula(f: Formula) -> str | None:
    if isinstance(f, Cmp):
        if _is_string_term(f.left) or _is_string_term(f.right):
            return None
        return f"({_SMT_OP[f.op]} {_smt_term(f.left)} {_smt_term(f.right)})"
    if isinstance(f, Not):
        inner = _smt_formula(f.arg)
        return None if inner is None else f"(not {inner})"
    if isinstance(f, (And, Or)):
        parts = [_smt_formula(i) for i in f.items]
        if any(p is None for p in parts):
            return None
        return f"({'and' if isinstance(f, And) else 'or'} {' '.join(parts)})"  # type: ignore[arg-type]
    if isinstance(f, Truth):
        return "true" if f.value else "false"
    return None


def to_smtlib(body: Formula) -> str:
    """SMT-LIB2 query over the reals for the arithmetic literals of a body.

    Atoms and string tests are left out, so `unsat` from a solver means
    the kept literals already contradict each other.
    """
    lits = _flat(body)
    names = sorted({v for lit in lits if _smt_formula(lit) is not None for v in formula_vars(lit)})
    out = ["(set-logic QF_NRA)"]
    out += [f"(declare-fun |{n}| () Real)" for n in names]
    for lit in lits:
        s = _smt_formula(lit)
        if s is not None:
            out.append(f"(assert {s})")
    out.append("(check-sat)")
    return "\n".join(out) + "\n"


def emit_smtlib(rules: Iterable[Clause], directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for n, r in enumerate(rules):
        p = d / f"rule_{n:04d}_{r.head.pred}.smt2"
        p.write_text(to_smtlib(r.body))
        paths.append(p)
    return paths
