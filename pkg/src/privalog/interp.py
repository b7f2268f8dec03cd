"""Scalar interpretation of constants, arithmetic and comparisons.

This table is the single source of truth for what `+`, `/`, `=:=` and the
rest mean.  The reference evaluator calls it directly.  The vectorised table
in :mod:`privalog.vecops` has to agree with it bit for bit, and the test
suite checks that.

Conventions:

* integers are 64-bit two's complement and wrap on overflow;
* `/`, `^` and `sqrt` always produce floats;
* mixing an int and a float converts the int to float first, comparisons
  included (so `2**53 + 1 =:= 2.0**53` holds, exactly as in the simulator);
* invalid inputs (division by zero, `sqrt` of a negative, a domain error in
  `^`) produce the garbage value, a float NaN;
* every comparison involving NaN is false, including `=/=`;
* `=:=` on floats allows a relative error of 1e-9; on ints it is exact;
* strings only support `=:=` and `=/=`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Union

from .errors import EvaluationError

Value = Union[int, float, str]

REL_TOL = 1e-9
NAN = math.nan  # the canonical garbage value
_MASK64 = (1 << 64) - 1
_BIAS = 1 << 63


class OperandTypeError(EvaluationError):
    """An operator was applied to a value of the wrong kind (e.g. a string)."""


def wrap64(v: int) -> int:
    return ((v + _BIAS) & _MASK64) - _BIAS


def is_garbage(v: Value) -> bool:
    return isinstance(v, float) and v != v


def _num(v: Value, op: str) -> None:
    if isinstance(v, str):
        raise OperandTypeError(f"operator {op} applied to string {v!r}")


# -------------------------------------------------------------- arithmetic


def add(a: Value, b: Value) -> Value:
    _num(a, "+"); _num(b, "+")
    if type(a) is int and type(b) is int:
        return wrap64(a + b)
    return float(a) + float(b)


def sub(a: Value, b: Value) -> Value:
    _num(a, "-"); _num(b, "-")
    if type(a) is int and type(b) is int:
        return wrap64(a - b)
    return float(a) - float(b)


def mul(a: Value, b: Value) -> Value:
    _num(a, "*"); _num(b, "*")
    if type(a) is int and type(b) is int:
        return wrap64(a * b)
    return float(a) * float(b)


def div(a: Value, b: Value) -> float:
    _num(a, "/"); _num(b, "/")
    fa, fb = float(a), float(b)
    if fb == 0.0:
        return NAN
    return fa / fb


def pow_float(fa: float, fb: float) -> float:
    """C `pow` on doubles, except that a zero base with a negative exponent
    is garbage rather than infinity."""
    if fa == 0.0 and fb < 0.0:
        return NAN
    try:
        return math.pow(fa, fb)
    except ValueError:
        return NAN
    except OverflowError:
        negative = fa < 0.0 and fb.is_integer() and abs(math.fmod(fb, 2.0)) == 1.0
        return -math.inf if negative else math.inf


def power(a: Value, b: Value) -> float:
    _num(a, "^"); _num(b, "^")
    return pow_float(float(a), float(b))


def sqrt(a: Value) -> float:
    _num(a, "sqrt")
    fa = float(a)
    if fa < 0.0:
        return NAN
    return math.sqrt(fa)


ARITH = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


# ------------------------------------------------------------- comparisons


def _order(op: str, a: Value, b: Value) -> tuple:
    if isinstance(a, str) or isinstance(b, str):
        raise OperandTypeError(f"ordering comparison {op} on strings is not supported")
    if type(a) is int and type(b) is int:
        return a, b
    return float(a), float(b)


def lt(a: Value, b: Value) -> bool:
    x, y = _order("<", a, b)
    return x < y


def le(a: Value, b: Value) -> bool:
    x, y = _order("=<", a, b)
    return x <= y


def gt(a: Value, b: Value) -> bool:
    x, y = _order(">", a, b)
    return x > y


def ge(a: Value, b: Value) -> bool:
    x, y = _order(">=", a, b)
    return x >= y


def float_eq(fa: float, fb: float) -> bool:
    if fa == fb:
        return True
    if not (math.isfinite(fa) and math.isfinite(fb)):
        return False
    return abs(fa - fb) <= REL_TOL * max(abs(fa), abs(fb))


def eq(a: Value, b: Value) -> bool:
    sa, sb = isinstance(a, str), isinstance(b, str)
    if sa or sb:
        if sa and sb:
            return a == b
        raise OperandTypeError(f"cannot compare string with number ({a!r}, {b!r})")
    if type(a) is int and type(b) is int:
        return a == b
    return float_eq(float(a), float(b))


def ne(a: Value, b: Value) -> bool:
    if is_garbage(a) or is_garbage(b):
        return False
    return not eq(a, b)


COMPARE = {"<": lt, "=<": le, ">": gt, ">=": ge, "=:=": eq, "=/=": ne}

# names used by the core IR for the same relations
IR_COMPARE = {"<": "<", "=<": "<=", ">": ">", ">=": ">=", "=:=": "==", "=/=": "!="}


def compare(op: str, a: Value, b: Value) -> bool:
    return COMPARE[op](a, b)


# ------------------------------------------------------------ aggregations


class _EmptyAggregate:
    """Result of min/max over an empty answer set."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EmptyAggregate"

    def __reduce__(self):
        return (_EmptyAggregate, ())


EmptyAggregate = _EmptyAggregate()


def sum_values(values: Iterable[Value]) -> Value:
    vals = list(values)
    if all(type(v) is int for v in vals):
        return wrap64(sum(vals))
    floats = [float(v) for v in vals]
    try:
        return math.fsum(floats)
    except ValueError:  # inf + -inf
        return NAN
    except OverflowError:
        exact = sum((Fraction(v) for v in floats), Fraction(0))
        return math.inf if exact > 0 else -math.inf


def _extreme(values: Iterable[Value], pick) -> Value:
    vals = list(values)
    if not vals:
        return EmptyAggregate
    if any(isinstance(v, str) for v in vals):
        raise OperandTypeError("min/max over strings is not supported")
    if all(type(v) is int for v in vals):
        return pick(vals)
    floats = [float(v) for v in vals]
    if any(f != f for f in floats):
        return NAN
    return pick(floats)


def min_values(values: Iterable[Value]) -> Value:
    return _extreme(values, min)


def max_values(values: Iterable[Value]) -> Value:
    return _extreme(values, max)


def aggregate_values(kind: str, values: Iterable[Value]) -> Value:
    if kind == "sum":
        return sum_values(values)
    if kind == "count":
        return len(list(values))
    if kind == "min":
        return min_values(values)
    if kind == "max":
        return max_values(values)
    raise ValueError(f"unknown aggregation {kind}")


# ------------------------------------------------------- answer comparison


def canonical(v):
    """Normalise a value for set comparison: one NaN object, no -0.0."""
    if isinstance(v, float):
        if v != v:
            return NAN
        if v == 0.0:
            return 0.0
    return v


def canonical_row(row: tuple) -> tuple:
    return tuple(canonical(v) for v in row)


def values_match(a, b, rel_tol: float = REL_TOL) -> bool:
    """Equality used when comparing published answers with reference ones."""
    if a is EmptyAggregate or b is EmptyAggregate:
        return a is b
    if isinstance(a, str) or isinstance(b, str):
        return a == b
    if isinstance(a, float) or isinstance(b, float):
        fa, fb = float(a), float(b)
        if fa != fa or fb != fb:
            return fa != fa and fb != fb
        if fa == fb:
            return True
        if not (math.isfinite(fa) and math.isfinite(fb)):
            return False
        return abs(fa - fb) <= rel_tol * max(abs(fa), abs(fb))
    return a == b


def rows_match(a: tuple, b: tuple, rel_tol: float = REL_TOL) -> bool:
    return len(a) == len(b) and all(values_match(x, y, rel_tol) for x, y in zip(a, b))


def answer_sets_match(published: Iterable[tuple], reference: Iterable[tuple],
                      rel_tol: float = REL_TOL) -> tuple[bool, list, list]:
    """Compare two answer sets; returns (equal, only_published, only_reference).

    Exact matches are paired first; the remaining rows are paired greedily
    under the float tolerance.
    """
    pub = {canonical_row(r) for r in published}
    ref = {canonical_row(r) for r in reference}
    common = pub & ref
    left = [r for r in pub if r not in common]
    right = [r for r in ref if r not in common]
    unmatched_right = list(right)
    only_pub = []
    for r in left:
        for k, s in enumerate(unmatched_right):
            if rows_match(r, s, rel_tol):
                del unmatched_right[k]
                break
        else:
            only_pub.append(r)
    return (not only_pub and not unmatched_right), only_pub, unmatched_right
