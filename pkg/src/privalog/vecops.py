"""Vectorised operator table used by the simulator.

Every function here mirrors one entry of :mod:`privalog.interp` over numpy
arrays.  Integer vectors are int64, everything else float64; strings never
reach this module because the simulator represents them by CRC32 hashes
(int64) and only compares them for equality.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .interp import REL_TOL


def _is_int(a: np.ndarray) -> bool:
    return a.dtype.kind in "iu"


def _f(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float64, copy=False)


def _both_int(a: np.ndarray, b: np.ndarray) -> bool:
    return _is_int(a) and _is_int(b)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if _both_int(a, b):
        return np.add(a, b, dtype=np.int64)
    return _f(a) + _f(b)


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if _both_int(a, b):
        return np.subtract(a, b, dtype=np.int64)
    return _f(a) - _f(b)


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if _both_int(a, b):
        return np.multiply(a, b, dtype=np.int64)
    return _f(a) * _f(b)


def div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    fa, fb = _f(a), _f(b)
    with np.errstate(all="ignore"):
        out = fa / fb
    return np.where(fb == 0.0, np.nan, out)


def power(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return kernels.pow_vec(_f(a), _f(b))


def sqrt(a: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        fa = _f(a)
        return np.where(fa < 0.0, np.nan, np.sqrt(fa))


ARITH = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


def _pair(a: np.ndarray, b: np.ndarray):
    if _both_int(a, b):
        return a, b
    return _f(a), _f(b)


def lt(a, b):
    x, y = _pair(a, b)
    return x < y


def le(a, b):
    x, y = _pair(a, b)
    return x <= y


def gt(a, b):
    x, y = _pair(a, b)
    return x > y


def ge(a, b):
    x, y = _pair(a, b)
    return x >= y


def float_eq(fa: np.ndarray, fb: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        close = np.abs(fa - fb) <= REL_TOL * np.maximum(np.abs(fa), np.abs(fb))
    return (fa == fb) | (np.isfinite(fa) & np.isfinite(fb) & close)


def eq(a, b):
    if _both_int(a, b):
        return a == b
    return float_eq(_f(a), _f(b))


def ne(a, b):
    if _both_int(a, b):
        return a != b
    fa, fb = _f(a), _f(b)
    return ~float_eq(fa, fb) & ~np.isnan(fa) & ~np.isnan(fb)


# keyed by the PrivaLog spelling, like interp.COMPARE
COMPARE = {"<": lt, "=<": le, ">": gt, ">=": ge, "=:=": eq, "=/=": ne}
# keyed by the core IR spelling
IR_COMPARE = {"<": lt, "<=": le, ">": gt, ">=": ge, "==": eq, "!=": ne}
