"""Pure-Python/numpy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable (or
when PRIVALOG_PURE_PYTHON=1).  They define the expected behaviour; the
Cython module must agree with them exactly.
"""

from __future__ import annotations

import zlib
from typing import Sequence

import numpy as np

from .interp import REL_TOL, pow_float

BACKEND = "python"


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def crc32_many(strings: Sequence[str]) -> np.ndarray:
    return np.fromiter(
        (zlib.crc32(s.encode("utf-8")) for s in strings), dtype=np.int64, count=len(strings)
    )


def cross_indices(sizes: Sequence[int]) -> list[np.ndarray]:
    """Row-major index vectors of the cross product of tables with `sizes` rows."""
    if not sizes:
        return []
    total = int(np.prod(sizes, dtype=np.int64))
    if total == 0:
        return [np.zeros(0, dtype=np.int64) for _ in sizes]
    grids = np.unravel_index(np.arange(total, dtype=np.int64), tuple(int(s) for s in sizes))
    return [g.astype(np.int64, copy=False) for g in grids]


def unique_first(bits: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Keep bit i only if row i is the first true-bit row with its key."""
    bits = np.asarray(bits, dtype=np.bool_)
    out = np.zeros(bits.shape[0], dtype=np.bool_)
    idx = np.flatnonzero(bits)
    if idx.size == 0:
        return out
    keys = np.asarray(keys, dtype=np.int64).reshape(bits.shape[0], -1)
    if keys.shape[1] == 0:
        out[idx[0]] = True
        return out
    _, first = np.unique(keys[idx], axis=0, return_index=True)
    out[idx[first]] = True
    return out


def _match(a: np.ndarray, b: np.ndarray, tolerant: bool) -> np.ndarray:
    if not tolerant:
        return a == b
    with np.errstate(all="ignore"):
        close = np.abs(a - b) <= REL_TOL * np.maximum(np.abs(a), np.abs(b))
        return (a == b) | (np.isfinite(a) & np.isfinite(b) & close)


def member(keys_i: np.ndarray, keys_f: np.ndarray, table_i: np.ndarray,
           table_f: np.ndarray, tolerant: np.ndarray) -> np.ndarray:
    """For every key row, whether some table row matches it on all columns.

    Column c is compared exactly through the int64 views when tolerant[c] is
    false, and with the float `=:=` rule through the float64 views otherwise.
    """
    m, k = keys_i.shape
    n = table_i.shape[0]
    if n == 0:
        return np.zeros(m, dtype=np.bool_)
    acc = np.ones((m, n), dtype=np.bool_)
    for c in range(k):
        if tolerant[c]:
            acc &= _match(keys_f[:, c][:, None], table_f[:, c][None, :], True)
        else:
            acc &= keys_i[:, c][:, None] == table_i[:, c][None, :]
    return acc.any(axis=1)


_upow = np.frompyfunc(pow_float, 2, 1)


def pow_vec(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return np.zeros(np.broadcast(a, b).shape, dtype=np.float64)
    with np.errstate(all="ignore"):
        return _upow(a, b).astype(np.float64)
